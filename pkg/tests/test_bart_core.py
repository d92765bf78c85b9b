import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from tobart import _trees as K
from tobart.bart_core import (BartConfig, Forest, fit_bart, forest_predict, joint_leaf_gamma_draw,
                              joint_leaf_gamma_posterior, leaf_design, leaf_marginal_loglik,
                              leaf_posterior, outcome_block_marginal_loglik, propose_move,
                              selection_marginal_loglik, split_probability, sweep_forest,
                              tree_mh_step, weighted_leaf_draw)


def grow(forest, j, node, v, c):
    K.apply_move(j, K.GROW, node, v, c, *forest._arrays(), forest.leaf_of, forest.Xc)
    forest.fit = forest.recompute_fit()


def three_leaf_forest(rng, n=60):
    X = rng.normal(size=(n, 2))
    f = Forest(X, BartConfig(m=1, min_leaf=1))
    grow(f, 0, 0, 0, f.ncode[0] // 2)
    left = int(f.left[0, 0])
    grow(f, 0, left, 1, f.ncode[1] // 2)
    return f


class TestSplitProbability:
    def test_values(self):
        assert split_probability(0, 0.95, 2) == 0.95
        assert split_probability(3, 0.95, 2) == pytest.approx(0.059375, abs=1e-15)

    @given(st.integers(0, 50), st.floats(0.01, 0.99))
    def test_beta_zero_is_depth_free(self, d, a):
        assert split_probability(d, a, 0.0) == a


class TestMoves:
    def test_root_only_grows(self, rng):
        f = Forest(rng.normal(size=(30, 2)), BartConfig(m=1))
        kinds = {propose_move(f, 0, rng).kind for _ in range(500)}
        assert kinds == {"grow"}

    def test_move_frequencies(self, rng):
        f = three_leaf_forest(rng)
        kinds = [propose_move(f, 0, rng).kind for _ in range(100_000)]
        freq = {k: kinds.count(k) / len(kinds) for k in ("grow", "prune", "change")}
        assert abs(freq["grow"] - 0.25) < 0.01
        assert abs(freq["prune"] - 0.25) < 0.01
        assert abs(freq["change"] - 0.5) < 0.01

    def test_prune_then_grow_restores_structure(self, rng):
        f = three_leaf_forest(rng)
        before = f.tree(0).signature()
        node = int(f.left[0, 0])
        v, c = int(f.var[0, node]), int(f.cut[0, node])
        K.apply_move(0, K.PRUNE, node, v, c, *f._arrays(), f.leaf_of, f.Xc)
        assert f.tree(0).n_leaves() == 2
        K.apply_move(0, K.GROW, node, v, c, *f._arrays(), f.leaf_of, f.Xc)
        assert f.tree(0).signature() == before
        f.validate(min_leaf=1)


class TestLeafDraws:
    def test_posterior_formula(self):
        m, v = leaf_posterior([2.0], [1.0], 1.0, 1.0)
        assert m == pytest.approx(1.0) and v == pytest.approx(0.5)

    def test_flat_prior_limit(self):
        m, _ = leaf_posterior([1.0, 1.0], [1.0, 1.0], 1.0, 1e12)
        assert m == pytest.approx(1.0, abs=1e-10)

    def test_weight_variance_equivalence(self):
        a = leaf_posterior([0.3, -1.2], [4.0, 4.0], 4.0, 0.7)
        b = leaf_posterior([0.3, -1.2], [1.0, 1.0], 1.0, 0.7)
        assert a == b

    def test_draw_moments(self, rng):
        f = Forest(np.zeros((1, 1)), BartConfig(m=1, min_leaf=1), sigma0=1.0)
        vals = [weighted_leaf_draw(f, 0, [2.0], [1.0], 1.0, rng)[0] for _ in range(40_000)]
        assert abs(np.mean(vals) - 1.0) < 0.015
        assert abs(np.var(vals) - 0.5) < 0.015

    def test_doubling_phi_halves_precision(self):
        r, w = np.array([0.5, 1.0, -0.2]), np.ones(3)
        s0 = 0.3
        _, v1 = leaf_posterior(r, w, 1.0, s0)
        _, v2 = leaf_posterior(r, w, 2.0, s0)
        assert (1 / v1 - 1 / s0) == pytest.approx(2 * (1 / v2 - 1 / s0))


class TestMetropolis:
    def test_noise_keeps_trees_small(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(200, 3))
        r = rng.normal(size=200)
        f = Forest(X, BartConfig(m=1))
        leaves = []
        for _ in range(10_000):
            tree_mh_step(f, 0, r, np.ones(200), 1.0, rng)
            leaves.append(f.tree(0).n_leaves())
        assert np.mean(leaves) < 4
        f.validate()

    def test_two_leaf_vs_one_leaf_ratio_by_quadrature(self):
        r = np.array([0.9, 1.4, 1.1, -0.8, -1.2, -0.7])
        sigma2, s0 = 0.5, 0.8

        def quad_ml(block):
            g = lambda mu: math.prod(stats.norm.pdf(x, mu, math.sqrt(sigma2)) for x in block) \
                * stats.norm.pdf(mu, 0, math.sqrt(s0))
            return integrate.quad(g, -20, 20, epsabs=0, epsrel=1e-13, limit=200)[0]

        two = math.log(quad_ml(r[:3])) + math.log(quad_ml(r[3:]))
        one = math.log(quad_ml(r))
        w = np.ones(3)
        ours = (leaf_marginal_loglik(r[:3], w, sigma2, s0) + leaf_marginal_loglik(r[3:], w, sigma2, s0)
                - leaf_marginal_loglik(r, np.ones(6), sigma2, s0))
        assert abs(ours - (two - one)) / abs(two - one) < 1e-8

    def test_depth_distribution_independent_of_start(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(size=(20, 2))
        r = np.sin(4 * X[:, 0]) + 0.3 * rng.normal(size=20)
        cfg = BartConfig(m=1, min_leaf=1, numcut=None)

        def run(forest, seed):
            g = np.random.default_rng(seed)
            depth = np.empty(200_000, dtype=int)
            for t in range(depth.size):
                tree_mh_step(forest, 0, r, np.ones(20), 0.3, g)
                depth[t] = forest.tree(0).max_depth()
            return np.bincount(depth[2000:], minlength=12)[:12] / (depth.size - 2000)

        shallow = Forest(X, cfg)
        deep = Forest(X, cfg)
        node = 0
        for d in range(5):
            grow(deep, 0, node, d % 2, deep.ncode[d % 2] // 2 - d)
            node = int(deep.left[0, node])
        assert deep.tree(0).max_depth() == 5
        tv = 0.5 * np.abs(run(shallow, 1) - run(deep, 2)).sum()
        assert tv < 0.03

    @given(st.integers(0, 2**31 - 1), st.integers(1, 6))
    def test_accepted_trees_stay_valid(self, seed, min_leaf):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(40, 3))
        f = Forest(X, BartConfig(m=3, min_leaf=min_leaf))
        y = X[:, 0] ** 2 + rng.normal(size=40)
        for _ in range(30):
            sweep_forest(f, y, np.ones(40), 0.5, rng)
        f.validate()
        np.testing.assert_allclose(f.fit, f.recompute_fit(), atol=1e-10)


class TestPredict:
    def test_constant_forest(self, rng):
        f = Forest(rng.normal(size=(10, 2)), BartConfig(m=7))
        f.set_constant(0.25)
        np.testing.assert_allclose(forest_predict(f, rng.normal(size=(5, 2))), 7 * 0.25)

    def test_row_order_and_cache(self, rng):
        X = rng.normal(size=(80, 3))
        f = Forest(X, BartConfig(m=10))
        y = np.sin(X[:, 0]) + 0.1 * rng.normal(size=80)
        for _ in range(20):
            sweep_forest(f, y, np.ones(80), 0.1, rng)
        perm = rng.permutation(80)
        np.testing.assert_allclose(f.predict(X[perm]), f.predict(X)[perm])
        np.testing.assert_allclose(f.fit, f.predict(X), atol=1e-12)

    def test_column_mismatch(self, rng):
        f = Forest(rng.normal(size=(10, 2)))
        with pytest.raises(ValueError):
            f.predict(np.zeros((3, 3)))


def gaussian_loglik(B, y, phi, prior_var):
    cov = phi * np.eye(len(y)) + B @ np.diag(prior_var) @ B.T
    return stats.multivariate_normal(np.zeros(len(y)), cov).logpdf(y)


class TestOutcomeBlock:
    def test_two_point_closed_form(self):
        B = np.array([[1.0, 0.0], [1.0, 0.0]])
        v = outcome_block_marginal_loglik(B, np.zeros(2), 1.0, 1.0, 1.0)
        # log N(0; 0, I + 11') = -log(2 pi) - log(3)/2
        assert v == pytest.approx(-2.3871832107434003, abs=1e-12)

    def test_tiny_tau_pins_gamma(self, rng):
        B = np.column_stack([np.array([[1, 0], [1, 0], [0, 1], [0, 1.0]]), rng.normal(size=4)])
        y = rng.normal(size=4)
        with_g = outcome_block_marginal_loglik(B, y, 0.7, 1e-12, 0.4)
        leaves_only = gaussian_loglik(B[:, :2], y, 0.7, np.full(2, 0.4))
        assert abs(with_g - leaves_only) < 1e-6

    def test_monte_carlo(self):
        rng = np.random.default_rng(8)
        B = np.column_stack([np.array([[1, 0], [1, 0], [0, 1], [0, 1], [0, 1.0]]), rng.normal(size=5)])
        y = rng.normal(size=5)
        phi, tau, s0 = 0.9, 0.5, 0.6
        draws = 10**6
        coef = np.column_stack([math.sqrt(s0) * rng.standard_normal((draws, 2)),
                                math.sqrt(tau * phi) * rng.standard_normal(draws)])
        mean = coef @ B.T
        ll = stats.norm.logpdf(y[None, :], mean, math.sqrt(phi)).sum(axis=1)
        mx = ll.max()
        w = np.exp(ll - mx)
        est = mx + math.log(w.mean())
        se = w.std() / (w.mean() * math.sqrt(draws))
        assert abs(est - outcome_block_marginal_loglik(B, y, phi, tau, s0)) < 3 * se

    def test_zero_data_mean(self, rng):
        B = np.column_stack([np.eye(3), rng.normal(size=3)])
        mean, _ = joint_leaf_gamma_posterior(B, np.zeros(3), 1.0, 0.5, 0.3)
        np.testing.assert_allclose(mean, 0.0)

    def test_draw_covariance(self):
        rng = np.random.default_rng(9)
        B = np.column_stack([np.array([[1, 0], [1, 0], [0, 1], [0, 1.0]]), rng.normal(size=4)])
        y = rng.normal(size=4)
        _, cov = joint_leaf_gamma_posterior(B, y, 0.8, 0.5, 0.4)
        draws = []
        for _ in range(100_000):
            mu, g = joint_leaf_gamma_draw(B, y, 0.8, 0.5, 0.4, rng)
            draws.append(np.r_[mu, g])
        emp = np.cov(np.array(draws).T)
        assert np.linalg.norm(emp - cov) / np.linalg.norm(cov) < 0.02

    def test_gamma_marginal_matches_gibbs(self):
        """Joint (leaf, gamma) draw vs alternating leaf | gamma and gamma | leaf draws."""
        rng = np.random.default_rng(10)
        z = np.array([0.4, -1.1, 0.8])
        B = np.column_stack([np.ones(3), z])
        y = np.array([0.9, -0.3, 1.5])
        phi, tau, s0 = 0.6, 0.5, 0.5
        joint = np.array([joint_leaf_gamma_draw(B, y, phi, tau, s0, rng)[1] for _ in range(100_000)])
        gam, gibbs = 0.0, np.empty(200_000)
        for t in range(gibbs.size):
            m, v = leaf_posterior(y - gam * z, np.ones(3), phi, s0)
            mu = m + math.sqrt(v) * rng.standard_normal()
            prec = z @ z / phi + 1 / (tau * phi)
            gam = (z @ (y - mu) / phi) / prec + rng.standard_normal() / math.sqrt(prec)
            gibbs[t] = gam
        assert stats.ks_2samp(joint, gibbs[::2]).statistic < 0.01

    def test_compiled_per_tree_likelihood_matches_dense(self, rng):
        """The sampler's per-tree sums reproduce the dense integral up to tree-free constants."""
        n = 9
        z = rng.normal(size=n)
        y = rng.normal(size=n)
        phi, gvar, s0 = 0.7, 0.35, 0.2
        vals = []
        for labels in (np.zeros(n, int), np.repeat([0, 1, 2], 3), np.array([0, 1] * 4 + [1])):
            L = labels.max() + 1
            t = np.zeros(4)
            for k in range(L):
                sel = labels == k
                t += K._arrow_terms(sel.sum(), y[sel].sum(), z[sel].sum(), phi, s0)
            tree_part = K.arrow_loglik(L, *t, z @ z, z @ y, phi, gvar, s0)
            B = np.column_stack([(labels[:, None] == np.arange(L)).astype(float), z])
            dense = outcome_block_marginal_loglik(B, y, phi, None, s0, gamma_var=gvar)
            vals.append(dense - tree_part)
        const = -0.5 * n * math.log(2 * math.pi * phi) - 0.5 * y @ y / phi - 0.5 * math.log(gvar)
        np.testing.assert_allclose(vals, const, rtol=1e-10)


class TestSelectionMarginal:
    def test_unit_weights_reduce_to_plain(self, rng):
        B = np.array([[1, 0], [1, 0], [0, 1.0]])
        z = rng.normal(size=3)
        a = selection_marginal_loglik(B, z, np.ones(3), 0.5)
        assert a == pytest.approx(gaussian_loglik(B, z, 1.0, np.full(2, 0.5)), abs=1e-12)

    def test_quadrature_oracle(self):
        B = np.array([[1, 0], [1, 0], [0, 1], [0, 1.0]])
        z = np.array([0.3, 1.2, -0.4, -1.5])
        w = np.array([1.0, 2.5, 1.0, 1.8])
        s0 = 0.7

        def leaf(idx):
            g = lambda mu: math.prod(stats.norm.pdf(z[i], mu, 1 / math.sqrt(w[i])) for i in idx) \
                * stats.norm.pdf(mu, 0, math.sqrt(s0))
            return integrate.quad(g, -30, 30, epsabs=0, epsrel=1e-13, limit=200)[0]

        ref = math.log(leaf([0, 1])) + math.log(leaf([2, 3]))
        assert abs(selection_marginal_loglik(B, z, w, s0) - ref) / abs(ref) < 1e-8

    def test_larger_prior_variance_helps_large_effects(self):
        B = np.array([[1, 0], [1, 0], [0, 1], [0, 1.0]])
        z = np.array([3.1, 2.9, -3.2, -2.8])
        assert selection_marginal_loglik(B, z, np.ones(4), 2.0) > selection_marginal_loglik(
            B, z, np.ones(4), 1.0)

    def test_leaf_design_rows(self, rng):
        f = three_leaf_forest(rng)
        B = leaf_design(f)
        assert B.shape == (f.n, 3)
        np.testing.assert_allclose(B.sum(axis=1), 1.0)


def test_plain_bart_recovers_smooth_function():
    rng = np.random.default_rng(12)
    X = rng.uniform(-1, 1, size=(300, 2))
    f = np.sin(3 * X[:, 0])
    y = f + 0.2 * rng.normal(size=300)
    fit = fit_bart(X, y, X[:50], BartConfig(m=50), iters=400, burnin=200, seed=1)
    assert np.sqrt(np.mean((fit.f_test.mean(axis=0) - f[:50]) ** 2)) < 0.15
    assert 0.02 < np.median(fit.sigma2) < 0.08
