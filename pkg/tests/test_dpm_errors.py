import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special, stats

from tobart.dpm_errors import (ClusterParams, DpmConfig, DpmState, alpha_bounds, alpha_grid_probs,
                               bivariate_density, dependence_summary, draw_alpha_escobar_west,
                               draw_alpha_grid, draw_base, escobar_west_weight, gibbs_sweep,
                               init_theta, predictive_density, reassign_clusters,
                               remix_cluster_params, sample_error_predictive, univariate_density)
from tobart.selection_model import Dataset, DingPrior, OmoriPrior, TreesMean, VHPrior, run_chain


def config(**kw):
    return DpmConfig(**kw).resolved(100, VHPrior(), 1.0)


def gaussian_residuals(rng, n, rho=0.5, sd2=1.0, shift=0.3):
    u1 = rng.standard_normal(n)
    u2 = sd2 * (rho * u1 + math.sqrt(1 - rho**2) * rng.standard_normal(n))
    s = u1 + shift >= 0
    return u1, np.where(s, u2, np.nan), s


class TestBasics:
    def test_cluster_params(self):
        with pytest.raises(ValueError):
            ClusterParams(0, 0, 0, 0.0)
        c = ClusterParams([0, 1], [0, 0], [1, 0], [1, 1])
        np.testing.assert_allclose(c.rho(), [1 / math.sqrt(2), 0])
        assert len(ClusterParams.from_array(c.as_array())) == 2

    def test_densities(self):
        assert bivariate_density(0.3, -0.2, 0.3, -0.2, 0.0, 1.0) == pytest.approx(1 / (2 * math.pi))
        assert univariate_density(1.1, 1.1) == pytest.approx(1 / math.sqrt(2 * math.pi))
        cov = np.array([[1, 0.7], [0.7, 0.4 + 0.49]])
        ref = stats.multivariate_normal([0.1, 0.2], cov).pdf([0.5, -0.3])
        assert bivariate_density(0.5, -0.3, 0.1, 0.2, 0.7, 0.4) == pytest.approx(ref, rel=1e-12)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            DpmConfig(alpha_prior="bogus").resolved(10)
        with pytest.raises(ValueError):
            DpmConfig(Omega=np.array([[1, 2], [2, 1]])).resolved(10)
        with pytest.raises(ValueError):
            DpmConfig().resolved(10, OmoriPrior())
        cfg = DpmConfig(alpha_prior="grid").resolved(500)
        assert cfg.alpha_grid.size == 100 and cfg.alpha_grid[0] < cfg.alpha_grid[-1]
        with pytest.raises(ValueError):
            alpha_bounds(100, 5, 2)


class TestConcentration:
    def test_weight_worked_value(self):
        w = escobar_west_weight(3, 100, 1.0, 2.0, 2.0, 0.5)
        assert w == pytest.approx(4 / (100 * (2 + math.log(2)) + 4), rel=1e-14)
        assert w == pytest.approx(0.014635, abs=5e-7)

    def test_bad_arguments(self, rng):
        with pytest.raises(ValueError):
            draw_alpha_escobar_west(0, 10, 1.0, 2, 2, rng)

    def test_chain_matches_conditional(self):
        rng = np.random.default_rng(31)
        k, n, c1, c2 = 3, 100, 2.0, 2.0

        def logpost(a):
            return (c1 - 1) * math.log(a) - c2 * a + k * math.log(a) + special.gammaln(a) - special.gammaln(a + n)

        norm, _ = integrate.quad(lambda a: math.exp(logpost(a)), 0, 50, limit=200)
        grid = np.linspace(1e-6, 6, 3000)
        pdf = np.array([math.exp(logpost(a)) for a in grid]) / norm
        cdf = integrate.cumulative_trapezoid(pdf, grid, initial=0)
        a, draws = 1.0, np.empty(100_000)
        for t in range(draws.size):
            a = draw_alpha_escobar_west(k, n, a, c1, c2, rng)
            draws[t] = a
        ks = stats.kstest(draws, lambda x: np.interp(x, grid, cdf, right=1.0)).statistic
        assert ks < 0.02

    def test_grid_uniform_when_flat(self, rng):
        grid = np.linspace(0.1, 5, 100)
        cfg = DpmConfig(alpha_prior="grid", psi=0.0, alpha_grid=grid)
        p = alpha_grid_probs(1, 1, grid, 0.0)
        assert abs(p.sum() - 1) < 1e-12
        draws = rng.choice(100, size=1_000_000, p=p)
        freq = np.bincount(draws, minlength=100) / draws.size
        assert 0.5 * np.abs(freq - 0.01).sum() < 0.01
        assert draw_alpha_grid(1, 1, cfg, rng) in grid

    def test_grid_mode_moves_with_k(self):
        cfg = DpmConfig(alpha_prior="grid").resolved(200)
        m2 = cfg.alpha_grid[np.argmax(alpha_grid_probs(2, 200, cfg.alpha_grid, cfg.psi))]
        m20 = cfg.alpha_grid[np.argmax(alpha_grid_probs(20, 200, cfg.alpha_grid, cfg.psi))]
        assert m20 > m2


class TestReassignAndRemix:
    def test_small_alpha_collapses(self, rng):
        cfg = config()
        u1, u2, s = np.full(3, 0.4), np.full(3, 0.1), np.ones(3, bool)
        state = init_theta(u1, u2, s, cfg, rng)
        state.alpha = 1e-8
        for _ in range(50):
            reassign_clusters(state, u1, u2, s, cfg, rng)
            remix_cluster_params(state, u1, u2, s, cfg, rng)
        assert state.k == 1

    def test_censored_only_mu2_prior(self, rng):
        cfg = config(mu1_pinned=False)
        n = 20_000
        u1 = rng.standard_normal(n)
        s = np.zeros(n, bool)
        state = DpmState(np.arange(n), draw_base(cfg, rng, n), 1.0)
        remix_cluster_params(state, u1, np.full(n, np.nan), s, cfg, rng)
        mu1, mu2 = state.params[:, 0], state.params[:, 1]
        assert abs(mu2.var() / 10 - 1) < 0.05
        assert abs(np.corrcoef(mu1, mu2)[0, 1]) < 0.03

    def test_censored_cluster_mu1_limit(self, rng):
        cfg = config(mu1_pinned=False)
        n, r = 50_000, 0.7
        state = DpmState(np.zeros(n, int), draw_base(cfg, rng, 1), 1.0)
        remix_cluster_params(state, np.full(n, r), np.full(n, np.nan), np.zeros(n, bool), cfg, rng)
        assert state.params[0, 0] == pytest.approx(r, abs=0.02)

    def test_joint_vs_sequential_cluster_update(self):
        rng = np.random.default_rng(32)
        u1 = rng.standard_normal(10)
        u2 = 0.6 * u1 + 0.8 * rng.standard_normal(10)
        s = np.ones(10, bool)
        out = {}
        for mode in ("joint", "sequential"):
            cfg = config(gamma_phi=mode)
            state = DpmState(np.zeros(10, int), np.array([[0.0, 0.0, 0.0, 1.0]]), 1.0)
            g = np.empty(40_000)
            for t in range(g.size):
                remix_cluster_params(state, u1, u2, s, cfg, rng)
                g[t] = state.params[0, 2]
            out[mode] = g
        assert stats.ks_2samp(out["joint"], out["sequential"]).statistic < 0.02

    @settings(max_examples=15)
    @given(st.integers(0, 2**32 - 1), st.integers(3, 40))
    def test_labels_stay_valid(self, seed, n):
        rng = np.random.default_rng(seed)
        cfg = config()
        u1, u2, s = gaussian_residuals(rng, n)
        state = init_theta(u1, u2, s, cfg, rng)
        for _ in range(3):
            gibbs_sweep(state, u1, u2, s, cfg, rng)
            state.validate()
            assert 1 <= state.k <= n

    def test_order_exchangeability(self):
        base = np.random.default_rng(33)
        u1, u2, s = gaussian_residuals(base, 30)
        perm = base.permutation(30)
        cfg = config()
        ks = {0: [], 1: []}
        for rep in range(600):
            for flag, idx in ((0, np.arange(30)), (1, perm)):
                rng = np.random.default_rng([rep, flag])
                state = DpmState(np.zeros(30, int), np.array([[0.0, 0.0, 0.4, 0.8]]), 1.0)
                reassign_clusters(state, u1[idx], u2[idx], s[idx], cfg, rng)
                ks[flag].append(state.k)
        a, b = np.array(ks[0]), np.array(ks[1])
        se = math.sqrt(a.var() / a.size + b.var() / b.size)
        assert abs(a.mean() - b.mean()) < 4 * se

    def test_ding_base_rho_uniform(self, rng):
        cfg = DpmConfig().resolved(10, DingPrior(nu0=3.0, c=0.5))
        d = draw_base(cfg, rng, 1_000_000)
        rho = d[:, 2] / np.sqrt(d[:, 2] ** 2 + d[:, 3])
        assert stats.kstest(rho, stats.uniform(-1, 2).cdf).statistic < 0.01


class TestInitAndPredictive:
    def test_init_one_cluster_each(self, rng):
        cfg = config()
        u1, u2, s = gaussian_residuals(rng, 40)
        state = init_theta(u1, u2, s, cfg, rng)
        assert state.k == 40
        state.validate()

    def test_init_zero_residual_shrinkage(self, rng):
        cfg = config(mu1_pinned=False)
        n = 100_000
        state = init_theta(np.zeros(n), np.full(n, np.nan), np.zeros(n, bool), cfg, rng)
        mu1 = state.params[:, 0]
        assert abs(mu1.mean()) < 0.01
        assert abs(mu1.var() / (1 / (1 / 10 + 1)) - 1) < 0.02

    def test_init_censored_phi_is_prior(self, rng):
        cfg = config()
        n = 50_000
        state = init_theta(rng.standard_normal(n), np.full(n, np.nan), np.zeros(n, bool), cfg, rng)
        ig = stats.invgamma(a=cfg.base.n0 / 2, scale=cfg.base.S0 / 2)
        assert stats.kstest(state.params[:, 3], ig.cdf).statistic < 0.02

    def test_predictive_limits(self, rng):
        cfg = config()
        u1, u2, s = gaussian_residuals(rng, 10)
        state = init_theta(u1, u2, s, cfg, rng)
        state.alpha = 1e-12
        p = sample_error_predictive(state, cfg, rng, size=5000)
        known = {tuple(r) for r in state.params}
        assert all(tuple(r) in known for r in p.as_array())
        state.alpha = 1e6
        p = sample_error_predictive(state, cfg, rng, size=5000)
        fresh = np.mean([tuple(r) not in known for r in p.as_array()])
        assert fresh >= 0.99

    def test_predictive_density_integrates(self, rng):
        cfg = config()
        u1, u2, s = gaussian_residuals(rng, 60)
        state = init_theta(u1, u2, s, cfg, rng)
        for _ in range(5):
            gibbs_sweep(state, u1, u2, s, cfg, rng)
        params = sample_error_predictive(state, cfg, rng, size=8)
        tot = 0.0
        for m1, m2, g, p in params.as_array():
            sd = math.sqrt(p + g * g)
            # integrate component by component on wide boxes around each mean
            v, _ = integrate.dblquad(lambda b, a: predictive_density(a, b, ClusterParams(m1, m2, g, p)),
                                     m1 - 12, m1 + 12, m2 - 12 * sd - 12 * abs(g), m2 + 12 * sd + 12 * abs(g),
                                     epsabs=1e-10, epsrel=1e-10)
            tot += v / len(params)
        assert abs(tot - 1) < 1e-3

    def test_dependence_summary(self, rng):
        n = 500
        st0 = DpmState(np.zeros(n, int), np.array([[0.0, 0.0, 0.0, 1.0]]), 1.0)
        st1 = DpmState(np.zeros(n, int), np.array([[0.0, 0.0, 1.0, 1.0]]), 1.0)
        d0 = [dependence_summary(st0, rng) for _ in range(400)]
        d1 = [dependence_summary(st1, rng) for _ in range(400)]
        assert abs(np.mean(d0)) < 0.02
        assert abs(np.mean(d1) - 1 / math.sqrt(2)) < 0.03
        assert all(-1 <= v <= 1 for v in d0 + d1)
        with pytest.raises(ValueError):
            dependence_summary(DpmState(np.zeros(2, int), np.array([[0, 0, 0, 1.0]]), 1.0), rng)


def test_chain_with_mixture_errors():
    rng = np.random.default_rng(34)
    n = 200
    X = rng.normal(size=(n, 2))
    W = np.column_stack([X, rng.normal(size=n)])
    u1, u2, s = gaussian_residuals(rng, n)
    s = W[:, 2] + u1 >= 0
    d = Dataset(X, W, np.where(s, X[:, 0] + np.nan_to_num(u2), np.nan), s.astype(int))
    dr = run_chain(d, mean=TreesMean(m_y=5, m_z=5), errors=DpmConfig(), iters=40, burnin=10, rng=2,
                   X_test=X[:4], W_test=W[:4])
    assert dr.k.shape == (30,) and np.all(dr.k >= 1)
    assert np.all(dr.alpha > 0) and np.all(np.abs(dr.dependence) <= 1)
    assert dr.mu2_test.shape == (30, 4)
