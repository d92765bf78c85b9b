"""Sum-of-trees building blocks.

A :class:`Forest` owns m trees over a fixed training design. Tree updates run
in compiled kernels (``_trees``); this module exposes them one move at a time
for inspection and testing, plus whole-forest backfitting sweeps, dense
marginal-likelihood formulas, and the plain BART / probit BART baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import _trees as K
from .core_math import make_rng, sample_inverse_gamma, truncnorm_std

MOVE_NAMES = ("grow", "prune", "change")


def split_probability(depth, alpha_split=0.95, beta_split=2.0):
    return alpha_split * (1.0 + depth) ** (-beta_split)


@dataclass
class BartConfig:
    m: int = 200
    alpha_split: float = 0.95
    beta_split: float = 2.0
    e: float = 2.0
    v: float = 3.0
    q: float = 0.90
    lam: float | None = None
    min_leaf: int = 5
    p_grow: float = 0.25
    p_prune: float = 0.25
    max_nodes: int = 255
    numcut: int | None = 100

    @property
    def p_change(self):
        return 1.0 - self.p_grow - self.p_prune

    def leaf_sd(self, half_range=0.5):
        """sigma_0 for a response whose plausible range is +-half_range."""
        return half_range / (self.e * math.sqrt(self.m))


@dataclass
class SplitRule:
    variable_index: int
    cut_value: float


@dataclass
class Node:
    is_leaf: bool
    split: SplitRule | None
    left: int
    right: int
    leaf_value: float
    depth: int


@dataclass
class Tree:
    """Read-only snapshot of one tree of a forest, keyed by node slot."""
    nodes: dict[int, Node]
    root: int = 0

    def leaves(self):
        return [k for k, nd in self.nodes.items() if nd.is_leaf]

    def n_leaves(self):
        return len(self.leaves())

    def max_depth(self):
        return max(nd.depth for nd in self.nodes.values())

    def signature(self):
        """Structure as a nested tuple, independent of slot numbering."""
        def rec(k):
            nd = self.nodes[k]
            if nd.is_leaf:
                return ()
            return ((nd.split.variable_index, nd.split.cut_value), rec(nd.left), rec(nd.right))
        return rec(self.root)


@dataclass
class Proposal:
    kind: str
    node: int
    variable: int
    cut_code: int
    feasible: bool
    log_struct_ratio: float


def _encode(X, numcut=None):
    """Integer codes per covariate; code <= c means x <= cutvals[v, c].

    With numcut set, a variable with more distinct values than that gets an
    evenly spaced grid of numcut interior cuts instead of its observed values.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("covariate matrix must be 2-D")
    n, p = X.shape
    codes = np.empty((n, p), dtype=np.int32)
    cuts = []
    for v in range(p):
        u = np.unique(X[:, v])
        if numcut is not None and len(u) > numcut + 1:
            lo, hi = u[0], u[-1]
            u = lo + (hi - lo) * np.arange(1, numcut + 1) / (numcut + 1.0)
            u = np.append(u, hi)
        cuts.append(u)
    maxk = max(1, max(len(u) for u in cuts))
    cutvals = np.full((p, maxk), np.inf)
    ncode = np.empty(p, dtype=np.int32)
    for v, u in enumerate(cuts):
        codes[:, v] = np.searchsorted(u, X[:, v])
        cutvals[v, : len(u)] = u
        ncode[v] = len(u)
    return codes, ncode, cutvals


class Forest:
    """m trees over a training design, with cached in-sample predictions.

    The cut for code c of variable v is the c-th smallest distinct training
    value, so cuts are always observed values.
    """

    def __init__(self, X, config: BartConfig | None = None, sigma0=None):
        self.config = config or BartConfig()
        self.X = np.ascontiguousarray(X, dtype=float)
        self.Xc, self.ncode, self.cutvals = _encode(self.X, self.config.numcut)
        m, cap, n = self.config.m, self.config.max_nodes, self.X.shape[0]
        self.sigma0 = self.config.leaf_sd() if sigma0 is None else float(sigma0)
        self.status = np.zeros((m, cap), dtype=np.int8)
        self.parent = np.full((m, cap), -1, dtype=np.int32)
        self.left = np.full((m, cap), -1, dtype=np.int32)
        self.right = np.full((m, cap), -1, dtype=np.int32)
        self.depth = np.zeros((m, cap), dtype=np.int32)
        self.var = np.full((m, cap), -1, dtype=np.int32)
        self.cut = np.full((m, cap), -1, dtype=np.int32)
        self.value = np.zeros((m, cap))
        self.status[:, 0] = K.LEAF
        self.leaf_of = np.zeros((m, n), dtype=np.int32)
        self.fit = np.zeros(n)
        self.accepted = np.zeros(3, dtype=np.int64)

    @property
    def m(self):
        return self.status.shape[0]

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def s0sq(self):
        return self.sigma0**2

    def _arrays(self):
        return (self.status, self.parent, self.left, self.right, self.depth, self.var, self.cut,
                self.value)

    def set_constant(self, c):
        """Reset to m single-leaf trees of value c."""
        self.status[:] = K.FREE
        self.status[:, 0] = K.LEAF
        self.parent[:] = -1
        self.left[:] = -1
        self.right[:] = -1
        self.depth[:] = 0
        self.var[:] = -1
        self.cut[:] = -1
        self.value[:] = 0.0
        self.value[:, 0] = c
        self.leaf_of[:] = 0
        self.fit[:] = self.m * c

    def tree(self, j) -> Tree:
        nodes = {}
        for k in np.flatnonzero(self.status[j] != K.FREE):
            k = int(k)
            leaf = self.status[j, k] == K.LEAF
            split = None
            if not leaf:
                v = int(self.var[j, k])
                split = SplitRule(v, float(self.cutvals[v, self.cut[j, k]]))
            nodes[k] = Node(bool(leaf), split, int(self.left[j, k]), int(self.right[j, k]),
                            float(self.value[j, k]), int(self.depth[j, k]))
        return Tree(nodes)

    def tree_values(self, j):
        return self.value[j, self.leaf_of[j]]

    def predict(self, X):
        X = np.ascontiguousarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.X.shape[1]:
            raise ValueError(f"expected {self.X.shape[1]} covariate columns")
        return K.predict_values(X, self.status, self.left, self.right, self.var, self.cut,
                                self.value, self.cutvals)

    def recompute_fit(self):
        return self.predict(self.X)

    def leaf_counts(self, j):
        leaves = np.flatnonzero(self.status[j] == K.LEAF)
        counts = np.bincount(self.leaf_of[j], minlength=self.status.shape[1])
        return {int(k): int(counts[k]) for k in leaves}

    def validate(self, min_leaf=None):
        """Raise AssertionError if any tree breaks structural invariants."""
        min_leaf = self.config.min_leaf if min_leaf is None else min_leaf
        for j in range(self.m):
            st = self.status[j]
            assert st[0] != K.FREE, "root slot empty"
            seen = set()
            stack = [0]
            while stack:
                k = stack.pop()
                assert k not in seen
                seen.add(k)
                if st[k] == K.INTERNAL:
                    lft, rgt = self.left[j, k], self.right[j, k]
                    for ch in (lft, rgt):
                        assert st[ch] != K.FREE, "dangling child"
                        assert self.parent[j, ch] == k
                        assert self.depth[j, ch] == self.depth[j, k] + 1
                        stack.append(int(ch))
                    assert 0 <= self.var[j, k] < self.X.shape[1]
                    assert 0 <= self.cut[j, k] < self.ncode[self.var[j, k]] - 1
            assert seen == set(np.flatnonzero(st != K.FREE).tolist()), "unreachable node"
            expect = K.leaf_index(self.X, j, self.status, self.left, self.right, self.var,
                                  self.cut, self.cutvals)
            assert np.array_equal(expect, self.leaf_of[j]), "leaf assignment out of sync"
            if self.tree(j).n_leaves() > 1:
                counts = self.leaf_counts(j)
                assert min(counts.values()) >= min_leaf, "leaf below minimum size"


def forest_predict(forest: Forest, X):
    return forest.predict(X)


def propose_move(forest: Forest, j: int, rng) -> Proposal:
    cfg = forest.config
    kind, node, v, c, ok, log_struct = K.propose(
        j, forest.status, forest.parent, forest.left, forest.right, forest.depth, forest.var,
        forest.cut, forest.ncode, cfg.p_grow, cfg.p_prune, cfg.alpha_split, cfg.beta_split, rng)
    return Proposal(MOVE_NAMES[kind], int(node), int(v), int(c), bool(ok), float(log_struct))


def tree_mh_step(forest: Forest, j: int, partial_residuals, weights, sigma2, rng):
    """One structure update of tree j; returns (move name, accepted)."""
    cfg = forest.config
    r = np.ascontiguousarray(partial_residuals, dtype=float)
    w = np.ascontiguousarray(weights, dtype=float)
    old = forest.tree_values(j)
    kind, acc = K.mh_step(j, *forest._arrays(), forest.leaf_of, forest.Xc, forest.ncode, r, w,
                          float(sigma2), forest.s0sq, cfg.alpha_split, cfg.beta_split,
                          cfg.p_grow, cfg.p_prune, cfg.min_leaf, rng)
    forest.fit += forest.tree_values(j) - old
    return MOVE_NAMES[kind], bool(acc)


def weighted_leaf_draw(forest: Forest, j: int, partial_residuals, weights, sigma2, rng):
    """Conjugate draw of tree j's leaves; residual i has variance sigma2 / w_i."""
    r = np.ascontiguousarray(partial_residuals, dtype=float)
    w = np.ascontiguousarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    old = forest.tree_values(j)
    cap = forest.status.shape[1]
    K.draw_leaves(j, forest.status, forest.value, forest.leaf_of, r, w, float(sigma2),
                  forest.s0sq, rng, np.empty(cap), np.empty(cap))
    forest.fit += forest.tree_values(j) - old
    return {k: float(forest.value[j, k]) for k in np.flatnonzero(forest.status[j] == K.LEAF)}


def leaf_posterior(r, w, sigma2, sigma0_2):
    """Mean and variance of a leaf value given its residuals."""
    r = np.asarray(r, dtype=float)
    w = np.asarray(w, dtype=float)
    V = 1.0 / (1.0 / sigma0_2 + w.sum() / sigma2)
    return V * float(w @ r) / sigma2, V


def sweep_forest(forest: Forest, target, weights, sigma2, rng):
    """Backfit every tree once against target with residual variance sigma2 / w."""
    cfg = forest.config
    K.sweep(np.ascontiguousarray(target, dtype=float), np.ascontiguousarray(weights, dtype=float),
            float(sigma2), forest.s0sq, forest.fit, *forest._arrays(), forest.leaf_of, forest.Xc,
            forest.ncode, cfg.alpha_split, cfg.beta_split, cfg.p_grow, cfg.p_prune, cfg.min_leaf,
            rng, forest.accepted)


def sweep_forest_marginal(forest: Forest, target, ztil, phi, gamma_var, gamma_mean, rng):
    """Outcome trees with (leaves_j, gamma) integrated per tree; returns gamma."""
    cfg = forest.config
    ztil = np.ascontiguousarray(ztil, dtype=float)
    shifted = np.ascontiguousarray(target, dtype=float) - gamma_mean * ztil
    g = K.sweep_marginal(shifted, ztil, float(phi), float(gamma_var), forest.s0sq, forest.fit,
                         *forest._arrays(), forest.leaf_of, forest.Xc, forest.ncode,
                         cfg.alpha_split, cfg.beta_split, cfg.p_grow, cfg.p_prune, cfg.min_leaf,
                         rng, forest.accepted)
    return g + gamma_mean


def leaf_design(forest: Forest, trees=None):
    """0/1 leaf-indicator design of the training rows, one block per tree."""
    trees = range(forest.m) if trees is None else trees
    blocks = []
    for j in trees:
        leaves = np.flatnonzero(forest.status[j] == K.LEAF)
        blocks.append((forest.leaf_of[j][:, None] == leaves[None, :]).astype(float))
    return np.hstack(blocks)


# ---------------------------------------------------------------------------
# dense marginal likelihoods

def _gauss_block(B, y, prec_resid, prior_prec):
    """Pieces of the Gaussian integral over coefficients c in y ~ N(Bc, diag(1/prec_resid))."""
    A = B.T @ (B * prec_resid[:, None]) + np.diag(prior_prec)
    b = B.T @ (prec_resid * y)
    cho = np.linalg.cholesky(A)
    sol = np.linalg.solve(cho, b)
    logdet = 2.0 * np.log(np.diag(cho)).sum()
    return A, b, logdet, float(sol @ sol)


def outcome_block_marginal_loglik(B_tilde, y, phi, tau, sigma0y_2, gamma_var=None):
    """log p(y) with leaf values and gamma integrated out.

    y = B_tilde @ (mu, gamma) + eta, eta ~ N(0, phi I), mu ~ N(0, sigma0y_2 I)
    and gamma ~ N(0, tau * phi) (or N(0, gamma_var) when given).
    """
    B = np.asarray(B_tilde, dtype=float)
    y = np.asarray(y, dtype=float)
    n1, k = B.shape
    L = k - 1
    gv = tau * phi if gamma_var is None else gamma_var
    prior_prec = np.r_[np.full(L, 1.0 / sigma0y_2), 1.0 / gv]
    try:
        _, _, logdet, quad = _gauss_block(B, y, np.full(n1, 1.0 / phi), prior_prec)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError("posterior precision is not positive definite") from exc
    return (-0.5 * n1 * math.log(2.0 * math.pi * phi) - 0.5 * L * math.log(sigma0y_2)
            - 0.5 * math.log(gv) - 0.5 * logdet + 0.5 * quad - 0.5 * float(y @ y) / phi)


def joint_leaf_gamma_posterior(B_tilde, y, phi, tau, sigma0y_2, gamma_var=None):
    B = np.asarray(B_tilde, dtype=float)
    y = np.asarray(y, dtype=float)
    L = B.shape[1] - 1
    gv = tau * phi if gamma_var is None else gamma_var
    prior_prec = np.r_[np.full(L, 1.0 / sigma0y_2), 1.0 / gv]
    A = B.T @ B / phi + np.diag(prior_prec)
    cov = np.linalg.inv(A)
    return cov @ (B.T @ y / phi), cov


def joint_leaf_gamma_draw(B_tilde, y, phi, tau, sigma0y_2, rng, gamma_var=None):
    mean, cov = joint_leaf_gamma_posterior(B_tilde, y, phi, tau, sigma0y_2, gamma_var)
    draw = mean + np.linalg.cholesky(cov) @ rng.standard_normal(mean.size)
    return draw[:-1], float(draw[-1])


def selection_marginal_loglik(B_z, z_breve, weights, sigma0z_2):
    """log p(z_breve) with z_breve ~ N(B_z mu, diag(1/w)), mu ~ N(0, sigma0z_2 I)."""
    B = np.asarray(B_z, dtype=float)
    z = np.asarray(z_breve, dtype=float)
    w = np.asarray(weights, dtype=float)
    n, L = B.shape
    _, _, logdet, quad = _gauss_block(B, z, w, np.full(L, 1.0 / sigma0z_2))
    return (-0.5 * n * math.log(2.0 * math.pi) + 0.5 * np.log(w).sum()
            - 0.5 * L * math.log(sigma0z_2) - 0.5 * logdet + 0.5 * quad
            - 0.5 * float(w @ (z * z)))


def leaf_marginal_loglik(r, w, sigma2, sigma0_2):
    """Full log marginal likelihood of one leaf's residuals (constants included)."""
    r = np.asarray(r, dtype=float)
    w = np.asarray(w, dtype=float)
    W = w.sum() / sigma2
    S = float(w @ r) / sigma2
    return (float(K.leaf_ml(W, S, sigma0_2)) - 0.5 * r.size * math.log(2.0 * math.pi * sigma2)
            + 0.5 * np.log(w).sum() - 0.5 * float(w @ (r * r)) / sigma2)


# ---------------------------------------------------------------------------
# baselines

def default_lambda(sigma_hat2, v=3.0, q=0.90):
    """lambda with P(sigma^2 < sigma_hat2) = q under sigma^-2 ~ Ga(v/2, v lambda / 2)."""
    return 2.0 * sigma_hat2 * special.gammaincinv(v / 2.0, 1.0 - q) / v


def _ols_resid_var(X, y):
    n, p = X.shape
    if n <= p + 1:
        return float(np.var(y, ddof=1))
    Z = np.column_stack([np.ones(n), X])
    coef, *_ = np.linalg.lstsq(Z, y, rcond=None)
    res = y - Z @ coef
    return float(res @ res / (n - p - 1))


@dataclass
class BartFit:
    f_train: np.ndarray
    f_test: np.ndarray | None
    sigma2: np.ndarray = field(default_factory=lambda: np.empty(0))


def fit_bart(X, y, X_test=None, config=None, iters=1500, burnin=500, thin=1, seed=0):
    """Plain BART regression; draws of f at training and test rows (original scale)."""
    rng = make_rng(seed)
    cfg = config or BartConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    lo, hi = y.min(), y.max()
    rng_y = hi - lo if hi > lo else 1.0
    mid = 0.5 * (hi + lo)
    ys = (y - mid) / rng_y
    sig_hat2 = _ols_resid_var(X, ys)
    lam = cfg.lam if cfg.lam is not None else default_lambda(sig_hat2, cfg.v, cfg.q)
    forest = Forest(X, cfg)
    forest.set_constant(0.0)
    sigma2 = sig_hat2
    w = np.ones(len(y))
    keep_tr, keep_te, keep_s = [], [], []
    for it in range(iters):
        sweep_forest(forest, ys, w, sigma2, rng)
        res = ys - forest.fit
        sigma2 = sample_inverse_gamma(0.5 * (cfg.v + len(y)), 0.5 * (cfg.v * lam + res @ res), rng)
        if it >= burnin and (it - burnin) % thin == 0:
            keep_tr.append(mid + rng_y * forest.fit)
            if X_test is not None:
                keep_te.append(mid + rng_y * forest.predict(X_test))
            keep_s.append(sigma2 * rng_y**2)
    return BartFit(np.array(keep_tr), np.array(keep_te) if X_test is not None else None,
                   np.array(keep_s))


def fit_probit_bart(X, s, X_test=None, config=None, iters=1500, burnin=500, thin=1, seed=0):
    """Probit BART (Albert-Chib augmentation); returns draws of the latent mean."""
    rng = make_rng(seed)
    cfg = config or BartConfig(m=50)
    X = np.asarray(X, dtype=float)
    s = np.asarray(s).astype(bool)
    forest = Forest(X, cfg, sigma0=3.0 / (cfg.e * math.sqrt(cfg.m)))
    forest.set_constant(0.0)
    lower = np.where(s, 0.0, -np.inf)
    upper = np.where(s, np.inf, 0.0)
    w = np.ones(len(s))
    keep_tr, keep_te = [], []
    for it in range(iters):
        z = forest.fit + truncnorm_std(lower - forest.fit, upper - forest.fit, rng)
        sweep_forest(forest, z, w, 1.0, rng)
        if it >= burnin and (it - burnin) % thin == 0:
            keep_tr.append(forest.fit.copy())
            if X_test is not None:
                keep_te.append(forest.predict(X_test))
    return BartFit(np.array(keep_tr), np.array(keep_te) if X_test is not None else None)
