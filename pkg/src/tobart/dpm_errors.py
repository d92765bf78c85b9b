"""Dirichlet process mixture of bivariate normals for the Tobit errors.

Each observation carries theta_i = (mu1, mu2, gamma, phi); the error pair
(xi, eta) is N((mu1, mu2), [[1, gamma], [gamma, phi + gamma^2]]). Clusters
share theta. Reassignment is Neal's algorithm 8 with one auxiliary draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy import special

from .core_math import sample_inverse_wishart_2_batch
from .selection_model import DingPrior, OmoriPrior, VHPrior, ding_from_sums

LOG_2PI = math.log(2.0 * math.pi)
EULER_GAMMA = 0.5772156649015329


@dataclass
class ClusterParams:
    mu1: np.ndarray
    mu2: np.ndarray
    gamma: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        self.mu1, self.mu2, self.gamma, self.phi = (np.atleast_1d(np.asarray(a, dtype=float))
                                                    for a in (self.mu1, self.mu2, self.gamma, self.phi))
        if np.any(self.phi <= 0):
            raise ValueError("phi must be positive")

    def __len__(self):
        return self.phi.size

    def rho(self):
        return self.gamma / np.sqrt(self.gamma**2 + self.phi)

    def as_array(self):
        return np.column_stack([self.mu1, self.mu2, self.gamma, self.phi])

    @classmethod
    def from_array(cls, a):
        a = np.atleast_2d(a)
        return cls(a[:, 0], a[:, 1], a[:, 2], a[:, 3])


@dataclass
class DpmConfig:
    alpha_prior: str = "escobar_west"  # or "grid"
    c1: float = 2.0
    c2: float = 2.0
    I_min: float = 1.0
    I_max: float | None = None
    psi: float = 0.5
    grid_size: int = 100
    Omega: np.ndarray = field(default_factory=lambda: 10.0 * np.eye(2))
    base: object = None
    mu1_pinned: bool = True
    gamma_phi: str = "joint"
    alpha_init: float = 1.0
    alpha_grid: np.ndarray | None = None

    def resolved(self, n, prior=None, sigma_hat_y2=1.0):
        """Fill in the base measure and the alpha grid for a sample of size n."""
        if self.alpha_prior not in ("escobar_west", "grid"):
            raise ValueError(f"unknown alpha prior {self.alpha_prior!r}")
        Om = np.asarray(self.Omega, dtype=float)
        if Om.shape != (2, 2) or not np.allclose(Om, Om.T) or np.any(np.linalg.eigvalsh(Om) <= 0):
            raise ValueError("Omega must be a symmetric positive definite 2x2 matrix")
        base = self.base if self.base is not None else prior
        if base is None:
            base = VHPrior()
        if isinstance(base, OmoriPrior):
            raise ValueError("the mixture base measure supports VH or Ding priors only")
        base = base.resolved(sigma_hat_y2)
        grid = self.alpha_grid
        if self.alpha_prior == "grid" and grid is None:
            i_max = self.I_max if self.I_max is not None else max(math.floor(0.1 * n), 2)
            lo, hi = alpha_bounds(n, self.I_min, i_max)
            grid = np.linspace(lo, hi, self.grid_size)
        return DpmConfig(self.alpha_prior, self.c1, self.c2, self.I_min, self.I_max, self.psi,
                         self.grid_size, Om, base, self.mu1_pinned, self.gamma_phi,
                         self.alpha_init, grid)


def alpha_bounds(n, i_min, i_max):
    """Concentrations whose prior mode of k is roughly i_min and i_max clusters."""
    if not 0 < i_min < i_max:
        raise ValueError("need 0 < I_min < I_max")
    lg = math.log(EULER_GAMMA + math.log(n))
    return (math.exp(special.digamma(i_min) - lg), math.exp(special.digamma(i_max) - lg))


@dataclass
class DpmState:
    labels: np.ndarray
    params: np.ndarray  # k x 4 rows of (mu1, mu2, gamma, phi)
    alpha: float
    rho_prev: np.ndarray | None = None
    _cache: ClusterParams | None = None

    @property
    def k(self):
        return self.params.shape[0]

    def counts(self):
        return np.bincount(self.labels, minlength=self.k)

    def unique_params(self):
        return ClusterParams.from_array(self.params)

    def per_obs(self):
        if self._cache is None:
            self._cache = ClusterParams.from_array(self.params[self.labels])
        return self._cache

    def touch(self):
        self._cache = None

    def validate(self):
        c = self.counts()
        if self.labels.min() < 0 or self.labels.max() >= self.k or np.any(c == 0):
            raise AssertionError("cluster labels do not index live clusters")
        if np.any(self.params[:, 3] <= 0):
            raise AssertionError("non-positive phi in cluster parameters")


# ---------------------------------------------------------------------------
# densities

def bivariate_logdensity(u1, u2, mu1, mu2, gamma, phi):
    e1 = np.asarray(u1) - mu1
    e2 = np.asarray(u2) - mu2
    return -LOG_2PI - 0.5 * np.log(phi) - 0.5 * (e1**2 + (e2 - gamma * e1) ** 2 / phi)


def bivariate_density(u1, u2, mu1, mu2, gamma, phi):
    return np.exp(bivariate_logdensity(u1, u2, mu1, mu2, gamma, phi))


def univariate_density(u1, mu1):
    e = np.asarray(u1) - mu1
    return np.exp(-0.5 * LOG_2PI - 0.5 * e**2)


def predictive_density(u1, u2, params: ClusterParams):
    """Average of the component densities in params, evaluated at (u1, u2)."""
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    out = np.zeros(np.broadcast(u1, u2).shape)
    for m1, m2, g, p in params.as_array():
        out += bivariate_density(u1, u2, m1, m2, g, p)
    return out / len(params)


# ---------------------------------------------------------------------------
# concentration parameter

def escobar_west_weight(k, n, alpha, c1, c2, kappa):
    a = c1 + k - 1.0
    return a / (n * (c2 - math.log(kappa)) + a)


def draw_alpha_escobar_west(k, n, alpha, c1, c2, rng):
    if k < 1 or n < 1 or not alpha > 0:
        raise ValueError("need k >= 1, n >= 1, alpha > 0")
    kappa = rng.beta(alpha + 1.0, n)
    p = escobar_west_weight(k, n, alpha, c1, c2, kappa)
    shape = c1 + k if rng.random() < p else c1 + k - 1.0
    return rng.gamma(shape, 1.0 / (c2 - math.log(kappa)))


def alpha_grid_logweights(k, n, grid, psi):
    grid = np.asarray(grid, dtype=float)
    lo, hi = grid[0], grid[-1]
    frac = 1.0 - (grid - lo) / (hi - lo)
    lw = k * np.log(grid) + special.gammaln(grid) - special.gammaln(n + grid)
    if psi != 0:
        with np.errstate(divide="ignore"):
            lw = lw + psi * np.log(frac)
    return lw


def alpha_grid_probs(k, n, grid, psi):
    lw = alpha_grid_logweights(k, n, grid, psi)
    w = np.exp(lw - lw.max())
    p = w / w.sum()
    if abs(p.sum() - 1.0) > 1e-12:
        raise ArithmeticError("grid weights failed to normalise")
    return p


def draw_alpha_grid(k, n, config: DpmConfig, rng):
    p = alpha_grid_probs(k, n, config.alpha_grid, config.psi)
    return float(config.alpha_grid[rng.choice(p.size, p=p)])


# ---------------------------------------------------------------------------
# base measure

def draw_base(config: DpmConfig, rng, size=1):
    """size independent draws from H0; returns a (size, 4) array."""
    base = config.base
    out = np.empty((size, 4))
    Om = config.Omega
    if config.mu1_pinned:
        out[:, 0] = 0.0
        v2 = Om[1, 1] - Om[0, 1] ** 2 / Om[0, 0]
        out[:, 1] = math.sqrt(v2) * rng.standard_normal(size)
    else:
        out[:, :2] = rng.multivariate_normal(np.zeros(2), Om, size)
    if isinstance(base, DingPrior):
        S = sample_inverse_wishart_2_batch(base.nu0, base.c * np.eye(2), rng, size)
        out[:, 2] = S[:, 0, 1] / np.sqrt(S[:, 0, 0])
        out[:, 3] = S[:, 1, 1] - out[:, 2] ** 2
        out[:, 3] = np.maximum(out[:, 3], np.finfo(float).tiny)
    else:
        phi = 0.5 * base.S0 / rng.gamma(0.5 * base.n0, 1.0, size)
        out[:, 3] = phi
        out[:, 2] = base.g0 + np.sqrt(base.tau * phi) * rng.standard_normal(size)
    return out


# ---------------------------------------------------------------------------
# reassignment (compiled)

@nb.njit(cache=True)
def _logf(u1, u2, sel, m1, m2, g, p):
    e1 = u1 - m1
    if not sel:
        return -0.5 * 1.8378770664093453 - 0.5 * e1 * e1
    e2 = u2 - m2 - g * e1
    return -1.8378770664093453 - 0.5 * math.log(p) - 0.5 * (e1 * e1 + e2 * e2 / p)


@nb.njit(cache=True)
def _reassign(u1, u2, sel, labels, params, k, alpha, aux, unif):
    n = u1.size
    counts = np.zeros(params.shape[0], np.int64)
    for i in range(n):
        counts[labels[i]] += 1
    logw = np.empty(params.shape[0] + 1)
    la = math.log(alpha)
    for i in range(n):
        c = labels[i]
        counts[c] -= 1
        if counts[c] == 0:
            # singleton: its own value serves as the auxiliary
            a0, a1, a2, a3 = params[c, 0], params[c, 1], params[c, 2], params[c, 3]
            last = k - 1
            if c != last:
                for q in range(4):
                    params[c, q] = params[last, q]
                counts[c] = counts[last]
                for t in range(n):
                    if labels[t] == last:
                        labels[t] = c
            counts[last] = 0
            k -= 1
        else:
            a0, a1, a2, a3 = aux[i, 0], aux[i, 1], aux[i, 2], aux[i, 3]
        mx = -np.inf
        for j in range(k):
            logw[j] = math.log(counts[j]) + _logf(u1[i], u2[i], sel[i], params[j, 0],
                                                   params[j, 1], params[j, 2], params[j, 3])
            if logw[j] > mx:
                mx = logw[j]
        logw[k] = la + _logf(u1[i], u2[i], sel[i], a0, a1, a2, a3)
        if logw[k] > mx:
            mx = logw[k]
        tot = 0.0
        for j in range(k + 1):
            logw[j] = math.exp(logw[j] - mx)
            tot += logw[j]
        target = unif[i] * tot
        acc = 0.0
        pick = k
        for j in range(k + 1):
            acc += logw[j]
            if target < acc:
                pick = j
                break
        if pick == k:
            params[k, 0] = a0
            params[k, 1] = a1
            params[k, 2] = a2
            params[k, 3] = a3
            counts[k] = 1
            k += 1
        else:
            counts[pick] += 1
        labels[i] = pick
    return k


def reassign_clusters(state: DpmState, u1, u2, s, config: DpmConfig, rng):
    n = state.labels.size
    work = np.empty((n + 1, 4))
    work[:state.k] = state.params
    aux = draw_base(config, rng, n)
    unif = rng.random(n)
    labels = state.labels.astype(np.int64).copy()
    k = _reassign(np.asarray(u1, dtype=float), np.nan_to_num(np.asarray(u2, dtype=float)),
                  np.asarray(s, dtype=bool), labels, work, state.k, float(state.alpha), aux, unif)
    state.labels = labels
    state.params = work[:k].copy()
    state.touch()
    return state


# ---------------------------------------------------------------------------
# cluster parameter updates

def _cluster_stats(labels, k, u1, u2, s):
    sf = s.astype(float)
    u2 = np.where(s, u2, 0.0)

    def bc(w):
        return np.bincount(labels, weights=w, minlength=k)
    return {
        "n": np.bincount(labels, minlength=k).astype(float),
        "A1": bc(u1),
        "n1": bc(sf),
        "S1": bc(u1 * sf),
        "S2": bc(u2),
        "S11": bc(u1 * u1 * sf),
        "S12": bc(u1 * u2),
        "S22": bc(u2 * u2),
    }


def _resid_sums(st, mu1, mu2):
    """Cross-products of (u1 - mu1, u2 - mu2) over selected members, per cluster."""
    n1 = st["n1"]
    szz = st["S11"] - 2.0 * mu1 * st["S1"] + n1 * mu1**2
    szy = st["S12"] - mu2 * st["S1"] - mu1 * st["S2"] + n1 * mu1 * mu2
    syy = st["S22"] - 2.0 * mu2 * st["S2"] + n1 * mu2**2
    return np.maximum(szz, 0.0), szy, np.maximum(syy, 0.0)


def _gamma_phi_update(szz, szy, syy, n1, gamma, phi, config, rng, rho_prev):
    base = config.base
    k = n1.size
    if isinstance(base, DingPrior):
        g_new, p_new = np.empty(k), np.empty(k)
        for j in range(k):
            g_new[j], p_new[j], _, _ = ding_from_sums(szz[j], szy[j], syy[j], n1[j], base,
                                                     rho_prev[j], rng)
        return g_new, p_new
    a = 1.0 / base.tau + szz
    mean = (base.g0 / base.tau + szy) / a
    if config.gamma_phi == "joint":
        scale = 0.5 * (base.S0 + base.g0**2 / base.tau + syy - a * mean**2)
        phi = scale / rng.gamma(0.5 * (n1 + base.n0), 1.0, k)
        gamma = mean + np.sqrt(phi / a) * rng.standard_normal(k)
        return gamma, phi
    gamma = mean + np.sqrt(phi / a) * rng.standard_normal(k)
    ssr = syy - 2.0 * gamma * szy + gamma**2 * szz
    scale = 0.5 * base.S0 + (gamma - base.g0) ** 2 / (2.0 * base.tau) + 0.5 * ssr
    phi = scale / rng.gamma(0.5 * (base.n0 + n1 + 1.0), 1.0, k)
    return gamma, phi


def remix_cluster_params(state: DpmState, u1, u2, s, config: DpmConfig, rng):
    """Redraw every cluster's parameters given memberships (one Gibbs scan)."""
    s = np.asarray(s, dtype=bool)
    u1 = np.asarray(u1, dtype=float)
    u2 = np.nan_to_num(np.asarray(u2, dtype=float))
    k = state.k
    st = _cluster_stats(state.labels, k, u1, u2, s)
    P = state.params
    mu1, mu2, gamma, phi = P[:, 0].copy(), P[:, 1].copy(), P[:, 2].copy(), P[:, 3].copy()
    Om = config.Omega
    w11, w12, w22 = Om[0, 0], Om[0, 1], Om[1, 1]
    v2 = w22 - w12**2 / w11
    n, n1 = st["n"], st["n1"]
    rho_prev = gamma / np.sqrt(gamma**2 + phi)
    sel_only = n1 == n

    if config.mu1_pinned:
        mu1[:] = 0.0
    else:
        prec1 = 1.0 / w11 + n
        mu1_draw = st["A1"] / prec1 + rng.standard_normal(k) / np.sqrt(prec1)
        mu1 = np.where(sel_only, mu1, mu1_draw)
        # uncensored-only clusters: bivariate draw of (mu1, mu2) given Sigma
        Oinv = np.linalg.inv(Om)
        for j in np.flatnonzero(sel_only):
            Sig = np.array([[1.0, gamma[j]], [gamma[j], phi[j] + gamma[j] ** 2]])
            Sinv = np.linalg.inv(Sig)
            cov = np.linalg.inv(Oinv + n[j] * Sinv)
            m = cov @ Sinv @ np.array([st["S1"][j], st["S2"][j]])
            mu1[j], mu2[j] = rng.multivariate_normal(m, cov)

    # mu2 given mu1, gamma, phi; the prior conditional is N(w12/w11 mu1, v2)
    need_mu2 = ~sel_only if not config.mu1_pinned else np.ones(k, bool)
    prec2 = 1.0 / v2 + n1 / phi
    lin2 = (w12 / w11) * mu1 / v2 + (st["S2"] - gamma * (st["S1"] - n1 * mu1)) / phi
    mu2_draw = lin2 / prec2 + rng.standard_normal(k) / np.sqrt(prec2)
    mu2 = np.where(need_mu2, mu2_draw, mu2)

    szz, szy, syy = _resid_sums(st, mu1, mu2)
    # clusters without selected members get prior draws here (all sums vanish)
    gamma, phi = _gamma_phi_update(szz, szy, syy, n1, gamma, phi, config, rng, rho_prev)
    state.params = np.column_stack([mu1, mu2, gamma, phi])
    state.touch()
    return state


def init_theta(u1, u2, s, config: DpmConfig, rng):
    """One cluster per observation, each drawn from its single-observation posterior."""
    s = np.asarray(s, dtype=bool)
    n = s.size
    state = DpmState(np.arange(n), draw_base(config, rng, n), config.alpha_init)
    if not config.mu1_pinned:
        # censored rows: mu1 from its shrinkage posterior
        w11 = config.Omega[0, 0]
        prec = 1.0 / w11 + 1.0
        cens = ~s
        state.params[cens, 0] = (np.asarray(u1)[cens] / prec
                                 + rng.standard_normal(cens.sum()) / math.sqrt(prec))
        w12, w22 = config.Omega[0, 1], config.Omega[1, 1]
        state.params[cens, 1] = (w12 / w11 * state.params[cens, 0]
                                 + math.sqrt(w22 - w12**2 / w11) * rng.standard_normal(cens.sum()))
        keep = state.params[cens].copy()
        remix_cluster_params(state, u1, u2, s, config, rng)
        state.params[cens] = keep
    else:
        remix_cluster_params(state, u1, u2, s, config, rng)
    state.touch()
    return state


def draw_alpha(state: DpmState, n, config: DpmConfig, rng):
    if config.alpha_prior == "grid":
        return draw_alpha_grid(state.k, n, config, rng)
    return draw_alpha_escobar_west(state.k, n, state.alpha, config.c1, config.c2, rng)


def gibbs_sweep(state: DpmState, u1, u2, s, config: DpmConfig, rng):
    """Concentration, then reassignment, then remixing."""
    n = state.labels.size
    state.alpha = draw_alpha(state, n, config, rng)
    reassign_clusters(state, u1, u2, s, config, rng)
    remix_cluster_params(state, u1, u2, s, config, rng)
    return state


# ---------------------------------------------------------------------------
# predictive and dependence

def sample_error_predictive(state: DpmState, config: DpmConfig, rng, size=1):
    """Parameters for new observations: an existing theta_i w.p. n/(alpha+n), else H0."""
    n = state.labels.size
    fresh = rng.random(size) < state.alpha / (state.alpha + n)
    out = state.params[state.labels[rng.integers(0, n, size)]].copy()
    nf = int(fresh.sum())
    if nf:
        out[fresh] = draw_base(config, rng, nf)
    return ClusterParams.from_array(out)


def dependence_summary(state: DpmState, rng):
    """Correlation of a pseudo-sample u_i ~ N(mu_i, Sigma_i), one draw per observation."""
    P = state.per_obs()
    n = len(P)
    if n < 3:
        raise ValueError("need at least 3 observations")
    e1 = rng.standard_normal(n)
    u1 = P.mu1 + e1
    u2 = P.mu2 + P.gamma * e1 + np.sqrt(P.phi) * rng.standard_normal(n)
    c = np.corrcoef(u1, u2)[0, 1]
    return float(np.clip(c, -1.0, 1.0))
