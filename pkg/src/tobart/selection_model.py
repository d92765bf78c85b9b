"""Type 2 Tobit samplers with linear or sum-of-trees mean functions.

Latent selection z* = f_z(w) + xi and outcome y* = f_y(x) + eta with
Cov(xi, eta) = [[1, gamma], [gamma, phi + gamma^2]]; y is seen only when
z* >= 0. Censored outcomes are never imputed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import prior_toolkit as pt
from .bart_core import BartConfig, Forest, sweep_forest, sweep_forest_marginal
from .core_math import (make_rng, sample_inverse_gamma, sample_inverse_wishart_2,
                        truncnorm_std)


# ---------------------------------------------------------------------------
# data and parameter containers

@dataclass
class Dataset:
    X: np.ndarray
    W: np.ndarray
    y: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.W = np.atleast_2d(np.asarray(self.W, dtype=float))
        self.y = np.asarray(self.y, dtype=float)
        s = np.asarray(self.s)
        if not np.all((s == 0) | (s == 1)):
            raise ValueError("selection indicators must be 0/1")
        self.s = s.astype(bool)
        n = self.s.size
        if n < 1:
            raise ValueError("empty dataset")
        if self.X.shape[0] != n or self.W.shape[0] != n or self.y.size != n:
            raise ValueError("X, W, y and s must have the same number of rows")
        present = ~np.isnan(self.y)
        bad = np.flatnonzero(present != self.s)
        if bad.size:
            raise ValueError(f"outcome must be present exactly where selected (row {bad[0]})")

    @property
    def n(self):
        return self.s.size

    @property
    def n1(self):
        return int(self.s.sum())

    def require_both(self):
        if self.n1 == 0 or self.n1 == self.n:
            raise ValueError("fitting needs at least one selected and one unselected row")


@dataclass
class GaussianErrorState:
    gamma: float = 0.0
    phi: float = 1.0

    def __post_init__(self):
        if not self.phi > 0:
            raise ValueError("phi must be positive")

    def rho(self):
        return self.gamma / math.sqrt(self.gamma**2 + self.phi)

    def sigma_y2(self):
        return self.phi + self.gamma**2

    def cov(self):
        return np.array([[1.0, self.gamma], [self.gamma, self.phi + self.gamma**2]])


@dataclass(frozen=True)
class VHPrior:
    g0: float = 0.0
    tau: float = 0.5
    n0: float = 6.0
    S0: float | None = None

    def resolved(self, sigma_hat_y2):
        if self.S0 is not None:
            return self
        S0 = pt.vh_calibrate_S0(pt.CalibrationInput(sigma_hat_y2, self.g0, self.n0, self.tau))
        return replace(self, S0=S0)


@dataclass(frozen=True)
class OmoriPrior:
    g0: float = 0.0
    G0: float | None = None
    n0: float = 6.0
    S0: float | None = None

    def resolved(self, sigma_hat_y2):
        G0 = 0.1 * sigma_hat_y2 if self.G0 is None else self.G0
        S0 = self.S0
        if S0 is None:
            S0 = pt.omori_calibrate_S0(pt.CalibrationInput(sigma_hat_y2, self.g0, self.n0, G0=G0))
        return replace(self, G0=G0, S0=S0)


@dataclass(frozen=True)
class DingPrior:
    nu0: float = 3.0
    c: float | None = None
    q: float = 0.95

    def resolved(self, sigma_hat_y2):
        if self.c is not None:
            return self
        return replace(self, c=pt.ding_calibrate_c(sigma_hat_y2, self.nu0, self.q))


@dataclass
class LinearMean:
    theta0: np.ndarray | None = None
    Theta0: np.ndarray | None = None
    beta0: np.ndarray | None = None
    B0: np.ndarray | None = None
    prior_var: float = 100.0

    def resolved(self, pw, px):
        def vec(v, p):
            return np.zeros(p) if v is None else np.asarray(v, dtype=float)

        def mat(M, p):
            return self.prior_var * np.eye(p) if M is None else np.asarray(M, dtype=float)
        return LinearMean(vec(self.theta0, pw), mat(self.Theta0, pw), vec(self.beta0, px),
                          mat(self.B0, px), self.prior_var)


@dataclass
class TreesMean:
    m_y: int = 200
    m_z: int = 50
    alpha_split: float = 0.95
    beta_split: float = 2.0
    e: float = 2.0
    min_leaf: int = 5
    p_grow: float = 0.25
    p_prune: float = 0.25
    numcut: int | None = 100

    def config(self, m):
        return BartConfig(m=m, alpha_split=self.alpha_split, beta_split=self.beta_split, e=self.e,
                          min_leaf=self.min_leaf, p_grow=self.p_grow, p_prune=self.p_prune,
                          numcut=self.numcut)


@dataclass
class PosteriorDraws:
    iteration: np.ndarray
    gamma: np.ndarray
    phi: np.ndarray
    rho: np.ndarray
    sigma_y2: np.ndarray
    fy_test: np.ndarray | None = None
    fz_test: np.ndarray | None = None
    fy_train: np.ndarray | None = None
    fz_train: np.ndarray | None = None
    theta: np.ndarray | None = None
    beta: np.ndarray | None = None
    mu1_test: np.ndarray | None = None
    mu2_test: np.ndarray | None = None
    gamma_test: np.ndarray | None = None
    k: np.ndarray | None = None
    alpha: np.ndarray | None = None
    dependence: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.iteration)


# ---------------------------------------------------------------------------
# full conditionals

def draw_latent_z(f_z, f_y, y, s, gamma, phi, rng, mu1=0.0, mu2=0.0):
    """Latent selection draws; gamma, phi, mu1, mu2 may be per-observation arrays.

    Censored rows: TN_(-inf,0)(f_z + mu1, 1). Selected rows:
    TN_[0,inf)(f_z + mu1 + gamma (y - f_y - mu2)/(phi + gamma^2), phi/(phi + gamma^2)).
    f_y and y are full-length; their values on censored rows are ignored.
    """
    s = np.asarray(s, dtype=bool)
    n = s.size
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (n,))
    phi = np.broadcast_to(np.asarray(phi, dtype=float), (n,))
    mu1 = np.broadcast_to(np.asarray(mu1, dtype=float), (n,))
    mu2 = np.broadcast_to(np.asarray(mu2, dtype=float), (n,))
    tot = phi + gamma**2
    resid = np.where(s, np.nan_to_num(np.asarray(y, dtype=float) - f_y - mu2), 0.0)
    mean = f_z + mu1 + np.where(s, gamma * resid / tot, 0.0)
    sd = np.where(s, np.sqrt(phi / tot), 1.0)
    lo = np.where(s, -mean / sd, -np.inf)
    hi = np.where(s, np.inf, -mean / sd)
    z = mean + sd * truncnorm_std(lo, hi, rng)
    z = np.where(s, np.maximum(z, 0.0), np.minimum(z, -np.finfo(float).tiny))
    return z


def draw_latent_y_binary(z_star, f_z, f_y, gamma, phi, y_binary, rng):
    """Latent outcome for binary y on selected rows: sign of y* agrees with y."""
    yb = np.asarray(y_binary).astype(bool)
    mean = f_y + gamma * (z_star - f_z)
    sd = math.sqrt(phi)
    lo = np.where(yb, -mean / sd, -np.inf)
    hi = np.where(yb, np.inf, -mean / sd)
    ys = mean + sd * truncnorm_std(lo, hi, rng)
    return np.where(yb, np.maximum(ys, 0.0), np.minimum(ys, 0.0))


def _sums(z_tilde, y_tilde):
    z = np.asarray(z_tilde, dtype=float)
    y = np.asarray(y_tilde, dtype=float)
    return z.size, float(z @ z), float(z @ y), float(y @ y)


def gamma_conditional(z_tilde, y_tilde, phi, prior):
    """(mean, variance) of gamma | phi, residuals."""
    _, szz, szy, _ = _sums(z_tilde, y_tilde)
    if isinstance(prior, VHPrior):
        a = 1.0 / prior.tau + szz
        return (prior.g0 / prior.tau + szy) / a, phi / a
    if isinstance(prior, OmoriPrior):
        prec = 1.0 / prior.G0 + szz / phi
        return (prior.g0 / prior.G0 + szy / phi) / prec, 1.0 / prec
    raise TypeError("gamma draw needs a VH or Omori prior")


def draw_gamma(z_tilde, y_tilde, phi, prior, rng):
    mean, var = gamma_conditional(z_tilde, y_tilde, phi, prior)
    return mean + math.sqrt(var) * rng.standard_normal()


def phi_conditional(z_tilde, y_tilde, gamma, prior):
    """(shape, scale) of the inverse-gamma phi | gamma, residuals."""
    z = np.asarray(z_tilde, dtype=float)
    y = np.asarray(y_tilde, dtype=float)
    r = y - gamma * z
    ssr = float(r @ r)
    if isinstance(prior, VHPrior):
        return (0.5 * (prior.n0 + z.size + 1.0),
                0.5 * prior.S0 + (gamma - prior.g0) ** 2 / (2.0 * prior.tau) + 0.5 * ssr)
    if isinstance(prior, OmoriPrior):
        return 0.5 * (prior.n0 + z.size), 0.5 * prior.S0 + 0.5 * ssr
    raise TypeError("phi draw needs a VH or Omori prior")


def draw_phi(z_tilde, y_tilde, gamma, prior, rng):
    shape, scale = phi_conditional(z_tilde, y_tilde, gamma, prior)
    return sample_inverse_gamma(shape, scale, rng)


def draw_gamma_phi_joint(z_tilde, y_tilde, prior, rng):
    """Normal-inverse-gamma draw of (gamma, phi) with phi marginalised first."""
    if not isinstance(prior, VHPrior):
        raise TypeError("the joint (gamma, phi) draw is only conjugate under the VH prior")
    n1, szz, szy, syy = _sums(z_tilde, y_tilde)
    a = 1.0 / prior.tau + szz
    mean = (prior.g0 / prior.tau + szy) / a
    scale = 0.5 * (prior.S0 + prior.g0**2 / prior.tau + syy - a * mean**2)
    phi = sample_inverse_gamma(0.5 * (n1 + prior.n0), scale, rng)
    gamma = mean + math.sqrt(phi / a) * rng.standard_normal()
    return gamma, phi


def ding_from_sums(szz, szy, syy, n1, prior: DingPrior, rho, rng, max_tries=100):
    """Parameter-expanded inverse-Wishart update from residual cross-products.

    Returns (gamma, phi, sigma1_2, redraws).
    """
    redraws = 0
    for _ in range(max_tries):
        sigma1_2 = prior.c / ((1.0 - rho**2) * rng.chisquare(prior.nu0))
        s1 = math.sqrt(sigma1_2)
        S = np.array([[prior.c + sigma1_2 * szz, s1 * szy], [s1 * szy, prior.c + syy]])
        St = sample_inverse_wishart_2(n1 + prior.nu0, S, rng)
        om12 = St[0, 1] / math.sqrt(St[0, 0])
        phi = St[1, 1] - om12**2
        if phi > 0:
            return om12, phi, sigma1_2, redraws
        redraws += 1
    raise ArithmeticError("inverse-Wishart draw kept producing a singular covariance")


def draw_omega_ding(z_tilde, y_tilde, prior: DingPrior, rho, rng, max_tries=100):
    """Ding-prior update of (gamma, phi); returns (gamma, phi, sigma1_2, redraws)."""
    n1, szz, szy, syy = _sums(z_tilde, y_tilde)
    return ding_from_sums(szz, szy, syy, n1, prior, rho, rng, max_tries)


def linear_coef_posterior(z_star, y, W, X, s, gamma, phi, prior: LinearMean):
    """Mean and covariance of psi = (theta, beta) given latent z and gamma, phi."""
    s = np.asarray(s, dtype=bool)
    W = np.asarray(W, dtype=float)
    X = np.asarray(X, dtype=float)
    pw, px = W.shape[1], X.shape[1]
    Wc, zc = W[~s], z_star[~s]
    Ws, Xs, zs, ys = W[s], X[s], z_star[s], y[s]
    P = np.zeros((pw + px, pw + px))
    b = np.zeros(pw + px)
    P[:pw, :pw] = np.linalg.inv(prior.Theta0)
    P[pw:, pw:] = np.linalg.inv(prior.B0)
    b[:pw] = P[:pw, :pw] @ prior.theta0
    b[pw:] = P[pw:, pw:] @ prior.beta0
    # censored rows: selection block only, unit variance
    P[:pw, :pw] += Wc.T @ Wc
    b[:pw] += Wc.T @ zc
    # selected rows: bivariate with Sigma^-1 = [[phi+g^2, -g], [-g, 1]] / phi
    P[:pw, :pw] += (phi + gamma**2) / phi * (Ws.T @ Ws)
    P[pw:, pw:] += Xs.T @ Xs / phi
    cross = -gamma / phi * (Ws.T @ Xs)
    P[:pw, pw:] += cross
    P[pw:, :pw] += cross.T
    b[:pw] += Ws.T @ ((phi + gamma**2) * zs - gamma * ys) / phi
    b[pw:] += Xs.T @ (ys - gamma * zs) / phi
    try:
        cho = np.linalg.cholesky(P)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError("coefficient posterior precision is singular") from exc
    cov = np.linalg.inv(P)
    return cov @ b, cov, cho


def draw_linear_coefficients(z_star, y, W, X, s, gamma, phi, prior: LinearMean, rng):
    mean, _, cho = linear_coef_posterior(z_star, y, W, X, s, gamma, phi, prior)
    # P = L L^T, so L^-T e has covariance P^-1
    draw = mean + np.linalg.solve(cho.T, rng.standard_normal(mean.size))
    pw = np.asarray(W).shape[1]
    return draw[:pw], draw[pw:]


# ---------------------------------------------------------------------------
# chain

class ChainError(RuntimeError):
    pass


def _error_update(zt, yt, prior, state, mode, rng, fixed):
    if "gamma" in fixed and "phi" in fixed:
        return
    if isinstance(prior, DingPrior):
        g, p, _, red = draw_omega_ding(zt, yt, prior, state.rho(), rng)
        state.gamma, state.phi = g, p
        state.redraws += red
        return
    if "gamma" in fixed:
        state.phi = draw_phi(zt, yt, state.gamma, prior, rng)
    elif "phi" in fixed:
        state.gamma = draw_gamma(zt, yt, state.phi, prior, rng)
    elif mode == "joint" and isinstance(prior, VHPrior):
        state.gamma, state.phi = draw_gamma_phi_joint(zt, yt, prior, rng)
    else:
        state.gamma = draw_gamma(zt, yt, state.phi, prior, rng)
        state.phi = draw_phi(zt, yt, state.gamma, prior, rng)


@dataclass
class _ErrState:
    gamma: float
    phi: float
    redraws: int = 0

    def rho(self):
        return self.gamma / math.sqrt(self.gamma**2 + self.phi)


def run_chain(data: Dataset, mean=None, prior=None, sampler="standard", iters=1500, burnin=500,
              thin=1, rng=0, X_test=None, W_test=None, errors=None, gamma_phi="joint",
              binary=False, fixed=None, keep_train=False, allow_all_selected=False):
    """Run one Gibbs chain and return the retained draws.

    mean: TreesMean (default) or LinearMean. prior: VHPrior (default), OmoriPrior
    or DingPrior; hyperparameters left as None are calibrated from the
    selected outcomes. sampler: "standard" or "marginalized" (trees only).
    errors: None for Gaussian errors or a dpm_errors.DpmConfig.
    fixed: optional {"gamma": value, "phi": value} held constant.
    """
    from . import dpm_errors as dpm

    rng = make_rng(rng)
    mean = TreesMean() if mean is None else mean
    prior = VHPrior() if prior is None else prior
    fixed = dict(fixed or {})
    if not iters > burnin >= 0:
        raise ValueError("need iters > burnin >= 0")
    if thin < 1:
        raise ValueError("thin must be at least 1")
    if allow_all_selected:
        if data.n1 == 0:
            raise ValueError("fitting needs at least one selected row")
    else:
        data.require_both()
    trees = isinstance(mean, TreesMean)
    if sampler not in ("standard", "marginalized"):
        raise ValueError(f"unknown sampler {sampler!r}")
    if sampler == "marginalized":
        if not trees:
            raise ValueError("the marginalized sampler needs tree mean functions")
        if isinstance(prior, DingPrior) or errors is not None:
            raise ValueError("the marginalized sampler supports VH and Omori Gaussian errors only")
    if binary and errors is not None:
        raise ValueError("binary outcomes are supported with Gaussian errors only")

    s = data.s
    sel = np.flatnonzero(s)
    n = data.n
    y_raw = data.y[sel]
    if binary:
        if not np.all((y_raw == 0) | (y_raw == 1)):
            raise ValueError("binary mode needs 0/1 outcomes")
        mid, scale = 0.0, 1.0
    elif trees:
        lo, hi = y_raw.min(), y_raw.max()
        scale = hi - lo if hi > lo else 1.0
        mid = 0.5 * (hi + lo)
    else:
        mid, scale = 0.0, 1.0
    ys = (y_raw - mid) / scale
    sig_hat2 = float(np.var(ys, ddof=1)) if ys.size > 1 else 1.0
    if binary:
        sig_hat2 = 1.0
    prior = prior.resolved(sig_hat2)

    st = _ErrState(0.0, sig_hat2)
    if "gamma" in fixed:
        st.gamma = fixed["gamma"] / scale
    if "phi" in fixed:
        st.phi = fixed["phi"] / scale**2

    z = np.where(s, 0.5, -0.5)
    y_cur = ys.copy()
    if binary:
        y_cur = np.where(y_raw == 1, 0.5, -0.5)

    X_sel = data.X[sel]
    if trees:
        cfg_z = mean.config(mean.m_z)
        cfg_y = mean.config(mean.m_y)
        fz = Forest(data.W, cfg_z, sigma0=3.0 / (cfg_z.e * math.sqrt(cfg_z.m)))
        half = 3.0 if binary else 0.5
        fy = Forest(X_sel, cfg_y, sigma0=half / (cfg_y.e * math.sqrt(cfg_y.m)))
        fz.set_constant(0.0)
        fy.set_constant(0.0)
        fz_vals, fy_vals = fz.fit, fy.fit
    else:
        lin = mean.resolved(data.W.shape[1], data.X.shape[1])
        theta = lin.theta0.copy()
        beta = lin.beta0.copy()
        fz_vals = data.W @ theta
        fy_vals = X_sel @ beta

    dstate = None
    if errors is not None:
        errors = errors.resolved(n, prior, sig_hat2)
        u1 = z - fz_vals
        u2 = np.zeros(n)
        u2[sel] = y_cur - fy_vals
        dstate = dpm.init_theta(u1, u2, s, errors, rng)

    keep = []
    rec = {k: [] for k in ("gamma", "phi", "fy_test", "fz_test", "fy_train", "fz_train", "theta",
                           "beta", "mu1_test", "mu2_test", "gamma_test", "k", "alpha",
                           "dependence")}
    n_test = None if X_test is None else np.asarray(X_test).shape[0]
    y_full = np.full(n, np.nan)

    for it in range(iters):
        try:
            # latent selection (and binary outcome) draws
            y_full[sel] = y_cur
            fy_full = np.zeros(n)
            fy_full[sel] = fy_vals
            if dstate is None:
                z = draw_latent_z(fz_vals, fy_full, y_full, s, st.gamma, st.phi, rng)
            else:
                P = dstate.per_obs()
                z = draw_latent_z(fz_vals, fy_full, y_full, s, P.gamma, P.phi, rng, P.mu1, P.mu2)
            if binary:
                y_cur = draw_latent_y_binary(z[sel], fz_vals[sel], fy_vals, st.gamma, st.phi,
                                             y_raw, rng)
            if trees:
                if dstate is None:
                    g, p = st.gamma, st.phi
                    w = np.ones(n)
                    w[sel] = (g * g + p) / p
                    target = z.copy()
                    target[sel] -= (y_cur - fy_vals) * g / (g * g + p)
                    sweep_forest(fz, target, w, 1.0, rng)
                    ztil = z[sel] - fz.fit[sel]
                    if sampler == "marginalized" and "gamma" not in fixed:
                        if isinstance(prior, VHPrior):
                            gvar = prior.tau * st.phi
                        else:
                            gvar = prior.G0
                        st.gamma = sweep_forest_marginal(fy, y_cur, ztil, st.phi, gvar, prior.g0, rng)
                    else:
                        sweep_forest(fy, y_cur - g * ztil, np.ones(sel.size), p, rng)
                else:
                    P = dstate.per_obs()
                    gs, ps = P.gamma[sel], P.phi[sel]
                    w = np.ones(n)
                    w[sel] = (gs**2 + ps) / ps
                    target = z - P.mu1
                    target[sel] -= (y_cur - P.mu2[sel] - fy_vals) * gs / (gs**2 + ps)
                    sweep_forest(fz, target, w, 1.0, rng)
                    ztil = z[sel] - P.mu1[sel] - fz.fit[sel]
                    sweep_forest(fy, y_cur - P.mu2[sel] - gs * ztil, 1.0 / ps, 1.0, rng)
                fz_vals, fy_vals = fz.fit, fy.fit
            else:
                theta, beta = draw_linear_coefficients(z, y_full, data.W, data.X, s, st.gamma,
                                                       st.phi, lin, rng)
                fz_vals = data.W @ theta
                fy_vals = X_sel @ beta
            zt = z[sel] - fz_vals[sel]
            yt = y_cur - fy_vals
            if dstate is None:
                if sampler == "marginalized":
                    if "phi" not in fixed:
                        st.phi = draw_phi(zt, yt, st.gamma, prior, rng)
                else:
                    _error_update(zt, yt, prior, st, gamma_phi, rng, fixed)
            else:
                u1 = z - fz_vals
                u2 = np.zeros(n)
                u2[sel] = yt
                dpm.gibbs_sweep(dstate, u1, u2, s, errors, rng)
        except (ArithmeticError, ValueError) as exc:
            raise ChainError(f"iteration {it}: {exc}") from exc

        if it >= burnin and (it - burnin) % thin == 0:
            keep.append(it)
            if dstate is None:
                rec["gamma"].append(st.gamma * scale)
                rec["phi"].append(st.phi * scale**2)
            else:
                P = dstate.per_obs()
                rec["gamma"].append(float(P.gamma.mean()) * scale)
                rec["phi"].append(float(P.phi.mean()) * scale**2)
                rec["k"].append(dstate.k)
                rec["alpha"].append(dstate.alpha)
                rec["dependence"].append(dpm.dependence_summary(dstate, rng))
                if n_test:
                    pred = dpm.sample_error_predictive(dstate, errors, rng, size=n_test)
                    rec["mu1_test"].append(pred.mu1)
                    rec["mu2_test"].append(pred.mu2 * scale)
                    rec["gamma_test"].append(pred.gamma * scale)
            if trees:
                if X_test is not None:
                    rec["fy_test"].append(mid + scale * fy.predict(X_test))
                if W_test is not None:
                    rec["fz_test"].append(fz.predict(W_test))
                if keep_train:
                    rec["fy_train"].append(mid + scale * fy.predict(data.X))
                    rec["fz_train"].append(fz.fit.copy())
            else:
                rec["theta"].append(theta.copy())
                rec["beta"].append(beta.copy())
                if X_test is not None:
                    rec["fy_test"].append(np.asarray(X_test) @ beta)
                if W_test is not None:
                    rec["fz_test"].append(np.asarray(W_test) @ theta)
                if keep_train:
                    rec["fy_train"].append(data.X @ beta)
                    rec["fz_train"].append(fz_vals.copy())

    gamma = np.array(rec["gamma"])
    phi = np.array(rec["phi"])

    def arr(key):
        return np.array(rec[key]) if rec[key] else None

    info = {"y_mid": mid, "y_scale": scale, "sigma_hat_y2": sig_hat2 * scale**2, "prior": prior,
            "ding_redraws": st.redraws}
    if trees:
        info["accepted_z"] = fz.accepted.copy()
        info["accepted_y"] = fy.accepted.copy()
    return PosteriorDraws(
        iteration=np.array(keep), gamma=gamma, phi=phi, rho=gamma / np.sqrt(gamma**2 + phi),
        sigma_y2=phi + gamma**2, fy_test=arr("fy_test"), fz_test=arr("fz_test"),
        fy_train=arr("fy_train"), fz_train=arr("fz_train"), theta=arr("theta"),
        beta=arr("beta"), mu1_test=arr("mu1_test"), mu2_test=arr("mu2_test"),
        gamma_test=arr("gamma_test"), k=arr("k"), alpha=arr("alpha"),
        dependence=arr("dependence"), info=info)
