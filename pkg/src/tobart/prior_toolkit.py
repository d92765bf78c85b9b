"""Calibration and implied distributions of the error-covariance priors.

Three priors on the Type 2 Tobit error covariance [[1, g], [g, phi + g^2]]:

* VH:    phi ~ IG(n0/2, S0/2), gamma | phi ~ N(g0, tau * phi)
* Omori: phi ~ IG(n0/2, S0/2), gamma ~ N(g0, G0) independently
* Ding:  Sigma ~ IW(nu0, c I) rescaled to unit selection variance
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .core_math import (Interval, integrate_adaptive, log_bessel_k, normal_cdf,
                        sample_inverse_wishart_2_batch)


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class CalibrationInput:
    sigma_hat_y2: float
    g0: float = 0.0
    n0: float = 6.0
    tau: float = 0.5
    G0: float = 0.1
    nu0: float = 3.0
    q: float = 0.95


def _need_n0(n0):
    if not n0 > 2:
        raise CalibrationError(f"n0={n0}: prior mean of phi + gamma^2 is undefined for n0 <= 2")


def vh_calibrate_S0(inp: CalibrationInput) -> float:
    _need_n0(inp.n0)
    if not inp.sigma_hat_y2 > inp.g0**2:
        raise CalibrationError("VH calibration needs sigma_hat_y2 > g0^2")
    return (inp.sigma_hat_y2 - inp.g0**2) * (inp.n0 - 2.0) / (1.0 + inp.tau)


def omori_calibrate_S0(inp: CalibrationInput) -> float:
    _need_n0(inp.n0)
    if not inp.sigma_hat_y2 > inp.G0 * (1.0 + inp.g0**2):
        raise CalibrationError("Omori calibration needs sigma_hat_y2 > G0 (1 + g0^2)")
    return (inp.n0 - 2.0) * (inp.sigma_hat_y2 - inp.G0 * (1.0 + inp.g0**2))


def vh_outcome_var_prior_mean(tau, S0, n0, g0=0.0):
    _need_n0(n0)
    return (1.0 + tau) * S0 / (n0 - 2.0) + g0**2


def omori_outcome_var_prior_mean(G0, S0, n0, g0=0.0):
    _need_n0(n0)
    return S0 / (n0 - 2.0) + G0 * (1.0 + g0**2)


def ding_calibrate_c(sigma_hat_y2, nu0=3.0, q=0.95) -> float:
    """c such that the q-quantile of IG((nu0-1)/2, c/2) equals sigma_hat_y2."""
    if not nu0 > 1:
        raise CalibrationError("nu0 must exceed 1")
    if not 0 < q < 1:
        raise CalibrationError("q must lie in (0, 1)")
    # P(X <= s) = Q(a, c / (2 s)) for X ~ IG(a, c/2)
    return 2.0 * sigma_hat_y2 * float(special.gammainccinv(0.5 * (nu0 - 1.0), q))


def ding_c_chisq_rule(sigma_hat_y2, nu0=3.0, q=0.95) -> float:
    """Alternative rule: sigma_hat_y2 times the (1-q) quantile of chi^2 with nu0 df."""
    return sigma_hat_y2 * float(special.chdtri(nu0, q))


# ---------------------------------------------------------------------------
# implied distributions of rho

def vh_rho_cdf(rho, tau):
    """CDF of rho = gamma / sqrt(gamma^2 + phi) under the VH prior with g0 = 0."""
    rho = np.asarray(rho, dtype=float)
    if np.any(np.abs(rho) >= 1) or tau <= 0:
        raise ValueError("need |rho| < 1 and tau > 0")
    t = np.sqrt(rho**2 / (tau * (1.0 - rho**2)))
    out = np.where(rho >= 0, normal_cdf(t), 1.0 - normal_cdf(t))
    return out if out.ndim else float(out)


def vh_rho_modes(tau):
    if tau <= 0:
        raise ValueError("tau must be positive")
    if tau <= 1.0 / 3.0:
        return [0.0]
    r = math.sqrt(1.0 - 1.0 / (3.0 * tau))
    return [-r, r]


def ding_rho_density(rho, nu0):
    rho = np.asarray(rho, dtype=float)
    a = 0.5 * (nu0 - 3.0)
    log_norm = special.betaln(0.5, 0.5 * (nu0 - 1.0))
    out = np.exp(a * np.log1p(-rho**2) - log_norm)
    return out if out.ndim else float(out)


def ding_rho_cdf(rho, nu0):
    rho = np.asarray(rho, dtype=float)
    half = 0.5 * special.betainc(0.5, 0.5 * (nu0 - 1.0), rho**2)
    out = 0.5 + np.sign(rho) * half
    return out if out.ndim else float(out)


def ding_sigma2_marginal_cdf(x, nu0, c):
    """CDF of the outcome variance under the Ding prior: IG((nu0-1)/2, c/2)."""
    x = np.asarray(x, dtype=float)
    out = special.gammaincc(0.5 * (nu0 - 1.0), 0.5 * c / x)
    return out if out.ndim else float(out)


def omori_rho_logdensity(rho, n0, S0, G0):
    """Unnormalised log density of rho under the Omori prior (g0 = 0)."""
    nu = 0.5 * (n0 - 1.0)
    kappa = math.sqrt(S0 / G0)
    r = abs(float(rho))
    if r >= 1.0:
        return -math.inf
    one_m = 1.0 - r * r
    lead = -0.25 * (n0 + 5.0) * math.log(one_m)
    if r < 1e-12 and nu > 0:
        # |rho|^nu K_nu(kappa |rho| / sqrt(1 - rho^2)) -> Gamma(nu)/2 (2 sqrt(1-rho^2)/kappa)^nu
        return lead + math.lgamma(nu) - math.log(2.0) + nu * math.log(2.0 * math.sqrt(one_m) / kappa)
    if r == 0.0:
        return math.inf
    x = kappa * r / math.sqrt(one_m)
    return lead + nu * math.log(r) + log_bessel_k(nu, x)


def _omori_piece(a, b, n0, S0, G0, tol):
    def f(xs):
        return np.array([math.exp(omori_rho_logdensity(v, n0, S0, G0)) for v in xs])
    return integrate_adaptive(f, Interval(a, b), tol=tol, vectorized=True)


def omori_rho_cdf(rho, n0, S0, G0, tol=1e-10):
    """CDF of rho under the Omori prior by quadrature of its Bessel-K density.

    Accepts a scalar or an array; points are integrated piecewise from 0
    outwards and normalised by twice the half-line mass.
    """
    scalar = np.ndim(rho) == 0
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if np.any(np.abs(rho) >= 1):
        raise ValueError("need |rho| < 1")
    half = _omori_piece(0.0, 1.0, n0, S0, G0, tol)
    r = np.abs(rho)
    order = np.argsort(r)
    mass = np.empty(r.size)
    acc, prev = 0.0, 0.0
    for idx in order:
        if r[idx] > prev:
            acc += _omori_piece(prev, r[idx], n0, S0, G0, tol)
            prev = r[idx]
        mass[idx] = acc
    out = 0.5 + np.sign(rho) * 0.5 * mass / half
    return float(out[0]) if scalar else out


def omori_rho_mode_count(n0, S0, G0, grid=2001):
    rs = np.linspace(-0.999, 0.999, grid)
    ld = np.array([omori_rho_logdensity(v, n0, S0, G0) for v in rs])
    inner = (ld[1:-1] > ld[:-2]) & (ld[1:-1] >= ld[2:])
    return int(inner.sum())


# ---------------------------------------------------------------------------
# prior draws

def vh_prior_draws(size, g0, tau, n0, S0, rng):
    phi = 0.5 * S0 / rng.gamma(0.5 * n0, 1.0, size)
    gamma = g0 + np.sqrt(tau * phi) * rng.standard_normal(size)
    return gamma, phi


def omori_prior_draws(size, g0, G0, n0, S0, rng):
    phi = 0.5 * S0 / rng.gamma(0.5 * n0, 1.0, size)
    gamma = g0 + math.sqrt(G0) * rng.standard_normal(size)
    return gamma, phi


def ding_prior_draws(size, nu0, c, rng):
    """(gamma, phi, sigma2_outcome) from IW(nu0, c I) rescaled to unit selection variance."""
    S = sample_inverse_wishart_2_batch(nu0, c * np.eye(2), rng, size)
    s11, s12, s22 = S[:, 0, 0], S[:, 0, 1], S[:, 1, 1]
    gamma = s12 / np.sqrt(s11)
    phi = s22 - s12**2 / s11
    return gamma, phi, s22


def rho_of(gamma, phi):
    return gamma / np.sqrt(gamma**2 + phi)


def vh_outcome_var_cdf_mc(x, tau, S0, n0, g0=0.0, draws=1_000_000, rng=None):
    """Monte-Carlo CDF of phi + gamma^2 under VH; returns (estimate, standard error)."""
    rng = np.random.default_rng(0) if rng is None else rng
    gamma, phi = vh_prior_draws(draws, g0, tau, n0, S0, rng)
    hit = (phi + gamma**2) <= x
    p = float(hit.mean())
    return p, math.sqrt(p * (1.0 - p) / draws)


# ---------------------------------------------------------------------------
# table for the command line

def calibration_table(sigma_hat_y2, g0=0.0, n0=6.0, tau=0.5, G0=0.1, nu0=3.0, q=0.95):
    inp = CalibrationInput(sigma_hat_y2, g0, n0, tau, G0, nu0, q)
    S0_vh = vh_calibrate_S0(inp)
    S0_om = omori_calibrate_S0(inp)
    c = ding_calibrate_c(sigma_hat_y2, nu0, q)
    grid = np.round(np.linspace(-1.0, 1.0, 21), 10)
    inner = np.abs(grid) < 1
    def wrap(fn):
        out = np.where(grid < 0, 0.0, 1.0)
        out[inner] = fn(grid[inner])
        return out
    return {
        "sigma_hat_y2": sigma_hat_y2,
        "S0_vh": S0_vh,
        "S0_omori": S0_om,
        "c_ding": c,
        "c_ding_chisq_rule": ding_c_chisq_rule(sigma_hat_y2, nu0, q),
        "prior_mean_vh": vh_outcome_var_prior_mean(tau, S0_vh, n0, g0),
        "prior_mean_omori": omori_outcome_var_prior_mean(G0, S0_om, n0, g0),
        "vh_modes": vh_rho_modes(tau),
        "omori_modes": omori_rho_mode_count(n0, S0_om, G0),
        "grid": grid,
        "cdf_vh": wrap(lambda r: vh_rho_cdf(r, tau)),
        "cdf_omori": wrap(lambda r: omori_rho_cdf(r, n0, S0_om, G0)),
        "cdf_ding": wrap(lambda r: ding_rho_cdf(r, nu0)),
    }
