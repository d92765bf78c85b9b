"""Simulation designs and a small scenario runner."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from . import estimands as est
from .bart_core import fit_bart, fit_probit_bart
from .core_math import make_rng, normal_cdf
from .selection_model import Dataset, TreesMean, VHPrior, run_chain

log = logging.getLogger(__name__)

ERROR_KINDS = ("normal", "t5", "normal_mixture")
T_RHO = 1.0 / math.sqrt(2.0)
MIXTURE_RHO = 0.5


@dataclass
class DgpSpec:
    family: str = "brewer"
    dgp: int = 1
    rho: float = 0.0
    error_kind: str = "normal"
    n_train: int = 2500
    n_test: int = 500
    reps: int = 3
    seed: int = 0
    p: int | None = None  # 10 for the linear design, 50 for the treatment-effect one

    def __post_init__(self):
        if self.family not in ("brewer", "iqbal", "cate"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == "brewer" and self.dgp not in (1, 2, 3, 5):
            raise ValueError(f"unsupported DGP id {self.dgp}")
        if self.error_kind not in ERROR_KINDS:
            raise ValueError(f"unknown error kind {self.error_kind!r}")
        if self.n_train < 1 or self.n_test < 0:
            raise ValueError("bad sample sizes")


@dataclass
class SimTruth:
    f_y: np.ndarray
    f_z: np.ndarray
    sel_prob: np.ndarray
    y_latent: np.ndarray
    s: np.ndarray
    cate: np.ndarray | None = None
    sel_effect: np.ndarray | None = None
    treat: np.ndarray | None = None


@dataclass
class SimData:
    train: Dataset
    test: Dataset
    truth_train: SimTruth
    truth_test: SimTruth
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Brewer-style designs

OUTCOME_WEIGHTS = 0.4 / np.arange(1, 11) ** 2
SELECTION_WEIGHTS = 0.1 / (10.5 - np.arange(1, 11)) ** 2


def _ar_cov(p, r=0.3):
    idx = np.arange(p)
    return r ** np.abs(idx[:, None] - idx[None, :])


def _mix_draw(size, rng):
    """0.8 N(-0.5, 0.2) + 0.2 N(2, 0.4), variances as written."""
    hi = rng.random(size) < 0.2
    return np.where(hi, 2.0 + math.sqrt(0.4) * rng.standard_normal(size),
                    -0.5 + math.sqrt(0.2) * rng.standard_normal(size))


MIX5_VAR = 0.8 * (0.2 + 0.25) + 0.2 * (0.4 + 4.0)


def _mix5_cdf(x):
    return 0.8 * normal_cdf((x + 0.5) / math.sqrt(0.2)) + 0.2 * normal_cdf((x - 2.0) / math.sqrt(0.4))


def brewer_errors(kind, rho, size, rng, dgp=1):
    """(xi, eta) draws and the survival function of xi (for P(xi >= -f_z))."""
    if dgp == 5:
        xi = _mix_draw(size, rng)
        v = xi / math.sqrt(MIX5_VAR)
        eta = rho * v + math.sqrt(1.0 - rho**2) * _mix_draw(size, rng) / math.sqrt(MIX5_VAR)
        return xi, eta, lambda f: 1.0 - _mix5_cdf(-f)
    if kind == "normal":
        xi = rng.standard_normal(size)
        eta = rho * xi + math.sqrt(1.0 - rho**2) * rng.standard_normal(size)
        return xi, eta, normal_cdf
    if kind == "t5":
        xi = rng.standard_t(5, size)
        eta = T_RHO * xi + math.sqrt(1.0 - T_RHO**2) * rng.standard_t(5, size)
        return xi, eta, lambda f: stats.t.cdf(f, 5)
    # mixture of two unit-variance bivariate normals with correlation 0.85
    cov = np.array([[1.0, 0.85], [0.85, 1.0]])
    e = rng.multivariate_normal([0.0, 0.0], cov, size)
    comp = rng.random(size) < 0.3
    xi = e[:, 0]
    eta = e[:, 1] + np.where(comp, -2.1, 0.9)
    return xi, eta, normal_cdf


def brewer_functions(dgp, X, Wexc):
    lin = X @ OUTCOME_WEIGHTS
    if dgp in (1, 5):
        f_y = lin
    else:
        f_y = -0.25 + 1.25 * np.sin(math.pi / 4.0 + 0.75 * math.pi * lin)
    inst = 0.001 if dgp == 3 else 1.0
    f_z = 1.25 + X @ SELECTION_WEIGHTS + inst * Wexc
    return f_y, f_z


def _brewer_block(spec, n, rng):
    X = rng.multivariate_normal(np.zeros(10), _ar_cov(10), n)
    Wexc = X.sum(axis=1) * 0.05 + math.sqrt(0.75) * rng.standard_normal(n)
    f_y, f_z = brewer_functions(spec.dgp, X, Wexc)
    xi, eta, surv = brewer_errors(spec.error_kind, spec.rho, n, rng, spec.dgp)
    zs = f_z + xi
    ys = f_y + eta
    s = zs >= 0
    W = np.column_stack([X, Wexc])
    data = Dataset(X, W, np.where(s, ys, np.nan), s.astype(int))
    return data, SimTruth(f_y, f_z, surv(f_z), ys, s)


def gen_brewer(spec: DgpSpec, rng):
    if spec.family != "brewer":
        raise ValueError("gen_brewer needs a Brewer spec")
    if spec.dgp not in (1, 2, 3, 5):
        raise ValueError(f"unsupported DGP id {spec.dgp}")
    rng = make_rng(rng)
    train, ttrain = _brewer_block(spec, spec.n_train, rng)
    if spec.n_test:
        test, ttest = _brewer_block(spec, spec.n_test, rng)
    else:
        test, ttest = None, None
    return SimData(train, test, ttrain, ttest)


# ---------------------------------------------------------------------------
# linear design with no excluded instrument

IQBAL_RHO = 0.5


def iqbal_coefficients(p):
    if p < 3:
        raise ValueError("need p >= 3")
    beta = np.zeros(p)
    beta[:3] = (0.25, 0.5, 1.0)
    alpha = np.zeros(p)
    alpha[:3] = np.array([0.5, 1.0, 1.5]) / math.sqrt(2.0)
    return beta, alpha


def iqbal_intercept(p, target=0.30, pilot=1_000_000, seed=12345):
    """Selection intercept giving the target unselected share, by bisection on a pilot sample."""
    _, alpha = iqbal_coefficients(p)
    rng = make_rng(seed)
    idx = rng.standard_normal((pilot, 3)) @ alpha[:3] + rng.standard_normal(pilot)
    return optimize.bisect(lambda a0: np.mean(a0 + idx < 0) - target, -10.0, 10.0, xtol=1e-10)


def _iqbal_block(n, p, a0, rng):
    beta, alpha = iqbal_coefficients(p)
    X = rng.standard_normal((n, p))
    f_y = 0.5 + X @ beta
    f_z = a0 + X @ alpha
    xi = rng.standard_normal(n)
    eta = IQBAL_RHO * xi + math.sqrt(1.0 - IQBAL_RHO**2) * rng.standard_normal(n)
    ys, s = f_y + eta, f_z + xi >= 0
    data = Dataset(X, X, np.where(s, ys, np.nan), s.astype(int))
    return data, SimTruth(f_y, f_z, normal_cdf(f_z), ys, s)


def gen_iqbal(spec: DgpSpec, rng):
    rng = make_rng(rng)
    p = spec.p or 10
    a0 = iqbal_intercept(p)
    train, ttrain = _iqbal_block(spec.n_train, p, a0, rng)
    test, ttest = (_iqbal_block(spec.n_test, p, a0, rng) if spec.n_test else (None, None))
    return SimData(train, test, ttrain, ttest, {"alpha0": a0})


# ---------------------------------------------------------------------------
# heterogeneous treatment effects

CATE_RHO = 0.5


def cate_propensity(X):
    return 0.7 * normal_cdf(0.5 * X[:, 5] * X[:, 6] + 0.3 * X[:, 7] ** 2) + 0.1


def cate_functions(X, T):
    f_y = 0.5 * X[:, 5] + 0.5 * X[:, 5] * X[:, 6] + 0.25 * (X[:, 2] - 1.0) ** 2 * T
    f_z = 0.5 * X[:, 0] * X[:, 5] + X[:, 0] * X[:, 5] * T
    return f_y, f_z


def _cate_block(n, p, rng):
    X = rng.standard_normal((n, p))
    T = (rng.random(n) < cate_propensity(X)).astype(float)
    f_y, f_z = cate_functions(X, T)
    xi = rng.standard_normal(n)
    # the design leaves the error correlation unspecified
    eta = CATE_RHO * xi + math.sqrt(1.0 - CATE_RHO**2) * rng.standard_normal(n)
    ys, s = f_y + eta, f_z + xi >= 0
    Xo = np.column_stack([X[:, 5:], T])
    W = np.column_stack([X, T])
    data = Dataset(Xo, W, np.where(s, ys, np.nan), s.astype(int))
    u = X[:, 0] * X[:, 5]
    truth = SimTruth(f_y, f_z, normal_cdf(f_z), ys, s,
                     cate=0.25 * (X[:, 2] - 1.0) ** 2,
                     sel_effect=normal_cdf(1.5 * u) - normal_cdf(0.5 * u), treat=T)
    return data, truth


def gen_cate(spec: DgpSpec, rng):
    p = spec.p or 50
    if p < 8:
        raise ValueError("the treatment-effect design needs p >= 8")
    rng = make_rng(rng)
    train, ttrain = _cate_block(spec.n_train, p, rng)
    test, ttest = (_cate_block(spec.n_test, p, rng) if spec.n_test else (None, None))
    return SimData(train, test, ttrain, ttest)


def generate(spec: DgpSpec, rng):
    return {"brewer": gen_brewer, "iqbal": gen_iqbal, "cate": gen_cate}[spec.family](spec, rng)


# ---------------------------------------------------------------------------
# scenario runner

@dataclass
class ModelSpec:
    name: str
    kind: str = "tobart"  # tobart | bart
    sampler: str = "standard"
    prior: object = None
    trees: TreesMean = field(default_factory=TreesMean)


def _fit_tobart(sim, model, iters, burnin, seed):
    d = sim.train
    draws = run_chain(d, mean=model.trees, prior=model.prior or VHPrior(), sampler=model.sampler,
                      iters=iters, burnin=burnin, rng=seed, X_test=sim.test.X, W_test=sim.test.W)
    fy = est.summarize(draws.fy_test)
    sp = est.selection_probability(draws.fz_test).mean(axis=0)
    return fy, sp, float(draws.rho.mean())


def _fit_baseline(sim, model, iters, burnin, seed):
    d = sim.train
    cfg = model.trees.config(model.trees.m_y)
    fit = fit_bart(d.X[d.s], d.y[d.s], sim.test.X, cfg, iters, burnin, seed=seed)
    pcfg = model.trees.config(model.trees.m_z)
    pfit = fit_probit_bart(d.W, d.s.astype(float), sim.test.W, pcfg, iters, burnin, seed=seed + 1)
    fy = est.summarize(fit.f_test)
    sp = est.selection_probability(pfit.f_test).mean(axis=0)
    return fy, sp, float("nan")


def run_scenario(spec: DgpSpec, models, iters=1500, burnin=500, rng=0):
    """Fit every model on every rep and return (per-rep rows, aggregate rows).

    The first model is the baseline for relative metrics. A failed rep is
    logged and counted, the remaining reps still run.
    """
    if not models:
        raise ValueError("need at least one model")
    base = models[0].name
    seeds = np.random.SeedSequence(make_rng(rng).integers(2**63)).spawn(spec.reps)
    per_rep, failures = [], {m.name: 0 for m in models}
    for r, ss in enumerate(seeds):
        data_seed, fit_seed = ss.spawn(2)
        sim = generate(spec, np.random.Generator(np.random.PCG64(data_seed)))
        t = sim.truth_test
        fseed = int(np.random.Generator(np.random.PCG64(fit_seed)).integers(2**31))
        row = {}
        for m in models:
            t0 = time.perf_counter()
            try:
                fn = _fit_baseline if m.kind == "bart" else _fit_tobart
                fy, sp, rho = fn(sim, m, iters, burnin, fseed)
            except Exception as exc:  # a rep failure must not end the scenario
                log.warning("rep %d model %s failed: %s", r, m.name, exc)
                failures[m.name] += 1
                continue
            row[m.name] = {
                "fy_rmse": est.rmse(fy.mean, t.f_y),
                "fy_cover95": est.coverage(fy.q025, fy.q975, t.f_y),
                "fy_len95": est.interval_length(fy.q025, fy.q975),
                "sel_mse": est.mse(sp, t.sel_prob),
                "rho_mean": rho,
                "seconds": time.perf_counter() - t0,
            }
        for name, met in row.items():
            if base in row:
                met["fy_rmse_rel"] = met["fy_rmse"] / row[base]["fy_rmse"]
                met["sel_mse_rel"] = met["sel_mse"] / row[base]["sel_mse"]
            else:
                met["fy_rmse_rel"] = met["sel_mse_rel"] = float("nan")
            per_rep.append({"rep": r, "model": name, **met})
    agg = []
    for m in models:
        rows = [x for x in per_rep if x["model"] == m.name]
        out = {"model": m.name, "reps_ok": len(rows), "failures": failures[m.name]}
        for key in ("fy_rmse", "fy_rmse_rel", "fy_cover95", "fy_len95", "sel_mse", "sel_mse_rel",
                    "rho_mean", "seconds"):
            vals = [x[key] for x in rows]
            out[key] = float(np.mean(vals)) if vals else float("nan")
        agg.append(out)
    return per_rep, agg


def default_models(m_y=200, m_z=50):
    trees = TreesMean(m_y=m_y, m_z=m_z)
    return [ModelSpec("bart", kind="bart", trees=trees), ModelSpec("tobart_vh", trees=trees)]
