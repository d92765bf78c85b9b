"""Command-line interface: fit, simulate, calibrate."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import estimands as est
from . import prior_toolkit as pt
from .dpm_errors import DpmConfig
from .selection_model import (Dataset, DingPrior, LinearMean, OmoriPrior, TreesMean, VHPrior,
                              run_chain)

log = logging.getLogger("tobart")

WORKERS_ENV = "TOBART_WORKERS"
MODELS = ("linear", "bart", "bart-marginalized", "bart-np")
PRIORS = ("vh", "omori", "ding")
NA_TOKENS = ("", "NA")


class CliError(Exception):
    pass


# ---------------------------------------------------------------------------
# data files

@dataclass
class ColumnRoles:
    outcome: str
    select: str
    x_cols: list
    w_cols: list
    treat: str | None = None


@dataclass
class LoadedData:
    data: Dataset
    roles: ColumnRoles
    header: list
    table: dict = field(default_factory=dict)


def _split_cols(v):
    if v is None:
        return []
    if isinstance(v, (list, tuple)):
        return list(v)
    return [c.strip() for c in str(v).split(",") if c.strip()]


def _read_csv(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise CliError(f"{path} is not valid UTF-8") from exc
    if not rows:
        raise CliError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise CliError(f"{path}: duplicate column names in header")
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    for i, r in enumerate(body, start=1):
        if len(r) != len(header):
            raise CliError(f"{path}: row {i} has {len(r)} cells, header has {len(header)}")
    return header, body


def _column(header, body, name, path, allow_na=False):
    if name not in header:
        raise CliError(f"{path}: missing column {name!r}")
    j = header.index(name)
    out = np.empty(len(body))
    for i, r in enumerate(body, start=1):
        cell = r[j].strip()
        if cell in NA_TOKENS:
            if not allow_na:
                raise CliError(f"{path}: row {i}, column {name!r} is missing")
            out[i - 1] = np.nan
            continue
        try:
            out[i - 1] = float(cell)
        except ValueError:
            raise CliError(f"{path}: row {i}, column {name!r}: non-numeric value {cell!r}") from None
    return out


def load_dataset(path, roles: ColumnRoles) -> LoadedData:
    header, body = _read_csv(path)
    if not body:
        raise CliError(f"{path}: no data rows")
    if not roles.x_cols or not roles.w_cols:
        raise CliError("x-cols and w-cols must each name at least one column")
    y = _column(header, body, roles.outcome, path, allow_na=True)
    s = _column(header, body, roles.select, path)
    bad = np.flatnonzero((s != 0) & (s != 1))
    if bad.size:
        raise CliError(f"{path}: row {bad[0] + 1}: selection indicator must be 0 or 1")
    for i in range(len(body)):
        if s[i] == 1 and np.isnan(y[i]):
            raise CliError(f"{path}: row {i + 1}: selected row has a missing outcome")
        if s[i] == 0 and not np.isnan(y[i]):
            raise CliError(f"{path}: row {i + 1}: unselected row has an outcome value")
    cols = {}
    for name in dict.fromkeys(roles.x_cols + roles.w_cols + ([roles.treat] if roles.treat else [])):
        cols[name] = _column(header, body, name, path)
    if roles.treat:
        t = cols[roles.treat]
        if np.any((t != 0) & (t != 1)):
            raise CliError(f"{path}: treatment column {roles.treat!r} must be 0/1")
    X = np.column_stack([cols[c] for c in roles.x_cols])
    W = np.column_stack([cols[c] for c in roles.w_cols])
    data = Dataset(X, W, y, s.astype(int))
    log.info("loaded %s: %d rows, selection rate %.4f", path, data.n, data.n1 / data.n)
    table = {roles.outcome: y, roles.select: s, **cols}
    return LoadedData(data, roles, header, table)


def _fmt(v, digits=17):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "NA"
    return f"{float(v):.{digits}g}"


def write_dataset(path, loaded: LoadedData):
    """Write the role columns back out; missing outcomes become NA."""
    names = [h for h in loaded.header if h in loaded.table]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(loaded.data.n):
            w.writerow([_fmt(loaded.table[c][i]) for c in names])


# ---------------------------------------------------------------------------
# configuration

DEFAULTS = {
    "model": "bart",
    "prior": "vh",
    "iters": 1500,
    "burnin": 500,
    "thin": 1,
    "chains": 1,
    "seed": 0,
    "out": "tobart_out",
    "m_y": 200,
    "m_z": 50,
    "gamma_phi": "joint",
    "alpha_prior": "escobar_west",
    # simulate
    "family": "brewer",
    "dgp": 1,
    "rho": 0.0,
    "error_kind": "normal",
    "n_train": 2500,
    "n_test": 500,
    "reps": 3,
    "models": "bart,tobart_vh",
    # calibrate
    "g0": 0.0,
    "n0": 6.0,
    "tau": 0.5,
    "G0": 0.1,
    "nu0": 3.0,
    "q": 0.95,
}

INT_KEYS = {"iters", "burnin", "thin", "chains", "seed", "m_y", "m_z", "dgp", "n_train", "n_test",
            "reps"}
FLOAT_KEYS = {"rho", "g0", "n0", "tau", "G0", "nu0", "q", "S0", "c", "sigma2"}


def read_config_file(path):
    """Flat 'key = value' lines; '#' starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    for no, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{no}: expected key = value")
        k, v = (p.strip() for p in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _coerce(cfg):
    out = {}
    for k, v in cfg.items():
        if v is None:
            continue
        try:
            if k in INT_KEYS:
                out[k] = int(v)
            elif k in FLOAT_KEYS:
                out[k] = float(v)
            else:
                out[k] = v
        except (TypeError, ValueError):
            raise CliError(f"bad value for {k}: {v!r}") from None
    return out


def resolve_config(args: dict):
    """CLI flags beat the config file, which beats the defaults."""
    file_cfg = read_config_file(args["config"]) if args.get("config") else {}
    cfg = dict(DEFAULTS)
    cfg.update(_coerce(file_cfg))
    cfg.update(_coerce({k: v for k, v in args.items() if k not in ("config", "command", "func")}))
    for k in ("x_cols", "w_cols"):
        if k in cfg:
            cfg[k] = ",".join(_split_cols(cfg[k]))
    return cfg


ECHO_KEYS = {
    "fit": {"data", "predict", "outcome", "select", "x_cols", "w_cols", "treat", "model", "prior",
            "iters", "burnin", "thin", "chains", "seed", "out", "m_y", "m_z", "gamma_phi",
            "alpha_prior", "g0", "n0", "tau", "S0", "G0_override", "nu0", "c", "q", "config"},
    "simulate": {"family", "dgp", "rho", "error_kind", "n_train", "n_test", "reps", "models",
                 "iters", "burnin", "seed", "out", "m_y", "m_z", "config"},
    "calibrate": {"sigma2", "data", "outcome", "select", "g0", "n0", "tau", "G0", "nu0", "q",
                  "out", "config"},
}


def config_echo(cfg, command=None, extra=None):
    keys = ECHO_KEYS.get(command)
    items = {k: v for k, v in cfg.items() if (keys is None or k in keys) and v is not None}
    items.update(extra or {})
    return "".join(f"{k} = {items[k]}\n" for k in sorted(items))


# ---------------------------------------------------------------------------
# output bundle bookkeeping

class Bundle:
    """Tracks files written so a failed run can remove them."""

    def __init__(self, out):
        self.dir = Path(out)
        self.created_dir = not self.dir.exists()
        self.files = []

    def path(self, name):
        self.dir.mkdir(parents=True, exist_ok=True)
        p = self.dir / name
        self.files.append(p)
        return p

    def discard(self):
        for p in self.files:
            try:
                p.unlink()
            except FileNotFoundError:
                pass
        if self.created_dir:
            try:
                self.dir.rmdir()
            except OSError:
                pass


def _write_rows(path, header, rows, digits=17):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v, digits) for v in r])


# ---------------------------------------------------------------------------
# fit

def _prior_from(cfg):
    name = cfg["prior"]
    if name not in PRIORS:
        raise CliError(f"unknown prior {name!r}; choose from {', '.join(PRIORS)}")
    if name == "vh":
        return VHPrior(g0=cfg["g0"], tau=cfg["tau"], n0=cfg["n0"], S0=cfg.get("S0"))
    if name == "omori":
        return OmoriPrior(g0=cfg["g0"], G0=cfg.get("G0_override"), n0=cfg["n0"], S0=cfg.get("S0"))
    return DingPrior(nu0=cfg["nu0"], c=cfg.get("c"), q=cfg["q"])


def _chain_job(job):
    data, kw, seed = job
    return run_chain(data, rng=np.random.Generator(np.random.PCG64(seed)), **kw)


def _workers():
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise CliError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def run_chains(data, kw, seed, chains):
    seeds = np.random.SeedSequence(seed).spawn(chains)
    jobs = [(data, kw, ss) for ss in seeds]
    nw = min(_workers(), chains)
    if nw > 1:
        with ProcessPoolExecutor(nw) as pool:
            return list(pool.map(_chain_job, jobs))
    return [_chain_job(j) for j in jobs]


def _with_intercept(M):
    return np.column_stack([np.ones(M.shape[0]), M])


def _set_treat(M, cols, treat, value):
    M = M.copy()
    if treat in cols:
        M[:, cols.index(treat)] = value
    return M


def cmd_fit(cfg):
    for key in ("data", "outcome", "select", "x_cols", "w_cols"):
        if not cfg.get(key):
            raise CliError(f"fit needs --{key.replace('_', '-')}")
    model = cfg["model"]
    if model not in MODELS:
        raise CliError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")
    roles = ColumnRoles(cfg["outcome"], cfg["select"], _split_cols(cfg["x_cols"]),
                        _split_cols(cfg["w_cols"]), cfg.get("treat"))
    if roles.treat:
        for lst in (roles.x_cols, roles.w_cols):
            if roles.treat not in lst:
                lst.append(roles.treat)
    loaded = load_dataset(cfg["data"], roles)
    data = loaded.data
    data.require_both()
    if cfg["chains"] < 1:
        raise CliError("chains must be at least 1")

    Xp, Wp = data.X, data.W
    if cfg.get("predict"):
        pl = load_dataset(cfg["predict"], roles)
        Xp, Wp = pl.data.X, pl.data.W
    n_pred = Xp.shape[0]
    blocks_x, blocks_w = [Xp], [Wp]
    if roles.treat:
        for v in (1.0, 0.0):
            blocks_x.append(_set_treat(Xp, roles.x_cols, roles.treat, v))
            blocks_w.append(_set_treat(Wp, roles.w_cols, roles.treat, v))
    X_all, W_all = np.vstack(blocks_x), np.vstack(blocks_w)

    kw = dict(prior=_prior_from(cfg), iters=cfg["iters"], burnin=cfg["burnin"], thin=cfg["thin"],
              gamma_phi=cfg["gamma_phi"])
    if model == "linear":
        data = Dataset(_with_intercept(data.X), _with_intercept(data.W), data.y, data.s.astype(int))
        X_all, W_all = _with_intercept(X_all), _with_intercept(W_all)
        kw["mean"] = LinearMean()
    else:
        kw["mean"] = TreesMean(m_y=cfg["m_y"], m_z=cfg["m_z"])
    if model == "bart-marginalized":
        kw["sampler"] = "marginalized"
    if model == "bart-np":
        kw["errors"] = DpmConfig(alpha_prior=cfg["alpha_prior"])
    kw["X_test"], kw["W_test"] = X_all, W_all

    results = run_chains(data, kw, cfg["seed"], cfg["chains"])
    np_mode = model == "bart-np"

    bundle = Bundle(cfg["out"])
    try:
        header = ["iter", "chain", "gamma", "phi", "rho", "sigma_y2"]
        if np_mode:
            header += ["dependence", "k", "alpha"]
        rows = []
        for c, d in enumerate(results):
            for t in range(len(d)):
                r = [int(d.iteration[t]), c, d.gamma[t], d.phi[t], d.rho[t], d.sigma_y2[t]]
                if np_mode:
                    r += [d.dependence[t], int(d.k[t]), d.alpha[t]]
                rows.append(r)
        _write_rows(bundle.path("draws.csv"), header, rows)

        fy = np.vstack([d.fy_test for d in results])
        fz = np.vstack([d.fz_test for d in results])
        if np_mode:
            # each prediction row gets its own predictive error draw; the treated and
            # control copies of a row reuse the draw of the original row
            mu1 = np.vstack([d.mu1_test for d in results])[:, :n_pred]
            mu2 = np.vstack([d.mu2_test for d in results])[:, :n_pred]
            g = np.vstack([d.gamma_test for d in results])[:, :n_pred]
        else:
            mu1 = mu2 = 0.0
            g = np.concatenate([d.gamma for d in results])[:, None]

        def part(a, b):
            return a[:, b * n_pred:(b + 1) * n_pred]

        ps = est.prediction_set(part(fy, 0), part(fz, 0), g, mu1, mu2)
        pred_rows = [[i, ps.latent.mean[i], ps.latent.q025[i], ps.latent.q975[i],
                      ps.observed.mean[i], ps.observed.q025[i], ps.observed.q975[i],
                      ps.sel_prob.mean[i]] for i in range(n_pred)]
        _write_rows(bundle.path("predictions.csv"),
                    ["row", "latent_mean", "latent_q025", "latent_q975", "obs_cond_mean",
                     "obs_cond_q025", "obs_cond_q975", "sel_prob_mean"], pred_rows)

        if roles.treat:
            cate = est.latent_cate_draws(part(fy, 1), part(fy, 2))
            se = est.selection_effect(part(fz, 1), part(fz, 2), mu1)
            cs, ss = est.summarize(cate), est.summarize(se)
            eff = [[i, cs.mean[i], cs.q025[i], cs.q975[i], ss.mean[i], ss.q025[i], ss.q975[i],
                    -ss.mean[i]] for i in range(n_pred)]
            _write_rows(bundle.path("effects.csv"),
                        ["row", "cate_mean", "cate_q025", "cate_q975", "sel_effect_mean",
                         "sel_effect_q025", "sel_effect_q975", "censor_effect_mean"], eff)

        rho = np.concatenate([d.rho for d in results])
        lines = ["quantity mean q025 q975"]
        for name in ("rho", "gamma", "phi", "sigma_y2"):
            v = np.concatenate([getattr(d, name) for d in results])
            sm = est.summarize(v)
            lines.append(f"{name} {_fmt(sm.mean, 6)} {_fmt(sm.q025, 6)} {_fmt(sm.q975, 6)}")
        if np_mode:
            dep = est.summarize(np.concatenate([d.dependence for d in results]))
            lines.append(f"dependence {_fmt(dep.mean, 6)} {_fmt(dep.q025, 6)} {_fmt(dep.q975, 6)}")
        info = results[0].info
        lines.append(f"retained_draws {rho.size}")
        lines.append(f"sigma_hat_y2 {_fmt(info['sigma_hat_y2'], 6)}")
        summary = "\n".join(lines) + "\n"
        bundle.path("summary.txt").write_text(summary, encoding="utf-8")

        # resolved hyperparameters live on the internal outcome scale
        extra = {f"resolved_{k}": v for k, v in vars(info["prior"]).items()}
        extra["internal_y_mid"] = info["y_mid"]
        extra["internal_y_scale"] = info["y_scale"]
        bundle.path("config.txt").write_text(config_echo(cfg, "fit", extra), encoding="utf-8")
    except BaseException:
        bundle.discard()
        raise
    sys.stdout.write(summary)
    return 0


# ---------------------------------------------------------------------------
# simulate

def _sim_models(names, m_y, m_z):
    from .simlab import ModelSpec

    trees = TreesMean(m_y=m_y, m_z=m_z)
    table = {
        "bart": ModelSpec("bart", kind="bart", trees=trees),
        "tobart_vh": ModelSpec("tobart_vh", prior=VHPrior(), trees=trees),
        "tobart_marg": ModelSpec("tobart_marg", sampler="marginalized", prior=VHPrior(), trees=trees),
        "tobart_ding": ModelSpec("tobart_ding", prior=DingPrior(), trees=trees),
        "tobart_omori": ModelSpec("tobart_omori", prior=OmoriPrior(), trees=trees),
    }
    out = []
    for n in _split_cols(names):
        if n not in table:
            raise CliError(f"unknown simulation model {n!r}; choose from {', '.join(table)}")
        out.append(table[n])
    if not out or out[0].name != "bart":
        out = [table["bart"]] + [m for m in out if m.name != "bart"]
    return out


SIM_COLUMNS = ["model", "fy_rmse_rel", "fy_cover95", "sel_mse_rel", "rho_mean", "fy_rmse",
               "sel_mse", "fy_len95", "reps_ok", "failures", "seconds"]


def cmd_simulate(cfg):
    from .simlab import DgpSpec, run_scenario

    try:
        spec = DgpSpec(cfg["family"], cfg["dgp"], cfg["rho"], cfg["error_kind"], cfg["n_train"],
                       cfg["n_test"], cfg["reps"], cfg["seed"])
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    if spec.family != "brewer":
        raise CliError("simulate currently tabulates the Brewer designs only")
    models = _sim_models(cfg["models"], cfg["m_y"], cfg["m_z"])
    per_rep, agg = run_scenario(spec, models, cfg["iters"], cfg["burnin"], cfg["seed"])
    bundle = Bundle(cfg["out"])
    try:
        _write_rows(bundle.path("results.csv"), SIM_COLUMNS,
                    [[a[c] for c in SIM_COLUMNS] for a in agg], digits=6)
        rep_cols = ["rep", "model", "fy_rmse", "fy_rmse_rel", "fy_cover95", "fy_len95", "sel_mse",
                    "sel_mse_rel", "rho_mean", "seconds"]
        _write_rows(bundle.path("reps.csv"), rep_cols, [[r[c] for c in rep_cols] for r in per_rep])
        bundle.path("config.txt").write_text(config_echo(cfg, "simulate"), encoding="utf-8")
    except BaseException:
        bundle.discard()
        raise
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(SIM_COLUMNS)
    for a in agg:
        w.writerow([_fmt(a[c], 6) for c in SIM_COLUMNS])
    return 0


# ---------------------------------------------------------------------------
# calibrate

def _sigma2_from(cfg):
    if cfg.get("sigma2") is not None:
        return cfg["sigma2"]
    if not cfg.get("data") or not cfg.get("outcome"):
        raise CliError("calibrate needs --sigma2 or --data with --outcome")
    header, body = _read_csv(cfg["data"])
    y = _column(header, body, cfg["outcome"], cfg["data"], allow_na=True)
    if cfg.get("select"):
        s = _column(header, body, cfg["select"], cfg["data"])
        y = y[s == 1]
    y = y[~np.isnan(y)]
    if y.size < 2:
        raise CliError("need at least two observed outcomes to estimate the variance")
    return float(np.var(y, ddof=1))


def calibration_text(tab):
    out = [
        f"sigma_hat_y2 {_fmt(tab['sigma_hat_y2'], 6)}",
        f"S0_vh {_fmt(tab['S0_vh'], 6)}",
        f"S0_omori {_fmt(tab['S0_omori'], 6)}",
        f"c_ding {_fmt(tab['c_ding'], 6)}",
        f"c_ding_chisq_rule {_fmt(tab['c_ding_chisq_rule'], 6)}",
        f"prior_mean_outcome_var_vh {_fmt(tab['prior_mean_vh'], 6)}",
        f"prior_mean_outcome_var_omori {_fmt(tab['prior_mean_omori'], 6)}",
        "vh_rho_modes " + " ".join(f"{m:.5f}" for m in tab["vh_modes"]),
        f"omori_rho_mode_count {tab['omori_modes']}",
        "",
        "rho cdf_vh cdf_omori cdf_ding",
    ]
    for r, a, b, c in zip(tab["grid"], tab["cdf_vh"], tab["cdf_omori"], tab["cdf_ding"]):
        out.append(f"{r:.2f} {_fmt(a, 6)} {_fmt(b, 6)} {_fmt(c, 6)}")
    return "\n".join(out) + "\n"


def cmd_calibrate(cfg):
    s2 = _sigma2_from(cfg)
    try:
        tab = pt.calibration_table(s2, cfg["g0"], cfg["n0"], cfg["tau"], cfg["G0"], cfg["nu0"], cfg["q"])
    except (pt.CalibrationError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    text = calibration_text(tab)
    if cfg.get("out_given"):
        bundle = Bundle(cfg["out"])
        try:
            bundle.path("calibration.txt").write_text(text, encoding="utf-8")
            bundle.path("config.txt").write_text(config_echo(cfg, "calibrate"), encoding="utf-8")
        except BaseException:
            bundle.discard()
            raise
    sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def build_parser():
    p = argparse.ArgumentParser(prog="tobart", description="Type 2 Tobit models with BART")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        sp.add_argument("--iters", type=int)
        sp.add_argument("--burnin", type=int)

    f = sub.add_parser("fit", help="fit a model to a CSV file")
    common(f)
    f.add_argument("--data")
    f.add_argument("--predict", help="CSV of rows to predict (defaults to the training rows)")
    f.add_argument("--outcome")
    f.add_argument("--select")
    f.add_argument("--x-cols", dest="x_cols")
    f.add_argument("--w-cols", dest="w_cols")
    f.add_argument("--treat")
    f.add_argument("--model", choices=MODELS)
    f.add_argument("--prior", choices=PRIORS)
    f.add_argument("--thin", type=int)
    f.add_argument("--chains", type=int)
    f.add_argument("--m-y", dest="m_y", type=int)
    f.add_argument("--m-z", dest="m_z", type=int)
    for k in ("tau", "g0", "n0", "S0", "nu0", "c", "q"):
        f.add_argument(f"--{k}", type=float)
    f.add_argument("--G0", dest="G0_override", type=float)

    s = sub.add_parser("simulate", help="run a simulation scenario")
    common(s)
    s.add_argument("--family")
    s.add_argument("--dgp", type=int)
    s.add_argument("--rho", type=float)
    s.add_argument("--error-kind", dest="error_kind")
    s.add_argument("--n-train", dest="n_train", type=int)
    s.add_argument("--n-test", dest="n_test", type=int)
    s.add_argument("--reps", type=int)
    s.add_argument("--models")
    s.add_argument("--m-y", dest="m_y", type=int)
    s.add_argument("--m-z", dest="m_z", type=int)

    c = sub.add_parser("calibrate", help="print prior calibration tables")
    c.add_argument("--config")
    c.add_argument("--out")
    c.add_argument("--sigma2", type=float)
    c.add_argument("--data")
    c.add_argument("--outcome")
    c.add_argument("--select")
    for k in ("tau", "g0", "n0", "G0", "nu0", "q"):
        c.add_argument(f"--{k}", type=float)
    return p


COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "calibrate": cmd_calibrate}


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    args = {k: v for k, v in vars(ns).items() if k != "verbose"}
    try:
        cfg = resolve_config(args)
        cfg["out_given"] = bool(args.get("out") or ("out" in (read_config_file(args["config"])
                                                            if args.get("config") else {})))
        cfg["command"] = ns.command
        return COMMANDS[ns.command](cfg)
    except (CliError, ValueError, ArithmeticError, RuntimeError) as exc:
        sys.stderr.write(f"tobart: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
