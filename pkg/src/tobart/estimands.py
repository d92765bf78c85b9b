"""Prediction and treatment-effect estimands, plus evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_math import mills_ratio, normal_cdf


def observed_conditional_mean(f_y, f_z, gamma, mu1=0.0, mu2=0.0):
    """E[Y | selected] = f_y + mu2 + gamma * phi(f_z + mu1) / Phi(f_z + mu1)."""
    f_y, f_z, gamma, mu1, mu2 = np.broadcast_arrays(*(np.asarray(a, dtype=float)
                                                       for a in (f_y, f_z, gamma, mu1, mu2)))
    out = f_y + mu2 + gamma * mills_ratio(f_z + mu1)
    return out if out.ndim else float(out)


def latent_mean(f_y, mu2=0.0):
    out = np.asarray(f_y, dtype=float) + mu2
    return out if out.ndim else float(out)


def selection_probability(f_z, mu1=0.0):
    out = normal_cdf(np.asarray(f_z, dtype=float) + mu1)
    return out if np.ndim(out) else float(out)


def selection_effect(f_z_treat, f_z_ctrl, mu1=0.0):
    """Effect of treatment on the probability of being selected."""
    out = normal_cdf(np.asarray(f_z_treat, dtype=float) + mu1) - normal_cdf(
        np.asarray(f_z_ctrl, dtype=float) + mu1)
    return out if np.ndim(out) else float(out)


def naive_selection_bias(f_z_treat, f_z_ctrl, gamma):
    """Bias a selected-sample regression picks up when treatment moves selection."""
    out = gamma * (mills_ratio(np.asarray(f_z_treat, dtype=float))
                   - mills_ratio(np.asarray(f_z_ctrl, dtype=float)))
    return out if np.ndim(out) else float(out)


def latent_cate_draws(fy_treat, fy_ctrl):
    return np.asarray(fy_treat, dtype=float) - np.asarray(fy_ctrl, dtype=float)


# ---------------------------------------------------------------------------
# summaries

@dataclass
class Summary:
    mean: np.ndarray
    q025: np.ndarray
    q975: np.ndarray


def summarize(draws, axis=0):
    d = np.asarray(draws, dtype=float)
    q = np.quantile(d, [0.025, 0.975], axis=axis, method="linear")
    return Summary(d.mean(axis=axis), q[0], q[1])


@dataclass
class PredictionSet:
    latent: Summary
    observed: Summary
    sel_prob: Summary


def prediction_set(fy_draws, fz_draws, gamma_draws, mu1=0.0, mu2=0.0):
    """Per-test-row summaries from (draws x rows) arrays; gamma is per draw or per draw and row."""
    fy = np.asarray(fy_draws, dtype=float)
    fz = np.asarray(fz_draws, dtype=float)
    g = np.asarray(gamma_draws, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    lat = latent_mean(fy, mu2)
    obs = observed_conditional_mean(fy, fz, g, mu1, mu2)
    sp = selection_probability(fz, mu1)
    return PredictionSet(summarize(lat), summarize(obs), summarize(sp))


# ---------------------------------------------------------------------------
# metrics

def _pair(pred, truth):
    p = np.asarray(pred, dtype=float).ravel()
    t = np.asarray(truth, dtype=float).ravel()
    if p.size != t.size:
        raise ValueError(f"length mismatch: {p.size} predictions vs {t.size} truths")
    if p.size == 0:
        raise ValueError("empty input")
    return p, t


def rmse(pred, truth):
    p, t = _pair(pred, truth)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def mse(pred, truth):
    p, t = _pair(pred, truth)
    return float(np.mean((p - t) ** 2))


def pehe_outcome(cate_hat, cate_true):
    return rmse(cate_hat, cate_true)


def pehe_selection(sel_effect_hat, sel_effect_true):
    """MSE of the estimated effect on the probability of censoring.

    Inputs are selection-probability effects; censoring effects are their
    negation, which leaves the squared error unchanged but is applied here
    so the intermediate quantities carry the reported sign.
    """
    p, t = _pair(sel_effect_hat, sel_effect_true)
    return mse(-p, -t)


def coverage(lower, upper, truth):
    lo, t = _pair(lower, truth)
    hi, _ = _pair(upper, truth)
    return float(np.mean((lo <= t) & (t <= hi)))


def interval_length(lower, upper):
    lo, hi = _pair(lower, upper)
    return float(np.mean(hi - lo))


def brier(prob, outcome):
    p, o = _pair(prob, outcome)
    return float(np.mean((p - o) ** 2))


def auc(score, label):
    """Area under the ROC curve via the Mann-Whitney rank statistic (ties get half credit)."""
    from scipy.stats import rankdata

    s, lab = _pair(score, label)
    pos = lab == 1
    n1, n0 = int(pos.sum()), int((~pos).sum())
    if n1 == 0 or n0 == 0:
        raise ValueError("AUC needs both classes")
    ranks = rankdata(s)
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def hit_rate(prob, outcome, threshold=0.5):
    p, o = _pair(prob, outcome)
    return float(np.mean((p >= threshold) == (o == 1)))


def metrics_suite(pred=None, truth=None, lower=None, upper=None, prob=None, outcome=None,
                  cate_hat=None, cate_true=None, sel_effect_hat=None, sel_effect_true=None):
    """Compute whichever metrics the supplied arrays allow."""
    out = {}
    if pred is not None:
        out["rmse"] = rmse(pred, truth)
    if lower is not None:
        out["coverage"] = coverage(lower, upper, truth)
        out["interval_length"] = interval_length(lower, upper)
    if prob is not None:
        out["brier"] = brier(prob, outcome)
        out["auc"] = auc(prob, outcome)
        out["hit_rate"] = hit_rate(prob, outcome)
    if cate_hat is not None:
        out["pehe_outcome"] = pehe_outcome(cate_hat, cate_true)
    if sel_effect_hat is not None:
        out["pehe_selection"] = pehe_selection(sel_effect_hat, sel_effect_true)
    return out
