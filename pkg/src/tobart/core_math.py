"""Numerical kernels shared by the samplers.

Standard-normal helpers, truncated-normal / inverse-gamma / 2x2 inverse-Wishart
draws, the modified Bessel function of the second kind, adaptive
Gauss-Kronrod quadrature and seeded random streams.
"""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_EULER = 0.5772156649015329


# ---------------------------------------------------------------------------
# random streams

def make_rng(seed) -> np.random.Generator:
    """Seeded PCG64 generator. Equal seeds give identical draw sequences."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def spawn_rngs(seed, n: int) -> list[np.random.Generator]:
    """Independent child streams (SeedSequence spawning, no seed reuse)."""
    if isinstance(seed, np.random.Generator):
        seqs = seed.bit_generator.seed_seq.spawn(n)
    else:
        seqs = np.random.SeedSequence(int(seed)).spawn(n)
    return [np.random.Generator(np.random.PCG64(s)) for s in seqs]


# ---------------------------------------------------------------------------
# standard normal

def normal_pdf(x):
    return np.exp(-0.5 * np.square(x) - _LOG_SQRT_2PI)


def normal_logpdf(x):
    return -0.5 * np.square(x) - _LOG_SQRT_2PI


def normal_cdf(x):
    return special.ndtr(x)


def normal_logcdf(x):
    return special.log_ndtr(x)


def normal_ppf(p):
    return special.ndtri(p)


def mills_ratio(x):
    """phi(x) / Phi(x).

    Below x = -37 Phi underflows, so the asymptotic series
    Phi(x) ~ phi(x)/(-x) * (1 - 1/x^2 + 3/x^4 - 15/x^6) is used instead.
    """
    x = np.asarray(x, dtype=float)
    far = x < -37.0
    safe = np.where(far, 0.0, x)
    direct = np.exp(normal_logpdf(safe) - special.log_ndtr(safe))
    xf = np.where(far, x, -40.0)
    x2 = xf * xf
    asym = -xf / (1.0 - 1.0 / x2 + 3.0 / x2**2 - 15.0 / x2**3)
    out = np.where(far, asym, direct)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# truncated normal

@dataclass(frozen=True)
class Interval:
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"empty interval ({self.lower}, {self.upper})")


def _robert_tail(a, b, rng):
    """Exponential-proposal rejection for N(0,1) restricted to [a, b], a > 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    lam = 0.5 * (a + np.sqrt(a * a + 4.0))
    # narrow windows: uniform proposal, otherwise the exponential one
    narrow = (b - a) < 1.0 / lam
    out = np.empty_like(a)
    todo = np.arange(a.size)
    while todo.size:
        at, bt, lt, nt = a[todo], b[todo], lam[todo], narrow[todo]
        u = rng.random(todo.size)
        e = rng.exponential(size=todo.size)
        w = np.where(nt, bt - at, 0.0)
        z = np.where(nt, at + u * w, at + e / lt)
        v = rng.random(todo.size)
        log_acc = np.where(nt, -0.5 * (z * z - at * at), -0.5 * (z - lt) ** 2)
        ok = (np.log(v) <= log_acc) & (z <= bt)
        out[todo[ok]] = z[ok]
        todo = todo[~ok]
    return out


def truncnorm_std(a, b, rng):
    """Vectorised N(0,1) draws restricted to [a, b] (bounds may be infinite).

    Regions in the upper half are reflected so the inverse CDF always works on
    the small tail probability; beyond 5 sd an exponential rejection sampler
    takes over.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    a = a.ravel().copy()
    b = b.ravel().copy()
    flip = a > -b  # region sits mostly in the right half
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    # now the region is [lo, hi] with lo <= -hi, i.e. the mass is leftish
    out = np.empty(a.size)
    tail = -hi > 5.0  # entire region beyond -5 on the left
    body = ~tail
    if body.any():
        plo = special.ndtr(lo[body])
        phi_ = special.ndtr(hi[body])
        u = rng.random(int(body.sum()))
        p = plo + u * (phi_ - plo)
        z = special.ndtri(p)
        out[body] = np.clip(z, lo[body], hi[body])
    if tail.any():
        # reflect once more so the rejection sampler sees [ -hi, -lo ] with -hi > 5
        out[tail] = -_robert_tail(-hi[tail], -lo[tail], rng)
    return np.where(flip, -out, out)


def sample_truncated_normal(mu, sigma2, region: Interval, rng, size=None):
    """Draw from N(mu, sigma2) restricted to region.

    A degenerate region (width below 1e-12 sd) returns its midpoint and
    emits a RuntimeWarning.
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    sd = math.sqrt(sigma2)
    if region.upper - region.lower < 1e-12 * sd:
        warnings.warn("degenerate truncation region, returning midpoint", RuntimeWarning)
        mid = 0.5 * (region.lower + region.upper)
        return mid if size is None else np.full(size, mid)
    a = (region.lower - mu) / sd
    b = (region.upper - mu) / sd
    n = 1 if size is None else int(np.prod(size))
    z = truncnorm_std(np.full(n, a), np.full(n, b), rng)
    draws = mu + sd * z
    return float(draws[0]) if size is None else draws.reshape(size)


def truncnorm_mean(mu, sigma2, region: Interval):
    sd = math.sqrt(sigma2)
    a = (region.lower - mu) / sd
    b = (region.upper - mu) / sd
    za = 0.0 if math.isinf(a) else float(normal_pdf(a))
    zb = 0.0 if math.isinf(b) else float(normal_pdf(b))
    if a > 0:
        mass = float(special.ndtr(-a) - special.ndtr(-b))
    else:
        mass = float(special.ndtr(b) - special.ndtr(a))
    return mu + sd * (za - zb) / mass


# ---------------------------------------------------------------------------
# inverse gamma / inverse Wishart

def sample_inverse_gamma(shape, scale, rng, size=None):
    if shape <= 0 or scale <= 0:
        raise ValueError("inverse gamma needs positive shape and scale")
    return scale / rng.gamma(shape, 1.0, size)


def sample_inverse_wishart_2(df, scale, rng):
    """2x2 inverse-Wishart draw via the Bartlett factor of Wishart(df, scale^-1)."""
    scale = np.asarray(scale, dtype=float)
    if scale.shape != (2, 2) or not np.allclose(scale, scale.T):
        raise ValueError("scale must be a symmetric 2x2 matrix")
    if df <= 1:
        raise ValueError("df must exceed 1")
    try:
        L = np.linalg.cholesky(np.linalg.inv(scale))
    except np.linalg.LinAlgError as exc:
        raise ValueError("scale matrix is not positive definite") from exc
    a11 = math.sqrt(rng.chisquare(df))
    a22 = math.sqrt(rng.chisquare(df - 1.0))
    a21 = rng.standard_normal()
    A = np.array([[a11, 0.0], [a21, a22]])
    LA = L @ A
    wish = LA @ LA.T
    det = wish[0, 0] * wish[1, 1] - wish[0, 1] ** 2
    return np.array([[wish[1, 1], -wish[0, 1]], [-wish[0, 1], wish[0, 0]]]) / det


def sample_inverse_wishart_2_batch(df, scale, rng, size):
    """size independent 2x2 inverse-Wishart draws, shape (size, 2, 2)."""
    L = np.linalg.cholesky(np.linalg.inv(np.asarray(scale, dtype=float)))
    A = np.zeros((size, 2, 2))
    A[:, 0, 0] = np.sqrt(rng.chisquare(df, size))
    A[:, 1, 1] = np.sqrt(rng.chisquare(df - 1.0, size))
    A[:, 1, 0] = rng.standard_normal(size)
    LA = L[None] @ A
    wish = LA @ np.transpose(LA, (0, 2, 1))
    det = wish[:, 0, 0] * wish[:, 1, 1] - wish[:, 0, 1] ** 2
    out = np.empty_like(wish)
    out[:, 0, 0] = wish[:, 1, 1] / det
    out[:, 1, 1] = wish[:, 0, 0] / det
    out[:, 0, 1] = out[:, 1, 0] = -wish[:, 0, 1] / det
    return out


# ---------------------------------------------------------------------------
# modified Bessel function of the second kind

_INV_GAMMA_SERIES = (1.0, 0.5772156649015329, -0.6558780715202538, -0.0420026350340952,
                     0.1665386113822915, -0.0421977345555443, -0.0096219715278770,
                     0.0072189432466630)


def _temme_gammas(mu):
    """(gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu)) for |mu| <= 1/2."""
    gampl = 1.0 / math.gamma(1.0 + mu)
    gammi = 1.0 / math.gamma(1.0 - mu)
    if abs(mu) > 1e-3:
        gam1 = (gammi - gampl) / (2.0 * mu)
    else:
        c = _INV_GAMMA_SERIES
        m2 = mu * mu
        gam1 = -(c[1] + c[3] * m2 + c[5] * m2 * m2 + c[7] * m2**3)
    gam2 = 0.5 * (gammi + gampl)
    return gam1, gam2, gampl, gammi


def log_bessel_k(nu, x):
    """log K_nu(x) for real nu and x > 0.

    Temme's series for x <= 2, Steed's continued fraction otherwise, then
    forward recurrence in nu with running rescaling to stay finite.
    """
    if not x > 0:
        raise ValueError("bessel_k needs x > 0")
    nu = abs(float(nu))
    x = float(x)
    nl = int(nu + 0.5)
    mu = nu - nl
    eps = 1e-16
    if x <= 2.0:
        x2 = 0.5 * x
        pimu = math.pi * mu
        fact = 1.0 if abs(pimu) < eps else pimu / math.sin(pimu)
        d = -math.log(x2)
        e = mu * d
        fact2 = 1.0 if abs(e) < eps else math.sinh(e) / e
        gam1, gam2, gampl, gammi = _temme_gammas(mu)
        ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
        total = ff
        e = math.exp(e)
        p = 0.5 * e / gampl
        q = 0.5 / (e * gammi)
        c = 1.0
        dd = x2 * x2
        total1 = p
        for i in range(1, 500):
            ff = (i * ff + p + q) / (i * i - mu * mu)
            c *= dd / i
            p /= i - mu
            q /= i + mu
            delta = c * ff
            total += delta
            total1 += c * (p - i * ff)
            if abs(delta) < abs(total) * eps:
                break
        else:
            raise ArithmeticError("bessel_k series did not converge")
        log_k0 = math.log(total)
        ratio = total1 * 2.0 / x / total  # K_{mu+1}/K_mu
    else:
        b = 2.0 * (1.0 + x)
        d = 1.0 / b
        h = delh = d
        q1, q2 = 0.0, 1.0
        a1 = 0.25 - mu * mu
        q = c = a1
        a = -a1
        s = 1.0 + q * delh
        for i in range(2, 10000):
            a -= 2 * (i - 1)
            c = -a * c / i
            qnew = (q1 - b * q2) / a
            q1, q2 = q2, qnew
            q += c * qnew
            b += 2.0
            d = 1.0 / (b + a * d)
            delh = (b * d - 1.0) * delh
            h += delh
            dels = q * delh
            s += dels
            if abs(dels / s) < eps:
                break
        else:
            raise ArithmeticError("bessel_k continued fraction did not converge")
        h = a1 * h
        log_k0 = 0.5 * math.log(math.pi / (2.0 * x)) - x - math.log(s)
        ratio = (mu + x + 0.5 - h) / x
    # recurrence on (K_{mu+i}, K_{mu+i+1}) normalised so the lower one is 1
    k_lo, k_hi = 1.0, ratio
    log_scale = log_k0
    for i in range(1, nl + 1):
        k_new = (mu + i) * (2.0 / x) * k_hi + k_lo
        k_lo, k_hi = k_hi, k_new
        if k_lo > 1e250:
            k_hi /= k_lo
            log_scale += math.log(k_lo)
            k_lo = 1.0
    return log_scale + math.log(k_lo)


def bessel_k(nu, x):
    return math.exp(log_bessel_k(nu, x))


# ---------------------------------------------------------------------------
# adaptive quadrature

class QuadratureError(ArithmeticError):
    def __init__(self, message, estimate, error):
        super().__init__(f"{message} (estimate={estimate!r}, error={error:.3g})")
        self.estimate = estimate
        self.error = error


_XGK = np.array([0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                 0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                 0.207784955007898467600689403773245, 0.0])
_WGK = np.array([0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                 0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                 0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[[1, 3, 5, 13, 11, 9]] = [_WG[0], _WG[1], _WG[2], _WG[0], _WG[1], _WG[2]]
_GW[7] = _WG[3]


def _gk15(g, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    fx = g(mid + half * _NODES)
    k = half * float(fx @ _KW)
    gs = half * float(fx @ _GW)
    return k, abs(k - gs)


def integrate_adaptive(f, region: Interval, tol=1e-10, max_intervals=5000, vectorized=False):
    """Globally adaptive Gauss-Kronrod (7/15) integration of f over region.

    Infinite ends are mapped onto finite ones. The 15 nodes never touch the
    endpoints, so integrable endpoint singularities are handled by
    repeated bisection. Raises QuadratureError with the best estimate if the
    interval budget runs out before the error estimate drops below tol.
    """
    fv = f if vectorized else (lambda xs: np.array([f(float(v)) for v in xs]))
    lo, hi = region.lower, region.upper
    if math.isinf(lo) and math.isinf(hi):
        def g(t):
            return fv(t / (1.0 - t * t)) * (1.0 + t * t) / (1.0 - t * t) ** 2
        a, b = -1.0, 1.0
    elif math.isinf(hi):
        def g(t):
            return fv(lo + t / (1.0 - t)) / (1.0 - t) ** 2
        a, b = 0.0, 1.0
    elif math.isinf(lo):
        def g(t):
            return fv(hi - t / (1.0 - t)) / (1.0 - t) ** 2
        a, b = 0.0, 1.0
    else:
        g, a, b = fv, lo, hi

    val, err = _gk15(g, a, b)
    heap = [(-err, a, b, val)]
    total, total_err = val, err
    while total_err > tol:
        if len(heap) >= max_intervals:
            raise QuadratureError("interval budget exhausted", total, total_err)
        neg_err, x0, x1, v = heapq.heappop(heap)
        xm = 0.5 * (x0 + x1)
        if xm <= x0 or xm >= x1:
            raise QuadratureError("interval collapsed", total, total_err)
        v1, e1 = _gk15(g, x0, xm)
        v2, e2 = _gk15(g, xm, x1)
        total += v1 + v2 - v
        total_err += e1 + e2 + neg_err
        heapq.heappush(heap, (-e1, x0, xm, v1))
        heapq.heappush(heap, (-e2, xm, x1, v2))
        if len(heap) % 64 == 0:
            # refresh running sums against drift
            total = math.fsum(h[3] for h in heap)
            total_err = math.fsum(-h[0] for h in heap)
    if not math.isfinite(total):
        raise QuadratureError("non-finite integrand", total, total_err)
    return math.fsum(h[3] for h in heap)
