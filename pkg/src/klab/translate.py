"""Expanding translates ``a(t) u(s) Z^2`` with ``s`` drawn from a
self-similar measure: single and double equidistribution statistics, the
cocycle relation with the random walk, and Haar correlation decay.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from .errors import ConfigError
from .homsp import (
    PElement,
    Rect,
    canonicalize_batch,
    count_batch,
    haar_bases,
    siegel_count,
    translate_point,
)
from .ifs import SampleStream, sample_sigma
from .seeds import BLOCK, block_ranges, derive_seed, pmap, rng_for

FLOAT_T_MAX = 1e8

__all__ = [
    "translate_point",
    "cocycle_identity_check",
    "shear_counts",
    "equidist_deviation",
    "double_deviation",
    "correlation_estimate",
    "DeviationReport",
]


def _mat_a(t):
    r = mpmath.sqrt(t)
    return mpmath.matrix([[r, 0], [0, 1 / r]])


def _mat_u(s):
    return mpmath.matrix([[1, s], [0, 1]])


def cocycle_identity_check(t, s, g: PElement, prec: int = 200) -> float:
    """``max |a(t r) u(s) g - a(t) u(r s + b)|`` entrywise for ``g = a(r)^-1 u(b)``.

    Both products are formed at ``prec`` bits, so the residual reflects the
    identity rather than float64 cancellation at large ``t``.
    """
    with mpmath.workprec(prec):
        if g.exact is not None:
            r = mpmath.mpf(g.exact[0].numerator) / g.exact[0].denominator
            b = mpmath.mpf(g.exact[1].numerator) / g.exact[1].denominator
        else:
            r, b = mpmath.exp(mpmath.mpf(g.log_rate)), mpmath.mpf(g.offset)
        t = _mp(t)
        s = _mp(s)
        gm = _mat_a(1 / r) * _mat_u(b)
        left = _mat_a(t * r) * _mat_u(s) * gm
        right = _mat_a(t) * _mat_u(r * s + b)
        return float(max(abs(left[i, j] - right[i, j]) for i in range(2) for j in range(2)))


def _mp(x):
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    if hasattr(x, "to_fraction"):
        f = x.to_fraction()
        return mpmath.mpf(f.numerator) / f.denominator
    return mpmath.mpf(x)


# ---------------------------------------------------------------------------
# counting along translates


def shear_counts(t: float, s: np.ndarray, rect: Rect) -> np.ndarray:
    """``siegel_count(a(t) u(s) Z^2, rect)`` for each ``s``.

    Float reduction is used up to ``t = 1e8``; counts with a lattice point
    near the rectangle boundary are recomputed exactly at the float value of
    ``s``.  Larger ``t`` goes through exact reduction per draw.
    """
    s = np.asarray(s, dtype=float)
    if t > FLOAT_T_MAX:
        return np.array([siegel_count(translate_point(Fraction(t), Fraction(x)), rect) for x in s.tolist()])
    rt = math.sqrt(t)
    B = np.zeros((s.size, 2, 2))
    B[:, 0, 0] = rt
    B[:, 0, 1] = rt * s
    B[:, 1, 1] = 1 / rt
    counts, amb = count_batch(canonicalize_batch(B), rect)
    for i in np.flatnonzero(amb):
        counts[i] = siegel_count(translate_point(Fraction(t), Fraction(float(s[i]))), rect)
    return counts


def _sigma_draws(stream: SampleStream, M: int, workers=None) -> np.ndarray:
    parts = pmap(_draw_block, [(stream, lo, hi) for _, lo, hi in block_ranges(M)], workers)
    return np.concatenate(parts) if parts else np.zeros(0)


def _draw_block(args):
    stream, lo, hi = args
    from dataclasses import replace

    st = replace(stream, mode="backward", position=stream.position + lo)
    return sample_sigma(st, size=hi - lo)


def _count_block(args):
    t, s, rect = args
    return shear_counts(t, s, rect)


def _counts_for(t, s, rect, workers):
    chunks = [s[lo:hi] for _, lo, hi in block_ranges(s.size, 8 * BLOCK)]
    parts = pmap(_count_block, [(t, c, rect) for c in chunks], workers)
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


@dataclass
class DeviationReport:
    times: list
    means: list
    stderrs: list
    deviations: list
    target: float
    slope: float | None
    noise_floor: float
    samples: int
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _fit_slope(times, devs, ses):
    pts = [(math.log(t), math.log(d)) for t, d, e in zip(times, devs, ses) if d > 3 * e and d > 0]
    if len(pts) < 2:
        return None
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def _mean_se(v: np.ndarray):
    v = np.asarray(v, dtype=float)
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


def equidist_deviation(stream, times, rect: Rect, M: int | None = None, workers=None) -> DeviationReport:
    """``D(t) = |mean count(a(t)u(s)Z^2) - area/zeta(2)|`` over ``M`` draws of ``s``.

    ``stream`` may be a SampleStream or an explicit array of draws; the same
    draws are used for every ``t``.
    """
    s = _as_draws(stream, M, workers)
    target = rect.siegel_mean
    means, ses, devs = [], [], []
    for t in times:
        if not t > 0:
            raise ConfigError("times must be positive")
        m, se = _mean_se(_counts_for(float(t), s, rect, workers))
        means.append(m)
        ses.append(se)
        devs.append(abs(m - target))
    return DeviationReport(list(map(float, times)), means, ses, devs, target,
                           _fit_slope(times, devs, ses), 3 / math.sqrt(s.size), int(s.size))


def _as_draws(stream, M, workers):
    if isinstance(stream, SampleStream):
        if M is None:
            raise ConfigError("M is required with a sample stream")
        return _sigma_draws(stream, M, workers)
    return np.asarray(stream, dtype=float)


def double_deviation(stream, t1: float, t2s, rect1: Rect, rect2: Rect, M: int | None = None, workers=None) -> DeviationReport:
    """``|mean count1(t1, s) count2(t2, s) - target1 target2|`` for each ``t2``."""
    if any(t2 < t1 for t2 in t2s) or t1 <= 1:
        raise ConfigError("double deviation needs t2 >= t1 > 1")
    s = _as_draws(stream, M, workers)
    c1 = _counts_for(float(t1), s, rect1, workers)
    target = rect1.siegel_mean * rect2.siegel_mean
    means, ses, devs = [], [], []
    for t2 in t2s:
        m, se = _mean_se(c1 * _counts_for(float(t2), s, rect2, workers))
        means.append(m)
        ses.append(se)
        devs.append(abs(m - target))
    rep = DeviationReport(list(map(float, t2s)), means, ses, devs, target,
                          _fit_slope(t2s, devs, ses), 3 / math.sqrt(s.size), int(s.size))
    rep.extra["t1"] = float(t1)
    return rep


def _corr_block(args):
    seed, b, n, t, rect = args
    rng = rng_for(seed, [b])
    B = haar_bases(rng, n)
    f0, _ = count_batch(B, rect)
    rt = math.sqrt(t)
    Bt = B.copy()
    # a(t)^-1 = diag(1/sqrt t, sqrt t)
    Bt[:, 0, :] /= rt
    Bt[:, 1, :] *= rt
    ft, _ = count_batch(canonicalize_batch(Bt), rect)
    return f0, ft


def correlation_estimate(t: float, rect: Rect, M: int, seed: int = 0, workers=None) -> dict:
    """Haar Monte Carlo estimate of ``<a(t).f, f>`` for the centred Siegel count ``f``."""
    tasks = [(seed, b, hi - lo, float(t), rect) for b, lo, hi in block_ranges(M, 16 * BLOCK)]
    parts = pmap(_corr_block, tasks, workers)
    f0 = np.concatenate([p[0] for p in parts]) - rect.siegel_mean
    ft = np.concatenate([p[1] for p in parts]) - rect.siegel_mean
    m, se = _mean_se(f0 * ft)
    var, var_se = _mean_se(f0 * f0)
    return {"t": float(t), "estimate": m, "stderr": se, "variance": var, "variance_stderr": var_se, "samples": M}


def walk_translate_counts(stream: SampleStream, t: float, n: int, rect: Rect, M: int, seed: int = 0) -> dict:
    """Counts at ``a(t r_g) u(s') g Z^2`` with ``g`` an n-step walk composite
    and ``s'`` an independent sigma draw, next to counts at ``a(t)u(s)Z^2``."""
    from dataclasses import replace

    from .ifs import stream_indices

    idx = stream_indices(SampleStream(stream.system, seed=derive_seed(seed, [0])), n, M)
    rates = np.prod(stream.system.rates[idx], axis=1)
    offs = np.zeros(M)
    for k in range(n - 1, -1, -1):
        col = idx[:, k]
        offs = stream.system.rates[col] * offs + stream.system.offsets[col]
    s1 = sample_sigma(replace(stream, mode="backward", seed=derive_seed(seed, [1])), size=M)
    # a(t r) u(s') a(r)^-1 u(b) as explicit matrices
    tr = t * rates
    B = np.zeros((M, 2, 2))
    h = 1 / np.sqrt(rates)
    a11, a22 = np.sqrt(tr), 1 / np.sqrt(tr)
    B[:, 0, 0] = a11 * h
    B[:, 0, 1] = a11 * (h * offs + s1 / h)
    B[:, 1, 1] = a22 / h
    cw, _ = count_batch(canonicalize_batch(B), rect)
    s0 = sample_sigma(replace(stream, mode="backward", seed=derive_seed(seed, [2])), size=M)
    cs = shear_counts(t, s0, rect)
    return {"walk": _mean_se(cw), "direct": _mean_se(cs)}
