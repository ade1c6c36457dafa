"""Counting psi-approximable rationals near a point s.

The counts are decided exactly: ``s`` is an exact rational (a ``Fraction`` or
the stored value of a ``BigFixed``) and a vectorized float pass only selects
candidate denominators.  When ``s`` is a ``BigFixed`` carrying a truncation
error, comparisons inside the error band plus a guard of 256 ulps are
reported as ambiguous and counted both ways.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .bigfixed import GUARD_ULPS, BigFixed
from .errors import ConfigError, DomainError
from .homsp import ZETA2_INV, Rect, Surd, exact_generator_points, siegel_count, siegel_count_sweep, translate_point
from .ifs import SampleStream, sample_sigma, sample_sigma_exact
from .seeds import pmap

PREFILTER_MARGIN = 1e-12


# ---------------------------------------------------------------------------
# approximation functions


@dataclass(frozen=True)
class ApproxFn:
    """Non-increasing positive ``psi`` on the integers.

    ``power``: ``c q^-alpha``; ``logpower``: ``1/(q log^beta(q+2))``;
    ``table``: explicit values for ``q = 1..len``, holding the last value.
    """

    family: str
    params: tuple

    def __post_init__(self):
        fam, p = self.family, tuple(self.params)
        try:
            if fam == "power":
                c, al = p
                p = (Fraction(c), Fraction(al))
                if p[0] <= 0 or p[1] < 0:
                    raise ConfigError("power family needs c > 0 and alpha >= 0")
            elif fam == "logpower":
                (be,) = p
                p = (Fraction(be),)
            elif fam == "table":
                p = tuple(Fraction(v) for v in p)
                if not p:
                    raise ConfigError("table family needs at least one value")
                if any(v <= 0 for v in p):
                    raise ConfigError("table values must be strictly positive")
                if any(b > a for a, b in zip(p, p[1:])):
                    raise ConfigError("table values must be non-increasing")
            else:
                raise ConfigError(f"unknown psi family {fam!r}")
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad parameters for psi family {fam!r}: {exc}") from None
        object.__setattr__(self, "params", p)
        self._check_monotone()

    @classmethod
    def parse(cls, text: str) -> "ApproxFn":
        """``power:c,alpha``, ``logpower:beta`` or ``table:v1,v2,...``."""
        fam, _, args = text.partition(":")
        fam = fam.strip()
        if not args.strip():
            raise ConfigError(f"psi: missing parameters in {text!r}")
        try:
            vals = [Fraction(a.strip()) for a in args.split(",")]
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"psi: cannot parse parameters {args!r}") from None
        if fam == "power" and len(vals) == 1:
            vals = [Fraction(1), vals[0]]
        expected = {"power": 2, "logpower": 1}
        if fam in expected and len(vals) != expected[fam]:
            raise ConfigError(f"psi: family {fam!r} takes {expected[fam]} parameters")
        return cls(fam, tuple(vals))

    def label(self) -> str:
        return f"{self.family}:" + ",".join(str(v) for v in self.params)

    def _check_monotone(self):
        q = np.concatenate([np.arange(1, 10001, dtype=float), 2.0 ** np.arange(14, 61)])
        v = self.values_at(q)
        if not np.all(v > 0):
            raise ConfigError("psi must be strictly positive")
        if np.any(np.diff(v) > 1e-15 * v[:-1]):
            raise ConfigError("psi must be non-increasing")

    # evaluation -------------------------------------------------------
    def values_at(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.family == "power":
            c, al = (float(x) for x in self.params)
            return c * q ** -al
        if self.family == "logpower":
            (be,) = (float(x) for x in self.params)
            return 1.0 / (q * np.log(q + 2) ** be)
        tab = np.array([float(v) for v in self.params])
        idx = np.minimum(q.astype(np.int64), len(tab)) - 1
        return tab[idx]

    def __call__(self, q: int) -> float:
        return float(self.values_at([q])[0])

    def exact(self, q: int) -> Fraction:
        """Value at integer ``q`` as a Fraction.  Families without a rational
        closed form use the float value, which then is the threshold."""
        if self.family == "power":
            c, al = self.params
            if al.denominator == 1:
                return c / Fraction(q) ** int(al)
        if self.family == "table":
            return self.params[min(q, len(self.params)) - 1]
        return Fraction(self(q))

    def values(self, N: int) -> np.ndarray:
        return self.values_at(np.arange(1, N + 1))


def eval_psi(psi: ApproxFn, q, extension: str = "integer-only") -> float:
    """``psi`` at a real ``q >= 1`` under one of three extensions.

    ``ceil``: ``psi(ceil q)``; ``floor-min``: ``min(1/q, psi(floor q))``.
    """
    return float(eval_psi_exact(psi, q, extension))


def eval_psi_exact(psi: ApproxFn, q, extension: str = "integer-only") -> Fraction:
    q = Fraction(q)
    if q < 1:
        raise DomainError("psi is evaluated at q >= 1")
    if extension == "integer-only":
        if q.denominator != 1:
            raise DomainError(f"non-integer argument {q} with the integer-only extension")
        return psi.exact(int(q))
    if extension == "ceil":
        return psi.exact(math.ceil(q))
    if extension == "floor-min":
        return min(1 / q, psi.exact(math.floor(q)))
    raise DomainError(f"unknown extension {extension!r}")


def sum_psi(psi: ApproxFn, N: int, effective: bool = False) -> float:
    """``sum_{q<=N} psi(q)`` by compensated summation; ``effective`` uses
    ``min(psi(q), 1/q)``."""
    if N < 1:
        raise DomainError("N must be at least 1")
    v = psi.values(N)
    if effective:
        v = np.minimum(v, 1.0 / np.arange(1, N + 1))
    return math.fsum(v.tolist())


# ---------------------------------------------------------------------------
# exact hit kernel


def _as_interval(s):
    """``(num, den, err)``: the true value lies in ``[num, num + err] / den``."""
    if isinstance(s, BigFixed):
        return s.mant, 1 << s.bits, s.err
    if isinstance(s, (Fraction, int)):
        f = Fraction(s)
        return f.numerator, f.denominator, 0
    if isinstance(s, float):
        f = Fraction(s)
        return f.numerator, f.denominator, 0
    raise TypeError(f"unsupported point type {type(s).__name__}")


def _frac_float(num: int, den: int, q: np.ndarray) -> np.ndarray:
    """frac(q num/den) to about 1e-15 for q < 2**26, num/den in [0, 1)."""
    k1 = (num << 26) // den
    r1 = Fraction(num, den) - Fraction(k1, 1 << 26)
    k2 = (r1.numerator << 52) // r1.denominator
    s3 = float(r1 - Fraction(k2, 1 << 52))
    qf = q.astype(np.float64)
    f = np.mod(qf * float(k1), 2.0**26) / 2.0**26 + np.mod(qf * float(k2), 2.0**52) / 2.0**52 + qf * s3
    return np.mod(f, 1.0)


@dataclass
class Hits:
    certain: list = field(default_factory=list)
    ambiguous: list = field(default_factory=list)


def _window_hits(s, q: np.ndarray, thr_float: np.ndarray, thr_exact, guard: int | None = None) -> Hits:
    """Coprime ``(p, q)`` with ``0 <= q s - p < thr(q)`` for every q in ``q``.

    ``thr_exact(q)`` returns the threshold as a Fraction.  With an inexact
    ``s`` the decision band is ``q err + guard`` units of ``1/den``.
    """
    num, den, err = _as_interval(s)
    shift, num = divmod(num, den)
    if guard is None:
        guard = GUARD_ULPS if err else 0
    out = Hits()
    if q.size == 0:
        return out
    if q.max() >= 1 << 26:
        raise DomainError("denominators beyond 2**26 are not supported")
    f = _frac_float(num, den, q)
    band = PREFILTER_MARGIN + q * ((err + guard) / den)
    cand = (f < thr_float + band) | (f > 1 - band)
    big = thr_float >= 1
    for qi in q[cand | big].tolist():
        th = thr_exact(qi)
        qn = qi * num
        p0, r = divmod(qn, den)
        lo = r - guard
        hi = r + qi * err + guard
        # candidate integer parts: p0 (frac near r) and p0 + 1 if the interval wraps
        ps = range(p0 - math.ceil(th) - 1, p0 + 2)
        for p in ps:
            # true q s - p lies in [(qn - p den) + lo - r, ... + hi - r] / den
            base = qn - p * den
            a_, b_ = base + (lo - r), base + (hi - r)
            # 0 <= x < th  for all x in [a_, b_] / den  -> certain
            # interval meets [0, th)                    -> ambiguous
            if b_ < 0 or a_ * th.denominator >= th.numerator * den:
                continue
            if math.gcd(p + qi * shift, qi) != 1:
                continue
            pt = (p + qi * shift, qi)
            if a_ >= 0 and b_ * th.denominator < th.numerator * den:
                out.certain.append(pt)
            else:
                out.ambiguous.append(pt)
    return out


# ---------------------------------------------------------------------------
# T_N


@dataclass
class CountResult:
    N: int
    count: int
    count_hi: int
    sum_psi: float
    ratio: float
    ratio_hi: float
    side: str
    hits: list
    ambiguous: list
    blocks: list = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        return bool(self.ambiguous)


def _negate(s):
    if isinstance(s, BigFixed):
        return -s
    return -Fraction(s)


def count_TN(s, psi: ApproxFn, N: int, side: str = "plus", effective: bool = False) -> CountResult:
    """Primitive ``(p, q)``, ``1 <= q <= N`` with ``0 <= q s - p < psi(q)``
    (``plus``) or ``-psi(q) < q s - p <= 0`` (``minus``).

    ``ratio`` divides the count by ``sum psi / zeta(2)``; ``effective``
    replaces psi by ``min(psi, 1/q)`` in that sum.
    """
    if N < 1:
        raise DomainError("N must be at least 1")
    if isinstance(s, BigFixed) and s.bits < 64 + 2 * math.ceil(math.log2(N + 1)):
        raise ConfigError(f"precision {s.bits} bits too low for N={N}; need {64 + 2 * math.ceil(math.log2(N + 1))}")
    if side not in ("plus", "minus"):
        raise ConfigError(f"side must be plus or minus, got {side!r}")
    q = np.arange(1, N + 1, dtype=np.int64)
    thr = psi.values(N)
    target = s if side == "plus" else _negate(s)
    hits = _window_hits(target, q, thr, psi.exact)
    if side == "minus":
        hits.certain = [(-p, qq) for p, qq in hits.certain]
        hits.ambiguous = [(-p, qq) for p, qq in hits.ambiguous]
    total = sum_psi(psi, N, effective)
    lo = len(hits.certain)
    hi = lo + len(hits.ambiguous)
    return CountResult(N, lo, hi, total, lo / (ZETA2_INV * total), hi / (ZETA2_INV * total),
                       side, sorted(hits.certain, key=lambda h: h[1]), hits.ambiguous)


def count_TN_reference(s: BigFixed, psi: ApproxFn, N: int) -> tuple:
    """Sequential plus-side count carrying ``frac(q s)`` by BigFixed addition
    mod 1.  Returns ``(certain, ambiguous)``; slow, used as a cross-check."""
    one = 1 << s.bits
    g = GUARD_ULPS if s.err else 0
    step = s.frac()
    cur = BigFixed(0, s.bits, 0)
    ip = 0
    certain = ambiguous = 0
    for q in range(1, N + 1):
        cur = cur + step
        ip += s.floor()
        if cur.mant >= one:
            cur = BigFixed(cur.mant - one, s.bits, cur.err)
            ip += 1
        th = psi.exact(q)
        for p in range(ip - math.ceil(th) - 1, ip + 2):
            base = (ip - p) * one + cur.mant
            lo, hi = base - g, base + cur.err + g
            if hi < 0 or lo * th.denominator >= th.numerator * one:
                continue
            if math.gcd(p, q) != 1:
                continue
            if lo >= 0 and hi * th.denominator < th.numerator * one:
                certain += 1
            else:
                ambiguous += 1
    return certain, ambiguous


# ---------------------------------------------------------------------------
# scale parameters and blocks


def as_tau(tau) -> Fraction:
    t = Fraction(tau) if not isinstance(tau, str) else Fraction(tau.strip())
    if not 1 < t <= 2:
        raise DomainError("tau must lie in (1, 2]")
    return t


@dataclass(frozen=True)
class ScaleParams:
    tau: Fraction
    k: int
    psi_k: Fraction
    r_sq: Fraction
    t_exact: Fraction

    @property
    def r_k(self) -> float:
        return math.sqrt(self.r_sq)

    @property
    def t_k(self) -> float:
        return float(self.t_exact)

    def rect(self) -> Rect:
        """``[0, r_k) x (r_k / tau, r_k]`` with exact surd bounds."""
        return Rect(Fraction(0), Surd.sqrt(self.r_sq), Surd.sqrt(self.r_sq / self.tau**2), Surd.sqrt(self.r_sq))


def scale_params(psi: ApproxFn, tau, k: int, normalized: bool = True, extension: str = "ceil") -> ScaleParams:
    """``r_k^2 = tau^k psi(tau^k)`` and ``t_k = tau^k / psi(tau^k)``."""
    tau = as_tau(tau)
    if k < 0:
        raise DomainError("k must be non-negative")
    tk = tau**k
    pk = eval_psi_exact(psi, tk, extension if tk.denominator != 1 else "integer-only")
    if normalized and pk * tk > 1:
        raise DomainError(
            f"psi(tau^k) = {float(pk):.6g} exceeds tau^-k = {float(1 / tk):.6g}: "
            "the normalization psi(q) <= 1/q is violated"
        )
    return ScaleParams(tau, k, pk, tk * pk, tk / pk)


def _qwindow(lo: Fraction, hi: Fraction, lo_open: bool, hi_open: bool) -> np.ndarray:
    a_ = math.floor(lo) + 1 if lo_open else math.ceil(lo)
    b_ = math.ceil(hi) - 1 if hi_open else math.floor(hi)
    a_ = max(a_, 1)
    return np.arange(a_, b_ + 1, dtype=np.int64)


def _block(s, thr: Fraction, q: np.ndarray) -> int:
    hits = _window_hits(_exact_point(s), q, np.full(q.size, float(thr)), lambda _q: thr)
    return len(hits.certain)


def _exact_point(s):
    if isinstance(s, BigFixed):
        return s.to_fraction()
    return Fraction(s)


def count_Sk_direct(s, psi: ApproxFn, tau, k: int) -> int:
    """Coprime ``(p, q)``, ``tau^(k-1) < q <= tau^k``, ``0 <= q s - p < psi(tau^k)``
    (ceil extension), with ``s`` taken at its stored value."""
    tau = as_tau(tau)
    thr = eval_psi_exact(psi, tau**k, "ceil")
    return _block(s, thr, _qwindow(tau ** (k - 1), tau**k, True, False))


def count_Sk_plus(s, psi: ApproxFn, tau, k: int) -> int:
    """Upper block: ``tau^k <= q < tau^(k+1)`` with threshold ``min(tau^-k, psi(floor tau^k))``."""
    tau = as_tau(tau)
    thr = eval_psi_exact(psi, tau**k, "floor-min")
    return _block(s, thr, _qwindow(tau**k, tau ** (k + 1), False, True))


def count_Sk_siegel(s, psi: ApproxFn, tau, k: int, method: str = "reduce") -> int:
    """The block count as a primitive Siegel count of ``R_k`` at ``a(t_k)u(s)Z^2``."""
    sp = scale_params(psi, tau, k)
    if method == "sweep":
        return siegel_count_sweep(sp.t_exact, _exact_point(s), sp.rect())
    return siegel_count(translate_point(sp.t_exact, _exact_point(s)), sp.rect())


def Sk_points_siegel(s, psi: ApproxFn, tau, k: int) -> list:
    """Solutions ``(p, q)`` recovered from the lattice points ``(-p, q)`` in ``R_k``."""
    sp = scale_params(psi, tau, k)
    pts = exact_generator_points(translate_point(sp.t_exact, _exact_point(s)), sp.rect())
    return sorted((-m, n) for m, n in pts)


def block_index(N: int, tau) -> int:
    """``n`` with ``tau^n <= N < tau^(n+1)``."""
    tau = as_tau(tau)
    n = 0
    while tau ** (n + 1) <= N:
        n += 1
    return n


def sandwich(s, psi: ApproxFn, N: int, tau) -> tuple:
    """``(sum_{k=1..n} S_k, T_N, sum_{k=0..n} S_k^+)`` at the stored value of ``s``."""
    n = block_index(N, tau)
    lower = sum(count_Sk_direct(s, psi, tau, k) for k in range(1, n + 1))
    upper = sum(count_Sk_plus(s, psi, tau, k) for k in range(0, n + 1))
    return lower, count_TN(_exact_point(s), psi, N).count, upper


# ---------------------------------------------------------------------------
# experiments


def _draw_points(stream: SampleStream, M: int, bits: int):
    if stream.system.digit_form is not None:
        from dataclasses import replace

        return sample_sigma(replace(stream, mode="digit", bits=bits, depth=None), size=M)
    return sample_sigma_exact(stream, size=M, bits=bits)


def _count_task(args):
    s, psi, N, side, effective = args
    r = count_TN(s, psi, N, side, effective)
    return r.count, r.count_hi


def khintchine_experiment(stream: SampleStream, psi: ApproxFn, N: int, M: int, side: str = "plus",
                          effective: bool = False, bits: int | None = None, workers: int | None = None) -> dict:
    """Ratios ``T_N(s) / (sum psi / zeta(2))`` over ``M`` draws of ``s``."""
    bits = bits or max(192, 64 + 2 * math.ceil(math.log2(N + 1)))
    pts = _draw_points(stream, M, bits)
    res = pmap(_count_task, [(s, psi, N, side, effective) for s in pts], workers)
    denom = ZETA2_INV * sum_psi(psi, N, effective)
    lo = np.array([r[0] for r in res], dtype=float)
    hi = np.array([r[1] for r in res], dtype=float)
    rl, rh = lo / denom, hi / denom
    return {
        "N": N,
        "samples": M,
        "side": side,
        "sum_psi": denom / ZETA2_INV,
        "counts": lo.astype(int).tolist(),
        "counts_hi": hi.astype(int).tolist(),
        "ratios": rl.tolist(),
        "median": float(np.median(rl)),
        "median_hi": float(np.median(rh)),
        "q1": float(np.quantile(rl, 0.25)),
        "q3": float(np.quantile(rh, 0.75)),
        "ambiguous": int((hi > lo).sum()),
        "digests": [s.digest() for s in pts],
    }


def _gain_task(args):
    s, psi, N0, N1 = args
    a_ = count_TN(s, psi, N0)
    b_ = count_TN(s, psi, N1)
    return b_.count - a_.count_hi, b_.count_hi - a_.count


def convergent_gain(stream: SampleStream, psi: ApproxFn, N0: int, N1: int, M: int,
                    bits: int | None = None, workers: int | None = None) -> dict:
    """New solutions between ``N0`` and ``N1`` per draw (plus side)."""
    bits = bits or max(192, 64 + 2 * math.ceil(math.log2(N1 + 1)))
    pts = _draw_points(stream, M, bits)
    res = pmap(_gain_task, [(s, psi, N0, N1) for s in pts], workers)
    hi = np.array([r[1] for r in res])
    return {
        "N0": N0,
        "N1": N1,
        "samples": M,
        "gains": [int(r[0]) for r in res],
        "gains_hi": hi.tolist(),
        "zero_fraction": float((hi == 0).mean()),
        "tail_sum": math.fsum(psi.values_at(np.arange(N0 + 1, N1 + 1)).tolist()),
    }


def y_k(psi: ApproxFn, tau, k: int) -> float:
    tau = as_tau(tau)
    return ZETA2_INV * float((tau**k - tau ** (k - 1)) * eval_psi_exact(psi, tau**k, "ceil"))


def _blocks_task(args):
    s, psi, tau, ks, method = args
    if method == "siegel":
        return [count_Sk_siegel(s, psi, tau, k) for k in ks]
    return [count_Sk_direct(s, psi, tau, k) for k in ks]


def variance_probe(draws, psi: ApproxFn, tau, m: int, n: int, M: int | None = None,
                   method: str = "direct", workers: int | None = None) -> dict:
    """``E[(sum_k Z_k)^2] / sum_k y_k`` with ``Z_k = S_k - y_k`` over blocks ``m..n``.

    ``draws`` is a SampleStream (``M`` draws) or an explicit list of points.
    """
    if isinstance(draws, SampleStream):
        if M is None:
            raise ConfigError("M is required with a sample stream")
        pts = [s.to_fraction() for s in _draw_points(draws, M, 192)]
    else:
        pts = [_exact_point(s) for s in draws]
    ks = list(range(m, n + 1))
    S = np.array(pmap(_blocks_task, [(s, psi, tau, ks, method) for s in pts], workers), dtype=float)
    y = np.array([y_k(psi, tau, k) for k in ks])
    Z = (S - y[None, :]).sum(axis=1)
    sq = Z**2
    ysum = float(y.sum())
    se = float(sq.std(ddof=1) / math.sqrt(len(sq))) / ysum if len(sq) > 1 else 0.0
    return {
        "blocks": [m, n],
        "samples": len(pts),
        "ratio": float(sq.mean()) / ysum,
        "stderr": se,
        "sum_y": ysum,
        "mean_S": S.mean(axis=0).tolist(),
        "y": y.tolist(),
    }
