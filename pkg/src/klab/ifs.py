"""Weighted affine iterated function systems on the line and their
stationary (self-similar) measures.

Maps are stored with exact ``Fraction`` coefficients so that compositions can
be carried out exactly whenever the caller needs it; float views are derived.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property

import numpy as np

from .bigfixed import DEFAULT_BITS, BigFixed
from .errors import ConfigError, ResourceError
from .seeds import BLOCK, rng_for

CHUNK = 64
DEFAULT_TOLERANCE = 2.0**-96


class CapExceeded(ResourceError):
    pass


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ConfigError(f"non-finite coefficient {x!r}")
        return Fraction(x)
    return Fraction(x)


@dataclass(frozen=True)
class AffineMap:
    rate: Fraction
    offset: Fraction

    def __post_init__(self):
        object.__setattr__(self, "rate", as_fraction(self.rate))
        object.__setattr__(self, "offset", as_fraction(self.offset))
        if self.rate == 0:
            raise ConfigError("affine map rate must be nonzero")

    def __call__(self, t):
        if isinstance(t, (Fraction, int)):
            return self.rate * t + self.offset
        return float(self.rate) * t + float(self.offset)

    def compose(self, inner: "AffineMap") -> "AffineMap":
        """``self ∘ inner``."""
        return AffineMap(self.rate * inner.rate, self.rate * inner.offset + self.offset)

    def fixed_point(self):
        if self.rate == 1:
            return None if self.offset else "all"
        return self.offset / (1 - self.rate)


@dataclass(frozen=True)
class AffineSystem:
    maps: tuple
    weights: tuple

    def __post_init__(self):
        maps = tuple(m if isinstance(m, AffineMap) else AffineMap(*m) for m in self.maps)
        try:
            weights = tuple(as_fraction(w) for w in self.weights)
        except (TypeError, ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad weight vector: {exc}") from None
        if not maps:
            raise ConfigError("system needs at least one map")
        if len(weights) != len(maps):
            raise ConfigError(f"{len(weights)} weights for {len(maps)} maps")
        if any(w <= 0 for w in weights):
            raise ConfigError("weights must be positive")
        if abs(float(sum(weights)) - 1.0) > 1e-12:
            raise ConfigError(f"weights sum to {float(sum(weights))!r}, not 1")
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, maps) -> "AffineSystem":
        return cls(tuple(maps), (Fraction(1, len(maps)),) * len(maps))

    @classmethod
    def digits(cls, base: int, digits, weights=None) -> "AffineSystem":
        """Missing-digit system ``t -> (t + d) / base`` for each digit ``d``."""
        maps = tuple(AffineMap(Fraction(1, base), Fraction(d, base)) for d in digits)
        if weights is None:
            return cls.uniform(maps)
        return cls(maps, tuple(weights))

    def __len__(self):
        return len(self.maps)

    @cached_property
    def rates(self) -> np.ndarray:
        return np.array([float(m.rate) for m in self.maps])

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.array([float(m.offset) for m in self.maps])

    @cached_property
    def probs(self) -> np.ndarray:
        p = np.array([float(w) for w in self.weights])
        return p / p.sum()

    @cached_property
    def uniform_weights(self) -> bool:
        return len(set(self.weights)) == 1

    @cached_property
    def digit_form(self):
        """``(base, digits)`` when every map is ``t -> (t + d)/base``, else None."""
        r = self.maps[0].rate
        if r.numerator != 1 or r.denominator < 2 or any(m.rate != r for m in self.maps):
            return None
        base = r.denominator
        digits = []
        for m in self.maps:
            d = m.offset * base
            if d.denominator != 1 or not 0 <= d < base:
                return None
            digits.append(int(d))
        if len(set(digits)) != len(digits):
            return None
        return base, tuple(digits)

    @cached_property
    def common_denominator(self) -> int:
        q = 1
        for m in self.maps:
            q = math.lcm(q, m.rate.denominator, m.offset.denominator)
        return q


@dataclass(frozen=True)
class ValidationReport:
    contracting: bool
    mean_log_rate: float
    common_fixed_point: Fraction | None
    orientation_preserving: bool

    @property
    def ok(self) -> bool:
        return self.contracting and self.common_fixed_point is None


def validate(system: AffineSystem) -> ValidationReport:
    if not isinstance(system, AffineSystem):
        raise ConfigError("expected an AffineSystem")
    mean = float(sum(float(w) * math.log(abs(m.rate)) for w, m in zip(system.weights, system.maps)))
    fps = [m.fixed_point() for m in system.maps]
    finite = {fp for fp in fps if fp not in (None, "all")}
    common = None
    if None not in fps:
        if not finite:
            common = Fraction(0)
        elif len(finite) == 1:
            common = finite.pop()
    return ValidationReport(
        contracting=mean < 0,
        mean_log_rate=mean,
        common_fixed_point=common,
        orientation_preserving=all(m.rate > 0 for m in system.maps),
    )


def lyapunov(system: AffineSystem) -> float:
    """Top Lyapunov exponent of the adjoint walk, ``-sum w_i log|r_i|``."""
    return -validate(system).mean_log_rate


# ---------------------------------------------------------------------------
# sample streams


@dataclass(frozen=True)
class SampleStream:
    """A reproducible source of draws.

    ``mode`` is ``"backward"`` (sigma by backward iteration), ``"forward"``
    (the n-step measure, ``n`` required) or ``"digit"`` (exact digit
    expansions, missing-digit systems only).  Draw ``i`` depends only on
    ``(seed, i)``: streams with equal seeds share their index sequences, which
    couples the three modes draw by draw.
    """

    system: AffineSystem
    mode: str = "backward"
    seed: int = 0
    n: int | None = None
    depth: int | None = None
    bits: int = DEFAULT_BITS
    position: int = 0

    def __post_init__(self):
        if self.mode not in ("backward", "forward", "digit"):
            raise ConfigError(f"unknown stream mode {self.mode!r}")
        if self.mode == "forward" and (self.n is None or self.n < 0):
            raise ConfigError("forward mode needs n >= 0")
        if self.mode == "digit":
            if self.system.digit_form is None:
                raise ConfigError("digit mode needs a missing-digit system t -> (t + d)/B")
            if self.depth is None:
                base = self.system.digit_form[0]
                object.__setattr__(self, "depth", math.ceil(self.bits / math.log2(base)) + 2)

    def advance(self, k: int) -> "SampleStream":
        return replace(self, position=self.position + k)

    def with_mode(self, mode: str, **kw) -> "SampleStream":
        return replace(self, mode=mode, **kw)


def _draw_chunk(rng, system: AffineSystem, rows: int) -> np.ndarray:
    m = len(system)
    if m == 1:
        return np.zeros((rows, CHUNK), dtype=np.int64)
    if system.uniform_weights:
        return rng.integers(0, m, size=(rows, CHUNK))
    return rng.choice(m, size=(rows, CHUNK), p=system.probs)


class _BlockIndices:
    """Index matrix of one block, grown CHUNK columns at a time."""

    def __init__(self, system, seed, block):
        self.system = system
        self.rng = rng_for(seed, [block])
        self.cols = []

    def columns(self, n: int) -> np.ndarray:
        while len(self.cols) * CHUNK < n:
            self.cols.append(_draw_chunk(self.rng, self.system, BLOCK))
        if not self.cols:
            return np.zeros((BLOCK, 0), dtype=np.int64)
        return np.concatenate(self.cols, axis=1)[:, :n]


def _rows(stream: SampleStream, size):
    """Yield ``(block, row_slice, out_slice)`` covering the requested draws."""
    start = stream.position
    count = 1 if size is None else int(size)
    stop = start + count
    out = 0
    b = start // BLOCK
    while b * BLOCK < stop:
        lo = max(start, b * BLOCK) - b * BLOCK
        hi = min(stop, (b + 1) * BLOCK) - b * BLOCK
        yield b, slice(lo, hi), slice(out, out + hi - lo)
        out += hi - lo
        b += 1


def stream_indices(stream: SampleStream, n: int, size=None) -> np.ndarray:
    """The first ``n`` map indices of each requested draw."""
    count = 1 if size is None else int(size)
    out = np.empty((count, n), dtype=np.int64)
    for b, rows, dst in _rows(stream, size):
        out[dst] = _BlockIndices(stream.system, stream.seed, b).columns(n)[rows]
    return out


def compose_indices(system: AffineSystem, idx: np.ndarray, depth=None) -> np.ndarray:
    """``phi_{i1} ∘ ... ∘ phi_{id}(0)`` per row, Horner from the innermost map.

    ``depth`` (per row) truncates each row; default uses every column.
    """
    idx = np.atleast_2d(idx)
    rates, offsets = system.rates, system.offsets
    x = np.zeros(idx.shape[0])
    for j in range(idx.shape[1] - 1, -1, -1):
        col = idx[:, j]
        upd = rates[col] * x + offsets[col]
        x = upd if depth is None else np.where(j < depth, upd, x)
    return x


def forward_chain(system: AffineSystem, idx) -> np.ndarray:
    """The Markov chain ``x_{k+1} = phi_{j_{k+1}}(x_k)`` from 0, per row."""
    idx = np.atleast_2d(idx)
    x = np.zeros(idx.shape[0])
    for j in range(idx.shape[1]):
        col = idx[:, j]
        x = system.rates[col] * x + system.offsets[col]
    return x


def _stop_depth(system, block_idx: _BlockIndices, tolerance: float, rows) -> np.ndarray:
    """Per-row depth d where |prod rates| < tol and the last term moved < tol."""
    logr = np.log(np.abs(system.rates))
    absb = np.abs(system.offsets)
    logtol = math.log(tolerance)
    n = CHUNK
    while True:
        idx = block_idx.columns(n)[rows]
        logp = np.cumsum(logr[idx], axis=1)
        prev = np.concatenate([np.zeros((idx.shape[0], 1)), logp[:, :-1]], axis=1)
        with np.errstate(divide="ignore"):
            step = np.log(absb[idx]) + prev
        done = (logp < logtol) & (step < logtol)
        hit = done.any(axis=1)
        if hit.all():
            return done.argmax(axis=1) + 1
        if n > 1 << 16:
            raise CapExceeded("backward iteration did not reach tolerance within 65536 steps")
        n += CHUNK


def sample_sigma(stream: SampleStream, tolerance: float = DEFAULT_TOLERANCE, size=None):
    """Draw(s) from the stationary measure.

    Backward mode returns floats; digit mode returns ``BigFixed`` values
    carrying the exact truncated expansion plus the tail bound.
    """
    if stream.mode == "digit":
        return _sample_digit(stream, size)
    if stream.mode != "backward":
        raise ConfigError("sample_sigma needs backward or digit mode")
    if not validate(stream.system).contracting:
        raise ConfigError("system is not contracting in average; backward iteration would not terminate")
    count = 1 if size is None else int(size)
    out = np.empty(count)
    for b, rows, dst in _rows(stream, size):
        bi = _BlockIndices(stream.system, stream.seed, b)
        depth = _stop_depth(stream.system, bi, tolerance, rows)
        idx = bi.columns(int(depth.max()))[rows]
        out[dst] = compose_indices(stream.system, idx, depth)
    return float(out[0]) if size is None else out


def sample_sigma_n(stream: SampleStream, n: int, size=None):
    """Draw(s) of ``phi_{i1} ∘ ... ∘ phi_{in}(0)`` with i.i.d. indices."""
    if n < 0:
        raise ConfigError("n must be non-negative")
    idx = stream_indices(stream, n, size)
    out = compose_indices(stream.system, idx)
    return float(out[0]) if size is None else out


def sample_digits(stream: SampleStream, size=None) -> np.ndarray:
    """Digit rows (actual digits, not map indices) of a digit-mode stream."""
    base, digits = stream.system.digit_form
    idx = stream_indices(stream, stream.depth, size)
    return np.asarray(digits, dtype=np.int64)[idx]


def _digits_to_int(rows: np.ndarray, base: int) -> list:
    """Integer value of each digit row read in ``base`` (most significant first)."""
    width = max(1, int(62 / math.log2(base)))
    n = rows.shape[1]
    vals = [0] * rows.shape[0]
    for lo in range(0, n, width):
        part = rows[:, lo:lo + width]
        acc = np.zeros(rows.shape[0], dtype=np.int64)
        for j in range(part.shape[1]):
            acc = acc * base + part[:, j]
        scale = base ** part.shape[1]
        vals = [v * scale + int(a) for v, a in zip(vals, acc.tolist())]
    return vals


def _sample_digit(stream: SampleStream, size):
    base, _ = stream.system.digit_form
    rows = sample_digits(stream, size)
    den = base ** stream.depth
    one = 1 << stream.bits
    tail_err = -((-one) // den)
    out = []
    for num in _digits_to_int(rows, base):
        mant, rem = divmod(num << stream.bits, den)
        out.append(BigFixed(mant, stream.bits, (1 if rem else 0) + tail_err))
    return out[0] if size is None else out


def digits_value(digits, base: int) -> Fraction:
    """Exact value of the finite expansion ``0.d1 d2 ... dn`` in ``base``."""
    v = Fraction(0)
    for k, d in enumerate(digits, 1):
        v += Fraction(int(d), base**k)
    return v


def sample_sigma_exact(stream: SampleStream, size=None, bits: int | None = None):
    """Sigma draws as ``BigFixed`` for any system with exact coefficients.

    Digit systems use the digit path; otherwise the backward composition is
    evaluated in integer arithmetic until the rate product drops below
    ``2**-bits``.
    """
    bits = stream.bits if bits is None else bits
    system = stream.system
    if system.digit_form is not None:
        return _sample_digit(replace(stream, mode="digit", bits=bits, depth=None), size)
    if not validate(system).contracting:
        raise ConfigError("system is not contracting in average")
    q = system.common_denominator
    a = [int(m.rate * q) for m in system.maps]
    c = [int(m.offset * q) for m in system.maps]
    bound = max(abs(m.offset) for m in system.maps) + 1
    count = 1 if size is None else int(size)
    out = [None] * count
    for b, rows, dst in _rows(stream, size):
        bi = _BlockIndices(system, stream.seed, b)
        depth = _stop_depth(system, bi, 2.0 ** -(bits + 4 + int(math.log2(float(bound)) + 1)), rows)
        idx = bi.columns(int(depth.max()))[rows]
        for r, k in enumerate(range(dst.start, dst.stop)):
            d = int(depth[r])
            num, den = 0, 1
            # value = sum_j c_j prod_{l<j} a_l / q^j ; Horner from the innermost
            for j in range(d - 1, -1, -1):
                i = idx[r, j]
                num = a[i] * num + c[i] * den
                den *= q
            mant, rem = divmod(num << bits, den)
            # truncated tail is below 2^-(bits+4) by the stopping rule
            out[k] = BigFixed(mant, bits, 2)
    return out[0] if size is None else out


# ---------------------------------------------------------------------------
# orientation-preserving reduction


@dataclass
class PositivizedStream:
    """Draws of the composite ``phi_1 ∘ ... ∘ phi_tau`` where ``tau`` is the
    first time the composite rate is positive."""

    system: AffineSystem
    seed: int = 0
    cap: int = 64
    cap_hits: int = field(default=0, init=False)

    def draw_indices(self, block: int, rows: int | None = None):
        """Index sequences and stopping times for one block of draws."""
        bi = _BlockIndices(self.system, self.seed, block)
        sign = np.sign(self.system.rates)
        n = CHUNK
        while True:
            idx = bi.columns(n)
            pos = np.cumprod(sign[idx], axis=1) > 0
            if pos.any(axis=1).all() or n >= self.cap:
                break
            n += CHUNK
        idx = idx[:, : self.cap]
        pos = pos[:, : self.cap]
        if not pos.any(axis=1).all():
            self.cap_hits += int((~pos.any(axis=1)).sum())
            raise CapExceeded(f"positive composite not reached within cap={self.cap} maps")
        tau = pos.argmax(axis=1) + 1
        if rows is not None:
            idx, tau = idx[rows], tau[rows]
        return idx, tau

    def draw(self, size: int):
        """List of ``(AffineMap, tau)`` composite draws."""
        out = []
        for b, rows, _ in _rows(SampleStream(self.system, seed=self.seed), size):
            idx, tau = self.draw_indices(b, rows)
            for r in range(idx.shape[0]):
                f = self.system.maps[idx[r, 0]]
                for j in range(1, tau[r]):
                    f = f.compose(self.system.maps[idx[r, j]])
                out.append((f, int(tau[r])))
        return out


def positivize_sampler(system: AffineSystem, seed: int = 0, cap: int = 64) -> PositivizedStream:
    rep = validate(system)
    if not rep.contracting:
        raise ConfigError("system is not contracting in average")
    return PositivizedStream(system, seed, cap)


# ---------------------------------------------------------------------------
# regularity estimators


def estimate_ball_mass(samples, radii) -> dict:
    """Largest fraction of samples in a closed interval of length ``2r``.

    The supremum over interval positions of an empirical measure is attained
    with the left endpoint on a sample, so a sorted sweep suffices.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise ValueError("no samples")
    out = {}
    for r in radii:
        if r <= 0:
            raise ValueError("radii must be positive")
        ends = np.searchsorted(x, x + 2 * r, side="right")
        out[r] = float((ends - np.arange(x.size)).max() / x.size)
    return out


def cdf_distance(samples_a, samples_b) -> float:
    """Sup-norm distance between two empirical CDFs."""
    a = np.sort(np.asarray(samples_a, dtype=float))
    b = np.sort(np.asarray(samples_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample list")
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.abs(fa - fb).max())


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log y against log x."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    return float(np.polyfit(lx, ly, 1)[0])


# ---------------------------------------------------------------------------
# IFS definition files


def _parse_list(text: str):
    return [tok for tok in text.replace(",", " ").split() if tok]


def parse_ifs(text: str) -> AffineSystem:
    cp = configparser.ConfigParser()
    try:
        has_header = any(line.strip().startswith("[") for line in text.splitlines())
        cp.read_string(text if has_header else "[ifs]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable IFS definition: {exc}") from None
    if "ifs" not in cp:
        raise ConfigError("IFS definition needs an [ifs] section")
    sec = cp["ifs"]
    try:
        weights = [Fraction(w) for w in _parse_list(sec["weights"])] if "weights" in sec else None
        if "base" in sec:
            base = int(sec["base"])
            digits = [int(d) for d in _parse_list(sec.get("digits", ""))]
            if base < 2 or not digits:
                raise ConfigError("digit systems need base >= 2 and a nonempty digit list")
            return AffineSystem.digits(base, digits, weights)
        if "maps" not in sec:
            raise ConfigError("IFS definition needs either base/digits or maps")
        maps = []
        for item in sec["maps"].split(";"):
            toks = _parse_list(item)
            if not toks:
                continue
            if len(toks) != 2:
                raise ConfigError(f"map entry {item.strip()!r} must be 'rate offset'")
            maps.append(AffineMap(Fraction(toks[0]), Fraction(toks[1])))
    except (ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad number in IFS definition: {exc}") from None
    if weights is None:
        return AffineSystem.uniform(maps)
    return AffineSystem(tuple(maps), tuple(weights))


def load_ifs(path) -> AffineSystem:
    with open(path, encoding="utf-8") as fh:
        return parse_ifs(fh.read())


CANTOR = AffineSystem.digits(3, (0, 2))
LEBESGUE = AffineSystem.digits(2, (0, 1))


def lyapunov_empirical(system: AffineSystem, n: int, M: int, seed: int = 0) -> tuple:
    """Mean and standard error of ``-(1/n) log|prod rates|`` over ``M`` prefixes."""
    idx = stream_indices(SampleStream(system, seed=seed), n, M)
    v = -np.log(np.abs(system.rates))[idx].sum(axis=1) / n
    se = float(v.std(ddof=1) / math.sqrt(M)) if M > 1 else 0.0
    return float(v.mean()), se


def system_to_text(system: AffineSystem) -> str:
    """Canonical IFS definition text (round-trips through ``parse_ifs``)."""
    maps = "; ".join(f"{m.rate} {m.offset}" for m in system.maps)
    weights = ", ".join(str(w) for w in system.weights)
    return f"[ifs]\nmaps = {maps}\nweights = {weights}\n"
