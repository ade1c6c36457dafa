"""Group elements of SL2(R), lattices in SL2(R)/SL2(Z), reduction, systole,
primitive lattice points in rectangles and a Haar sampler.

Two lattice representations coexist:

* float lattices: a reduced 2x2 basis (columns are basis vectors);
* exact lattices ``a(t) u(s) Z^2`` with rational ``t`` and ``s``.  They are
  reduced in integer arithmetic, so ``t`` may be astronomically large
  (``3**200``) and rectangle membership is decided exactly.  Every exact
  lattice also carries its float reduced basis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DomainError, ResourceError

HERMITE = (4 / 3) ** 0.25
ZETA2_INV = 6 / math.pi**2
DEFAULT_BUDGET = 10**8
DET_TOL = 1e-9
TIE_TOL = 1e-12
AXIS_TOL = 1e-12


# ---------------------------------------------------------------------------
# group elements


@dataclass(frozen=True)
class GroupElement:
    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float).reshape(2, 2)
        scale = max(1.0, abs(m[0, 0] * m[1, 1]), abs(m[0, 1] * m[1, 0]))
        if abs(np.linalg.det(m) - 1) > 1e-12 * scale:
            raise DomainError(f"determinant {np.linalg.det(m)!r} is not 1")
        object.__setattr__(self, "m", m)

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.m @ other.m)

    @property
    def op_norm(self) -> float:
        return float(np.linalg.norm(self.m, 2))


def a(t) -> GroupElement:
    if not t > 0:
        raise DomainError("a(t) needs t > 0")
    r = math.sqrt(t)
    return GroupElement(np.array([[r, 0.0], [0.0, 1 / r]]))


def u(s) -> GroupElement:
    return GroupElement(np.array([[1.0, float(s)], [0.0, 1.0]]))


@dataclass(frozen=True)
class PElement:
    """``g = a(r)^-1 u(b)`` stored as ``(log r, b)``.

    ``exact`` optionally holds ``(r, b)`` as Fractions, which lets the
    element act exactly on exact lattices.
    """

    log_rate: float
    offset: float
    exact: tuple | None = None

    @classmethod
    def from_rate(cls, rate, offset) -> "PElement":
        if rate <= 0:
            raise DomainError("P-elements need a positive rate")
        ex = None
        if isinstance(rate, (int, Fraction)) and isinstance(offset, (int, Fraction)):
            ex = (Fraction(rate), Fraction(offset))
        return cls(_log(rate), float(offset), ex)

    @classmethod
    def identity(cls) -> "PElement":
        return cls(0.0, 0.0, (Fraction(1), Fraction(0)))

    @property
    def rate(self) -> float:
        return math.exp(self.log_rate)


def _log(x) -> float:
    if isinstance(x, Fraction):
        return math.log(x.numerator) - math.log(x.denominator)
    return math.log(x)


def compose_p(g1: PElement, g2: PElement) -> PElement:
    """Matrix product ``g1 g2``: ``(r1 r2, b1 r2 + b2)``.

    As affine maps ``t -> r t + b`` this is ``phi2 ∘ phi1``.
    """
    ex = None
    if g1.exact is not None and g2.exact is not None:
        (r1, b1), (r2, b2) = g1.exact, g2.exact
        ex = (r1 * r2, b1 * r2 + b2)
    return PElement(g1.log_rate + g2.log_rate, g1.offset * math.exp(g2.log_rate) + g2.offset, ex)


def p_to_matrix(g: PElement) -> GroupElement:
    h = math.exp(-g.log_rate / 2)
    return GroupElement(np.array([[h, h * g.offset], [0.0, 1 / h]]))


# ---------------------------------------------------------------------------
# exact comparisons


@dataclass(frozen=True)
class Surd:
    """The real number ``sign * sqrt(square)`` with rational ``square >= 0``."""

    sign: int
    square: Fraction

    @classmethod
    def of(cls, x) -> "Surd":
        if isinstance(x, Surd):
            return x
        q = Fraction(x)
        return cls((q > 0) - (q < 0), q * q)

    @classmethod
    def sqrt(cls, q) -> "Surd":
        q = Fraction(q)
        if q < 0:
            raise DomainError("square root of a negative number")
        return cls(1 if q else 0, q)

    def __float__(self):
        return self.sign * math.sqrt(self.square)


def surd_cmp(x: Surd, y: Surd) -> int:
    if x.sign != y.sign:
        return (x.sign > y.sign) - (x.sign < y.sign)
    c = (x.square > y.square) - (x.square < y.square)
    return c * x.sign


@dataclass(frozen=True)
class Rect:
    """``[x_lo, x_hi) x (y_lo, y_hi]``.  Bounds may be floats, Fractions or Surds."""

    x_lo: object
    x_hi: object
    y_lo: object
    y_hi: object

    def __post_init__(self):
        f = self.floats
        if not (f[0] < f[1] and f[2] < f[3]):
            if not (surd_cmp(Surd.of(self.x_lo), Surd.of(self.x_hi)) < 0
                    and surd_cmp(Surd.of(self.y_lo), Surd.of(self.y_hi)) < 0):
                raise DomainError("rect needs x_lo < x_hi and y_lo < y_hi")

    @classmethod
    def parse(cls, text: str) -> "Rect":
        parts = [Fraction(p.strip()) for p in text.split(",")]
        if len(parts) != 4:
            raise DomainError("rect needs four comma-separated numbers x0,x1,y0,y1")
        return cls(*parts)

    @property
    def floats(self) -> tuple:
        return tuple(float(v) for v in (self.x_lo, self.x_hi, self.y_lo, self.y_hi))

    @property
    def area(self) -> float:
        x0, x1, y0, y1 = self.floats
        return (x1 - x0) * (y1 - y0)

    @property
    def siegel_mean(self) -> float:
        """Haar mean of the primitive count, ``area / zeta(2)``."""
        return ZETA2_INV * self.area

    def contains(self, x: float, y: float) -> bool:
        x0, x1, y0, y1 = self.floats
        return x0 <= x < x1 and y0 < y <= y1


# ---------------------------------------------------------------------------
# exact lattices a(t) u(s) Z^2


@dataclass(frozen=True)
class ShearLattice:
    """``a(t) u(s) Z^2`` with rational ``t > 0`` and ``s``.

    A lattice vector is recorded by the integer pair ``(P, n)``: for the
    generator coefficients ``(m, n)`` it is ``P = m d + n a`` where
    ``s = a/d``.  Its coordinates are ``(sqrt(t) P / d, n / sqrt(t))``.
    """

    t: Fraction
    s: Fraction

    @property
    def alpha_beta(self):
        tn, td, d = self.t.numerator, self.t.denominator, self.s.denominator
        return tn * tn, (td * d) ** 2

    def q(self, v) -> int:
        al, be = self.alpha_beta
        return al * v[0] * v[0] + be * v[1] * v[1]

    def ip(self, v, w) -> int:
        al, be = self.alpha_beta
        return al * v[0] * w[0] + be * v[1] * w[1]

    def coords(self, v) -> tuple:
        """Float coordinates of the vector ``(P, n)``."""
        P, n = v
        tn, td, d = self.t.numerator, self.t.denominator, self.s.denominator
        x = math.copysign(math.sqrt((tn * P * P) / (td * d * d)), P) if P else 0.0
        y = math.copysign(math.sqrt((td * n * n) / tn), n) if n else 0.0
        return x, y

    def surds(self, v) -> tuple:
        P, n = v
        d = self.s.denominator
        sx = (P > 0) - (P < 0)
        sy = (n > 0) - (n < 0)
        return Surd(sx, self.t * Fraction(P * P, d * d)), Surd(sy, Fraction(n * n) / self.t)

    def generator_coeffs(self, v) -> tuple:
        """``(m, n)`` with ``v = m a(t)u(s)e1 + n a(t)u(s)e2``."""
        P, n = v
        m, rem = divmod(P - n * self.s.numerator, self.s.denominator)
        assert rem == 0
        return m, n

    def reduce(self):
        """Lagrange reduction in integer arithmetic; returns canonical (v1, v2)."""
        v1, v2 = (self.s.denominator, 0), (self.s.numerator, 1)
        q1, q2 = self.q(v1), self.q(v2)
        while True:
            if q2 < q1:
                v1, v2, q1, q2 = v2, v1, q2, q1
            b = self.ip(v1, v2)
            mu = (2 * b + q1) // (2 * q1)
            if mu == 0:
                break
            v2 = (v2[0] - mu * v1[0], v2[1] - mu * v1[1])
            q2 = self.q(v2)
        return _canonical_exact(self, v1, v2)


def _cross_sign(v, w) -> int:
    c = v[0] * w[1] - v[1] * w[0]
    return (c > 0) - (c < 0)


def _upper_exact(v):
    if v[1] < 0 or (v[1] == 0 and v[0] < 0):
        return (-v[0], -v[1])
    return v


def _canonical_exact(L: ShearLattice, v1, v2):
    """Shortest vector in the upper half plane with least polar angle, then
    ``v2`` with ``det = +1`` and ``<v1, v2>`` in ``(-|v1|^2/2, |v1|^2/2]``."""
    if _cross_sign(v1, v2) < 0:
        v2 = (-v2[0], -v2[1])
    q1 = L.q(v1)
    cands = [(1, 0)]
    if L.q(v2) == q1:
        cands.append((0, 1))
        for sgn in (1, -1):
            w = (v1[0] + sgn * v2[0], v1[1] + sgn * v2[1])
            if L.q(w) == q1:
                cands.append((1, sgn))
    best = None
    for a_, b_ in cands:
        w = _upper_exact((a_ * v1[0] + b_ * v2[0], a_ * v1[1] + b_ * v2[1]))
        # smaller angle in [0, pi) means positive cross product towards the other
        if best is None or _cross_sign(w, best) > 0:
            best = w
    w1 = best
    if w1 == v1:
        w2 = v2
    elif w1 == (-v1[0], -v1[1]):
        w2 = (-v2[0], -v2[1])
    else:
        # w1 = a v1 + b v2 primitive; complete to a det +1 basis
        a_, b_ = _solve_coeffs(v1, v2, w1)
        # x a + y b = 1 gives the completion -y v1 + x v2 with det +1
        _, xg, yg = _ext_gcd(a_, b_)
        cc, d2 = -yg, xg
        w2 = (cc * v1[0] + d2 * v2[0], cc * v1[1] + d2 * v2[1])
    q1 = L.q(w1)
    b = L.ip(w1, w2)
    # mu = ceil(b/q1 - 1/2)
    mu = -((-(2 * b - q1)) // (2 * q1))
    w2 = (w2[0] - mu * w1[0], w2[1] - mu * w1[1])
    return w1, w2


def _solve_coeffs(v1, v2, w):
    det = v1[0] * v2[1] - v1[1] * v2[0]
    a_ = (w[0] * v2[1] - w[1] * v2[0]) // det
    b_ = (v1[0] * w[1] - v1[1] * w[0]) // det
    return a_, b_


def _ext_gcd(a_, b_):
    """``(g, x, y)`` with ``x a + y b = g``."""
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b_:
        k = a_ // b_
        a_, b_ = b_, a_ - k * b_
        x0, x1 = x1, x0 - k * x1
        y0, y1 = y1, y0 - k * y1
    if a_ < 0:
        return -a_, -x0, -y0
    return a_, x0, y0


# ---------------------------------------------------------------------------
# lattices


@dataclass(frozen=True, eq=False)
class UnimodularLattice:
    basis: np.ndarray
    exact: ShearLattice | None = None
    exact_basis: tuple | None = field(default=None, repr=False)

    @property
    def v1(self) -> np.ndarray:
        return self.basis[:, 0]

    @property
    def v2(self) -> np.ndarray:
        return self.basis[:, 1]

    def to_json(self) -> list:
        return [float(v) for v in self.basis.reshape(-1)]

    def same_as(self, other: "UnimodularLattice", tol: float = 1e-9) -> bool:
        return bool(np.allclose(self.basis, other.basis, atol=tol, rtol=0))


def _lagrange_batch(v1, v2, max_iter=100000):
    v1, v2 = v1.copy(), v2.copy()
    for _ in range(max_iter):
        q1 = np.einsum("ij,ij->i", v1, v1)
        q2 = np.einsum("ij,ij->i", v2, v2)
        sw = q2 < q1
        if sw.any():
            v1[sw], v2[sw] = v2[sw].copy(), v1[sw].copy()
            q1 = np.where(sw, q2, q1)
        mu = np.rint(np.einsum("ij,ij->i", v1, v2) / q1)
        if not mu.any():
            return v1, v2
        v2 -= mu[:, None] * v1
    raise ResourceError("lattice reduction did not converge")


def _is_upper(c) -> bool:
    if abs(c[1]) <= AXIS_TOL * abs(c[0]):
        return c[0] > 0
    return c[1] > 0


def _canonical_float_one(v1, v2):
    q1 = v1 @ v1
    cands = [v1]
    if abs(v2 @ v2 - q1) <= TIE_TOL * q1:
        cands += [v2, v1 + v2, v1 - v2]
    cands = [c for c in cands if abs(c @ c - q1) <= TIE_TOL * q1]
    ups = [c if _is_upper(c) else -c for c in cands]
    angles = [max(math.atan2(c[1], c[0]), 0.0) for c in ups]
    w1 = ups[int(np.argmin(angles))]
    # complete w1 to a det +1 basis from the integer lattice spanned by v1, v2
    det = v1[0] * v2[1] - v1[1] * v2[0]
    ca = round((w1[0] * v2[1] - w1[1] * v2[0]) / det)
    cb = round((v1[0] * w1[1] - v1[1] * w1[0]) / det)
    _, x, y = _ext_gcd(ca, cb)
    w2 = -y * v1 + x * v2
    q1 = w1 @ w1
    mu = math.ceil((w1 @ w2) / q1 - 0.5)
    return w1, w2 - mu * w1


def canonicalize_batch(B: np.ndarray) -> np.ndarray:
    """Reduce and normalize a stack of bases, shape ``(M, 2, 2)``."""
    B = np.asarray(B, dtype=float)
    det = B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0]
    if np.any(np.abs(np.abs(det) - 1) > DET_TOL):
        raise DomainError("basis determinant is not +-1 within 1e-9")
    v1, v2 = _lagrange_batch(B[:, :, 0], B[:, :, 1])
    cross = v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]
    v2[cross < 0] *= -1
    # y within rounding of zero counts as the positive x-axis side
    axis = np.abs(v1[:, 1]) <= AXIS_TOL * np.abs(v1[:, 0])
    flip = np.where(axis, v1[:, 0] < 0, v1[:, 1] < 0)
    v1[flip] *= -1
    v2[flip] *= -1
    q1 = np.einsum("ij,ij->i", v1, v1)
    q2 = np.einsum("ij,ij->i", v2, v2)
    ties = np.abs(q2 - q1) <= TIE_TOL * q1
    mu = np.ceil(np.einsum("ij,ij->i", v1, v2) / q1 - 0.5)
    v2 -= mu[:, None] * v1
    for i in np.flatnonzero(ties):
        v1[i], v2[i] = _canonical_float_one(v1[i], v2[i])
    return np.stack([v1, v2], axis=2)


def gauss_reduce(basis) -> UnimodularLattice:
    """Canonical Lagrange-Gauss reduced basis of the lattice spanned by the columns."""
    return UnimodularLattice(canonicalize_batch(np.asarray(basis, dtype=float)[None])[0])


def lattice_from_exact(L: ShearLattice) -> UnimodularLattice:
    v1, v2 = L.reduce()
    basis = np.array([L.coords(v1), L.coords(v2)]).T
    return UnimodularLattice(basis, L, (v1, v2))


def translate_point(t, s) -> UnimodularLattice:
    """``a(t) u(s) Z^2`` reduced exactly.  ``s`` may be a BigFixed (its stored
    value is used), a Fraction, an int or a float."""
    if hasattr(s, "to_fraction"):
        s = s.to_fraction()
    t = Fraction(t)
    if t <= 0:
        raise DomainError("translate_point needs t > 0")
    return lattice_from_exact(ShearLattice(t, Fraction(s)))


Z2 = translate_point(1, 0)


def act(g, x: UnimodularLattice) -> UnimodularLattice:
    """``g . x`` as a canonical reduced lattice.

    A P-element with exact coordinates acting on an exact lattice stays
    exact, using ``a(1/r)u(b) a(t)u(s) = a(t/r) u(s + b/t)``.
    """
    if isinstance(g, PElement):
        if g.exact is not None and x.exact is not None:
            r, b = g.exact
            L = x.exact
            return lattice_from_exact(ShearLattice(L.t / r, L.s + b / L.t))
        g = p_to_matrix(g)
    if not isinstance(g, GroupElement):
        g = GroupElement(np.asarray(g, dtype=float))
    return gauss_reduce(g.m @ x.basis)


def systole(x: UnimodularLattice) -> float:
    return float(np.hypot(*x.v1))


def systoles(B: np.ndarray) -> np.ndarray:
    return np.hypot(B[:, 0, 0], B[:, 1, 0])


# ---------------------------------------------------------------------------
# Haar sampling


def haar_bases(rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` Haar-random reduced bases, shape ``(size, 2, 2)``."""
    xs = np.empty(size)
    ys = np.empty(size)
    filled = 0
    h = math.sqrt(3) / 2
    while filled < size:
        k = int((size - filled) * 1.1) + 8
        x = rng.uniform(-0.5, 0.5, k)
        y = h / (1.0 - rng.random(k))
        ok = x * x + y * y >= 1
        x, y = x[ok], y[ok]
        take = min(size - filled, x.size)
        xs[filled:filled + take] = x[:take]
        ys[filled:filled + take] = y[:take]
        filled += take
    theta = rng.uniform(0, 2 * math.pi, size)
    c, s = np.cos(theta), np.sin(theta)
    ry = np.sqrt(ys)
    b = np.empty((size, 2, 2))
    # rotation(theta) @ [[1/ry, x/ry], [0, ry]]
    b[:, 0, 0] = c / ry
    b[:, 1, 0] = s / ry
    b[:, 0, 1] = c * xs / ry - s * ry
    b[:, 1, 1] = s * xs / ry + c * ry
    flip = (b[:, 1, 0] < 0) | ((b[:, 1, 0] == 0) & (b[:, 0, 0] < 0))
    b[flip] *= -1
    return b


def haar_sample(rng: np.random.Generator) -> UnimodularLattice:
    return UnimodularLattice(haar_bases(rng, 1)[0])


# ---------------------------------------------------------------------------
# primitive points in rectangles


def _floor_div_interval(lo, hi, a_, c):
    """Interval of real m with ``lo <= a m + c <= hi`` (closed, widened later)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        p = (lo - c) / a_
        q = (hi - c) / a_
    mlo = np.where(a_ > 0, p, q)
    mhi = np.where(a_ > 0, q, p)
    inside = (lo <= c) & (c <= hi)
    zero = a_ == 0
    mlo = np.where(zero, np.where(inside, -np.inf, np.inf), mlo)
    mhi = np.where(zero, np.where(inside, np.inf, -np.inf), mhi)
    return mlo, mhi


def rect_candidates(B: np.ndarray, rect: Rect, budget: int = DEFAULT_BUDGET, slack: float = 1e-7):
    """Candidate coefficient triples ``(lattice, m, n)`` for every lattice of the
    stack ``B`` whose point ``m v1 + n v2`` may lie in ``rect``.

    The n-range comes from ``n = cross(v1, w)``; each n then gives an
    m-interval.  Intervals are widened by ``slack`` so that no point is lost
    to rounding; callers test membership afterwards.
    """
    x0, x1, y0, y1 = rect.floats
    v1 = B[:, :, 0]
    v2 = B[:, :, 1]
    corners = np.array([[x0, y0], [x0, y1], [x1, y0], [x1, y1]])
    cr = v1[:, None, 0] * corners[None, :, 1] - v1[:, None, 1] * corners[None, :, 0]
    nlo = np.ceil(cr.min(axis=1) - slack).astype(np.int64)
    nhi = np.floor(cr.max(axis=1) + slack).astype(np.int64)
    nn = np.maximum(nhi - nlo + 1, 0)
    if nn.sum() > budget:
        raise ResourceError(f"enumeration budget of {budget} candidate points exceeded")
    li = np.repeat(np.arange(B.shape[0]), nn)
    n = (np.arange(li.size) - np.repeat(np.cumsum(nn) - nn, nn)) + nlo[li]
    a1, a2 = v1[li, 0], v1[li, 1]
    c1, c2 = n * v2[li, 0], n * v2[li, 1]
    # widen in coordinate space too: a tiny component of v1 turns a point just
    # outside the rectangle into a huge m-interval that m-slack cannot reach
    pad = slack * (1 + max(abs(x0), abs(x1), abs(y0), abs(y1)))
    xl, xh = _floor_div_interval(x0 - pad, x1 + pad, a1, c1)
    yl, yh = _floor_div_interval(y0 - pad, y1 + pad, a2, c2)
    lo = np.maximum(xl, yl)
    hi = np.minimum(xh, yh)
    width = np.maximum(np.abs(lo), np.abs(hi))
    mlo = np.ceil(lo - slack * (1 + np.where(np.isfinite(width), width, 0))).astype(np.int64)
    mhi = np.floor(hi + slack * (1 + np.where(np.isfinite(width), width, 0))).astype(np.int64)
    # n = 0 contributes only the primitive points +-v1
    z = n == 0
    mlo = np.where(z, np.maximum(mlo, -1), mlo)
    mhi = np.where(z, np.minimum(mhi, 1), mhi)
    cnt = np.maximum(mhi - mlo + 1, 0)
    if cnt.sum() > budget:
        raise ResourceError(f"enumeration budget of {budget} candidate points exceeded")
    lj = np.repeat(li, cnt)
    nj = np.repeat(n, cnt)
    mj = (np.arange(lj.size) - np.repeat(np.cumsum(cnt) - cnt, cnt)) + np.repeat(mlo, cnt)
    keep = np.gcd(mj, nj) == 1
    return lj[keep], mj[keep], nj[keep]


def count_batch(B: np.ndarray, rect: Rect, budget: int = DEFAULT_BUDGET, guard: float = 1e-9):
    """Primitive points of each lattice in ``rect`` (float decisions).

    Returns ``(counts, ambiguous)`` where ``ambiguous`` marks lattices with a
    candidate within ``guard`` (relative) of the rectangle boundary.
    """
    B = np.asarray(B, dtype=float)
    li, m, n = rect_candidates(B, rect, budget)
    x = m * B[li, 0, 0] + n * B[li, 0, 1]
    y = m * B[li, 1, 0] + n * B[li, 1, 1]
    x0, x1, y0, y1 = rect.floats
    inside = (x0 <= x) & (x < x1) & (y0 < y) & (y <= y1)
    counts = np.bincount(li[inside], minlength=B.shape[0])
    scale = guard * (1 + np.abs(m) * np.hypot(B[li, 0, 0], B[li, 1, 0]) + np.abs(n) * np.hypot(B[li, 0, 1], B[li, 1, 1]))
    near = (
        (np.abs(x - x0) <= scale) | (np.abs(x - x1) <= scale)
        | (np.abs(y - y0) <= scale) | (np.abs(y - y1) <= scale)
    )
    ambiguous = np.bincount(li[near], minlength=B.shape[0]) > 0
    return counts, ambiguous


def _exact_points(x: UnimodularLattice, rect: Rect, budget: int):
    L = x.exact
    v1, v2 = x.exact_basis
    _, m, n = rect_candidates(x.basis[None], rect, budget, slack=1e-6)
    bx0, bx1, by0, by1 = (Surd.of(v) for v in (rect.x_lo, rect.x_hi, rect.y_lo, rect.y_hi))
    out = []
    for mi, ni in zip(m.tolist(), n.tolist()):
        w = (mi * v1[0] + ni * v2[0], mi * v1[1] + ni * v2[1])
        sx, sy = L.surds(w)
        if surd_cmp(bx0, sx) <= 0 and surd_cmp(sx, bx1) < 0 and surd_cmp(by0, sy) < 0 and surd_cmp(sy, by1) <= 0:
            out.append((mi, ni, w))
    return out


def primitive_points_in_rect(x: UnimodularLattice, rect: Rect, budget: int = DEFAULT_BUDGET) -> list:
    """Coprime ``(m, n)`` with ``m v1 + n v2`` in ``rect`` (reduced basis coefficients)."""
    if x.exact is not None:
        return [(m, n) for m, n, _ in _exact_points(x, rect, budget)]
    B = x.basis[None]
    li, m, n = rect_candidates(B, rect, budget)
    pts = m[:, None] * x.v1[None] + n[:, None] * x.v2[None]
    x0, x1, y0, y1 = rect.floats
    ok = (x0 <= pts[:, 0]) & (pts[:, 0] < x1) & (y0 < pts[:, 1]) & (pts[:, 1] <= y1)
    return sorted(zip(m[ok].tolist(), n[ok].tolist()))


def exact_generator_points(x: UnimodularLattice, rect: Rect, budget: int = DEFAULT_BUDGET) -> list:
    """For an exact lattice ``a(t)u(s)Z^2``: the coprime generator coefficients
    ``(m, n)`` whose image ``a(t)u(s)(m, n)`` lies in ``rect``."""
    if x.exact is None:
        raise DomainError("lattice has no exact representation")
    return sorted(x.exact.generator_coeffs(w) for _, _, w in _exact_points(x, rect, budget))


def siegel_count(x: UnimodularLattice, rect: Rect, budget: int = DEFAULT_BUDGET) -> int:
    """Primitive Siegel transform of the indicator of ``rect`` at ``x``."""
    if x.exact is not None:
        return len(_exact_points(x, rect, budget))
    counts, _ = count_batch(x.basis[None], rect, budget)
    return int(counts[0])


def siegel_count_sweep(t, s, rect: Rect) -> int:
    """Column sweep for ``a(t)u(s)Z^2``: loop over ``n`` in the y-window and
    test the x-window at the nearest integers.  Exact; cost grows like the
    window length ``(y_hi - y_lo) sqrt(t)``."""
    if hasattr(s, "to_fraction"):
        s = s.to_fraction()
    L = ShearLattice(Fraction(t), Fraction(s))
    bx0, bx1, by0, by1 = (Surd.of(v) for v in (rect.x_lo, rect.x_hi, rect.y_lo, rect.y_hi))
    rt = math.sqrt(L.t)
    x0, x1, y0, y1 = rect.floats
    count = 0
    for n in range(math.floor(y0 * rt) - 1, math.ceil(y1 * rt) + 2):
        _, sy = L.surds((0, n))
        if not (surd_cmp(by0, sy) < 0 and surd_cmp(sy, by1) <= 0):
            continue
        # x = sqrt(t)(m + n s) in [x0, x1)  ->  m in [x0/rt - n s, x1/rt - n s)
        ns = n * L.s
        lo = math.floor(x0 / rt - ns) - 1
        hi = math.ceil(x1 / rt - ns) + 1
        for m in range(lo, hi + 1):
            if math.gcd(m, n) != 1:
                continue
            P = m * L.s.denominator + n * L.s.numerator
            sx, _ = L.surds((P, n))
            if surd_cmp(bx0, sx) <= 0 and surd_cmp(sx, bx1) < 0:
                count += 1
    return count
