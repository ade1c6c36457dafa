"""Signed binary fixed-point reals with a recorded truncation error.

A ``BigFixed`` holds ``mant / 2**bits`` exactly.  When it stands for a real
number that could not be stored exactly (a truncated expansion, an
irrational), ``err`` records how many units in the last place the true value
may lie *above* the stored one, so the true value is in
``[mant, mant + err] / 2**bits``.  Exact inputs carry ``err == 0``.
"""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational

DEFAULT_BITS = 192
GUARD_ULPS = 1 << 8


class BigFixed:
    __slots__ = ("mant", "bits", "err")

    def __init__(self, mant: int, bits: int = DEFAULT_BITS, err: int = 0):
        if bits < 1:
            raise ValueError("bits must be positive")
        if err < 0:
            raise ValueError("err must be non-negative")
        self.mant = int(mant)
        self.bits = int(bits)
        self.err = int(err)

    # construction -----------------------------------------------------
    @classmethod
    def from_fraction(cls, x, bits: int = DEFAULT_BITS) -> "BigFixed":
        x = Fraction(x)
        num = x.numerator << bits
        mant, rem = divmod(num, x.denominator)
        return cls(mant, bits, 0 if rem == 0 else 1)

    @classmethod
    def from_float(cls, x: float, bits: int = DEFAULT_BITS) -> "BigFixed":
        if not math.isfinite(x):
            raise ValueError("non-finite value")
        return cls.from_fraction(Fraction(x), bits)

    @classmethod
    def from_digits(cls, digits, base: int, bits: int = DEFAULT_BITS, tail: bool = True) -> "BigFixed":
        """Value of ``0.d1 d2 d3 ...`` in ``base``.

        With ``tail`` the expansion is taken to continue beyond the given
        digits, so the error bound absorbs the remaining ``base**-len`` mass.
        """
        num = 0
        for d in digits:
            num = num * base + int(d)
        den = base ** len(digits)
        mant, rem = divmod(num << bits, den)
        err = 0 if rem == 0 else 1
        if tail:
            # tail < base**-len  ->  at most ceil(2**bits / den) extra ulps
            err += -((-(1 << bits)) // den)
        return cls(mant, bits, err)

    @classmethod
    def parse(cls, text: str, bits: int = DEFAULT_BITS) -> "BigFixed":
        """Parse ``"p/q"``, a decimal literal or ``"golden"``/``"sqrt:N"``."""
        text = text.strip()
        if text == "golden":
            return golden_ratio_conjugate(bits)
        if text.startswith("sqrt:"):
            return sqrt_int(int(text[5:]), bits)
        return cls.from_fraction(Fraction(text), bits)

    # views --------------------------------------------------------------
    @property
    def exact(self) -> bool:
        return self.err == 0

    def to_fraction(self) -> Fraction:
        return Fraction(self.mant, 1 << self.bits)

    def __float__(self) -> float:
        return self.mant / (1 << self.bits)

    def floor(self) -> int:
        return self.mant >> self.bits

    def frac(self) -> "BigFixed":
        return BigFixed(self.mant & ((1 << self.bits) - 1), self.bits, self.err)

    def with_bits(self, bits: int) -> "BigFixed":
        if bits >= self.bits:
            shift = bits - self.bits
            return BigFixed(self.mant << shift, bits, self.err << shift)
        shift = self.bits - bits
        mant = self.mant >> shift
        lost = self.mant - (mant << shift)
        err = -((-(self.err + lost)) >> shift)
        return BigFixed(mant, bits, err)

    # arithmetic ---------------------------------------------------------
    def _align(self, other):
        if isinstance(other, BigFixed):
            bits = max(self.bits, other.bits)
            return self.with_bits(bits), other.with_bits(bits)
        if isinstance(other, int):
            return self, BigFixed(other << self.bits, self.bits)
        return NotImplemented, None

    def __add__(self, other):
        a, b = self._align(other)
        if a is NotImplemented:
            return NotImplemented
        return BigFixed(a.mant + b.mant, a.bits, a.err + b.err)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self._align(other)
        if a is NotImplemented:
            return NotImplemented
        # true a - b lies in [a - b - eb, a - b + ea]
        return BigFixed(a.mant - b.mant - b.err, a.bits, a.err + b.err)

    def __neg__(self):
        return BigFixed(-self.mant - self.err, self.bits, self.err)

    def __mul__(self, k):
        if not isinstance(k, int):
            return NotImplemented
        if k >= 0:
            return BigFixed(self.mant * k, self.bits, self.err * k)
        return BigFixed((self.mant + self.err) * k, self.bits, self.err * -k)

    __rmul__ = __mul__

    # comparison (stored value, exact) -----------------------------------
    def _key(self, other):
        if isinstance(other, BigFixed):
            a, b = self._align(other)
            return a.mant, b.mant
        if isinstance(other, (int, Rational, float)):
            x = Fraction(other)
            return self.mant * x.denominator, x.numerator << self.bits
        return None

    def __eq__(self, other):
        k = self._key(other)
        return NotImplemented if k is None else k[0] == k[1]

    def __lt__(self, other):
        k = self._key(other)
        return NotImplemented if k is None else k[0] < k[1]

    def __le__(self, other):
        k = self._key(other)
        return NotImplemented if k is None else k[0] <= k[1]

    def __gt__(self, other):
        k = self._key(other)
        return NotImplemented if k is None else k[0] > k[1]

    def __ge__(self, other):
        k = self._key(other)
        return NotImplemented if k is None else k[0] >= k[1]

    def __hash__(self):
        return hash((self.to_fraction(), self.err))

    def compare(self, threshold, guard: int = GUARD_ULPS) -> int | None:
        """Sign of ``true_value - threshold``, or None inside the guard band.

        The band is ``guard`` ulps on both sides of the error interval.
        """
        th = Fraction(threshold)
        lo = (self.mant - guard) * th.denominator
        hi = (self.mant + self.err + guard) * th.denominator
        t = th.numerator << self.bits
        if lo > t:
            return 1
        if hi < t:
            return -1
        if self.err == 0 and guard == 0 and lo == t:
            return 0
        return None

    def __repr__(self):
        tag = "" if self.exact else f", err={self.err}"
        return f"BigFixed({float(self)!r}, bits={self.bits}{tag})"

    def digest(self) -> str:
        return f"{self.mant:x}/2^{self.bits}"


def isqrt_fixed(n: int, bits: int) -> int:
    """floor(sqrt(n) * 2**bits)."""
    return math.isqrt(n << (2 * bits))


def sqrt_int(n: int, bits: int = DEFAULT_BITS) -> BigFixed:
    m = isqrt_fixed(n, bits)
    return BigFixed(m, bits, 0 if m * m == n << (2 * bits) else 1)


def golden_ratio_conjugate(bits: int = DEFAULT_BITS) -> BigFixed:
    """(sqrt(5) - 1) / 2 truncated to ``bits`` fractional bits."""
    # floor((sqrt(5) - 1) 2^(bits-1)) via one extra bit of the root
    r = isqrt_fixed(5, bits + 1)
    mant = (r - (1 << (bits + 1))) >> 2
    return BigFixed(mant, bits, 1)
