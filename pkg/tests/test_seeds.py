from fractions import Fraction

import numpy as np
import pytest

from klab.bigfixed import BigFixed, golden_ratio_conjugate, sqrt_int
from klab.seeds import DERIVE_SEED_ZERO, block_ranges, derive_seed, pmap, rng_for


def test_golden_constant():
    assert derive_seed(0, []) == DERIVE_SEED_ZERO == 0x47DC93735E935E80


def test_label_order_matters():
    assert derive_seed(5, [1, 2]) != derive_seed(5, [2, 1])
    assert derive_seed(5, [1]) != derive_seed(5, [1, 0])


def test_no_collisions_first_million_labels():
    seen = {derive_seed(12345, [i]) for i in range(10**6)}
    assert len(seen) == 10**6


def test_seed_range_checked():
    with pytest.raises(ValueError):
        derive_seed(-1, [])
    with pytest.raises(ValueError):
        derive_seed(2**64, [])


def test_rng_streams_reproducible():
    assert np.array_equal(rng_for(3, [1, 2]).random(5), rng_for(3, [1, 2]).random(5))
    assert not np.array_equal(rng_for(3, [1, 2]).random(5), rng_for(3, [2, 1]).random(5))


def _square(x):
    return x * x


def test_pmap_ordered():
    assert pmap(_square, list(range(20)), workers=3) == [x * x for x in range(20)]
    assert list(block_ranges(2500, 1024)) == [(0, 0, 1024), (1, 1024, 2048), (2, 2048, 2500)]


def test_bigfixed_interval_contains_value():
    x = BigFixed.from_fraction(Fraction(1, 3), bits=64)
    lo = x.to_fraction()
    assert lo <= Fraction(1, 3) <= lo + Fraction(x.err, 2**64)
    assert BigFixed.from_fraction(Fraction(3, 8)).exact


def test_bigfixed_compare_guard():
    x = BigFixed.from_fraction(Fraction(1, 3), bits=64)
    assert x.compare(Fraction(1, 3)) is None
    assert x.compare(Fraction(1, 2)) == -1
    assert x.compare(Fraction(1, 4)) == 1


def test_sqrt_and_golden():
    r = sqrt_int(5, bits=128)
    lo = r.to_fraction()
    assert lo**2 <= 5 <= (lo + Fraction(r.err, 2**128)) ** 2
    assert float(golden_ratio_conjugate()) == pytest.approx(0.6180339887498949)


def test_digest_stable():
    a = BigFixed.parse("0.25")
    assert a.digest() == BigFixed.from_fraction(Fraction(1, 4)).digest()
