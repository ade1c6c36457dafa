import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from klab import dio, ifs
from klab.bigfixed import BigFixed, golden_ratio_conjugate
from klab.errors import ConfigError, DomainError
from klab.ifs import SampleStream
from klab.seeds import rng_for

F = Fraction
INV = dio.ApproxFn.parse("power:1,1")
GOLD = golden_ratio_conjugate()


def brute_TN(s: Fraction, psi, N, side="plus"):
    n = 0
    for q in range(1, N + 1):
        x = q * s
        p = math.floor(x) if side == "plus" else math.ceil(x)
        d = x - p
        ok = 0 <= d < psi.exact(q) if side == "plus" else -psi.exact(q) < d <= 0
        n += ok and math.gcd(p, q) == 1
    return n


def test_eval_psi_examples():
    assert dio.eval_psi(INV, 2.5, "floor-min") == pytest.approx(0.4)
    assert dio.eval_psi(INV, 2.5, "ceil") == pytest.approx(1 / 3)
    assert dio.eval_psi(dio.ApproxFn.parse("table:0.5,0.5,0.1"), 2) == 0.5


def test_sum_psi_examples():
    assert dio.sum_psi(INV, 10) == pytest.approx(7381 / 2520, abs=1e-14)
    assert dio.sum_psi(dio.ApproxFn.parse("power:1,2"), 10**6) == pytest.approx(math.pi**2 / 6, abs=2e-6)


def test_bad_psi_strings():
    for bad in ("power:", "power:1,-1", "gauss:1", "table:0.1,0.5", "power:a,b", "logpower:1,2"):
        with pytest.raises(ConfigError):
            dio.ApproxFn.parse(bad)


def test_count_examples():
    r = dio.count_TN(GOLD, INV, 10)
    assert r.count == r.count_hi == 3
    assert [q for _, q in r.hits] == [1, 2, 5]
    assert dio.count_TN(F(0), INV, 10).count == 1
    assert dio.count_TN(F(1, 3), INV, 6).count == 2


def test_precision_precondition():
    with pytest.raises(ConfigError):
        dio.count_TN(BigFixed.from_fraction(F(1, 7), bits=64), INV, 10**6)


def test_scale_params_examples():
    p = dio.scale_params(INV, 2, 3)
    assert (p.psi_k, p.r_k, p.t_k) == (F(1, 8), 1.0, 64.0)
    p = dio.scale_params(dio.ApproxFn.parse("power:1,2"), 2, 2)
    assert p.r_sq == F(1, 4) and p.r_k == 0.5 and p.t_k == 64.0
    for k in range(0, 30):
        for tau in (2, F(3, 2)):
            q = dio.scale_params(INV, tau, k)
            assert q.r_k * math.sqrt(q.t_k) == pytest.approx(float(F(tau) ** k), rel=1e-12)


def test_scale_params_normalization_error():
    with pytest.raises(DomainError, match="psi\\(q\\) <= 1/q"):
        dio.scale_params(dio.ApproxFn.parse("power:2,1"), 2, 3)


def test_block_examples():
    half = F(1, 2)
    assert dio.count_Sk_direct(GOLD, INV, 2, 3) == dio.count_Sk_siegel(GOLD, INV, 2, 3) == 1
    assert dio.count_Sk_direct(GOLD, INV, 2, 0) == dio.count_Sk_siegel(GOLD, INV, 2, 0) == 1
    assert dio.count_Sk_direct(half, INV, 2, 2) == dio.count_Sk_siegel(half, INV, 2, 2) == 0
    # q = tau^k sits on the closed end of the window
    assert dio.count_Sk_direct(F(1, 8), INV, 2, 3) == dio.count_Sk_siegel(F(1, 8), INV, 2, 3) == 1
    assert dio.count_Sk_siegel(GOLD, INV, 2, 3, method="sweep") == 1


def test_sandwich_example():
    lo, T, hi = dio.sandwich(GOLD, INV, 100, 2)
    assert lo <= T <= hi


def test_reference_sweep_agrees():
    pts = ifs.sample_sigma(SampleStream(ifs.CANTOR, mode="digit", seed=4), size=5)
    for s in pts:
        certain, amb = dio.count_TN_reference(s, INV, 3000)
        r = dio.count_TN(s, INV, 3000)
        assert (certain, certain + amb) == (r.count, r.count_hi)


def test_khintchine_small_run():
    r = dio.khintchine_experiment(SampleStream(ifs.CANTOR, seed=2), INV, 10**4, 20)
    assert len(r["ratios"]) == 20 and r["q1"] <= r["median"] <= r["q3"]
    assert r["median"] <= r["median_hi"]


def test_variance_probe_bounded():
    r = dio.variance_probe(SampleStream(ifs.CANTOR, seed=3), INV, 2, 1, 20, 1000)
    assert r["ratio"] <= 10


def test_variance_probe_point_mass():
    s0 = F(3, 7)
    r = dio.variance_probe([s0] * 4, INV, 2, 1, 10)
    S = [dio.count_Sk_direct(s0, INV, 2, k) for k in range(1, 11)]
    y = [dio.y_k(INV, 2, k) for k in range(1, 11)]
    assert r["ratio"] == pytest.approx((sum(S) - sum(y)) ** 2 / sum(y), rel=1e-12)
    assert r["stderr"] == 0


def test_gcd_audit():
    pts = ifs.sample_sigma(SampleStream(ifs.CANTOR, mode="digit", seed=9), size=40)
    hits = [h for s in pts for h in dio.count_TN(s, INV, 10**5).hits]
    rng = rng_for(9, [1])
    audit = rng.choice(len(hits), size=max(1, len(hits) // 100), replace=False)
    assert all(math.gcd(*hits[i]) == 1 for i in audit)
    # and the full list, which is cheap here
    assert all(math.gcd(p, q) == 1 for p, q in hits)


# properties

fractions = st.builds(F, st.integers(0, 10**6), st.integers(1, 10**6))
psis = st.sampled_from(["power:1,1", "power:1/2,1", "power:1,2", "power:1,3/2", "logpower:2"]).map(dio.ApproxFn.parse)


@given(fractions, st.integers(1, 300), st.sampled_from(["plus", "minus"]))
def test_count_matches_brute_force(s, N, side):
    psi = dio.ApproxFn.parse("power:1,1")
    assert dio.count_TN(s, psi, N, side).count == brute_TN(s, psi, N, side)


@given(fractions, psis, st.integers(1, 2000), st.integers(1, 2000))
def test_monotone_in_N(s, psi, n1, n2):
    n1, n2 = sorted((n1, n2))
    assert dio.count_TN(s, psi, n1).count <= dio.count_TN(s, psi, n2).count


@given(fractions, st.integers(1, 2000))
def test_monotone_in_psi(s, N):
    big = dio.count_TN(s, dio.ApproxFn.parse("power:1,1"), N).count
    small = dio.count_TN(s, dio.ApproxFn.parse("power:1/2,1"), N).count
    smaller = dio.count_TN(s, dio.ApproxFn.parse("power:1,2"), N).count
    assert smaller <= big and small <= big


@given(fractions, psis.filter(lambda p: p.label() != "power:1,3/2"), st.integers(2, 5000), st.sampled_from([2, F(3, 2)]))
def test_sandwich(s, psi, N, tau):
    lo, T, hi = dio.sandwich(s, psi, N, tau)
    assert lo <= T <= hi


@given(fractions, psis.filter(lambda p: p.params[0] <= 1), st.sampled_from([2, F(3, 2)]), st.integers(0, 20))
def test_dani_identity(s, psi, tau, k):
    try:
        dio.scale_params(psi, tau, k)
    except DomainError:
        assume(False)
    assert dio.count_Sk_direct(s, psi, tau, k) == dio.count_Sk_siegel(s, psi, tau, k)


@given(st.integers(1, 10**5), st.integers(2, 10**5), st.integers(0, 2**40))
def test_precision_soundness(p, q, jitter):
    assume(p < q)
    x = F(p, q) + F(jitter, 2**120)
    N = 1000
    exact = dio.count_TN(x, INV, N).count
    lo = dio.count_TN(BigFixed.from_fraction(x, bits=96), INV, N)
    hi = dio.count_TN(BigFixed.from_fraction(x, bits=192), INV, N)
    assert lo.count <= exact <= lo.count_hi
    assert hi.count <= exact <= hi.count_hi
    if lo.flagged:
        assert not hi.flagged or (hi.count, hi.count_hi) == (lo.count, lo.count_hi)
