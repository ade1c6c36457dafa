import math
from fractions import Fraction

import numpy as np
import pytest

from klab import homsp, ifs, translate
from klab.homsp import PElement, Rect
from klab.ifs import SampleStream
from klab.seeds import rng_for

F = Fraction
RECT = Rect(F(0), F(1), F(1, 2), F(1))


def test_cocycle_examples():
    assert translate.cocycle_identity_check(1, 0, PElement.identity()) == 0
    assert translate.cocycle_identity_check(9, F(1, 2), PElement.from_rate(F(1, 3), F(2, 3))) <= 1e-12


def test_cocycle_random():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(300):
        g = PElement(rng.uniform(-6, 0) * math.log(10), rng.uniform(-1e6, 1e6))
        worst = max(worst, translate.cocycle_identity_check(10 ** rng.uniform(0, 6), rng.uniform(-1e6, 1e6), g))
    assert worst <= 1e-10


def test_shear_counts_match_exact():
    rng = np.random.default_rng(4)
    s = rng.random(400)
    for t in (10.0, 1e3, 1e5):
        c = translate.shear_counts(t, s, RECT)
        ref = [homsp.siegel_count(homsp.translate_point(F(t), F(x)), RECT) for x in s.tolist()]
        assert c.tolist() == ref


def test_lebesgue_control():
    rep = translate.equidist_deviation(SampleStream(ifs.LEBESGUE, seed=31), [1e4], RECT, 10**5)
    assert rep.deviations[0] <= 0.01


def test_point_mass_does_not_equidistribute():
    rep = translate.equidist_deviation(np.zeros(100), [1e2, 1e3, 1e4], RECT)
    assert rep.deviations == [pytest.approx(rep.target)] * 3
    assert abs(rep.slope) < 1e-12


def test_point_mass_double_is_deterministic():
    t1, t2 = 2.0, 3.0
    rect = Rect(F(-2), F(2), F(1, 4), F(2))
    rep = translate.double_deviation(np.zeros(10), t1, [t2], rect, rect)
    c1 = homsp.siegel_count(homsp.translate_point(F(t1), 0), rect)
    c2 = homsp.siegel_count(homsp.translate_point(F(t2), 0), rect)
    assert rep.deviations[0] == pytest.approx(abs(c1 * c2 - rect.siegel_mean**2))
    assert rep.stderrs[0] == 0


def test_correlation_at_identity_is_variance():
    e = translate.correlation_estimate(1.0, RECT, 20_000, seed=2)
    assert e["estimate"] == pytest.approx(e["variance"])
    assert e["variance"] > 0


def test_correlation_decays():
    ests = [translate.correlation_estimate(t, RECT, 100_000, seed=3) for t in (1, 10, 100, 1000)]
    for a_, b_ in zip(ests, ests[1:]):
        assert abs(b_["estimate"]) <= abs(a_["estimate"]) + 2 * math.hypot(a_["stderr"], b_["stderr"])


def test_correlation_small_at_large_t():
    e = translate.correlation_estimate(1e4, RECT, 10**6, seed=4)
    assert abs(e["estimate"]) <= 0.01


def test_cocycle_in_distribution():
    r = translate.walk_translate_counts(SampleStream(ifs.CANTOR), 1e3, 5, RECT, 50_000, seed=6)
    (mw, sw), (md, sd) = r["walk"], r["direct"]
    assert abs(mw - md) <= 3 * math.hypot(sw, sd)


def test_stationarity_shift_invariance():
    M = 50_000
    s = ifs.sample_sigma(SampleStream(ifs.CANTOR, seed=8), size=M)
    i = rng_for(8, [99]).integers(0, 2, M)
    moved = ifs.CANTOR.rates[i] * s + ifs.CANTOR.offsets[i]
    a_ = translate.equidist_deviation(s, [1e3], RECT)
    b_ = translate.equidist_deviation(moved, [1e3], RECT)
    assert abs(a_.means[0] - b_.means[0]) <= 3 * math.hypot(a_.stderrs[0], b_.stderrs[0])


def test_report_fields():
    rep = translate.equidist_deviation(SampleStream(ifs.CANTOR, seed=1), [1e2, 1e3], RECT, 2000)
    d = rep.to_dict()
    assert set(d) >= {"times", "means", "stderrs", "deviations", "target", "slope", "noise_floor"}
    assert all(se > 0 for se in rep.stderrs)
    assert rep.noise_floor == pytest.approx(3 / math.sqrt(2000))
