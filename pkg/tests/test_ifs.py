import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from klab import ifs
from klab.errors import ConfigError
from klab.ifs import AffineMap, AffineSystem, SampleStream


def system(*maps, weights=None):
    ms = [AffineMap(Fraction(r), Fraction(b)) for r, b in maps]
    if weights is None:
        return AffineSystem.uniform(ms)
    return AffineSystem(ms, [Fraction(w) for w in weights])


HALVING = system((Fraction(1, 2), 0))


def test_validate_cantor():
    rep = ifs.validate(ifs.CANTOR)
    assert rep.contracting and rep.orientation_preserving
    assert rep.common_fixed_point is None
    assert rep.mean_log_rate == pytest.approx(-math.log(3), abs=1e-15)


def test_single_map_has_common_fixed_point():
    rep = ifs.validate(system((Fraction(1, 3), 0)))
    assert rep.common_fixed_point == 0 and not rep.ok


def test_expanding_system_not_contracting():
    rep = ifs.validate(system((2, 0), (2, 1)))
    assert not rep.contracting
    assert rep.mean_log_rate == pytest.approx(math.log(2))


def test_bad_weights_rejected():
    with pytest.raises(ConfigError):
        system((Fraction(1, 3), 0), (Fraction(1, 3), Fraction(2, 3)), weights=["1/2", "1/3"])
    with pytest.raises(ConfigError):
        AffineMap(Fraction(0), Fraction(1))


def test_lyapunov_examples():
    assert ifs.lyapunov(ifs.CANTOR) == pytest.approx(1.0986123, abs=1e-7)
    assert ifs.lyapunov(HALVING) == pytest.approx(math.log(2))
    s = system((Fraction(1, 2), 0), (Fraction(1, 8), 1))
    assert ifs.lyapunov(s) == pytest.approx(2 * math.log(2))


def test_digit_value_example():
    assert ifs.digits_value([2, 0, 2], 3) == Fraction(20, 27)


def test_point_mass_system_samples_zero():
    st_ = SampleStream(HALVING, seed=3)
    assert np.all(ifs.sample_sigma(st_, size=100) == 0)
    assert np.all(ifs.sample_sigma_n(st_, 7, size=100) == 0)


def test_one_step_law():
    v = ifs.sample_sigma_n(SampleStream(ifs.CANTOR, seed=11), 1, size=10_000)
    assert set(np.unique(v).tolist()) <= {0.0, 2 / 3}
    assert abs((v == 0).mean() - 0.5) <= 0.02


def test_two_step_support():
    v = ifs.sample_sigma_n(SampleStream(ifs.CANTOR, seed=12), 2, size=2000)
    assert np.allclose(sorted(set(np.round(v, 12).tolist())), [0, 2 / 9, 2 / 3, 8 / 9])


def test_forward_backward_duality():
    # sigma^(n) draw equals the backward composition of the same index row applied to 0
    stream = SampleStream(ifs.CANTOR, seed=5)
    idx = ifs.stream_indices(stream, 12, 50)
    vals = ifs.sample_sigma_n(stream, 12, size=50)
    for row, v in zip(idx, vals):
        x = Fraction(0)
        for i in reversed(row.tolist()):
            x = ifs.CANTOR.maps[i](x)
        assert v == pytest.approx(float(x), abs=1e-15)


def test_digit_draws_are_exact_and_in_attractor():
    stream = SampleStream(ifs.CANTOR, mode="digit", seed=2)
    pts = ifs.sample_sigma(stream, size=200)
    digs = ifs.sample_digits(stream, size=200)
    for p, d in zip(pts, digs):
        assert set(d.tolist()) <= {0, 2}
        lo = p.to_fraction()
        assert lo == ifs.digits_value(d, 3) or abs(lo - ifs.digits_value(d, 3)) < Fraction(1, 2**180)
        assert 0 <= float(p) <= 1


def test_digit_mode_rejected_for_non_digit_system():
    with pytest.raises(ConfigError):
        SampleStream(system((Fraction(1, 2), 0), (Fraction(1, 4), 1)), mode="digit")


def test_positivize_all_positive():
    draws = ifs.positivize_sampler(ifs.CANTOR, seed=1).draw(200)
    assert all(tau == 1 for _, tau in draws)


def test_positivize_all_negative():
    s = system((Fraction(-1, 3), 0), (Fraction(-1, 3), 1))
    draws = ifs.positivize_sampler(s, seed=1).draw(500)
    assert all(tau == 2 and f.rate == Fraction(1, 9) for f, tau in draws)


def test_positivize_mixed_mean():
    s = system((Fraction(1, 3), 0), (Fraction(-1, 3), 1))
    taus = [tau for _, tau in ifs.positivize_sampler(s, seed=4).draw(10_000)]
    assert 1 <= np.mean(taus) <= 3
    assert all(f.rate > 0 for f, _ in ifs.positivize_sampler(s, seed=4).draw(100))


def test_ball_mass_examples():
    assert ifs.estimate_ball_mass([0.3] * 50, [0.01, 0.1]) == {0.01: 1.0, 0.1: 1.0}
    u = np.random.default_rng(0).random(100_000)
    assert ifs.estimate_ball_mass(u, [0.1])[0.1] == pytest.approx(0.2, abs=0.02)


def test_cdf_distance_examples():
    assert ifs.cdf_distance([0.1, 0.5, 0.7], [0.1, 0.5, 0.7]) == 0
    assert ifs.cdf_distance([0], [1]) == 1


def test_stationarity():
    M = 100_000
    s = ifs.sample_sigma(SampleStream(ifs.CANTOR, seed=21), size=M)
    rng = np.random.default_rng(22)
    i = rng.integers(0, 2, M)
    moved = ifs.CANTOR.rates[i] * s + ifs.CANTOR.offsets[i]
    assert ifs.cdf_distance(moved, s) <= 3 * math.sqrt(1 / M)


def test_lyapunov_empirical_within_three_se():
    s = system((Fraction(1, 2), 0), (Fraction(1, 8), 1))
    m, se = ifs.lyapunov_empirical(s, 100, 10_000, seed=9)
    assert abs(m - ifs.lyapunov(s)) <= 3 * se


def test_config_roundtrip(tmp_path):
    text = ifs.system_to_text(ifs.CANTOR)
    assert ifs.parse_ifs(text).maps == ifs.CANTOR.maps
    p = tmp_path / "c.cfg"
    p.write_text("[ifs]\nbase = 3\ndigits = 0, 2\n")
    assert ifs.load_ifs(p).maps == ifs.CANTOR.maps
    with pytest.raises(ConfigError):
        ifs.parse_ifs("[ifs]\nmaps = 1/3 0; 1/3 2/3\nweights = 1/2, 1/4\n")


samples = st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=40)


@given(samples, samples, samples)
def test_cdf_distance_pseudometric(a, b, c):
    dab, dba = ifs.cdf_distance(a, b), ifs.cdf_distance(b, a)
    assert dab == dba
    assert ifs.cdf_distance(a, a) == 0
    assert ifs.cdf_distance(a, c) <= dab + ifs.cdf_distance(b, c) + 1e-12


@given(samples, st.lists(st.floats(1e-6, 5), min_size=2, max_size=8))
def test_ball_mass_monotone(x, radii):
    radii = sorted(set(radii))
    m = ifs.estimate_ball_mass(x, radii)
    vals = [m[r] for r in radii]
    assert all(u <= v for u, v in zip(vals, vals[1:]))


def test_shipped_configs_load():
    import pathlib

    root = pathlib.Path(__file__).resolve().parents[1] / "configs"
    assert ifs.load_ifs(root / "cantor.cfg").maps == ifs.CANTOR.maps
    assert ifs.load_ifs(root / "lebesgue.cfg").maps == ifs.LEBESGUE.maps
    sk = ifs.load_ifs(root / "skewed.cfg")
    assert sk.weights == (Fraction(1, 3), Fraction(2, 3)) and ifs.validate(sk).ok
