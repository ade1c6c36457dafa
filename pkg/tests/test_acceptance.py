"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in
the terminal summary) or directly with ``python3 tests/test_acceptance.py``.
Set ``KLAB_SKIP_ACCEPTANCE=1`` to skip the long runs.
"""
from __future__ import annotations

import math
import os
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from klab import dio, experiments, homsp, ifs
from klab.homsp import Rect
from klab.seeds import rng_for

pytestmark = pytest.mark.skipif(os.environ.get("KLAB_SKIP_ACCEPTANCE") == "1", reason="acceptance runs disabled")

SEED = 20240607
RECT = Rect(Fraction(0), Fraction(1), Fraction(1, 2), Fraction(1))   # area 1/2
LINES: dict[int, str] = {}


def report(n: int, ok: bool, detail: str, elapsed: float, budget: float):
    within = elapsed <= budget
    status = "PASS" if ok and within else "FAIL"
    line = f"[{status}] criterion {n:2d}: {detail} ({elapsed:.1f}s, budget {budget:.0f}s)"
    LINES[n] = line
    print(line)
    assert ok, line
    assert within, line


def non_increasing(values, ses) -> bool:
    """Each step may rise by at most one standard error of the difference."""
    return all(b <= a + math.hypot(sa, sb) for a, b, sa, sb in zip(values, values[1:], ses, ses[1:]))


def test_c01_identity_suite():
    t0 = time.perf_counter()
    out = experiments.identity_suite(SEED)
    r = out.results
    detail = (f"cocycle max {r['cocycle']['max_residual']:.2e} <= 1e-10, "
              f"compose_p max {r['compose_p']['max_residual']:.2e} <= 1e-12, "
              f"Dani mismatches {r['dani']['mismatches']}/{r['dani']['cases']}")
    report(1, out.ok, detail, time.perf_counter() - t0, 10)


def test_c02_siegel_calibration():
    t0 = time.perf_counter()
    B = homsp.haar_bases(rng_for(SEED, [2]), 200_000)
    counts, amb = homsp.count_batch(B, RECT)
    mean = float(counts.mean())
    target = 6 / math.pi**2 * 0.5
    rel = abs(mean - target) / target
    report(2, rel <= 0.02, f"Haar mean {mean:.5f} vs {target:.6f}, rel err {rel:.4f} <= 0.02", time.perf_counter() - t0, 120)


def test_c03_khintchine_lebesgue():
    t0 = time.perf_counter()
    out = experiments.khintchine(ifs.LEBESGUE, dio.ApproxFn.parse("power:1,1"), 10**6, 50, SEED)
    med = out.results["plus"]["median"]
    report(3, 0.85 <= med <= 1.15, f"median ratio {med:.4f} in [0.85, 1.15]", time.perf_counter() - t0, 120)


def test_c04_khintchine_cantor():
    t0 = time.perf_counter()
    out = experiments.khintchine(ifs.CANTOR, dio.ApproxFn.parse("power:1,1"), 10**6, 100, SEED, side="both")
    mp, mm = out.results["plus"]["median"], out.results["minus"]["median"]
    amb = out.results["plus"]["ambiguous"] + out.results["minus"]["ambiguous"]
    ok = 0.85 <= mp <= 1.15 and 0.85 <= mm <= 1.15
    report(4, ok, f"median ratio plus {mp:.4f}, minus {mm:.4f} in [0.85, 1.15]; ambiguous runs {amb}",
           time.perf_counter() - t0, 300)


def test_c05_khintchine_convergent():
    t0 = time.perf_counter()
    stream = ifs.SampleStream(ifs.CANTOR, seed=SEED)
    g = dio.convergent_gain(stream, dio.ApproxFn.parse("logpower:2"), 10**4, 10**6, 100)
    zf = g["zero_fraction"]
    report(5, zf >= 0.8, f"zero-gain fraction {zf:.2f} >= 0.80 (tail sum {g['tail_sum']:.4f})", time.perf_counter() - t0, 300)


def test_c06_translate_trend():
    t0 = time.perf_counter()
    out = experiments.translate_run(ifs.CANTOR, [1e2, 1e3, 1e4, 1e5], 10**5, SEED, RECT)
    r = out.results
    D, se = r["deviations"], r["stderrs"]
    ok = non_increasing(D, se) and D[-1] <= 0.02
    detail = "D(t) = " + ", ".join(f"{d:.4f}" for d in D) + f" (se ~ {max(se):.4f}); need non-increasing and final <= 0.02"
    report(6, ok, detail, time.perf_counter() - t0, 600)


def test_c07_walk_trend():
    t0 = time.perf_counter()
    M = 10**5
    out = experiments.walk_run(ifs.CANTOR, 100, M, SEED, RECT)
    eq = out.results["equidist"]
    rel = eq["deviation"] / eq["target"]
    ks = out.results["offset_cdf_distance"]
    ok = rel <= 0.05 and ks <= 3 * math.sqrt(1 / M)
    report(7, ok, f"mean count {eq['mean_count']:.5f} rel err {rel:.4f} <= 0.05; offset KS {ks:.4f} <= {3 / math.sqrt(M):.4f}",
           time.perf_counter() - t0, 300)


def test_c08_double_equidistribution():
    t0 = time.perf_counter()
    out = experiments.double_run(ifs.CANTOR, 1e2, [1e3, 1e4], 10**5, SEED, RECT)
    r = out.results
    D, se = r["deviations"], r["stderrs"]
    ok = D[-1] <= 0.05 and non_increasing(D, se)
    detail = "Delta(t2=1e3, 1e4) = " + ", ".join(f"{d:.4f}" for d in D) + f" (se ~ {max(se):.4f}); need <= 0.05 and non-increasing"
    report(8, ok, detail, time.perf_counter() - t0, 600)


def test_c09_recurrence_and_concentration():
    t0 = time.perf_counter()
    out = experiments.walk_run(ifs.CANTOR, 200, 10**4, SEED, RECT, ball_radius=0.05)
    slope = out.results["recurrence_slope"]
    conc = out.results["ball_concentration"]["value"]
    ok = slope is not None and slope >= 0.5 and conc <= 0.05
    prof = out.results["recurrence"]
    report(9, ok, f"recurrence {prof}, slope {slope} >= 0.5; ball concentration {conc:.4f} <= 0.05",
           time.perf_counter() - t0, 300)


def test_c10_regularity():
    t0 = time.perf_counter()
    out = experiments.regularity_run(ifs.CANTOR, 10**5, SEED, steps=100, lyap_samples=10**4)
    r = out.results
    slope = r["ball_mass_slope"]
    ly = r["lyapunov_empirical"]
    cd = [r["cdf_distance"][k] for k in ("5", "10", "20")]
    ok = abs(slope - math.log(2) / math.log(3)) <= 0.05 and abs(ly - math.log(3)) <= 0.01 * math.log(3) and cd[0] > cd[1] > cd[2]
    detail = (f"ball-mass slope {slope:.4f} vs 0.6309 +- 0.05; Lyapunov {ly:.5f} vs {math.log(3):.5f} +- 1%; "
              f"cdf distance n=5,10,20: {cd[0]:.2e}, {cd[1]:.2e}, {cd[2]:.2e} decreasing")
    report(10, ok, detail, time.perf_counter() - t0, 120)


def _cli_summary(tmp_path, tag, workers, args):
    out = tmp_path / f"{tag}-w{workers}"
    cmd = [sys.executable, "-m", "klab.cli", "run", *args, "--seed", str(SEED), "--workers", str(workers), "--out", str(out)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return (out / "summary.json").read_bytes()


def test_c11_reproducibility(tmp_path):
    t0 = time.perf_counter()
    runs = {
        "identity": ["identity-suite"],
        "lebesgue": ["khintchine", "--ifs", "lebesgue", "--psi", "power:1,1", "--N", "1e6", "--samples", "50"],
        "regularity": ["regularity", "--ifs", "cantor", "--samples", "100000", "--steps", "100"],
    }
    same = {}
    for tag, args in runs.items():
        same[tag] = _cli_summary(tmp_path, tag, 1, args) == _cli_summary(tmp_path, tag, 4, args)
    ok = all(same.values())
    report(11, ok, "byte-identical summaries for workers 1 vs 4: " + ", ".join(f"{k}={v}" for k, v in same.items()),
           time.perf_counter() - t0, 600)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
