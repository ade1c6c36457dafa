"""Experiment drivers.  Each returns an ``Outcome``: a JSON-ready results dict,
CSV header and rows, and optional figure callbacks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from . import dio, homsp, ifs, translate, walk
from .homsp import PElement, Rect
from .seeds import derive_seed, rng_for

CLAIMS = {
    "khintchine": "khintchine-divergent",
    "khintchine-convergent": "khintchine-convergent",
    "walk": "random-walk-equidistribution",
    "translate": "fractal-translate-equidistribution",
    "double": "double-equidistribution",
    "correlation": "correlation-decay",
    "regularity": "sigma-regularity",
    "identity-suite": "exact-identities",
}


@dataclass
class Outcome:
    results: dict
    header: list
    rows: list
    claim: str
    figures: list = field(default_factory=list)   # (filename, callable(path))
    ok: bool = True


# ---------------------------------------------------------------------------


def psi_converges(psi: dio.ApproxFn) -> bool:
    if psi.family == "power":
        return psi.params[1] > 1
    if psi.family == "logpower":
        return psi.params[0] > 1
    return False


def khintchine(system, psi, N, samples, seed, side="plus", effective=False, bits=None, N0=None, workers=None,
               tau=2) -> Outcome:
    stream = ifs.SampleStream(system, seed=seed)
    sides = ["plus", "minus"] if side == "both" else [side]
    res = {}
    rows = []
    for sd in sides:
        r = dio.khintchine_experiment(stream, psi, N, samples, sd, effective, bits, workers)
        res[sd] = {k: r[k] for k in ("median", "median_hi", "q1", "q3", "ambiguous", "sum_psi")}
        for i, (d, c, ch, ra) in enumerate(zip(r["digests"], r["counts"], r["counts_hi"], r["ratios"])):
            rows.append([i, d, N, sd, c, ch, r["sum_psi"], ra, "ambiguous" if ch > c else ""])
    claim = CLAIMS["khintchine-convergent" if psi_converges(psi) else "khintchine"]
    if N0 is not None:
        g = dio.convergent_gain(stream, psi, N0, N, samples, bits, workers)
        res["gain"] = {k: g[k] for k in ("N0", "N1", "zero_fraction", "tail_sum")}
        res["gain"]["gains_hi"] = g["gains_hi"]
    res.update({"N": N, "samples": samples, "psi": psi.label(), "effective": effective,
                "tau": str(dio.as_tau(tau)), "blocks": dio.block_index(N, tau)})
    ratios = [row[7] for row in rows if row[3] == sides[0]]
    figs = [("ratios.png", lambda p: _plot().ratio_histogram(ratios, p))]
    header = ["sample_id", "s_digest", "N", "side", "T_N", "T_N_hi", "sum_psi", "ratio", "flags"]
    return Outcome(res, header, rows, claim, figs)


def walk_run(system, steps, samples, seed, rect: Rect, thresholds=(0.1, 0.05, 0.025), ball_radius=None, workers=None) -> Outcome:
    cfg = walk.WalkConfig(system, steps, samples, seed, positivize=not ifs.validate(system).orientation_preserving)
    ens = walk.run_walk(cfg, workers)
    eq = walk.walk_equidist(ens, rect)
    prof = walk.recurrence_profile(ens, thresholds)
    xs = [r for r in thresholds if prof[float(r)] > 0]
    slope = ifs.loglog_slope(xs, [prof[float(r)] for r in xs]) if len(xs) >= 2 else None
    res = {"steps": steps, "replicas": samples, "equidist": eq,
           "recurrence": {str(k): v for k, v in prof.items()}, "recurrence_slope": slope,
           "mean_log_rate": float(ens.log_rates.mean())}
    if not cfg.positivize:
        ref = ifs.sample_sigma_n(ifs.SampleStream(system, seed=derive_seed(seed, [7])), steps, samples)
        res["offset_cdf_distance"] = ifs.cdf_distance(ens.offsets, ref)
        res["offset_noise_floor"] = 3 / math.sqrt(samples)
    if ball_radius is not None:
        res["ball_concentration"] = {"radius": ball_radius, "value": walk.ball_concentration(ens, ball_radius)}
    sy = ens.systoles
    rows = [[steps, i, lr, off, s] for i, (lr, off, s) in enumerate(zip(ens.log_rates.tolist(), ens.offsets.tolist(), sy.tolist()))]
    figs = [("systoles.png", lambda p: _plot().systole_histogram(sy, p))]
    return Outcome(res, ["n", "replica", "log_rate", "offset", "systole"], rows, CLAIMS["walk"], figs)


def translate_run(system, times, samples, seed, rect: Rect, workers=None) -> Outcome:
    rep = translate.equidist_deviation(ifs.SampleStream(system, seed=seed), times, rect, samples, workers)
    rows = [[t, m, se, rep.target, d] for t, m, se, d in zip(rep.times, rep.means, rep.stderrs, rep.deviations)]
    figs = [("deviation.png", lambda p: _plot().deviation_curve(rep.times, rep.deviations, rep.stderrs, p))]
    return Outcome(rep.to_dict(), ["t", "mean", "stderr", "target", "deviation"], rows, CLAIMS["translate"], figs)


def double_run(system, t1, t2s, samples, seed, rect: Rect, rect2: Rect | None = None, workers=None) -> Outcome:
    rep = translate.double_deviation(ifs.SampleStream(system, seed=seed), t1, t2s, rect, rect2 or rect, samples, workers)
    rows = [[t1, t, m, se, rep.target, d] for t, m, se, d in zip(rep.times, rep.means, rep.stderrs, rep.deviations)]
    figs = [("double.png", lambda p: _plot().deviation_curve(rep.times, rep.deviations, rep.stderrs, p, xlabel="t2"))]
    return Outcome(rep.to_dict(), ["t1", "t2", "mean", "stderr", "target", "deviation"], rows, CLAIMS["double"], figs)


def correlation_run(times, samples, seed, rect: Rect, workers=None) -> Outcome:
    ests = [translate.correlation_estimate(t, rect, samples, seed, workers) for t in times]
    rows = [[e["t"], e["estimate"], e["stderr"], e["variance"]] for e in ests]
    figs = [("correlation.png", lambda p: _plot().deviation_curve(
        [e["t"] for e in ests], [abs(e["estimate"]) for e in ests], [e["stderr"] for e in ests], p))]
    return Outcome({"estimates": ests}, ["t", "estimate", "stderr", "variance"], rows, CLAIMS["correlation"], figs)


def regularity_run(system, samples, seed, steps=100, lyap_samples=10000, radii=None, n_grid=(5, 10, 20)) -> Outcome:
    stream = ifs.SampleStream(system, seed=seed)
    sig = ifs.sample_sigma(stream, size=samples)
    if radii is None:
        radii = [3.0**-k for k in range(4, 9)]
    mass = ifs.estimate_ball_mass(sig, radii)
    slope = ifs.loglog_slope(radii, [mass[r] for r in radii])
    ly, ly_se = ifs.lyapunov_empirical(system, steps, lyap_samples, derive_seed(seed, [3]))
    # sigma^(n) draws share the index stream of the sigma draws (common random numbers)
    dists = {n: ifs.cdf_distance(ifs.sample_sigma_n(stream, n, samples), sig) for n in n_grid}
    res = {
        "samples": samples,
        "ball_mass": {repr(r): mass[r] for r in radii},
        "ball_mass_slope": slope,
        "lyapunov": ifs.lyapunov(system),
        "lyapunov_empirical": ly,
        "lyapunov_stderr": ly_se,
        "cdf_distance": {str(n): d for n, d in dists.items()},
    }
    rows = [["ball_mass", r, mass[r]] for r in radii] + [["cdf_distance", n, d] for n, d in dists.items()]
    figs = [("ball_mass.png", lambda p: _plot().loglog_points(radii, [mass[r] for r in radii], p, "r", "sup ball mass",
                                                              ref_slope=slope))]
    return Outcome(res, ["statistic", "parameter", "value"], rows, CLAIMS["regularity"], figs)


# ---------------------------------------------------------------------------
# identity suite


def _mp_prod(x, y):
    return ((x[0] * y[0] + x[1] * y[2], x[0] * y[1] + x[1] * y[3], x[2] * y[0] + x[3] * y[2], x[2] * y[1] + x[3] * y[3]))


def _mp_au(t, s):
    r = mpmath.sqrt(t)
    return (r, r * s, mpmath.mpf(0), 1 / r)


def cocycle_residuals(rng, count: int, prec: int = 200) -> np.ndarray:
    """Residuals of ``a(t r)u(s) g = a(t)u(r s + b)`` on random inputs with
    magnitudes up to 1e6."""
    t = 10 ** rng.uniform(0, 6, count)
    s = rng.uniform(-1e6, 1e6, count)
    r = 10 ** rng.uniform(-6, 0, count)
    b = rng.uniform(-1e6, 1e6, count)
    out = np.empty(count)
    with mpmath.workprec(prec):
        for i in range(count):
            ti, si, ri, bi = (mpmath.mpf(float(v)) for v in (t[i], s[i], r[i], b[i]))
            g = _mp_au(1 / ri, bi)
            left = _mp_prod(_mp_au(ti * ri, si), g)
            right = _mp_au(ti, ri * si + bi)
            out[i] = float(max(abs(x - y) for x, y in zip(left, right)))
    return out


def compose_residuals(rng, count: int) -> np.ndarray:
    lr = rng.uniform(-3, 3, (count, 2))
    b = rng.uniform(-5, 5, (count, 2))
    out = np.empty(count)
    for i in range(count):
        g1, g2 = PElement(lr[i, 0], b[i, 0]), PElement(lr[i, 1], b[i, 1])
        m = homsp.p_to_matrix(homsp.compose_p(g1, g2)).m
        ref = homsp.p_to_matrix(g1).m @ homsp.p_to_matrix(g2).m
        out[i] = np.abs(m - ref).max()
    return out


DANI_PSIS = ("power:1,1", "power:1/2,1", "power:1,2")
DANI_TAUS = (Fraction(2), Fraction(3, 2))


def dani_cases(rng, count: int, seed: int):
    """Random ``(s, psi, tau, k)``: s from the Cantor digit stream, k <= 20."""
    pts = ifs.sample_sigma(ifs.SampleStream(ifs.CANTOR, mode="digit", seed=seed), size=count)
    psis = [dio.ApproxFn.parse(p) for p in DANI_PSIS]
    cases = []
    for i in range(count):
        tau = DANI_TAUS[int(rng.integers(len(DANI_TAUS)))]
        kmax = 20 if tau == 2 else 34
        cases.append((pts[i], psis[int(rng.integers(len(psis)))], tau, int(rng.integers(0, kmax + 1))))
    return cases


def identity_suite(seed: int, n_cocycle=10**4, n_compose=10**4, n_dani=10**3) -> Outcome:
    rng = rng_for(seed, [0])
    coc = cocycle_residuals(rng, n_cocycle)
    comp = compose_residuals(rng_for(seed, [1]), n_compose)
    mism = 0
    for s, psi, tau, k in dani_cases(rng_for(seed, [2]), n_dani, derive_seed(seed, [3])):
        if dio.count_Sk_direct(s, psi, tau, k) != dio.count_Sk_siegel(s, psi, tau, k):
            mism += 1
    res = {
        "cocycle": {"cases": n_cocycle, "max_residual": float(coc.max()), "tolerance": 1e-10, "pass": bool(coc.max() <= 1e-10)},
        "compose_p": {"cases": n_compose, "max_residual": float(comp.max()), "tolerance": 1e-12, "pass": bool(comp.max() <= 1e-12)},
        "dani": {"cases": n_dani, "mismatches": mism, "pass": mism == 0},
    }
    ok = all(v["pass"] for v in res.values())
    rows = [[k, v["cases"], v.get("max_residual", v.get("mismatches")), v["pass"]] for k, v in res.items()]
    return Outcome(res, ["identity", "cases", "worst", "pass"], rows, CLAIMS["identity-suite"], ok=ok)


def _plot():
    from . import plotting

    return plotting
