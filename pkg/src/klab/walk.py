"""Random walks on the space of unimodular lattices driven by an affine IFS.

Each map ``t -> r t + b`` is the P-element ``a(r)^-1 u(b)``.  The composite
of a walk ``g_n ... g_1`` has rate ``prod r_k`` and offset
``phi_1 ∘ ... ∘ phi_n (0)``, evaluated here in integer arithmetic, so the
endpoint ``a(1/R) u(B) Z^2`` is exact even when ``R = 3**-1000``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigError, ResourceError
from .homsp import (
    Z2,
    PElement,
    Rect,
    ShearLattice,
    UnimodularLattice,
    act,
    count_batch,
    lattice_from_exact,
    siegel_count,
    systoles,
)
from .ifs import AffineSystem, SampleStream, positivize_sampler, stream_indices, validate
from .seeds import BLOCK, block_ranges, pmap

WALK_BUDGET = 10**9
BALL_MAX_M = 20000


@dataclass(frozen=True)
class WalkConfig:
    system: AffineSystem
    steps: int
    replicas: int
    seed: int = 0
    start: UnimodularLattice = Z2
    positivize: bool = False
    cap: int = 64

    def __post_init__(self):
        if self.steps < 0 or self.replicas < 1:
            raise ConfigError("steps must be >= 0 and replicas >= 1")
        if self.steps * self.replicas > WALK_BUDGET:
            raise ResourceError(f"steps x replicas exceeds the budget of {WALK_BUDGET}")
        rep = validate(self.system)
        if not rep.orientation_preserving and not self.positivize:
            raise ConfigError("system has negative rates; enable positivize")


@dataclass
class WalkEnsemble:
    config: WalkConfig
    bases: np.ndarray          # (M, 2, 2) canonical reduced endpoint bases
    log_rates: np.ndarray
    offsets: np.ndarray
    exact: list = field(repr=False, default_factory=list)   # (R, B) Fractions per replica

    def __len__(self):
        return self.bases.shape[0]

    @property
    def endpoints(self) -> list:
        return [self.endpoint(i) for i in range(len(self))]

    def endpoint(self, i: int) -> UnimodularLattice:
        if self.exact:
            R, B = self.exact[i]
            return act(PElement(_flog(R), float(B), (R, B)), self.config.start)
        return UnimodularLattice(self.bases[i])

    @property
    def p_coords(self) -> list:
        return list(zip(self.log_rates.tolist(), self.offsets.tolist()))

    @property
    def systoles(self) -> np.ndarray:
        return systoles(self.bases)


def _flog(x: Fraction) -> float:
    return math.log(x.numerator) - math.log(x.denominator)


def _composites_plain(system: AffineSystem, idx: np.ndarray):
    """Exact ``(R, B)`` per row of the index matrix (row = g_1, ..., g_n)."""
    Q = system.common_denominator
    a_ = np.array([int(m.rate * Q) for m in system.maps], dtype=object)
    c_ = np.array([int(m.offset * Q) for m in system.maps], dtype=object)
    M, n = idx.shape
    W = np.zeros(M, dtype=object)
    A = np.ones(M, dtype=object)
    qp = 1
    # W_k = c_k Q^(n-k) + a_k W_(k+1), from the innermost map outwards
    for k in range(n - 1, -1, -1):
        col = idx[:, k]
        W = c_[col] * qp + a_[col] * W
        A = A * a_[col]
        qp *= Q
    den = Q**n
    return [(Fraction(int(x), den), Fraction(int(w), den)) for x, w in zip(A, W)]


def _block_task(args):
    system, seed, start, n, b, lo, hi, positivize, cap = args
    rows = slice(lo - b * BLOCK, hi - b * BLOCK)
    if positivize:
        ps = positivize_sampler(system, seed, cap)
        # step j of replica i uses block draws of the stream labelled by step
        comps = []
        steps = []
        for j in range(n):
            sub = ps.__class__(system, seed=_step_seed(seed, j), cap=cap)
            idx, tau = sub.draw_indices(b, rows)
            steps.append([_compose_exact(system, idx[i, : tau[i]]) for i in range(idx.shape[0])])
        for i in range(hi - lo):
            R, B = Fraction(1), Fraction(0)
            for j in range(n):
                r, bb = steps[j][i]
                R, B = r * R, bb * R + B
            comps.append((R, B))
    else:
        idx = stream_indices(SampleStream(system, seed=seed, position=lo), n, hi - lo)
        comps = _composites_plain(system, idx)
    out = []
    for R, B in comps:
        x = act(PElement(_flog(R), float(B), (R, B)), start) if start.exact is not None else \
            act(PElement(_flog(R), float(B)), start)
        out.append((x.basis, _flog(R), float(B), R, B))
    return out


def _step_seed(seed: int, j: int) -> int:
    from .seeds import derive_seed

    return derive_seed(seed, [1, j])


def _compose_exact(system, seq):
    """``phi_{s1} ∘ ... ∘ phi_{sk}`` as an exact (rate, offset)."""
    r, b = Fraction(1), Fraction(0)
    for i in reversed(seq.tolist()):
        m = system.maps[i]
        r, b = m.rate * r, m.rate * b + m.offset
    return r, b


def run_walk(config: WalkConfig, workers: int | None = None) -> WalkEnsemble:
    """``M`` independent walks of ``n`` steps from ``config.start``."""
    tasks = [
        (config.system, config.seed, config.start, config.steps, b, lo, hi, config.positivize, config.cap)
        for b, lo, hi in block_ranges(config.replicas)
    ]
    parts = pmap(_block_task, tasks, workers)
    rows = [r for part in parts for r in part]
    return WalkEnsemble(
        config,
        np.array([r[0] for r in rows]),
        np.array([r[1] for r in rows]),
        np.array([r[2] for r in rows]),
        [(r[3], r[4]) for r in rows],
    )


def recurrence_profile(ensemble: WalkEnsemble, thresholds) -> dict:
    """Fraction of endpoints with systole below each threshold."""
    if len(ensemble) == 0:
        raise ValueError("empty ensemble")
    sy = ensemble.systoles
    return {float(r): float((sy < r).mean()) for r in thresholds}


def walk_equidist(ensemble: WalkEnsemble, rect: Rect) -> dict:
    """Mean primitive Siegel count over endpoints versus the Haar mean."""
    counts = exact_counts(ensemble, rect)
    mean = float(counts.mean())
    target = rect.siegel_mean
    se = float(counts.std(ddof=1) / math.sqrt(counts.size)) if counts.size > 1 else 0.0
    return {"mean_count": mean, "target": target, "deviation": abs(mean - target), "stderr": se}


def exact_counts(ensemble: WalkEnsemble, rect: Rect) -> np.ndarray:
    counts, amb = count_batch(ensemble.bases, rect)
    if ensemble.exact and ensemble.config.start.exact is not None:
        for i in np.flatnonzero(amb):
            counts[i] = siegel_count(ensemble.endpoint(i), rect)
    return counts


# ---------------------------------------------------------------------------
# ball concentration


def _sl2z_small(k: int = 3) -> np.ndarray:
    rng = range(-k, k + 1)
    out = [np.array([[p, q], [r, s]], float) for p, q, r, s in itertools.product(rng, rng, rng, rng) if p * s - q * r == 1]
    return np.array(out)


GAMMAS = _sl2z_small()


def proxy_distance(By: np.ndarray, Bz: np.ndarray) -> np.ndarray:
    """``min_gamma |B_y gamma B_z^-1 - I|_F`` over SL2(Z) with entries <= 3.

    ``By`` and ``Bz`` are stacks ``(K, 2, 2)`` (broadcastable)."""
    Bz_inv = np.linalg.inv(Bz)
    g = np.einsum("kij,gjl,klm->kgim", By, GAMMAS, Bz_inv)
    g[..., 0, 0] -= 1
    g[..., 1, 1] -= 1
    return np.sqrt((g**2).sum(axis=(-1, -2))).min(axis=1)


def _short_vectors(B: np.ndarray, factor: float):
    """Primitive lattice vectors of each basis up to ``factor * |v1|``."""
    M = B.shape[0]
    coeffs = np.array([(m, n) for m in range(-7, 8) for n in range(-5, 6) if math.gcd(m, n) == 1])
    W = np.einsum("kij,cj->kci", B, coeffs)
    L = np.hypot(W[..., 0], W[..., 1])
    lim = factor * np.hypot(B[:, 0, 0], B[:, 1, 0]) * (1 + 1e-12)
    keep = L <= lim[:, None]
    ki, ci = np.nonzero(keep)
    return ki, W[ki, ci]


def ball_concentration(ensemble, radius: float) -> float:
    """Largest fraction of endpoints within proxy distance ``radius`` of an endpoint.

    If ``g z = y`` with ``|g - I| <= radius`` then ``v1(y) = g w`` for a short
    primitive vector ``w`` of ``z``.  Short vectors are bucketed by log-length
    and angle mod pi; only pairs with such a ``w`` near ``+-v1(y)`` are scored.
    """
    B = ensemble.bases if isinstance(ensemble, WalkEnsemble) else np.asarray(ensemble, dtype=float)
    M = B.shape[0]
    if M == 0:
        raise ValueError("empty ensemble")
    if not 0 < radius <= 0.5:
        raise ConfigError("radius must lie in (0, 0.5]")
    if M > BALL_MAX_M:
        raise ResourceError(f"ball concentration is capped at {BALL_MAX_M} endpoints")
    dl = -math.log(1 - radius)
    na = max(1, int(math.pi / math.asin(radius)))
    wa = math.pi / na

    def cells(V):
        c1 = np.floor(np.log(np.hypot(V[:, 0], V[:, 1])) / dl).astype(np.int64)
        c2 = np.minimum((np.mod(np.arctan2(V[:, 1], V[:, 0]), math.pi) / wa).astype(np.int64), na - 1)
        return c1, c2

    ki, W = _short_vectors(B, (1 + radius) / (1 - radius))
    c1, c2 = cells(W)
    key = c1 * na + c2
    order = np.argsort(key, kind="stable")
    key, ki, W = key[order], ki[order], W[order]
    WL = np.hypot(W[:, 0], W[:, 1])
    v1 = B[:, :, 0]
    q1, q2 = cells(v1)
    best = 1
    for y in range(M):
        idx = []
        for d1 in (-1, 0, 1):
            for d2 in (-1, 0, 1):
                k = (q1[y] + d1) * na + (q2[y] + d2) % na
                lo, hi = np.searchsorted(key, [k, k + 1])
                if hi > lo:
                    idx.append(np.arange(lo, hi))
        if not idx:
            continue
        idx = np.concatenate(idx)
        near = np.minimum(np.hypot(*(W[idx] - v1[y]).T), np.hypot(*(W[idx] + v1[y]).T)) <= radius * WL[idx] * (1 + 1e-9)
        z = np.unique(ki[idx[near]])
        if z.size <= best:
            continue
        d = proxy_distance(np.broadcast_to(B[y], (z.size, 2, 2)), B[z])
        best = max(best, int((d <= radius).sum()))
    return best / M


def offsets_cdf_distance(ensemble: WalkEnsemble, samples) -> float:
    from .ifs import cdf_distance

    return cdf_distance(ensemble.offsets, samples)
