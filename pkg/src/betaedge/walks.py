"""Dyck paths, Bernoulli bridges and conditioned-walk studies.

Bridge convention: ``2k + 1`` steps of +-1 summing to -1. Appending a down
step to a Dyck path of length ``2k`` and cutting before one of its ``k + 1``
down steps (then swapping the two pieces) gives a bridge whose first step is
down; the cycle lemma inverts this. Uniform excursions are drawn by sampling a
uniform bridge and inverting, so the sampler is exact.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy import stats

from .rng import RngStream, chunk_sizes, ordered_map

MAX_ENUM_K = 10


@dataclass(frozen=True)
class DyckPath:
    steps: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(int(s) for s in self.steps))
        h = 0
        for s in self.steps:
            if s not in (1, -1):
                raise ValueError("steps must be +1 or -1")
            h += s
            if h < 0:
                raise ValueError("Dyck path dips below zero")
        if h != 0:
            raise ValueError("Dyck path must end at zero")

    @property
    def k(self) -> int:
        return len(self.steps) // 2

    def heights(self) -> list[int]:
        return [0, *np.cumsum(self.steps, dtype=int).tolist()] if self.steps else [0]


@dataclass(frozen=True)
class BernoulliBridge:
    steps: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(int(s) for s in self.steps))
        if any(s not in (1, -1) for s in self.steps):
            raise ValueError("steps must be +1 or -1")
        if len(self.steps) % 2 != 1 or sum(self.steps) != -1:
            raise ValueError("bridge must have odd length and end at -1")
        if self.steps[0] != -1:
            raise ValueError("bridge must start with a down step")

    @property
    def k(self) -> int:
        return len(self.steps) // 2


@dataclass(frozen=True)
class WalkStats:
    max_level: int
    occupation: dict[int, int]


def catalan(k: int) -> int:
    if k < 0:
        raise ValueError("k must be >= 0")
    return math.comb(2 * k, k) // (k + 1)


def catalan_asymptotic_ratio(k: int) -> float:
    """``C_k * k^{3/2} * sqrt(pi) / 4^k``, with the Catalan part exact."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return float(Fraction(catalan(k), 4**k)) * k**1.5 * math.sqrt(math.pi)


def enumerate_dyck(k: int) -> list[DyckPath]:
    if k < 0:
        raise ValueError("k must be >= 0")
    if k > MAX_ENUM_K:
        raise ValueError(f"k={k} exceeds the enumeration cap {MAX_ENUM_K}")
    out: list[DyckPath] = []
    steps: list[int] = []

    def rec(ups, downs):
        if ups == k and downs == k:
            out.append(DyckPath(tuple(steps)))
            return
        if ups < k:
            steps.append(1)
            rec(ups + 1, downs)
            steps.pop()
        if downs < ups:
            steps.append(-1)
            rec(ups, downs + 1)
            steps.pop()

    rec(0, 0)
    return out


def dyck_to_bridge(d: DyckPath, cut: int) -> BernoulliBridge:
    """Append a down step, cut before the ``cut``-th down step (1-based), swap halves."""
    k = d.k
    if not 1 <= cut <= k + 1:
        raise ValueError(f"cut must be in 1..{k + 1}, got {cut}")
    w = list(d.steps) + [-1]
    downs = [i for i, s in enumerate(w) if s == -1]
    pos = downs[cut - 1]
    return BernoulliBridge(tuple(w[pos:] + w[:pos]))


def bridge_to_dyck(b: BernoulliBridge) -> tuple[DyckPath, int]:
    """Inverse of :func:`dyck_to_bridge`.

    Rotating the bridge to start just after its first global minimum gives the
    unique rotation that stays nonnegative until its last (down) step.
    """
    steps = list(b.steps)
    L = len(steps)
    s = np.cumsum(steps)
    t = int(np.argmin(s)) + 1
    w = steps[t:] + steps[:t]
    pos = L - t
    cut = sum(1 for x in w[: pos + 1] if x == -1)
    return DyckPath(tuple(w[:-1])), cut


def uniform_bridges(gen: np.random.Generator, k: int, size: int) -> np.ndarray:
    """``size`` uniform bridges of length ``2k + 1`` with a forced first down step."""
    base = np.concatenate([np.ones(k, np.int8), -np.ones(k, np.int8)])
    body = gen.permuted(np.tile(base, (size, 1)), axis=1)
    return np.concatenate([-np.ones((size, 1), np.int8), body], axis=1)


def excursion_levels(bridges: np.ndarray) -> np.ndarray:
    """Heights of the excursions matched to each bridge row, as an unordered multiset.

    Column ``j`` holds ``S_{j+1} - min S`` from the first minimum onward and
    ``S_{j+1} - min S - 1`` before it, which is the rotated path read in
    bridge order. Avoids materializing the rotation.
    """
    s = np.cumsum(bridges, axis=1, dtype=np.int32)
    t = np.argmin(s, axis=1)
    m = s[np.arange(s.shape[0]), t]
    before = np.arange(s.shape[1])[None, :] < t[:, None]
    return s - m[:, None] - before.astype(np.int32)


def sample_excursion(k: int, stream: RngStream) -> DyckPath:
    if k < 0:
        raise ValueError("k must be >= 0")
    b = uniform_bridges(stream.gen, k, 1)[0]
    return bridge_to_dyck(BernoulliBridge(tuple(b.tolist())))[0]


def excursion_stats(d: DyckPath) -> WalkStats:
    h = d.heights()
    occ: dict[int, int] = {}
    for x in h:
        occ[x] = occ.get(x, 0) + 1
    return WalkStats(max(h), dict(sorted(occ.items())))


def _batch_stats(k: int, size: int, stream: RngStream) -> tuple[np.ndarray, np.ndarray]:
    levels = excursion_levels(uniform_bridges(stream.gen, k, size))
    top = levels.max(axis=1)
    offset = levels + (np.arange(size, dtype=np.int64) * (k + 1))[:, None]
    occ = np.bincount(offset.ravel(), minlength=size * (k + 1)).reshape(size, k + 1)
    return top, occ.max(axis=1)


def excursion_sample_stats(k: int, samples: int, stream: RngStream, threads: int | None = None):
    """Maximum level and maximum occupation of ``samples`` uniform excursions."""
    chunk = max(1, 8_000_000 // (2 * k + 1))
    sizes = chunk_sizes(samples, chunk)
    parts = ordered_map(lambda i: _batch_stats(k, sizes[i], stream.substream(i)), list(range(len(sizes))), threads)
    if not parts:
        return np.empty(0, int), np.empty(0, int)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


@dataclass(frozen=True)
class TailRow:
    parameter: float
    threshold: float
    hits: int
    samples: int
    probability: float
    ci_low: float
    ci_high: float


def _tail_rows(values: np.ndarray, params: Sequence[float], thresholds: Sequence[float]) -> list[TailRow]:
    rows = []
    n = values.size
    for par, thr in zip(params, thresholds):
        hits = int(np.count_nonzero(values >= thr))
        ci = stats.binomtest(hits, n).proportion_ci(confidence_level=0.95, method="wilson")
        rows.append(TailRow(float(par), float(thr), hits, n, hits / n, ci.low, ci.high))
    return rows


def tail_study_max(k: int, lambdas, samples: int, stream: RngStream, threads: int | None = None) -> list[TailRow]:
    """Empirical ``P(max level >= lambda sqrt(k))`` over uniform excursions of length 2k."""
    if samples < 1000:
        raise ValueError("tail studies need at least 1000 samples")
    top, _ = excursion_sample_stats(k, samples, stream, threads)
    return _tail_rows(top, lambdas, [lam * math.sqrt(k) for lam in lambdas])


def tail_study_occupation(k: int, thresholds, samples: int, stream: RngStream, threads: int | None = None) -> list[TailRow]:
    """Empirical ``P(max_i T_i >= t)``; the maximum runs over every level, 0 included."""
    if samples < 1000:
        raise ValueError("tail studies need at least 1000 samples")
    _, occ = excursion_sample_stats(k, samples, stream, threads)
    return _tail_rows(occ, thresholds, thresholds)


def dyck_height_tail(k: int, h: int) -> float:
    """Exact ``P(max level >= h)`` for a uniform Dyck path of length ``2k``."""
    if h <= 0:
        return 1.0
    if h > k:
        return 0.0
    # walk weights scaled by 1/2 per step stay in float range
    w = np.zeros(h + 1)
    w[0] = 1.0
    for _ in range(2 * k):
        nw = np.zeros_like(w)
        nw[1:] += 0.5 * w[:-1]
        nw[:-1] += 0.5 * w[1:]
        nw[h] = 0.0
        w = nw
    below = w[0]
    total = float(Fraction(catalan(k), 4**k))
    return max(0.0, 1.0 - below / total)


Event = Callable[[np.ndarray], np.ndarray]


def first_step_down(steps: np.ndarray) -> np.ndarray:
    return steps[:, 0] == -1


def half_level_nonnegative(steps: np.ndarray) -> np.ndarray:
    k = steps.shape[1]
    if k // 2 == 0:
        return np.ones(steps.shape[0], bool)
    return steps[:, : k // 2].sum(axis=1) >= 0


def early_max_exceeds(steps: np.ndarray) -> np.ndarray:
    k = steps.shape[1]
    return np.cumsum(steps, axis=1).max(axis=1) >= math.sqrt(k) / 2


EVENTS: dict[str, Event] = {
    "first_step_down": first_step_down,
    "half_level_nonnegative": half_level_nonnegative,
    "early_max_exceeds": early_max_exceeds,
}


@dataclass(frozen=True)
class RatioResult:
    k: int
    p_bridge: float
    p_walk: float

    @property
    def ratio(self) -> float:
        return self.p_bridge / self.p_walk if self.p_walk > 0 else math.inf


def bridge_vs_walk_ratio(k: int, event: Event, samples: int, stream: RngStream) -> RatioResult:
    """Compare an event on the first ``k`` steps under the bridge and free-walk laws.

    The bridge law is the walk of length ``2k + 1`` conditioned to end at -1.
    """
    gen = stream.gen
    base = np.concatenate([np.ones(k, np.int8), -np.ones(k + 1, np.int8)])
    hits_b = hits_w = 0
    for size in chunk_sizes(samples, max(1, 4_000_000 // (2 * k + 1))):
        bridge = gen.permuted(np.tile(base, (size, 1)), axis=1)[:, :k]
        walk = np.where(gen.random((size, k)) < 0.5, 1, -1).astype(np.int8)
        hits_b += int(np.count_nonzero(event(bridge)))
        hits_w += int(np.count_nonzero(event(walk)))
    return RatioResult(k, hits_b / samples, hits_w / samples)


def bridge_vs_walk_exact(k: int, event: Event) -> RatioResult:
    """Exact bridge and walk probabilities by enumerating all ``2^k`` prefixes."""
    if k > 20:
        raise ValueError("exact enumeration limited to k <= 20")
    codes = np.arange(2**k, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(k)[None, :]) & 1
    steps = (2 * bits - 1).astype(np.int8)
    hit = event(steps)
    ups = bits.sum(axis=1)
    # the remaining k+1 steps must hold (k - ups) ups to end at -1
    rest = np.array([math.comb(k + 1, k - u) if 0 <= k - u <= k + 1 else 0 for u in range(k + 1)], dtype=object)
    total = math.comb(2 * k + 1, k)
    num = sum(rest[u] for u in ups[hit])
    return RatioResult(k, float(Fraction(int(num), total)), int(np.count_nonzero(hit)) / 2**k)


def return_count_pmf(k: int, r: int) -> Fraction:
    """Probability that a simple walk of length ``2k`` is at 0 exactly ``r`` times after time 0."""
    if k < 0 or not 0 <= r <= k:
        raise ValueError(f"need 0 <= r <= k, got r={r}, k={k}")
    return Fraction(math.comb(2 * k - r, k), 2 ** (2 * k - r))


def return_count_histogram(k: int, samples: int, stream: RngStream) -> np.ndarray:
    """Empirical counts of the number of returns to 0, indexed by r = 0..k."""
    gen = stream.gen
    hist = np.zeros(k + 1, dtype=np.int64)
    for size in chunk_sizes(samples, max(1, 4_000_000 // (2 * k))):
        steps = np.where(gen.random((size, 2 * k)) < 0.5, 1, -1).astype(np.int8)
        r = np.count_nonzero(np.cumsum(steps, axis=1, dtype=np.int32) == 0, axis=1)
        hist += np.bincount(r, minlength=k + 1)
    return hist


def iter_bridges(k: int) -> Iterator[BernoulliBridge]:
    """Every bridge of length ``2k + 1`` with a forced first down step."""
    for ups in itertools.combinations(range(2 * k), k):
        body = [-1] * (2 * k)
        for i in ups:
            body[i] = 1
        yield BernoulliBridge((-1, *body))
