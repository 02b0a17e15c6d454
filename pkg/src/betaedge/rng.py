"""Reproducible random streams and order-independent Monte Carlo plumbing.

Every stream is a Philox counter-based generator keyed by ``(seed, stream_id)``.
Parallel work is split into fixed-size chunks; chunk ``i`` always draws from
substream ``i`` and partial results are merged in chunk order, so totals do
not depend on how many worker threads ran the chunks.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

MASK64 = (1 << 64) - 1

T = TypeVar("T")


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


@dataclass
class RngStream:
    """A reproducible stream of variates.

    Two streams built from the same ``(seed, stream_id)`` yield bit-identical
    sequences. The underlying generator is created lazily and consumed by
    every draw, so a stream is stateful; rebuild it to replay.
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (0 <= self.seed <= MASK64 and 0 <= self.stream_id <= MASK64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")

    @property
    def gen(self) -> np.random.Generator:
        if self._gen is None:
            key = self.seed | (self.stream_id << 64)
            self._gen = np.random.Generator(np.random.Philox(key=key))
        return self._gen

    def substream(self, index: int) -> "RngStream":
        """Independent child stream ``index``, fresh regardless of parent state."""
        child = splitmix64(self.stream_id ^ splitmix64(index + 1))
        return RngStream(self.seed, child)

    def fresh(self) -> "RngStream":
        return RngStream(self.seed, self.stream_id)


@dataclass
class RunningMoments:
    """Streaming count/mean/M2 accumulator with a pairwise merge."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def from_values(cls, values) -> "RunningMoments":
        x = np.asarray(values, dtype=float).ravel()
        if x.size == 0:
            return cls()
        mu = float(x.mean())
        return cls(int(x.size), mu, float(((x - mu) ** 2).sum()))

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        if other.count == 0:
            return RunningMoments(self.count, self.mean, self.m2)
        if self.count == 0:
            return RunningMoments(other.count, other.mean, other.m2)
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return RunningMoments(n, mean, m2)

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else math.nan

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count > 1 else math.nan


def default_threads() -> int:
    return os.cpu_count() or 1


def chunk_sizes(total: int, chunk: int) -> list[int]:
    if total < 0 or chunk < 1:
        raise ValueError("total must be >= 0 and chunk >= 1")
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])


def ordered_map(fn: Callable[[T], object], items: Sequence[T], threads: int | None = None) -> list:
    """Map ``fn`` over ``items`` with a thread pool; output keeps input order."""
    threads = threads or default_threads()
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def merge_all(parts: Iterable[RunningMoments]) -> RunningMoments:
    acc = RunningMoments()
    for p in parts:
        acc = acc.merge(p)
    return acc
