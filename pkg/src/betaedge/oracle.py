"""Exact moments of the tridiagonal model by closed-walk enumeration.

``E (A^k)_{ii}`` is a sum over closed walks of length ``k`` on the path graph
``1..n`` with a self-loop at each vertex. A walk's expectation factorizes over
the distinct entries it uses: a loop at vertex ``v`` used ``2l`` times gives
the ``2l``-th Gaussian moment, an edge crossed ``2l`` times gives the
``2l``-th chi moment, and any loop used an odd number of times gives zero.

Walks are grouped by their usage profile (loop counts per vertex, crossing
counts per edge) with a forward dynamic program, so each profile is weighed
once. All arithmetic is in :class:`fractions.Fraction`.
"""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator

from .ensemble import Scaling

MAX_N = 8
MAX_K = 12


class EnumerationLimitError(ValueError):
    pass


def _check_limits(n: int, k: int):
    if n < 1 or k < 0:
        raise ValueError("need n >= 1 and k >= 0")
    if n > MAX_N or k > MAX_K:
        raise EnumerationLimitError(f"(n, k) = ({n}, {k}) exceeds limits n <= {MAX_N}, k <= {MAX_K}")


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12)
    return Fraction(x)


def chi_even_moment(dof, l: int) -> Fraction:
    """``E chi_dof^{2l} = dof (dof + 2) ... (dof + 2(l - 1))``."""
    dof = as_fraction(dof)
    if dof <= 0:
        raise ValueError("dof must be positive")
    if l < 0:
        raise ValueError("l must be >= 0")
    out = Fraction(1)
    for i in range(l):
        out *= dof + 2 * i
    return out


def gaussian_even_moment(variance, l: int) -> Fraction:
    """``E X^{2l} = variance^l (2l - 1)!!`` for centered normal X."""
    variance = as_fraction(variance)
    if variance <= 0:
        raise ValueError("variance must be positive")
    if l < 0:
        raise ValueError("l must be >= 0")
    double_fact = math.prod(range(1, 2 * l, 2))
    return variance**l * double_fact


@dataclass(frozen=True)
class ClosedWalk:
    vertices: tuple[int, ...]

    def __post_init__(self):
        v = self.vertices
        if len(v) < 1 or v[0] != v[-1]:
            raise ValueError("walk must be closed")
        if any(abs(a - b) > 1 for a, b in zip(v, v[1:])):
            raise ValueError("steps must stay on the tridiagonal support")

    @property
    def length(self) -> int:
        return len(self.vertices) - 1

    @property
    def loop_steps(self) -> int:
        v = self.vertices
        return sum(a == b for a, b in zip(v, v[1:]))

    def profile(self, n: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        loops = [0] * n
        edges = [0] * max(n - 1, 0)
        v = self.vertices
        for a, b in zip(v, v[1:]):
            if a == b:
                loops[a - 1] += 1
            else:
                edges[min(a, b) - 1] += 1
        return tuple(loops), tuple(edges)


def enumerate_closed_walks(n: int, k: int, start: int | None = None) -> Iterator[ClosedWalk]:
    """Every closed walk of length ``k`` from ``start`` (each vertex if None)."""
    _check_limits(n, k)
    starts = range(1, n + 1) if start is None else [start]
    for s in starts:
        if not 1 <= s <= n:
            raise ValueError(f"start vertex {s} outside 1..{n}")
        path = [s]

        def rec(depth):
            cur = path[-1]
            remaining = k - depth
            if remaining == 0:
                if cur == s:
                    yield ClosedWalk(tuple(path))
                return
            for nxt in (cur - 1, cur, cur + 1):
                # must be able to get back in the steps left
                if 1 <= nxt <= n and abs(nxt - s) <= remaining - 1:
                    path.append(nxt)
                    yield from rec(depth + 1)
                    path.pop()

        yield from rec(0)


@lru_cache(maxsize=256)
def walk_profiles(n: int, k: int, start: int) -> dict:
    """Number of closed walks from ``start`` for each usage profile.

    Keys are ``(loops, edges)`` tuples of per-vertex loop counts and per-edge
    crossing counts. Every edge count is even, since a closed walk on a tree
    crosses each edge as often in each direction.
    """
    _check_limits(n, k)
    if not 1 <= start <= n:
        raise ValueError(f"start vertex {start} outside 1..{n}")
    zero = (0,) * (2 * n - 1)
    layer: dict = {(start, zero): 1}
    for step in range(k):
        remaining = k - step - 1
        nxt_layer: dict = defaultdict(int)
        for (cur, counts), mult in layer.items():
            for nxt in (cur - 1, cur, cur + 1):
                if not 1 <= nxt <= n or abs(nxt - start) > remaining:
                    continue
                idx = cur - 1 if nxt == cur else n + min(cur, nxt) - 1
                c = list(counts)
                c[idx] += 1
                nxt_layer[(nxt, tuple(c))] += mult
        layer = nxt_layer
    out: dict = {}
    for (cur, counts), mult in layer.items():
        assert cur == start
        loops, edges = counts[:n], counts[n:]
        if any(e % 2 for e in edges):
            raise AssertionError(f"closed walk crossed an edge an odd number of times: {edges}")
        out[(loops, edges)] = mult
    return out


def _entry_laws(n: int, beta: Fraction, scaling: Scaling):
    scaling = Scaling(scaling)
    if scaling is Scaling.EDGE_NORMALIZED:
        raise ValueError("exact moments support raw and beta-scaled matrices")
    dofs = [beta * (n - 1 - j) for j in range(n - 1)]
    return Fraction(2), dofs


def profile_weight(loops, edges, n: int, beta, scaling: Scaling = Scaling.RAW) -> Fraction:
    """Expectation of the product of entries used by one walk profile."""
    beta = as_fraction(beta)
    var, dofs = _entry_laws(n, beta, scaling)
    if any(c % 2 for c in loops):
        return Fraction(0)
    w = Fraction(1)
    for c in loops:
        if c:
            w *= gaussian_even_moment(var, c // 2)
    for j, c in enumerate(edges):
        if c % 2:
            return Fraction(0)
        if c:
            w *= chi_even_moment(dofs[j], c // 2)
    if Scaling(scaling) is Scaling.BETA_SCALED:
        steps = sum(loops) + sum(edges)
        w /= beta ** (steps // 2)
    return w


@dataclass(frozen=True)
class ExactMoment:
    value: Fraction
    n: int
    k: int
    beta: Fraction
    scaling: Scaling

    def __float__(self):
        return float(self.value)


def _walk_sum(n, k, beta, scaling, start) -> Fraction:
    total = Fraction(0)
    for (loops, edges), mult in walk_profiles(n, k, start).items():
        total += mult * profile_weight(loops, edges, n, beta, scaling)
    return total


def exact_corner_moment(n: int, k: int, beta, scaling: Scaling = Scaling.RAW) -> ExactMoment:
    """Exact ``E (A^k)_{11}``."""
    _check_limits(n, k)
    beta = as_fraction(beta)
    return ExactMoment(_walk_sum(n, k, beta, scaling, 1), n, k, beta, Scaling(scaling))


def exact_trace_moment(n: int, k: int, beta, scaling: Scaling = Scaling.RAW) -> ExactMoment:
    """Exact ``E Tr A^k``, summed over every start vertex (not via the corner identity)."""
    _check_limits(n, k)
    beta = as_fraction(beta)
    total = sum((_walk_sum(n, k, beta, scaling, s) for s in range(1, n + 1)), Fraction(0))
    return ExactMoment(total, n, k, beta, Scaling(scaling))


def loop_profile_breakdown(n: int, k: int, beta, scaling: Scaling = Scaling.RAW) -> dict[int, Fraction]:
    """Split ``E (A^k)_{11}`` by the number of self-loop steps in the walk."""
    _check_limits(n, k)
    beta = as_fraction(beta)
    buckets: Counter = Counter()
    for (loops, edges), mult in walk_profiles(n, k, 1).items():
        buckets[sum(loops)] += mult * profile_weight(loops, edges, n, beta, scaling)
    return {c: Fraction(buckets[c]) for c in sorted(buckets)}


def oracle_table(n_values, k_values, beta_values, scaling: Scaling = Scaling.RAW) -> list[dict]:
    rows = []
    for n in n_values:
        for k in k_values:
            for b in beta_values:
                t = exact_trace_moment(n, k, b, scaling)
                c = exact_corner_moment(n, k, b, scaling)
                rows.append({
                    "n": n,
                    "k": k,
                    "beta": str(t.beta),
                    "scaling": t.scaling.value,
                    "trace_numerator": t.value.numerator,
                    "trace_denominator": t.value.denominator,
                    "trace_float": float(t.value),
                    "corner_numerator": c.value.numerator,
                    "corner_denominator": c.value.denominator,
                    "corner_float": float(c.value),
                })
    return rows
