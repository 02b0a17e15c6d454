"""Spectral primitives for symmetric tridiagonal matrices.

Eigenvalue counts come from the Sturm recurrence
``d_1 = a_1 - x``, ``d_i = a_i - x - b_{i-1}^2 / d_{i-1}``; the number of
negative pivots is the number of eigenvalues below ``x``. One pass is O(n)
and many shifts share a pass, which is what makes windowed extraction at
``n ~ 10^6`` affordable without full diagonalization.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numba as nb
import numpy as np
import scipy.linalg

from .ensemble import EnsembleParams, Scaling, TridiagonalSymmetric, sample_leading_blocks
from .rng import RngStream, RunningMoments, chunk_sizes, merge_all, ordered_map

EIGEN_CAP = 10_000
TRACE_BUDGET = 10**9
EPS = np.finfo(float).eps


class BudgetExceeded(RuntimeError):
    """Requested work exceeds a configured size cap."""


@nb.njit(cache=True, nogil=True)
def _sturm_counts(d, e2, xs, tau):
    n = d.shape[0]
    m = xs.shape[0]
    out = np.zeros(m, np.int64)
    q = np.empty(m)
    for s in range(m):
        v = d[0] - xs[s]
        if abs(v) < tau:
            v = tau if v >= 0.0 else -tau
        if v < 0.0:
            out[s] += 1
        q[s] = v
    for i in range(1, n):
        di = d[i]
        ei = e2[i - 1]
        for s in range(m):
            v = di - xs[s] - ei / q[s]
            if abs(v) < tau:
                v = tau if v >= 0.0 else -tau
            if v < 0.0:
                out[s] += 1
            q[s] = v
    return out


@nb.njit(cache=True, nogil=True)
def _trace_power_recursion(d, e, p):
    n = d.shape[0]
    h = p // 2
    total = 0.0
    for i in range(n):
        lo = max(0, i - h)
        hi = min(n, i + h + 1)
        w = hi - lo
        v = np.zeros(w)
        t = np.zeros(w)
        v[i - lo] = 1.0
        for _ in range(h):
            for k in range(w):
                g = lo + k
                acc = d[g] * v[k]
                if k > 0:
                    acc += e[g - 1] * v[k - 1]
                if k < w - 1:
                    acc += e[g] * v[k + 1]
                t[k] = acc
            for k in range(w):
                v[k] = t[k]
        if p % 2 == 0:
            for k in range(w):
                total += v[k] * v[k]
        else:
            for k in range(w):
                g = lo + k
                acc = d[g] * v[k]
                if k > 0:
                    acc += e[g - 1] * v[k - 1]
                if k < w - 1:
                    acc += e[g] * v[k + 1]
                total += v[k] * acc
    return total


def pivot_floor(m: TridiagonalSymmetric) -> float:
    return EPS * max(1.0, m.norm_bound())


def counts_below(m: TridiagonalSymmetric, xs) -> np.ndarray:
    """Number of eigenvalues strictly below each shift in ``xs``."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    return _sturm_counts(m.diag, m.offdiag * m.offdiag, xs, pivot_floor(m))


def count_eigenvalues_below(m: TridiagonalSymmetric, x: float) -> int:
    if x == -math.inf:
        return 0
    if x == math.inf:
        return m.n
    return int(counts_below(m, [x])[0])


class Units(str, enum.Enum):
    RAW = "raw"
    RESCALED = "rescaled"


@dataclass(frozen=True)
class SpectralWindow:
    lo: float
    hi: float
    units: Units = Units.RAW

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"window needs lo < hi, got [{self.lo}, {self.hi}]")
        object.__setattr__(self, "units", Units(self.units))

    def raw_bounds(self, params: EnsembleParams | None = None) -> tuple[float, float]:
        if self.units is Units.RAW:
            return self.lo, self.hi
        if params is None:
            raise ValueError("rescaled windows need ensemble params for the 2 sqrt(n beta) factor")
        f = params.edge_factor
        return self.lo / f, self.hi / f


def count_in_window(m: TridiagonalSymmetric, w: SpectralWindow, params: EnsembleParams | None = None) -> int:
    lo, hi = w.raw_bounds(params)
    return count_eigenvalues_below(m, hi) - count_eigenvalues_below(m, lo)


def eigenvalues_in_range(
    m: TridiagonalSymmetric,
    lo: float,
    hi: float,
    tol: float | None = None,
    batch: int = 16,
) -> np.ndarray:
    """Eigenvalues in ``[lo, hi)`` by batched Sturm multisection.

    Every pass evaluates one shift per live interval (or several when few
    intervals remain, up to ``batch`` shifts) in a single sweep over the
    matrix. Intervals holding no eigenvalue are dropped; an interval is
    finished once it is narrower than ``tol``. Repeated eigenvalues closer
    than ``tol`` come back with their multiplicity.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    bound = m.norm_bound() * (1 + 1e-12) + EPS
    lo, hi = max(lo, -bound - 1.0), min(hi, bound + 1.0)
    if not lo < hi:
        return np.empty(0)
    if tol is None:
        tol = 1e-10 * max(1.0, m.norm_bound())
    e2 = m.offdiag * m.offdiag
    tau = pivot_floor(m)
    c = _sturm_counts(m.diag, e2, np.array([lo, hi]), tau)
    A, B = np.array([lo]), np.array([hi])
    CA, CB = c[:1], c[1:]
    done_mid, done_mult = [], []
    while A.size:
        k = max(1, batch // A.size)
        frac = np.arange(1, k + 1) / (k + 1)
        pts = A[:, None] + (B - A)[:, None] * frac[None, :]
        cp = _sturm_counts(m.diag, e2, pts.ravel(), tau).reshape(pts.shape)
        ea = np.concatenate([A[:, None], pts], 1).ravel()
        eb = np.concatenate([pts, B[:, None]], 1).ravel()
        ca = np.concatenate([CA[:, None], cp], 1).ravel()
        cb = np.concatenate([cp, CB[:, None]], 1).ravel()
        keep = cb > ca
        ea, eb, ca, cb = ea[keep], eb[keep], ca[keep], cb[keep]
        fin = (eb - ea) <= tol
        done_mid.append(0.5 * (ea[fin] + eb[fin]))
        done_mult.append(cb[fin] - ca[fin])
        live = ~fin
        A, B, CA, CB = ea[live], eb[live], ca[live], cb[live]
    out = np.repeat(np.concatenate(done_mid), np.concatenate(done_mult))
    return np.sort(out)


def eigenvalues_all(m: TridiagonalSymmetric, method: str = "lapack", cap: int = EIGEN_CAP) -> np.ndarray:
    """All eigenvalues, ascending.

    ``method="lapack"`` uses the implicit-shift tridiagonal solver from LAPACK;
    ``method="bisection"`` refines Sturm counts to ``1e-12 * max(1, ||m||)``.
    """
    if m.n > cap:
        raise BudgetExceeded(f"n={m.n} exceeds the eigensolver cap {cap}")
    if m.n == 1:
        return m.diag.copy()
    if method == "lapack":
        return scipy.linalg.eigvalsh_tridiagonal(m.diag, m.offdiag, lapack_driver="sterf")
    if method == "bisection":
        b = m.norm_bound()
        return eigenvalues_in_range(m, -b - 1.0, b + 1.0, tol=1e-12 * max(1.0, b), batch=64)
    raise ValueError(f"unknown method {method!r}")


def corner_power_batch(diag: np.ndarray, off: np.ndarray, p: int) -> np.ndarray:
    """``(A^p)_{11}`` for a stack of tridiagonal matrices (rows of ``diag``/``off``).

    Uses ``v = A^h e_1`` with ``h = p // 2``; ``v`` lives on the first ``j + 1``
    coordinates after ``j`` products, and the result is ``v.v`` (even p) or
    ``v.(A v)`` (odd p). Only the leading ``h + 1`` rows are touched.
    """
    if p < 0:
        raise ValueError("p must be >= 0")
    diag = np.atleast_2d(diag)
    off = np.atleast_2d(off)
    S, n = diag.shape
    if p == 0:
        return np.ones(S)
    h = p // 2
    L = min(h + 1, n)
    d = diag[:, :L]
    e = off[:, : L - 1]
    v = np.zeros((S, L))
    v[:, 0] = 1.0
    for j in range(h):
        t = min(j + 2, L)
        w = d[:, :t] * v[:, :t]
        if t > 1:
            w[:, 1:] += e[:, : t - 1] * v[:, : t - 1]
            w[:, :-1] += e[:, : t - 1] * v[:, 1:t]
        v[:, :t] = w
    if p % 2 == 0:
        return np.einsum("ij,ij->i", v, v)
    w = d * v
    if L > 1:
        w[:, 1:] += e * v[:, :-1]
        w[:, :-1] += e * v[:, 1:]
    return np.einsum("ij,ij->i", v, w)


def corner_power(m: TridiagonalSymmetric, p: int) -> float:
    return float(corner_power_batch(m.diag[None, :], m.offdiag[None, :], p)[0])


def trace_power(m: TridiagonalSymmetric, p: int, method: str = "auto",
                cap: int = EIGEN_CAP, budget: int = TRACE_BUDGET) -> float:
    """``Tr(A^p)`` for one realization.

    ``"eigen"`` sums ``lambda_i^p``; ``"recursion"`` adds up the ``n`` diagonal
    entries of ``A^p`` by banded matrix-vector products. ``"auto"`` picks the
    eigenvalue route whenever ``n <= cap``.
    """
    if p < 0:
        raise ValueError("p must be >= 0")
    if m.n * max(p, 1) > budget:
        raise BudgetExceeded(f"n*p = {m.n * p} exceeds the trace budget {budget}")
    if p == 0:
        return float(m.n)
    if method == "auto":
        method = "eigen" if m.n <= cap else "recursion"
    if method == "eigen":
        lam = eigenvalues_all(m, cap=cap)
        return float(np.sum(lam**p))
    if method == "recursion":
        return float(_trace_power_recursion(m.diag, m.offdiag, p))
    raise ValueError(f"unknown method {method!r}")


def _dense_batch(diag: np.ndarray, off: np.ndarray) -> np.ndarray:
    S, n = diag.shape
    M = np.zeros((S, n, n))
    i = np.arange(n)
    M[:, i, i] = diag
    if n > 1:
        j = np.arange(n - 1)
        M[:, j, j + 1] = off
        M[:, j + 1, j] = off
    return M


def trace_power_batch(diag: np.ndarray, off: np.ndarray, p: int) -> np.ndarray:
    """``Tr(A^p)`` for a stack of small matrices via dense batched products."""
    S, n = diag.shape
    if p == 0:
        return np.full(S, float(n))
    M = _dense_batch(diag, off)
    h = p // 2
    P = np.broadcast_to(np.eye(n), M.shape).copy()
    base, k = M, h
    while k:
        if k & 1:
            P = P @ base
        k >>= 1
        if k:
            base = base @ base
    if p % 2 == 0:
        return np.einsum("sij,sij->s", P, P)
    return np.einsum("sij,sij->s", P, M @ P)


class Method(str, enum.Enum):
    CORNER = "corner"  # n * (A^p)_{11}
    FULL = "full"      # Tr(A^p)


@dataclass(frozen=True)
class MomentEstimate:
    power: int
    mean: float
    stderr: float
    samples: int
    scaling: Scaling
    method: Method = Method.CORNER

    def z_score(self, target: float) -> float:
        if self.stderr == 0:
            return 0.0 if self.mean == target else math.copysign(math.inf, self.mean - target)
        return (self.mean - target) / self.stderr


def asymptotic_trace_moment(n: int, p: int) -> float:
    """Leading-order ``E Tr A^p`` for the edge-normalized matrix."""
    if p % 2:
        return 0.0
    return 2.0**1.5 * n * (math.pi * p**3) ** -0.5


def _default_chunk(rows: int, method: Method) -> int:
    per = rows * rows if method is Method.FULL else rows
    return int(min(1 << 16, max(256, 4_000_000 // max(per, 1))))


def _chunk_values(params: EnsembleParams, p: int, method: Method, size: int, stream: RngStream):
    n = params.n
    if method is Method.CORNER:
        rows = min(n, p // 2 + 1)
        diag, off = sample_leading_blocks(params, rows, size, stream)
        return n * corner_power_batch(diag, off, p)
    diag, off = sample_leading_blocks(params, n, size, stream)
    if n <= 32:
        return trace_power_batch(diag, off, p)
    return np.array([trace_power(TridiagonalSymmetric(d, o), p) for d, o in zip(diag, off)])


def estimate_trace_moment(
    params: EnsembleParams,
    p: int,
    samples: int,
    method: Method | str = Method.CORNER,
    threads: int | None = None,
    chunk: int | None = None,
    stream_id: int = 0,
) -> MomentEstimate:
    """Monte Carlo estimate of ``E Tr A^p``.

    ``CORNER`` averages ``n (A^p)_{11}``, which has the same expectation as the
    trace but only needs the leading ``p/2 + 1`` rows of each draw. ``FULL``
    averages the trace itself. Samples are cut into fixed chunks, chunk ``i``
    drawing from substream ``i``, and merged in order, so the result does not
    depend on ``threads``.
    """
    method = Method(method)
    if samples < 2:
        raise ValueError("need at least 2 samples")
    if p < 1:
        raise ValueError("p must be positive")
    rows = min(params.n, p // 2 + 1) if method is Method.CORNER else params.n
    chunk = chunk or _default_chunk(rows, method)
    root = params.stream(stream_id)
    sizes = chunk_sizes(samples, chunk)

    def run(i):
        vals = _chunk_values(params, p, method, sizes[i], root.substream(i))
        return RunningMoments.from_values(vals)

    acc = merge_all(ordered_map(run, list(range(len(sizes))), threads))
    return MomentEstimate(p, acc.mean, acc.stderr, acc.count, params.scaling, method)
