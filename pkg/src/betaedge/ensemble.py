"""Tridiagonal model of the Gaussian beta-ensemble.

The matrix has independent N(0, 2) diagonal entries and chi-distributed
off-diagonal entries with degrees of freedom ``(n-1)beta, (n-2)beta, ..., beta``
read from the top-left corner down. Its eigenvalues follow the joint density
proportional to ``prod |l_i - l_j|^beta * exp(-beta/4 * sum l_i^2)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .rng import MASK64, RngStream


class Scaling(str, enum.Enum):
    RAW = "raw"
    BETA_SCALED = "beta"
    EDGE_NORMALIZED = "edge"


@dataclass(frozen=True)
class EnsembleParams:
    n: int
    beta: float
    scaling: Scaling = Scaling.RAW
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not math.isfinite(self.beta) or self.beta < 1:
            raise ValueError(f"beta must be >= 1, got {self.beta!r}")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "scaling", Scaling(self.scaling))

    @property
    def divisor(self) -> float:
        """Factor the raw entries are divided by under this scaling."""
        if self.scaling is Scaling.RAW:
            return 1.0
        if self.scaling is Scaling.BETA_SCALED:
            return math.sqrt(self.beta)
        return 2.0 * math.sqrt(self.n * self.beta)

    @property
    def edge_factor(self) -> float:
        """Multiply an eigenvalue of the scaled matrix by this to get lambda/(2 sqrt(n beta))."""
        return self.divisor / (2.0 * math.sqrt(self.n * self.beta))

    def stream(self, stream_id: int = 0) -> RngStream:
        return RngStream(self.seed, stream_id)


@dataclass
class TridiagonalSymmetric:
    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        self.diag = np.ascontiguousarray(self.diag, dtype=float)
        self.offdiag = np.ascontiguousarray(self.offdiag, dtype=float)
        if self.diag.ndim != 1 or self.offdiag.ndim != 1:
            raise ValueError("diag and offdiag must be 1-d")
        if self.diag.size < 1 or self.offdiag.size != self.diag.size - 1:
            raise ValueError(
                f"need len(offdiag) == len(diag) - 1, got {self.diag.size} and {self.offdiag.size}"
            )

    @property
    def n(self) -> int:
        return self.diag.size

    def to_dense(self) -> np.ndarray:
        m = np.diag(self.diag)
        if self.n > 1:
            m += np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)
        return m

    def norm_bound(self) -> float:
        """Gershgorin bound on the spectral radius."""
        b = np.abs(self.offdiag)
        radius = np.abs(self.diag).copy()
        radius[:-1] += b
        radius[1:] += b
        return float(radius.max())


def offdiag_dofs(n: int, beta: float) -> np.ndarray:
    """Chi degrees of freedom of offdiag[0..n-2]: (n-1)beta down to beta."""
    return beta * np.arange(n - 1, 0, -1, dtype=float)


def chi_variates(gen: np.random.Generator, dof, size=None) -> np.ndarray:
    # chi_k = sqrt(2 * Gamma(k/2, 1)); numpy's gamma handles shape < 1 by boosting.
    dof = np.asarray(dof, dtype=float)
    if np.any(dof <= 0):
        raise ValueError("chi degrees of freedom must be positive")
    return np.sqrt(2.0 * gen.standard_gamma(dof / 2.0, size=size))


def sample_gaussian(stream: RngStream, variance: float) -> float:
    if not variance > 0:
        raise ValueError("variance must be positive")
    return float(stream.gen.normal(0.0, math.sqrt(variance)))


def sample_chi(stream: RngStream, dof: float) -> float:
    """One chi variate; ``dof`` may be any positive real."""
    return float(chi_variates(stream.gen, dof))


def sample_matrix(params: EnsembleParams, stream: RngStream) -> TridiagonalSymmetric:
    """Draw one tridiagonal matrix: n diagonal normals, then n-1 chi variates."""
    gen = stream.gen
    n = params.n
    diag = gen.normal(0.0, math.sqrt(2.0), size=n)
    off = chi_variates(gen, offdiag_dofs(n, params.beta)) if n > 1 else np.empty(0)
    s = params.divisor
    if s != 1.0:
        diag = diag / s
        off = off / s
    return TridiagonalSymmetric(diag, off)


def sample_leading_blocks(params: EnsembleParams, rows: int, samples: int, stream: RngStream):
    """Draw the top-left ``rows x rows`` block of ``samples`` independent matrices.

    The block has the same law as the corresponding corner of a full draw, which
    is all a corner power of order ``<= 2*(rows-1)+1`` can see.

    Returns
    -------
    diag : ndarray, shape (samples, rows)
    offdiag : ndarray, shape (samples, rows - 1)
    """
    rows = min(int(rows), params.n)
    gen = stream.gen
    diag = gen.normal(0.0, math.sqrt(2.0), size=(samples, rows))
    dofs = offdiag_dofs(params.n, params.beta)[: rows - 1]
    off = chi_variates(gen, dofs, size=(samples, rows - 1)) if rows > 1 else np.empty((samples, 0))
    s = params.divisor
    if s != 1.0:
        diag /= s
        off /= s
    return diag, off


def sample_dense_goe(n: int, stream: RngStream) -> np.ndarray:
    """Dense symmetric matrix: N(0, 2) diagonal, N(0, 1) off-diagonal (beta = 1 reference)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = stream.gen
    diag = gen.normal(0.0, math.sqrt(2.0), size=n)
    upper = gen.normal(0.0, 1.0, size=n * (n - 1) // 2)
    m = np.diag(diag)
    iu = np.triu_indices(n, 1)
    m[iu] = upper
    m[(iu[1], iu[0])] = upper
    return m
