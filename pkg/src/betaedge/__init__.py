"""Gaussian beta-ensembles through their tridiagonal model: sampling, edge statistics,
high trace moments and exact small-case moment oracles."""

from .ensemble import (
    EnsembleParams,
    Scaling,
    TridiagonalSymmetric,
    sample_chi,
    sample_dense_goe,
    sample_gaussian,
    sample_matrix,
)
from .rng import RngStream
from .spectral import (
    BudgetExceeded,
    Method,
    MomentEstimate,
    SpectralWindow,
    Units,
    corner_power,
    count_eigenvalues_below,
    count_in_window,
    eigenvalues_all,
    estimate_trace_moment,
    trace_power,
)

__version__ = "0.1.0"

__all__ = [
    "BudgetExceeded",
    "EnsembleParams",
    "Method",
    "MomentEstimate",
    "RngStream",
    "Scaling",
    "SpectralWindow",
    "TridiagonalSymmetric",
    "Units",
    "corner_power",
    "count_eigenvalues_below",
    "count_in_window",
    "eigenvalues_all",
    "estimate_trace_moment",
    "sample_chi",
    "sample_dense_goe",
    "sample_gaussian",
    "sample_matrix",
    "trace_power",
]
