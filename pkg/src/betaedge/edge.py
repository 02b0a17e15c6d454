"""Rescaled eigenvalue measure at the upper spectral edge.

With ``lt = lambda / (2 sqrt(n beta))`` and a window scale ``r_n``, each
eigenvalue near the edge becomes an atom at ``theta = (1 - lt) / r_n`` with
mass ``1 / (n r_n^{3/2})``. In the large-n limit the atoms have density
``(2 sqrt 2 / pi) sqrt(theta)`` on ``theta > 0``, whose Laplace transform is
``sqrt(2 / (pi c^3))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .ensemble import EnsembleParams, TridiagonalSymmetric, sample_matrix
from .rng import RngStream, ordered_map
from .spectral import (
    TRACE_BUDGET,
    BudgetExceeded,
    count_eigenvalues_below,
    eigenvalues_all,
    eigenvalues_in_range,
    trace_power,
)

EDGE_CONST = 2.0 * math.sqrt(2.0) / math.pi


def edge_density(theta):
    theta = np.asarray(theta, dtype=float)
    return np.where(theta > 0, EDGE_CONST * np.sqrt(np.clip(theta, 0, None)), 0.0)


def edge_mass(a: float, b: float) -> float:
    """Limit mass of ``[a, b]``."""
    a, b = max(a, 0.0), max(b, 0.0)
    return EDGE_CONST * (2.0 / 3.0) * (b**1.5 - a**1.5)


def laplace_target(c: float) -> float:
    return math.sqrt(2.0 / (math.pi * c**3))


def truncation_bound(c: float, theta_max: float) -> float:
    """Limit-density mass of ``e^{-c theta}`` beyond ``theta_max``."""
    if theta_max <= 0:
        return laplace_target(c)
    return laplace_target(c) * float(special.gammaincc(1.5, c * theta_max))


@dataclass
class EdgeMeasure:
    r_n: float
    thetas: np.ndarray
    atom_weight: float
    n: int
    beta: float
    theta_window: tuple[float, float]
    above_window: int = 0  # eigenvalues with theta below the window

    @property
    def total_mass(self) -> float:
        return self.thetas.size * self.atom_weight

    @property
    def negative_count(self) -> int:
        return int(np.count_nonzero(self.thetas < 0))


def full_window(r_n: float) -> tuple[float, float]:
    """A theta window wide enough to cover every eigenvalue with overwhelming probability."""
    return (-3.0 / r_n, 3.0 / r_n)


def _check_r(r_n: float):
    if not 0 < r_n < 1:
        raise ValueError(f"r_n must lie in (0, 1), got {r_n}")


def measure_from_matrix(m: TridiagonalSymmetric, params: EnsembleParams, r_n: float,
                        theta_window: tuple[float, float], tol: float | None = None) -> EdgeMeasure:
    """Windowed extraction: Sturm counts and bisection inside the window only."""
    _check_r(r_n)
    tmin, tmax = map(float, theta_window)
    if not (math.isfinite(tmin) and math.isfinite(tmax)) or not tmin < tmax:
        raise ValueError(f"degenerate theta window {theta_window}")
    f = params.edge_factor
    lo = (1.0 - tmax * r_n) / f
    hi = (1.0 - tmin * r_n) / f
    lam = eigenvalues_in_range(m, lo, hi, tol=tol)
    above = m.n - count_eigenvalues_below(m, hi)
    thetas = (1.0 - lam * f) / r_n
    return EdgeMeasure(r_n, np.sort(thetas), 1.0 / (params.n * r_n**1.5), params.n, params.beta,
                       (tmin, tmax), int(above))


def measure_from_eigenvalues(lam: np.ndarray, params: EnsembleParams, r_n: float,
                             theta_window: tuple[float, float]) -> EdgeMeasure:
    """Same measure, filtered from a full eigenvalue list (reference path)."""
    _check_r(r_n)
    tmin, tmax = theta_window
    theta = (1.0 - np.asarray(lam) * params.edge_factor) / r_n
    keep = (theta > tmin) & (theta <= tmax)
    return EdgeMeasure(r_n, np.sort(theta[keep]), 1.0 / (params.n * r_n**1.5), params.n, params.beta,
                       (float(tmin), float(tmax)), int(np.count_nonzero(theta <= tmin)))


def build_edge_measure(params: EnsembleParams, r_n: float, theta_window: tuple[float, float],
                       stream: RngStream, tol: float | None = None) -> EdgeMeasure:
    m = sample_matrix(params, stream)
    return measure_from_matrix(m, params, r_n, theta_window, tol)


def sample_edge_measures(params: EnsembleParams, r_n: float, theta_window, draws: int,
                         stream: RngStream, threads: int | None = None) -> list[EdgeMeasure]:
    """``draws`` independent measures; draw ``i`` uses substream ``i``."""
    return ordered_map(lambda i: build_edge_measure(params, r_n, theta_window, stream.substream(i)),
                       list(range(draws)), threads)


@dataclass(frozen=True)
class LaplaceEstimate:
    c: float
    value: float
    stderr: float
    truncation_bound: float
    draws: int = 1
    target: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "target", laplace_target(self.c))

    @property
    def relative_error(self) -> float:
        return self.value / self.target - 1.0

    def as_dict(self) -> dict:
        return {"c": self.c, "estimate": self.value, "stderr": self.stderr, "target": self.target,
                "truncation_bound": self.truncation_bound, "draws": self.draws}


def laplace_value(m: EdgeMeasure, c: float) -> float:
    if not c > 0:
        raise ValueError("c must be positive")
    return m.atom_weight * float(np.exp(-c * m.thetas).sum())


def laplace_transform(m: EdgeMeasure, c: float) -> LaplaceEstimate:
    """Single-draw Laplace transform of the measure, with the window's tail bound."""
    return LaplaceEstimate(c, laplace_value(m, c), 0.0, truncation_bound(c, m.theta_window[1]))


def laplace_average(measures: list[EdgeMeasure], c: float) -> LaplaceEstimate:
    if not measures:
        raise ValueError("no measures")
    vals = np.array([laplace_value(m, c) for m in measures])
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else math.nan
    tb = max(truncation_bound(c, m.theta_window[1]) for m in measures)
    return LaplaceEstimate(c, float(vals.mean()), se, tb, vals.size)


@dataclass(frozen=True)
class HistogramBin:
    lo: float
    hi: float
    density: float
    stderr: float
    target: float

    @property
    def z(self) -> float:
        if self.stderr > 0:
            return (self.density - self.target) / self.stderr
        return 0.0 if math.isclose(self.density, self.target, abs_tol=1e-15) else math.inf


def density_histogram(measures: list[EdgeMeasure], bins, theta_range: tuple[float, float] | None = None,
                      min_measures: int = 10) -> list[HistogramBin]:
    """Per-draw atom histogram scaled by atom weight and bin width, averaged over draws.

    ``target`` is the bin average of the limit density, so bins below zero
    have target 0 and any finite-n leakage shows up there.
    """
    if not measures:
        raise ValueError("no measures")
    if len(measures) < min_measures:
        raise ValueError(f"need at least {min_measures} measures, got {len(measures)}")
    if np.ndim(bins) == 0:
        if theta_range is None:
            raise ValueError("integer bins need a theta_range")
        edges = np.linspace(theta_range[0], theta_range[1], int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=float)
    width = np.diff(edges)
    per = np.array([np.histogram(m.thetas, bins=edges)[0] * m.atom_weight / width for m in measures])
    mean = per.mean(axis=0)
    se = per.std(axis=0, ddof=1) / math.sqrt(len(measures))
    return [HistogramBin(float(a), float(b), float(mu), float(s), edge_mass(a, b) / (b - a))
            for a, b, mu, s in zip(edges[:-1], edges[1:], mean, se)]


@dataclass
class TraceLaplaceReport:
    n: int
    r_n: float
    c: float
    s_n: int
    even_trace: np.ndarray      # Tr A^{2s} / (n r^{3/2}), per draw
    odd_trace: np.ndarray       # Tr A^{2s+1} / (n r^{3/2})
    laplace_sum: np.ndarray     # sum over nonnegative eigenvalues of e^{-c theta}, normalized
    difference: np.ndarray      # (even + odd - 2 laplace), normalized
    route_agreement: float      # relative gap, eigenvalue route vs matrix powers, first draw

    @property
    def mean_abs_difference(self) -> float:
        return float(np.abs(self.difference).mean())

    @property
    def even_trace_variance(self) -> float:
        return float(self.even_trace.var(ddof=1))

    def summary(self) -> dict:
        return {
            "n": self.n, "r_n": self.r_n, "c": self.c, "s_n": self.s_n, "draws": int(self.even_trace.size),
            "mean_abs_difference": self.mean_abs_difference,
            "even_trace_mean": float(self.even_trace.mean()),
            "even_trace_variance": self.even_trace_variance,
            "odd_trace_mean": float(self.odd_trace.mean()),
            "laplace_mean": float(self.laplace_sum.mean()),
            "laplace_target": laplace_target(self.c),
            "route_agreement": self.route_agreement,
        }


def trace_laplace_consistency(params: EnsembleParams, r_n: float, c: float, samples: int,
                              stream: RngStream, check_routes: bool = True) -> TraceLaplaceReport:
    """Trace-power versus Laplace-sum diagnostics with ``s_n = ceil(c / (2 r_n))``."""
    _check_r(r_n)
    if params.n > 5000:
        raise BudgetExceeded("trace-power diagnostics need full diagonalization (n <= 5000)")
    s = math.ceil(c / (2.0 * r_n))
    if params.n * (2 * s + 1) > TRACE_BUDGET:
        raise BudgetExceeded("trace power exceeds budget")
    norm = params.n * r_n**1.5
    f = params.edge_factor
    ev, od, lap = [], [], []
    agreement = math.nan
    for i in range(samples):
        m = sample_matrix(params, stream.substream(i))
        lt = eigenvalues_all(m) * f
        te = float(np.sum(lt ** (2 * s)))
        to = float(np.sum(lt ** (2 * s + 1)))
        theta = (1.0 - lt[lt >= 0]) / r_n
        ev.append(te / norm)
        od.append(to / norm)
        lap.append(float(np.exp(-c * theta).sum()) / norm)
        if i == 0 and check_routes:
            me = TridiagonalSymmetric(m.diag * f, m.offdiag * f)
            scale_e = float(np.sum(np.abs(lt) ** (2 * s)))
            scale_o = float(np.sum(np.abs(lt) ** (2 * s + 1)))
            agreement = max(
                abs(trace_power(me, 2 * s, method="recursion") - te) / scale_e,
                abs(trace_power(me, 2 * s + 1, method="recursion") - to) / scale_o,
            )
    ev, od, lap = np.array(ev), np.array(od), np.array(lap)
    return TraceLaplaceReport(params.n, r_n, c, s, ev, od, lap, ev + od - 2 * lap, agreement)


appendix_consistency = trace_laplace_consistency
