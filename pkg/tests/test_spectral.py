import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from betaedge.ensemble import EnsembleParams, Scaling, TridiagonalSymmetric, sample_matrix
from betaedge.rng import RngStream
from betaedge.spectral import (
    BudgetExceeded,
    Method,
    SpectralWindow,
    Units,
    asymptotic_trace_moment,
    corner_power,
    count_eigenvalues_below,
    count_in_window,
    eigenvalues_all,
    eigenvalues_in_range,
    estimate_trace_moment,
    trace_power,
)


def random_matrix(n, seed, beta=2.0):
    return sample_matrix(EnsembleParams(n, beta), RngStream(seed))


def test_count_small_cases():
    assert count_eigenvalues_below(TridiagonalSymmetric([0.0], []), 1.0) == 1
    assert count_eigenvalues_below(TridiagonalSymmetric([0.0, 0.0], [1.0]), 0.0) == 1


def test_count_matches_dense():
    m = random_matrix(50, 1)
    lam = np.linalg.eigvalsh(m.to_dense())
    for x in np.linspace(lam[0] - 1, lam[-1] + 1, 41):
        assert count_eigenvalues_below(m, x) == np.count_nonzero(lam < x)


def test_count_limits_and_monotone():
    m = random_matrix(80, 2)
    assert count_eigenvalues_below(m, -math.inf) == 0
    assert count_eigenvalues_below(m, math.inf) == 80
    counts = [count_eigenvalues_below(m, x) for x in np.linspace(-40, 40, 200)]
    assert all(a <= b for a, b in zip(counts, counts[1:]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 200), st.integers(0, 2**32), st.floats(-3, 3))
def test_count_agrees_with_eigenvalues(n, seed, u):
    m = random_matrix(n, seed)
    lam = eigenvalues_all(m)
    x = u * math.sqrt(n * 2.0) * 2
    if np.min(np.abs(lam - x)) > 1e-8:
        assert count_eigenvalues_below(m, x) == np.count_nonzero(lam < x)


def test_window_counts():
    p = EnsembleParams(1000, 2.0, seed=5)
    m = sample_matrix(p, p.stream())
    assert count_in_window(m, SpectralWindow(-math.inf, math.inf)) == 1000
    hi = m.norm_bound()
    assert count_in_window(m, SpectralWindow(hi + 1.0, hi + 1.0 + 1e-9)) == 0
    assert count_in_window(m, SpectralWindow(-1.0, 1.0, Units.RESCALED), p) >= 990
    with pytest.raises(ValueError):
        SpectralWindow(1.0, 0.0)


def test_eigenvalues_small():
    m = TridiagonalSymmetric([0.0, 0.0], [1.0])
    assert np.allclose(eigenvalues_all(m), [-1, 1])
    assert np.allclose(eigenvalues_all(m, method="bisection"), [-1, 1])
    assert eigenvalues_all(TridiagonalSymmetric([2.5], [])).tolist() == [2.5]


@pytest.mark.parametrize("method", ["lapack", "bisection"])
def test_eigenvalues_match_dense(method):
    m = random_matrix(100, 3)
    ref = np.linalg.eigvalsh(m.to_dense())
    assert np.max(np.abs(eigenvalues_all(m, method=method) - ref)) < 1e-8


def test_eigenvalue_cap():
    with pytest.raises(BudgetExceeded):
        eigenvalues_all(random_matrix(20, 1), cap=10)


def test_eigenvalues_in_range_keep_multiplicity():
    m = TridiagonalSymmetric([1.0, 1.0, 5.0], [0.0, 0.0])
    assert np.allclose(eigenvalues_in_range(m, 0.0, 2.0), [1.0, 1.0])
    r = random_matrix(300, 4)
    lam = np.linalg.eigvalsh(r.to_dense())
    got = eigenvalues_in_range(r, 10.0, 30.0)
    want = lam[(lam >= 10) & (lam < 30)]
    assert got.size == want.size and np.allclose(got, want, atol=1e-8)


def test_corner_power_cases():
    m = TridiagonalSymmetric([1.5, -0.3, 2.0], [0.7, 1.1])
    assert corner_power(m, 0) == 1.0
    assert corner_power(m, 1) == 1.5
    dense = np.linalg.matrix_power(m.to_dense(), 4)[0, 0]
    assert abs(corner_power(m, 4) - dense) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 50), st.integers(1, 64), st.integers(0, 2**32))
def test_corner_power_matches_dense(n, p, seed):
    m = sample_matrix(EnsembleParams(n, 1.0, Scaling.EDGE_NORMALIZED), RngStream(seed))
    dense = np.linalg.matrix_power(m.to_dense(), p)[0, 0]
    assert abs(corner_power(m, p) - dense) <= 1e-10 * max(1.0, abs(dense), np.linalg.norm(m.to_dense(), 2) ** p)


def test_trace_power_cases():
    m = random_matrix(4, 8)
    assert math.isclose(trace_power(m, 1), m.diag.sum(), abs_tol=1e-10)
    want = np.sum(m.diag**2) + 2 * np.sum(m.offdiag**2)
    for method in ("eigen", "recursion"):
        assert math.isclose(trace_power(m, 2, method=method), want, rel_tol=1e-12)
    m6 = random_matrix(6, 9)
    dense = np.trace(np.linalg.matrix_power(m6.to_dense(), 7))
    scale = np.sum(np.abs(np.linalg.eigvalsh(m6.to_dense())) ** 7)
    for method in ("eigen", "recursion"):
        assert abs(trace_power(m6, 7, method=method) - dense) < 1e-10 * scale


def test_trace_power_budget():
    with pytest.raises(BudgetExceeded):
        trace_power(random_matrix(100, 1), 50, method="recursion", budget=1000)


def test_odd_moment_vanishes():
    est = estimate_trace_moment(EnsembleParams(50, 2.0, Scaling.EDGE_NORMALIZED, seed=3), 5, 10_000)
    assert abs(est.z_score(0.0)) < 4


def test_small_exact_moment():
    est = estimate_trace_moment(EnsembleParams(2, 1.0, seed=4), 2, 20_000, Method.FULL)
    assert abs(est.z_score(6.0)) < 4
    est = estimate_trace_moment(EnsembleParams(2, 1.0, seed=4), 2, 20_000, Method.CORNER)
    assert abs(est.z_score(6.0)) < 4


@pytest.mark.parametrize("n,p", [(8, 6), (64, 16), (30, 11)])
def test_corner_and_full_agree(n, p):
    params = EnsembleParams(n, 1.5, Scaling.EDGE_NORMALIZED, seed=n)
    a = estimate_trace_moment(params, p, 4000, Method.CORNER, stream_id=1)
    b = estimate_trace_moment(params, p, 4000, Method.FULL, stream_id=2)
    assert abs(a.mean - b.mean) < 5 * math.hypot(a.stderr, b.stderr)


def test_estimate_independent_of_threads():
    params = EnsembleParams(200, 2.0, Scaling.EDGE_NORMALIZED, seed=1)
    a = estimate_trace_moment(params, 20, 3000, threads=1, chunk=500)
    b = estimate_trace_moment(params, 20, 3000, threads=3, chunk=500)
    assert a == b


def test_asymptotic_formula():
    assert asymptotic_trace_moment(100, 3) == 0.0
    assert math.isclose(asymptotic_trace_moment(10, 2), 2**1.5 * 10 / math.sqrt(8 * math.pi))
