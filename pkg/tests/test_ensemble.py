import math

import numpy as np
import pytest

from betaedge.ensemble import (
    EnsembleParams,
    Scaling,
    TridiagonalSymmetric,
    chi_variates,
    offdiag_dofs,
    sample_chi,
    sample_dense_goe,
    sample_gaussian,
    sample_leading_blocks,
    sample_matrix,
)
from betaedge.rng import RngStream

M = 10**6


@pytest.mark.parametrize("n,beta", [(0, 1.0), (3, 0.5), (3, float("nan"))])
def test_params_reject_invalid(n, beta):
    with pytest.raises(ValueError):
        EnsembleParams(n, beta)


def test_tridiagonal_length_check():
    with pytest.raises(ValueError):
        TridiagonalSymmetric(np.zeros(3), np.zeros(3))


def test_gaussian_moments(stream):
    x = np.array([sample_gaussian(stream, 2.0) for _ in range(M)])
    assert abs(x.mean()) < 4 * math.sqrt(2.0 / M)
    assert abs(x.var() / 2.0 - 1) < 0.02
    assert abs(np.mean(x**4) / 12.0 - 1) < 0.05


def test_chi_moments(stream):
    x = chi_variates(stream.gen, 5.0, size=M)
    assert abs(np.mean(x**2) / 5 - 1) < 0.02
    assert abs(np.mean(x**4) / 35 - 1) < 0.03
    assert sample_chi(stream, 5.0) >= 0


def test_chi_small_dof(stream):
    v = sample_chi(stream, 0.5)
    assert v >= 0 and math.isfinite(v)
    x = chi_variates(stream.gen, 0.5, size=200_000)
    assert abs(np.mean(x**2) / 0.5 - 1) < 0.03
    with pytest.raises(ValueError):
        sample_chi(stream, 0.0)


def test_single_entry_matrix(stream):
    m = sample_matrix(EnsembleParams(1, 3.0), stream)
    assert m.n == 1 and m.offdiag.size == 0


def test_offdiag_dofs_order():
    assert offdiag_dofs(3, 2.0).tolist() == [4.0, 2.0]


def test_edge_normalized_is_scaled_raw():
    raw = sample_matrix(EnsembleParams(2, 1.0, Scaling.RAW), RngStream(9))
    edge = sample_matrix(EnsembleParams(2, 1.0, Scaling.EDGE_NORMALIZED), RngStream(9))
    assert np.array_equal(edge.diag, raw.diag / (2 * math.sqrt(2)))
    assert np.array_equal(edge.offdiag, raw.offdiag / (2 * math.sqrt(2)))


def test_beta_scaled_is_scaled_raw():
    raw = sample_matrix(EnsembleParams(6, 4.0), RngStream(9))
    bs = sample_matrix(EnsembleParams(6, 4.0, Scaling.BETA_SCALED), RngStream(9))
    assert np.array_equal(bs.diag, raw.diag / 2.0)


def test_deterministic_and_nonnegative():
    p = EnsembleParams(50, 2.5, seed=123)
    a, b = sample_matrix(p, p.stream(4)), sample_matrix(p, p.stream(4))
    assert np.array_equal(a.diag, b.diag) and np.array_equal(a.offdiag, b.offdiag)
    assert np.all(a.offdiag >= 0)


def test_entry_second_moments():
    p = EnsembleParams(5, 1.5)
    diag, off = sample_leading_blocks(p, 5, 200_000, RngStream(4))
    dofs = offdiag_dofs(5, 1.5)
    d2, o2 = diag**2, off**2
    assert np.all(np.abs(d2.mean(0) - 2) < 5 * d2.std(0) / math.sqrt(d2.shape[0]))
    assert np.all(np.abs(o2.mean(0) - dofs) < 5 * o2.std(0) / math.sqrt(o2.shape[0]))


def test_dense_goe_trace_square(stream):
    t = np.array([np.trace(a @ a) for a in (sample_dense_goe(4, stream) for _ in range(100_000))])
    assert abs(t.mean() / 20 - 1) < 0.03
    g = sample_dense_goe(5, stream)
    assert np.array_equal(g, g.T)
    assert sample_dense_goe(1, stream).shape == (1, 1)
