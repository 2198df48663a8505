import logging
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from weakspde import covariance as cov
from weakspde.covariance import AdmissibilityError, CovarianceError
from weakspde.spectral import build_dirichlet_laplacian_1d


def _random_psd(rng, K, rank=None):
    B = rng.standard_normal((K, rank or K))
    return B @ B.T


def test_white():
    Q = cov.white(4)
    np.testing.assert_array_equal(Q.matrix, np.eye(4))
    assert np.trace(Q.matrix) == 4
    assert cov.regularity_estimate(Q, 0.0) == pytest.approx(1.0, abs=1e-12)


def test_diagonal_power():
    np.testing.assert_array_equal(cov.diagonal_power(5, 0.0).matrix, np.eye(5))
    assert cov.diagonal_power(4, 1.0).matrix[1, 1] == pytest.approx((2 * math.pi) ** -2)
    for b in (0.25, 0.5, 1.0):
        assert cov.regularity_estimate(cov.diagonal_power(32, b), b) == pytest.approx(1.0, rel=1e-9)
    with pytest.raises(ValueError):
        cov.diagonal_power(4, -0.1)


def test_regularity_growth_flags_unbounded():
    a, b, unbounded = cov.regularity_growth(cov.diagonal_power(64, 1.0), 1.1)
    assert unbounded and b / a == pytest.approx(4.0**0.1, rel=1e-6)
    assert not cov.regularity_growth(cov.diagonal_power(64, 1.0), 1.0)[2]


def test_interpolation_holds(caplog):
    Q = cov.from_kernel(16, [1.0, 0.5, 0.25, 0.125])
    with caplog.at_level(logging.WARNING):
        est = cov.regularity_estimate(Q, 0.3)
    assert not caplog.records
    for ell, val in cov.interpolation_norms(Q, 0.3).items():
        assert val <= est**ell * (1 + 1e-8)


def _kernel_entry_oracle(i, j, c):
    def cfun(r):
        return c[0] / 2 + sum(ck * math.cos(k * math.pi * r) for k, ck in enumerate(c) if k)

    f = lambda y, x: 2 * math.sin(i * math.pi * x) * cfun(x - y) * math.sin(j * math.pi * y)
    val, _ = integrate.dblquad(f, 0, 1, 0, 1, epsabs=1e-12, epsrel=1e-12)
    return val


def test_kernel_matches_double_integral():
    c = [0.7, 1.0, 0.4, 0.2]
    Q = cov.from_kernel(4, c).matrix
    for i in range(1, 5):
        for j in range(i, 5):
            assert Q[i - 1, j - 1] == pytest.approx(_kernel_entry_oracle(i, j, c), abs=1e-10)
    assert np.any(np.abs(Q - np.diag(np.diag(Q))) > 1e-3)  # does not commute with A


def test_kernel_dirac_limit_is_white():
    Q = cov.from_kernel(64, np.ones(2**15))
    assert np.abs(Q.matrix - np.eye(64)).max() <= 1e-8


def test_single_cosine_kernel_rank_deficient():
    Q = cov.from_kernel(16, [0.0, 1.0])
    w = np.linalg.eigvalsh(Q.matrix)
    assert w[0] >= -1e-10 * w[-1]
    assert np.sum(w > 1e-10 * w[-1]) == 2  # cos(pi(x-y)) has rank 2
    np.testing.assert_array_equal(Q.matrix, Q.matrix.T)


def test_kernel_coefficients_file(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("# correlation\n1.0\n\n0.5  # first mode\n0.25\n", encoding="utf-8")
    np.testing.assert_array_equal(cov.load_kernel_coefficients(p), [1.0, 0.5, 0.25])
    (tmp_path / "e.txt").write_text("# nothing\n", encoding="utf-8")
    with pytest.raises(ValueError):
        cov.load_kernel_coefficients(tmp_path / "e.txt")


def test_invalid_matrices_rejected():
    with pytest.raises(CovarianceError, match="symmetric"):
        cov.custom(2, [[1.0, 0.5], [0.4, 1.0]])
    with pytest.raises(CovarianceError, match="eigenvalue"):
        cov.custom(2, [[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(CovarianceError):
        cov.custom(3, np.eye(2))
    with pytest.raises(CovarianceError, match="eigenvalue"):
        cov.from_kernel(8, [0.0, -1.0])


@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_sqrt_property(K, seed):
    rng = np.random.default_rng(seed)
    Q = cov.custom(K, _random_psd(rng, K, max(1, K // 2)))
    B = Q.sqrt
    np.testing.assert_allclose(B, B.T, atol=1e-14 * max(1, np.abs(B).max()))
    assert np.linalg.norm(B @ B - Q.matrix, 2) <= 1e-10 * np.linalg.norm(Q.matrix, 2)


@given(st.integers(0, 2**32 - 1))
def test_trace_and_hs_inequalities(seed):
    rng = np.random.default_rng(seed)
    K = 16
    L = _random_psd(rng, K)
    M = rng.standard_normal((K, K))
    M = M + M.T
    N = rng.standard_normal((K, K))
    assert np.trace(L @ M) == pytest.approx(np.trace(M @ L), rel=1e-10, abs=1e-10)
    assert np.trace(L @ M) <= np.trace(L) * np.linalg.norm(M, 2) * (1 + 1e-12)
    Mg = rng.standard_normal((K, K))
    hs = np.linalg.norm(N @ L @ Mg, "fro")
    assert hs <= np.linalg.norm(N, 2) * np.linalg.norm(L, "fro") * np.linalg.norm(Mg, 2) * (1 + 1e-12)


def test_rebuild_keeps_family():
    for Q in (cov.white(8), cov.diagonal_power(8, 0.5), cov.from_kernel(8, [1.0, 0.3]), cov.zero(8)):
        R = Q.rebuild(16)
        assert R.kind == Q.kind and R.K == 16
        np.testing.assert_allclose(R.matrix[:8, :8], Q.matrix, atol=1e-15)
    with pytest.raises(ValueError):
        cov.custom(2, np.eye(2)).rebuild(4)


def test_admissible_gamma_examples():
    assert cov.admissible_gamma(0.51, 0.0).gamma_sup == pytest.approx(0.49)
    assert cov.admissible_gamma(0.51, 0.51).gamma_sup == 1.0
    with pytest.raises(AdmissibilityError) as exc:
        cov.admissible_gamma(1.0, 0.0)
    assert exc.value.condition == "order"


def test_admissible_gamma_diagnostics():
    model = build_dirichlet_laplacian_1d(16)
    with pytest.raises(AdmissibilityError) as exc:
        cov.admissible_gamma(0.5, 0.0, model)
    assert exc.value.condition == "trace"
    with pytest.raises(AdmissibilityError) as exc:
        cov.admissible_gamma(0.6, 0.7)
    assert exc.value.condition == "Q"
    with pytest.raises(AdmissibilityError) as exc:
        cov.admissible_gamma(0.6, -0.1)
    assert exc.value.condition == "negative-beta"


@given(st.floats(0.51, 2.0), st.floats(0.0, 2.0))
def test_gamma_sup_formula(alpha, beta):
    try:
        idx = cov.admissible_gamma(alpha, beta)
    except AdmissibilityError:
        assert beta > alpha or 1 - alpha + beta <= 0
        return
    assert idx.gamma_sup == min(1 - alpha + beta, 1.0)
    assert 0 < idx.gamma_sup <= 1
    assert not idx.admits(idx.gamma_sup) and idx.admits(idx.gamma_sup / 2)
