import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import ortho_group

from weakspde import covariance as cov
from weakspde.fem1d import build_p1_space, build_spectral_space
from weakspde.laws import (
    Functional,
    GaussianState,
    continuous_law,
    discrete_law,
    discrete_law_bruteforce,
    expect_functional,
    kolmogorov_value,
    kolmogorov_values,
    semidiscrete_law,
    strong_error_sq,
    transformed_law,
    weak_error,
)
from weakspde.spectral import SpectralModel, ThetaScheme, build_dirichlet_laplacian_1d

PI2 = math.pi**2


def _spectral(K):
    m = build_dirichlet_laplacian_1d(K)
    return m, build_spectral_space(K, m)


def _slope(N, e):
    return -np.polyfit(np.log2(N), np.log2(e), 1)[0]


def test_continuous_law_scalar():
    m = build_dirichlet_laplacian_1d(1)
    law = continuous_law(m, cov.white(m), None, 1.0)
    assert law.cov[0, 0] == pytest.approx((1 - math.exp(-2 * PI2)) / (2 * PI2), rel=1e-15)
    det = continuous_law(m, cov.zero(m), [2.0], 0.3)
    assert det.mean[0] == pytest.approx(2 * math.exp(-0.3 * PI2)) and not np.any(det.cov)


def test_continuous_law_simpson_oracle():
    m = build_dirichlet_laplacian_1d(4)
    Q = cov.from_kernel(m, [1.0, 0.8, 0.5, 0.3, 0.1])
    T = 0.7
    s = np.linspace(0, T, 100_001)
    E = np.exp(-(T - s)[:, None] * m.eigenvalues[None, :])  # (points, K)
    integrand = E[:, :, None] * Q.matrix[None] * E[:, None, :]
    oracle = integrate.simpson(integrand, x=s, axis=0)
    np.testing.assert_allclose(continuous_law(m, Q, None, T).cov, oracle, atol=1e-8, rtol=0)


def test_discrete_law_single_step():
    m = build_dirichlet_laplacian_1d(6)
    sp = build_p1_space(5, m)
    Q = cov.from_kernel(m, [1.0, 0.5])
    sc = ThetaScheme(0.7, 0.5, 1)
    G = sc.resolvent(sp.eigenvalues)
    Qh = sp.gamma @ Q.matrix @ sp.gamma.T
    np.testing.assert_allclose(discrete_law(sp, Q, sc, None).cov, sc.dt * np.outer(G, G) * Qh, rtol=1e-14)


@pytest.mark.parametrize("seed", range(20))
def test_discrete_law_bruteforce(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(2, 12))
    N = int(rng.integers(1, 80)) if seed else 64
    K = K if seed else 8
    theta = float(rng.uniform(0.51, 1.0))
    m = build_dirichlet_laplacian_1d(K)
    sp = build_spectral_space(K, m) if seed % 2 else build_p1_space(K + 1, m)
    B = rng.standard_normal((K, K))
    Q = cov.custom(m, B @ B.T / K)
    sc = ThetaScheme(theta, float(rng.uniform(0.2, 2.0)), N)
    x = rng.standard_normal(K)
    a, b = discrete_law(sp, Q, sc, x), discrete_law_bruteforce(sp, Q, sc, x)
    scale = np.abs(b.cov).max()
    assert np.abs(a.cov - b.cov).max() <= 1e-10 * scale
    np.testing.assert_allclose(a.mean, b.mean, rtol=1e-10, atol=1e-14)


def test_removable_singularity_branch():
    # F_i F_j = 1 only for lambda = 0; emulate with a tiny eigenvalue via theta = 1, tiny dt
    m = build_dirichlet_laplacian_1d(3)
    sp = build_spectral_space(3, m)
    sc = ThetaScheme(1.0, 1e-12, 5)
    law = discrete_law(sp, cov.white(m), sc, None)
    brute = discrete_law_bruteforce(sp, cov.white(m), sc, None)
    np.testing.assert_allclose(law.cov, brute.cov, rtol=1e-10)


@given(st.floats(0.51, 1.0), st.integers(1, 300), st.floats(0.05, 3.0))
def test_discrete_law_psd(theta, N, T):
    m = build_dirichlet_laplacian_1d(8)
    sp = build_p1_space(9, m)
    law = discrete_law(sp, cov.from_kernel(m, [1.0, 0.5, 0.2]), ThetaScheme(theta, T, N), None)
    w = np.linalg.eigvalsh(law.cov)
    assert w[0] >= -1e-10 * w[-1]


def test_unstable_theta_uses_loop():
    m = build_dirichlet_laplacian_1d(8)
    sp = build_spectral_space(8, m)
    sc = ThetaScheme(0.2, 1.0, 10, allow_unstable=True)
    a = discrete_law(sp, cov.white(m), sc, None)
    b = discrete_law_bruteforce(sp, cov.white(m), sc, None)
    np.testing.assert_allclose(a.cov, b.cov, rtol=1e-10)


@pytest.mark.parametrize("theta", [0.6, 0.75, 1.0])
def test_stationary_variance_stiff_mode(theta):
    # for lambda dt >> 1 the N -> infinity variance is 1/(lambda (2 + (2 theta - 1) lambda dt))
    lam = 1e4
    model = SpectralModel([lam])
    sp = build_spectral_space(1, model)
    var = discrete_law(sp, cov.white(model), ThetaScheme(theta, 50.0, 50), None).cov[0, 0]
    z = lam * 1.0
    assert var == pytest.approx(1 / (lam * (2 + (2 * theta - 1) * z)), rel=1e-2)
    # and the resolved limit is the continuous variance 1/(2 lambda)
    fine = discrete_law(sp, cov.white(model), ThetaScheme(theta, 1.0, 10**7), None).cov[0, 0]
    assert fine == pytest.approx(1 / (2 * lam), rel=1e-2)


def test_discrete_converges_to_continuous():
    m, sp = _spectral(32)
    Q = cov.white(m)
    d = discrete_law(sp, Q, ThetaScheme(1.0, 1.0, 2**12), None)
    c = continuous_law(m, Q, None, 1.0)
    assert np.abs(d.cov - c.cov).max() <= 1e-4


def test_semidiscrete_spectral_equals_continuous():
    m, sp = _spectral(8)
    Q = cov.from_kernel(m, [1.0, 0.4])
    np.testing.assert_allclose(semidiscrete_law(sp, Q, [1.0], 1.0).cov, continuous_law(m, Q, [1.0], 1.0).cov)


def test_expect_functional_examples():
    st0 = GaussianState(np.zeros(3), np.zeros((3, 3)))
    assert expect_functional(st0, Functional.cosine([1.0], phase=0.3)) == pytest.approx(math.cos(0.3))
    m = build_dirichlet_laplacian_1d(1)
    law = continuous_law(m, cov.white(m), None, 1.0)
    v = (1 - math.exp(-2 * PI2)) / (2 * PI2)
    assert expect_functional(law, Functional.cosine([1.0])) == pytest.approx(math.exp(-0.5 * v), rel=1e-15)
    state = GaussianState(np.array([0.3, -1.0]), np.array([[0.5, 0.1], [0.1, 0.2]]))
    g = np.array([1.0, 2.0])
    assert expect_functional(state, Functional.linear(g)) == pytest.approx(-1.7)
    assert expect_functional(state, Functional.quadratic(g)) == pytest.approx(1.7**2 + 0.5 + 0.4 + 0.8)


def test_gaussian_functional_quadrature():
    mu, var, s = 0.4, 0.3, 1.7
    state = GaussianState(np.array([mu]), np.array([[var]]))
    f = lambda y: math.exp(-s * y * y) * math.exp(-((y - mu) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var)
    oracle, _ = integrate.quad(f, -np.inf, np.inf, epsabs=1e-14)
    assert expect_functional(state, Functional.gaussian(s)) == pytest.approx(oracle, rel=1e-10)


def test_functional_flags():
    assert Functional.cosine([1.0]).bounded and Functional.gaussian().bounded
    assert not Functional.linear([1.0]).bounded and not Functional.quadratic([1.0]).bounded
    with pytest.raises(ValueError):
        Functional("cubic", [1.0])
    with pytest.raises(ValueError):
        Functional.cosine([np.inf])


@pytest.mark.parametrize("seed", range(5))
def test_factor_rotation_invariance(seed):
    rng = np.random.default_rng(seed)
    K = 8
    m = build_dirichlet_laplacian_1d(K)
    B = rng.standard_normal((K, K)) / K
    O = ortho_group.rvs(K, random_state=seed)
    BO = B @ O
    g = rng.standard_normal(K)
    phi = Functional.cosine(g, 0.2)
    a = expect_functional(continuous_law(m, cov.custom(m, B @ B.T), None, 0.5), phi)
    b = expect_functional(continuous_law(m, cov.custom(m, BO @ BO.T), None, 0.5), phi)
    assert a == pytest.approx(b, rel=1e-12)


def test_discrete_state_uses_gamma():
    m = build_dirichlet_laplacian_1d(16)
    sp = build_p1_space(8, m)
    law = discrete_law(sp, cov.white(m), ThetaScheme(1.0, 1.0, 16), None)
    g = np.array([0.0, 1.0])
    c = sp.gamma @ np.pad(g, (0, 14))
    assert expect_functional(law, Functional.quadratic(g)) == pytest.approx(c @ law.cov @ c)


def test_weak_error_monotone_in_N():
    m, sp = _spectral(64)
    Q = cov.white(m)
    phi = Functional.cosine([1.0])
    Ns = [8, 16, 32, 64, 128, 256, 512]
    e = [weak_error(m, sp, Q, ThetaScheme(1.0, 1.0, N), None, phi) for N in Ns]
    assert all(b <= 1.05 * a for a, b in zip(e, e[1:]))
    assert e[-1] > 0 and e[-1] < e[0] / 10


def test_weak_error_deterministic_first_order():
    m, sp = _spectral(16)
    phi = Functional.cosine([1.0], phase=0.4)
    # asymptotic once N >> lambda_1^2 / 2
    Ns = np.array([64, 128, 256, 512, 1024, 2048])
    e = [weak_error(m, sp, cov.zero(m), ThetaScheme(1.0, 1.0, N), [1.0], phi) for N in Ns]
    assert _slope(Ns, e) == pytest.approx(1.0, abs=0.1)


def _strong_oracle(model, space, Q, sc, per_step=1000):
    """Itô isometry integrand on a composite Simpson grid, per time step."""
    lam = model.eigenvalues
    F = sc.amplification(space.eigenvalues)
    G = sc.resolvent(space.eigenvalues)
    Gm, Qm = space.gamma, Q.matrix
    Qh = Gm @ Qm @ Gm.T
    total = 0.0
    for k in range(sc.N):
        d = F ** (sc.N - k - 1) * G
        s = np.linspace(k * sc.dt, (k + 1) * sc.dt, per_step + 1)
        vals = []
        for si in s:
            e = np.exp(-lam * (sc.T - si))
            disc = np.sum(d * d * np.diag(Qh))
            cross = np.sum((Gm.T * d) @ Gm * (Qm * e[None, :]).T)
            cont = np.sum(e * e * np.diag(Qm))
            vals.append(disc - 2 * cross + cont)
        total += integrate.simpson(vals, x=s)
    return total


def test_strong_error_riemann_oracle_K2_N2():
    m, sp = _spectral(2)
    Q = cov.custom(m, [[1.0, 0.3], [0.3, 0.5]])
    sc = ThetaScheme(1.0, 1.0, 2)
    assert strong_error_sq(m, sp, Q, sc, None) == pytest.approx(_strong_oracle(m, sp, Q, sc), rel=1e-6)


def test_strong_error_oracle_p1():
    m = build_dirichlet_laplacian_1d(8)
    sp = build_p1_space(4, m)
    Q = cov.from_kernel(m, [1.0, 0.6, 0.3])
    sc = ThetaScheme(0.8, 0.5, 3)
    assert strong_error_sq(m, sp, Q, sc, None) == pytest.approx(_strong_oracle(m, sp, Q, sc, 400), rel=1e-6)


def test_strong_error_refinement_and_deterministic():
    m, sp = _spectral(8)
    Q = cov.white(m)
    a = strong_error_sq(m, sp, Q, ThetaScheme(1.0, 1.0, 2**13), None)
    b = strong_error_sq(m, sp, Q, ThetaScheme(1.0, 1.0, 2**14), None)
    assert 0 < b < a
    x = np.array([1.0, 0.5, 0.0, 0.2])
    sc = ThetaScheme(0.75, 1.0, 7)
    det = discrete_law(sp, cov.zero(m), sc, x).mean - np.exp(-m.eigenvalues) * np.pad(x, (0, 4))
    assert strong_error_sq(m, sp, cov.zero(m), sc, x) == pytest.approx(det @ det, rel=1e-10)


def test_kolmogorov_endpoints():
    m = build_dirichlet_laplacian_1d(6)
    Q = cov.from_kernel(m, [1.0, 0.5])
    phi = Functional.cosine([1.0, -0.5], 0.1)
    y = np.array([0.3, 0.2, 0.0, 0.1])
    assert kolmogorov_value(m, Q, 1.0, 1.0, y, phi) == pytest.approx(math.cos(0.3 - 0.1 + 0.1))
    x = np.array([1.0, 0.5])
    yT = np.exp(-m.eigenvalues[:2]) * x
    exact = expect_functional(continuous_law(m, Q, x, 1.0), phi)
    assert kolmogorov_value(m, Q, 1.0, 0.0, yT, phi) == pytest.approx(exact, rel=1e-14)
    with pytest.raises(ValueError):
        kolmogorov_value(m, Q, 1.0, 1.5, y, phi)


def test_kolmogorov_martingale():
    m = build_dirichlet_laplacian_1d(8)
    Q = cov.white(m)
    T = 1.0
    x = np.array([1.0, -0.5])
    phi = Functional.cosine([2.0, 1.0])
    rng = np.random.default_rng(11)
    target = expect_functional(continuous_law(m, Q, x, T), phi)
    for t in (0.0, T / 4, T / 2, T):
        law = transformed_law(m, Q, x, T, t)
        Y = rng.multivariate_normal(law.mean, law.cov, size=100_000, method="eigh")
        v = kolmogorov_values(m, Q, T, t, Y, phi)
        se = v.std(ddof=1) / math.sqrt(v.size)
        assert abs(v.mean() - target) <= 4 * max(se, 1e-15)


def test_gaussian_functional_shows_half_order_in_time():
    # exp(-|x|^2) sees every mode, so the sum over modes produces the dt^{1/2} rate
    m, sp = _spectral(64)
    Ns = np.array([8, 16, 32, 64, 128, 256])
    e = [weak_error(m, sp, cov.white(m), ThetaScheme(1.0, 1.0, N), None, Functional.gaussian()) for N in Ns]
    assert 0.40 <= _slope(Ns, e) <= 0.50


def test_gaussian_functional_space_order_one():
    m = build_dirichlet_laplacian_1d(512)
    Q = cov.white(m)
    phi = Functional.gaussian()
    ref = expect_functional(continuous_law(m, Q, None, 1.0), phi)
    Ms = np.array([4, 8, 16, 32])
    e = [abs(expect_functional(semidiscrete_law(build_p1_space(M, m), Q, None, 1.0), phi) - ref) for M in Ms]
    assert _slope(Ms, e) == pytest.approx(1.0, abs=0.1)
