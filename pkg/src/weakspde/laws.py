"""Exact Gaussian laws of the mild solution X_T and of the fully discrete
theta-scheme solution X_h^N, closed-form functional expectations, and exact
weak and strong errors.

Continuous states live in the K-mode sine basis; discrete states live in the
discrete eigenbasis of a DiscreteSpace (H-orthonormal), so |X_h|_H is exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .covariance import CovarianceModel
from .fem1d import DiscreteSpace
from .spectral import SpectralModel, ThetaScheme

SINGULAR_TOL = 1e-8


def _geometric(r: np.ndarray, N: int) -> np.ndarray:
    """sum_{k=0}^{N-1} r^k elementwise, with the r -> 1 limit N."""
    r = np.asarray(r, dtype=float)
    near = np.abs(1.0 - r) < SINGULAR_TOL
    safe = np.where(near, 0.5, r)
    out = (1.0 - safe**N) / (1.0 - safe)
    return np.where(near, float(N), out)


def _geometric_loop(r: np.ndarray, N: int) -> np.ndarray:
    acc = np.zeros_like(r, dtype=float)
    term = np.ones_like(r, dtype=float)
    for _ in range(N):
        acc += term
        term = term * r
    return acc


def _pad(x, K: int) -> np.ndarray:
    x = np.zeros(K) if x is None else np.asarray(x, dtype=float).ravel()
    if x.size > K:
        raise ValueError(f"vector has {x.size} modes, model has {K}")
    return np.concatenate([x, np.zeros(K - x.size)])


@dataclass(frozen=True, eq=False)
class GaussianState:
    """N(mean, cov) in the continuous sine basis (space=None) or in the discrete
    eigenbasis of ``space``."""

    mean: np.ndarray
    cov: np.ndarray
    space: DiscreteSpace | None = None
    label: str = ""

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        scale = np.abs(cov).max(initial=0.0)
        if scale > 0:
            if np.abs(cov - cov.T).max() > 1e-12 * scale:
                raise ValueError("covariance is not symmetric")
            w = np.linalg.eigvalsh((cov + cov.T) / 2)
            if w[0] < -1e-10 * max(w[-1], 0.0):
                raise ValueError(f"covariance is not PSD (eigenvalue {w[0]:.3e})")
        object.__setattr__(self, "cov", (cov + cov.T) / 2)
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))

    @property
    def basis(self) -> str:
        return "continuous" if self.space is None else f"discrete:{self.space.label}"

    def coordinates(self, g) -> np.ndarray:
        """Coordinates of the functional direction g (sine coefficients) in this basis,
        so that (g, X)_H = coords . X."""
        if self.space is None:
            return _pad(g, self.mean.size)
        return self.space.gamma @ _pad(g, self.space.model.mode_count)


@dataclass(frozen=True, eq=False)
class Functional:
    """Test functional on H.

    cosine   phi(x) = cos((g, x) + phase)          bounded, C_b^2
    gaussian phi(x) = exp(-scale |x|^2)            bounded, C_b^2, sees every mode
    linear   phi(x) = (g, x)                       diagnostic: outside C_b^2
    quadratic phi(x) = (g, x)^2                    diagnostic: outside C_b^2

    ``g`` holds sine coefficients and must have finitely many nonzero modes.
    """

    kind: str
    g: np.ndarray | None = None
    phase: float = 0.0
    scale: float = 1.0
    bounded: bool = field(init=False)

    def __post_init__(self):
        if self.kind not in ("cosine", "linear", "quadratic", "gaussian"):
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.kind != "gaussian":
            if self.g is None:
                raise ValueError(f"{self.kind} functional needs a direction g")
            g = np.asarray(self.g, dtype=float).ravel()
            if not np.all(np.isfinite(g)):
                raise ValueError("g must be finite")
            object.__setattr__(self, "g", g)
        elif self.scale <= 0:
            raise ValueError("gaussian functional needs a positive scale")
        object.__setattr__(self, "bounded", self.kind in ("cosine", "gaussian"))

    @classmethod
    def cosine(cls, g, phase: float = 0.0) -> "Functional":
        return cls("cosine", g, phase=phase)

    @classmethod
    def linear(cls, g) -> "Functional":
        return cls("linear", g)

    @classmethod
    def quadratic(cls, g) -> "Functional":
        return cls("quadratic", g)

    @classmethod
    def gaussian(cls, scale: float = 1.0) -> "Functional":
        return cls("gaussian", scale=scale)

    def evaluate(self, samples, space: DiscreteSpace | None = None) -> np.ndarray:
        """phi at sample points (rows), in the sine basis or the eigenbasis of ``space``."""
        X = np.atleast_2d(np.asarray(samples, dtype=float))
        if self.kind == "gaussian":
            return np.exp(-self.scale * np.sum(X**2, axis=1))
        if space is None:
            c = _pad(self.g, X.shape[1])
        else:
            c = space.gamma @ _pad(self.g, space.model.mode_count)
        proj = X @ c
        if self.kind == "cosine":
            return np.cos(proj + self.phase)
        if self.kind == "linear":
            return proj
        return proj**2


def expect_functional(state: GaussianState, phi: Functional) -> float:
    """E phi(X) for X ~ state, in closed form."""
    m, C = state.mean, state.cov
    if phi.kind == "gaussian":
        s = phi.scale
        M = np.eye(m.size) + 2 * s * C
        L = np.linalg.cholesky(M)
        y = np.linalg.solve(L, m)
        logdet = 2 * np.sum(np.log(np.diag(L)))
        return float(np.exp(-0.5 * logdet - s * (y @ y)))
    c = state.coordinates(phi.g)
    mu = float(c @ m)
    var = float(c @ C @ c)
    if phi.kind == "cosine":
        return float(np.cos(mu + phi.phase) * np.exp(-0.5 * var))
    if phi.kind == "linear":
        return mu
    return mu**2 + var


def _ou_covariance(lam: np.ndarray, Q: np.ndarray, t: float) -> np.ndarray:
    """int_0^t e^{-s Lambda} Q e^{-s Lambda} ds, entrywise closed form."""
    ls = lam[:, None] + lam[None, :]
    return Q * (-np.expm1(-ls * t)) / ls


def continuous_law(model: SpectralModel, Q: CovarianceModel, x, T: float) -> GaussianState:
    """Law of X_T = e^{-TA} x + int_0^T e^{-(T-s)A} Q^{1/2} dW_s on the K retained modes."""
    lam = model.eigenvalues
    mean = np.exp(-lam * T) * _pad(x, model.mode_count)
    return GaussianState(mean, _ou_covariance(lam, Q.matrix, T), label=f"continuous(T={T})")


def semidiscrete_law(space: DiscreteSpace, Q: CovarianceModel, x, T: float) -> GaussianState:
    """Law of the space-discrete, time-continuous solution X_{h,T}."""
    lam = space.eigenvalues
    Qh = space.gamma @ Q.matrix @ space.gamma.T
    mean = np.exp(-lam * T) * (space.gamma @ _pad(x, space.model.mode_count))
    return GaussianState(mean, _ou_covariance(lam, Qh, T), space, f"semidiscrete(T={T})")


def discrete_law(space: DiscreteSpace, Q: CovarianceModel, scheme: ThetaScheme, x) -> GaussianState:
    """Law of X_h^N for the theta-scheme started at P_h x.

    In the discrete eigenbasis, with F_i = F(lambda_{h,i} dt) and
    G_i = 1/(1 + theta dt lambda_{h,i}):
        mean_i = F_i^N (P_h x)_i
        cov_ij = dt G_i G_j (Gamma Q Gamma^T)_ij sum_{k<N} (F_i F_j)^k.
    """
    lam = space.eigenvalues
    F = scheme.amplification(lam)
    G = scheme.resolvent(lam)
    N = scheme.N
    Qh = space.gamma @ Q.matrix @ space.gamma.T
    r = F[:, None] * F[None, :]
    if np.any(np.abs(r) >= 1.0):
        geo = _geometric_loop(r, N)
    else:
        geo = _geometric(r, N)
    cov = scheme.dt * (G[:, None] * G[None, :]) * Qh * geo
    mean = F**N * (space.gamma @ _pad(x, space.model.mode_count))
    return GaussianState(mean, cov, space, f"theta-scheme(theta={scheme.theta}, N={N})")


def discrete_law_bruteforce(space: DiscreteSpace, Q: CovarianceModel, scheme: ThetaScheme, x) -> GaussianState:
    """Reference accumulation dt sum_k R^k G Q_h G R^k, one step at a time."""
    lam = space.eigenvalues
    R = np.diag(scheme.amplification(lam))
    G = np.diag(scheme.resolvent(lam))
    Qh = space.gamma @ Q.matrix @ space.gamma.T
    step = scheme.dt * G @ Qh @ G
    cov = np.zeros_like(step)
    mean = space.gamma @ _pad(x, space.model.mode_count)
    for _ in range(scheme.N):
        cov = R @ cov @ R + step
        mean = R @ mean
    return GaussianState(mean, cov, space, "bruteforce")


def weak_error(model, space, Q, scheme, x, phi) -> float:
    """|E phi(X_h^N) - E phi(X_T)|, exact (no sampling)."""
    d = expect_functional(discrete_law(space, Q, scheme, x), phi)
    c = expect_functional(continuous_law(model, Q, x, scheme.T), phi)
    return abs(d - c)


def cross_moment(model: SpectralModel, space: DiscreteSpace, Q: CovarianceModel, scheme: ThetaScheme) -> float:
    """E (Z_h^N, Z_T)_H for the stochastic convolutions driven by the same W.

    E[xi_i Z_j] = (Gamma Q)_ij G_i sum_n F_i^{N-n-1} int_{t_n}^{t_{n+1}} e^{-lambda_j (T-s)} ds
               = (Gamma Q)_ij G_i (1 - e^{-lambda_j dt}) / lambda_j * sum_p (F_i e^{-lambda_j dt})^p.
    """
    lam = model.eigenvalues
    dt, N = scheme.dt, scheme.N
    F = scheme.amplification(space.eigenvalues)
    G = scheme.resolvent(space.eigenvalues)
    step_int = -np.expm1(-lam * dt) / lam
    r = F[:, None] * np.exp(-lam * dt)[None, :]
    geo = _geometric_loop(r, N) if np.any(np.abs(r) >= 1.0) else _geometric(r, N)
    kern = G[:, None] * step_int[None, :] * geo
    GQ = space.gamma @ Q.matrix
    return float(np.sum(space.gamma * GQ * kern))


def strong_error_sq(model, space, Q, scheme, x) -> float:
    """E |X_h^N - X_T|_H^2 for the pair driven by the same Wiener process.

    X_T is the K-mode truncation of the mild solution; X_h^N is measured with its
    exact H-norm, and the cross term uses the K sine modes of X_T.
    """
    d = discrete_law(space, Q, scheme, x)
    c = continuous_law(model, Q, x, scheme.T)
    mean_cross = float(d.mean @ (space.gamma @ c.mean))
    total = (
        np.trace(d.cov) + d.mean @ d.mean
        + np.trace(c.cov) + c.mean @ c.mean
        - 2.0 * (cross_moment(model, space, Q, scheme) + mean_cross)
    )
    return float(max(total, 0.0))


def kolmogorov_value(model: SpectralModel, Q: CovarianceModel, T: float, t: float, y, phi: Functional) -> float:
    """v(T-t, y) = E phi(y + int_t^T S(T-s) Q^{1/2} dW_s), by Gaussian smoothing of phi."""
    if not 0 <= t <= T:
        raise ValueError("need 0 <= t <= T")
    cov = _ou_covariance(model.eigenvalues, Q.matrix, T - t) if t < T else np.zeros((model.mode_count,) * 2)
    return expect_functional(GaussianState(_pad(y, model.mode_count), cov), phi)


def kolmogorov_values(model: SpectralModel, Q: CovarianceModel, T: float, t: float, Y, phi: Functional) -> np.ndarray:
    """kolmogorov_value at many points (rows of Y) at once (cosine and linear functionals)."""
    Y = np.atleast_2d(Y)
    cov = _ou_covariance(model.eigenvalues, Q.matrix, T - t)
    if phi.kind == "cosine":
        c = _pad(phi.g, model.mode_count)
        return np.cos(Y @ c + phi.phase) * np.exp(-0.5 * c @ cov @ c)
    if phi.kind == "linear":
        return Y @ _pad(phi.g, model.mode_count)
    return np.array([kolmogorov_value(model, Q, T, t, y, phi) for y in Y])


def transformed_law(model: SpectralModel, Q: CovarianceModel, x, T: float, t: float) -> GaussianState:
    """Law of Y_t = S(T-t) X_t, the drift-free transform of the solution."""
    lam = model.eigenvalues
    mean = np.exp(-lam * T) * _pad(x, model.mode_count)
    # int_0^t e^{-(T-s)Lambda} Q e^{-(T-s)Lambda} ds
    ls = lam[:, None] + lam[None, :]
    cov = Q.matrix * (np.exp(-ls * (T - t)) - np.exp(-ls * T)) / ls
    return GaussianState(mean, cov, label=f"transformed(t={t})")
