"""Spectral calculus for the self-adjoint operator A.

Everything here works on coefficient vectors in the eigenbasis (e_n) of A;
no grid representation of functions is used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

DIRICHLET_1D = "dirichlet-laplacian-1d on (0,1)"


class DivergentTraceError(ValueError):
    """Raised when Tr(A^-alpha) is infinite."""


@dataclass(frozen=True, eq=False)
class SpectralModel:
    """Truncated spectral decomposition of A: eigenvalues lambda_1 <= ... <= lambda_K."""

    eigenvalues: np.ndarray
    domain_tag: str = "custom"

    def __post_init__(self):
        lam = np.array(self.eigenvalues, dtype=float).ravel()
        if lam.size == 0:
            raise ValueError("a spectral model needs at least one mode")
        if lam[0] <= 0 or np.any(np.diff(lam) < 0):
            raise ValueError("eigenvalues must be positive and nondecreasing")
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def mode_count(self) -> int:
        return self.eigenvalues.size

    K = mode_count

    def eigenvalue(self, n: int) -> float:
        """lambda_n for 1-based n; Dirichlet models extrapolate past K."""
        if n < 1:
            raise ValueError("modes are 1-based")
        if n <= self.mode_count:
            return float(self.eigenvalues[n - 1])
        if self.domain_tag == DIRICHLET_1D:
            return (n * math.pi) ** 2
        raise ValueError(f"mode {n} beyond truncation K={self.mode_count}")

    def powers(self, s: float, size: int | None = None) -> np.ndarray:
        lam = self.eigenvalues if size is None else self.eigenvalues[:size]
        return lam**s

    def truncated(self, K: int) -> "SpectralModel":
        if self.domain_tag == DIRICHLET_1D:
            return build_dirichlet_laplacian_1d(K)
        if K > self.mode_count:
            raise ValueError("cannot extend a custom spectral model")
        return SpectralModel(self.eigenvalues[:K], self.domain_tag)


@dataclass(frozen=True)
class ThetaScheme:
    """Time grid t_n = n*dt, n = 0..N, and the theta weight of the implicit step.

    ``allow_unstable`` admits theta in [0, 1/2] for demonstrations of the
    instability only; convergence results assume 1/2 < theta <= 1.
    """

    theta: float
    T: float
    N: int
    allow_unstable: bool = False

    def __post_init__(self):
        if not (isinstance(self.N, (int, np.integer)) and self.N >= 1):
            raise ValueError("N must be a positive integer")
        if not self.T > 0:
            raise ValueError("T must be positive")
        lo_ok = self.theta > 0.5 or (self.allow_unstable and self.theta >= 0.0)
        if not (lo_ok and self.theta <= 1.0):
            raise ValueError(
                f"theta={self.theta} outside (1/2, 1]; pass allow_unstable=True "
                "to explore theta in [0, 1/2]"
            )

    @property
    def dt(self) -> float:
        return self.T / self.N

    def times(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.dt

    def amplification(self, eigenvalues) -> np.ndarray:
        """F(lambda*dt), the one-step multiplier of the deterministic part."""
        return theta_amplification(self.theta, np.asarray(eigenvalues) * self.dt)

    def resolvent(self, eigenvalues) -> np.ndarray:
        """1 / (1 + theta*dt*lambda), the noise multiplier of one step."""
        return 1.0 / (1.0 + self.theta * self.dt * np.asarray(eigenvalues))

    def refined(self, factor: int) -> "ThetaScheme":
        return ThetaScheme(self.theta, self.T, self.N * factor, self.allow_unstable)


def build_dirichlet_laplacian_1d(K: int) -> SpectralModel:
    """-d^2/dx^2 on (0,1) with Dirichlet conditions: lambda_n = (n pi)^2,
    e_n(x) = sqrt(2) sin(n pi x)."""
    if K < 1:
        raise ValueError("K must be >= 1")
    n = np.arange(1, K + 1, dtype=float)
    return SpectralModel((n * np.pi) ** 2, DIRICHLET_1D)


def _coeffs(model: SpectralModel, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape[-1] > model.mode_count:
        raise ValueError(f"vector has {u.shape[-1]} modes, model has {model.mode_count}")
    return u


def frac_power_norm(model: SpectralModel, u, s: float) -> float:
    """|A^{s/2} u| = (sum lambda_n^s u_n^2)^{1/2}; negative s gives the dual norms."""
    u = _coeffs(model, u)
    return float(np.sqrt(np.sum(model.powers(s, u.size) * u**2)))


def semigroup_apply(model: SpectralModel, t: float, u) -> np.ndarray:
    """e^{-tA} u."""
    if t < 0:
        raise ValueError("the semigroup is only defined for t >= 0")
    u = _coeffs(model, u)
    return np.exp(-t * model.eigenvalues[: u.shape[-1]]) * u


def smoothing_constant(s: float) -> float:
    """Optimal C(s) in sup_{x>=0} x^s e^{-tx} <= C(s) t^{-s}, i.e. (s/e)^s."""
    return (s / math.e) ** s if s > 0 else 1.0


def theta_amplification(theta: float, z):
    """F(z) = (1 - (1-theta) z) / (1 + theta z)."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("z must be nonnegative")
    out = (1.0 - (1.0 - theta) * z) / (1.0 + theta * z)
    return float(out) if out.ndim == 0 else out


def _gap(theta: float, N: int, z):
    return np.abs(np.exp(-N * z) - theta_amplification(theta, z) ** N)


def leroux_gap(theta: float, N: int, *, points: int = 2**14) -> float:
    """Estimate sup_{z>=0} |e^{-Nz} - F(z)^N|.

    Dense scan of z in [1e-6, 1e6] on a log grid, then golden-section
    refinement (in log z) around the grid maximizer.
    """
    if theta <= 0.5:
        raise ValueError("the uniform bound needs theta > 1/2")
    if N < 1:
        raise ValueError("N must be >= 1")
    logz = np.linspace(math.log(1e-6), math.log(1e6), points)
    vals = _gap(theta, N, np.exp(logz))
    i = int(np.argmax(vals))
    best = float(vals[i])
    if 0 < i < points - 1:
        res = optimize.minimize_scalar(
            lambda lz: -float(_gap(theta, N, math.exp(lz))),
            bracket=(logz[i - 1], logz[i], logz[i + 1]),
            method="golden",
            options={"xtol": 1e-12},
        )
        best = max(best, -float(res.fun))
    return best


def trace_frac(model: SpectralModel, alpha: float) -> tuple[float, float]:
    """Tr(A^-alpha) split into the sum over the K retained modes and a rigorous
    bound on the remaining tail.

    The tail bound uses integral comparison, valid for the 1-D Dirichlet
    Laplacian: sum_{n>K} (n pi)^{-2 alpha} <= pi^{-2 alpha} K^{1-2 alpha} / (2 alpha - 1).
    Other models report an infinite tail bound.
    """
    if alpha <= 0:
        raise DivergentTraceError("alpha must be positive")
    finite = float(np.sum(model.eigenvalues ** (-alpha)))
    if model.domain_tag != DIRICHLET_1D:
        return finite, math.inf
    if alpha <= 0.5:
        raise DivergentTraceError(
            f"Tr(A^-{alpha}) diverges for the 1-D Dirichlet Laplacian (needs alpha > 1/2)"
        )
    K = model.mode_count
    tail = math.pi ** (-2 * alpha) * K ** (1 - 2 * alpha) / (2 * alpha - 1)
    return finite, tail


def discrete_kernel_gap(eigenvalues, scheme: ThetaScheme, n: int, t: float, gamma1: float) -> float:
    """sup_i |F^{N-n-1}(lambda_i dt) / (1 + theta lambda_i dt) - e^{-lambda_i (T-t)}| lambda_i^{(1-gamma1)/2}.

    This is the weighted gap between the discrete noise kernel of step n and the
    continuous kernel at time t in [t_n, t_{n+1}).
    """
    lam = np.asarray(eigenvalues, dtype=float)
    N, dt = scheme.N, scheme.dt
    if not 0 <= n < N:
        raise ValueError("step index out of range")
    F = scheme.amplification(lam)
    G = scheme.resolvent(lam)
    diff = F ** (N - n - 1) * G - np.exp(-lam * (scheme.T - t))
    return float(np.max(np.abs(diff) * lam ** ((1 - gamma1) / 2)))


def discrete_kernel_gap_bound(scheme: ThetaScheme, n: int, gamma: float, gamma1: float) -> float:
    """dt^{gamma/2} ((N-n-1) dt)^{-(1-gamma1+gamma)/2}, the shape bounding the gap for n < N-1."""
    dt = scheme.dt
    return dt ** (gamma / 2) * ((scheme.N - n - 1) * dt) ** (-(1 - gamma1 + gamma) / 2)
