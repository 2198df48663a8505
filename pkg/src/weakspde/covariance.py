"""Noise covariance Q on the truncated eigenbasis, and the regularity indices
(alpha, beta) that decide the admissible weak order."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from ._linalg import psd_power, spectral_norm
from .spectral import DIRICHLET_1D, SpectralModel, build_dirichlet_laplacian_1d, trace_frac

log = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10


class CovarianceError(ValueError):
    pass


class AdmissibilityError(ValueError):
    """Declared (alpha, beta) violate one of the standing hypotheses.

    ``condition`` is one of "trace", "Q", "order", "negative-beta".
    """

    def __init__(self, condition: str, message: str):
        super().__init__(message)
        self.condition = condition


def _as_model(model_or_K) -> SpectralModel:
    if isinstance(model_or_K, SpectralModel):
        return model_or_K
    return build_dirichlet_laplacian_1d(int(model_or_K))


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """Q_ij = (e_i, Q e_j) for i, j <= K.

    ``kind`` is one of white, diagonal_power, kernel, custom; ``params`` holds
    what is needed to rebuild the same noise at another truncation.
    """

    model: SpectralModel
    matrix: np.ndarray
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        Q = np.array(self.matrix, dtype=float)
        K = self.model.mode_count
        if Q.shape != (K, K):
            raise CovarianceError(f"expected a {K}x{K} matrix, got {Q.shape}")
        scale = np.abs(Q).max(initial=0.0)
        if np.abs(Q - Q.T).max(initial=0.0) > SYMMETRY_TOL * max(scale, 1e-300):
            raise CovarianceError("covariance matrix is not symmetric")
        Q = (Q + Q.T) / 2
        if scale > 0:
            w = np.linalg.eigvalsh(Q)
            if w[0] < -PSD_TOL * w[-1]:
                raise CovarianceError(
                    f"covariance is not positive semidefinite: eigenvalue {w[0]:.6e} "
                    f"(largest {w[-1]:.6e})"
                )
        Q.setflags(write=False)
        object.__setattr__(self, "matrix", Q)

    @property
    def K(self) -> int:
        return self.model.mode_count

    @property
    def is_zero(self) -> bool:
        return not np.any(self.matrix)

    @cached_property
    def sqrt(self) -> np.ndarray:
        """Symmetric PSD square root B, B @ B = Q.

        Any factor L with L L^T = Q drives the same Gaussian law: the stochastic
        convolution only enters through L L^T. The symmetric root is chosen for
        definiteness.
        """
        return psd_power(self.matrix, 0.5, PSD_TOL)

    def rebuild(self, K: int) -> "CovarianceModel":
        """Same noise family on a different truncation of the same operator."""
        model = self.model.truncated(K)
        if self.kind == "white":
            return white(model)
        if self.kind == "diagonal_power":
            return diagonal_power(model, self.params["beta0"])
        if self.kind == "kernel":
            return from_kernel(model, self.params["c_coeffs"])
        if self.kind == "zero":
            return zero(model)
        raise ValueError(f"cannot rebuild a {self.kind!r} covariance at another truncation")


def white(model_or_K) -> CovarianceModel:
    """Q = I (space-time white noise)."""
    model = _as_model(model_or_K)
    return CovarianceModel(model, np.eye(model.mode_count), "white")


def zero(model_or_K) -> CovarianceModel:
    model = _as_model(model_or_K)
    K = model.mode_count
    return CovarianceModel(model, np.zeros((K, K)), "zero")


def diagonal_power(model_or_K, beta0: float) -> CovarianceModel:
    """Q = A^{-beta0}, so that A^{beta0} Q = I."""
    if beta0 < 0:
        raise ValueError("beta0 must be nonnegative")
    model = _as_model(model_or_K)
    return CovarianceModel(
        model, np.diag(model.eigenvalues ** (-beta0)), "diagonal_power", {"beta0": float(beta0)}
    )


def custom(model_or_K, matrix) -> CovarianceModel:
    return CovarianceModel(_as_model(model_or_K), matrix, "custom")


def sine_cosine_products(K: int, L: int) -> np.ndarray:
    """C[i-1, k] = int_0^1 sqrt(2) sin(i pi x) cos(k pi x) dx for i = 1..K, k = 0..L-1."""
    i = np.arange(1, K + 1, dtype=float)[:, None]
    k = np.arange(L, dtype=float)[None, :]
    odd = (np.arange(1, K + 1)[:, None] + np.arange(L)[None, :]) % 2 == 1
    with np.errstate(divide="ignore", invalid="ignore"):
        C = np.where(odd, 2.0 * math.sqrt(2.0) * i / (np.pi * (i**2 - k**2)), 0.0)
    return C


def from_kernel(model_or_K, c_coeffs) -> CovarianceModel:
    """Q f(x) = int_0^1 c(x-y) f(y) dy for an even correlation

        c(r) = c_0/2 + sum_{k>=1} c_k cos(k pi r),  r in (-1, 1).

    With this convention a Dirac correlation has c_k = 1 for every k and gives
    Q = I. The double integrals are evaluated in closed form through
    cos(k pi (x-y)) = cos(k pi x) cos(k pi y) + sin(k pi x) sin(k pi y).
    """
    model = _as_model(model_or_K)
    if model.domain_tag != DIRICHLET_1D:
        raise ValueError("kernel covariances are defined on the Dirichlet sine basis")
    c = np.asarray(c_coeffs, dtype=float).ravel()
    if c.size == 0:
        raise ValueError("need at least one cosine coefficient")
    K = model.mode_count
    C = sine_cosine_products(K, c.size)
    w = c.copy()
    w[0] *= 0.5
    Q = (C * w) @ C.T
    # sine-sine part: int sqrt(2) sin(i pi x) sin(k pi x) dx = delta_ik / sqrt(2)
    m = min(K, c.size - 1)
    Q[np.arange(m), np.arange(m)] += 0.5 * c[1 : m + 1]
    Q = (Q + Q.T) / 2
    return CovarianceModel(model, Q, "kernel", {"c_coeffs": c})


def load_kernel_coefficients(path) -> np.ndarray:
    """Read cosine coefficients, one per line; blank lines and '#' comments are skipped."""
    vals = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            vals.append(float(line))
    if not vals:
        raise ValueError(f"{path}: no coefficients found")
    return np.array(vals)


def regularity_estimate(Q: CovarianceModel, beta: float) -> float:
    """||Lambda^beta Q||, the truncated estimate of ||A^beta Q||_{L(H)}.

    Also checks ||A^{l beta} Q^l|| <= ||A^beta Q||^l for l in {1/4, 1/2, 3/4}
    on the truncated matrices and logs a warning if it fails.
    """
    lam = Q.model.eigenvalues
    est = spectral_norm(lam[:, None] ** beta * Q.matrix)
    for ell, lhs in interpolation_norms(Q, beta).items():
        if lhs > est**ell * (1 + 1e-8) + 1e-14:
            log.warning("interpolation bound fails at l=%s: %g > %g", ell, lhs, est**ell)
    return est


def interpolation_norms(Q: CovarianceModel, beta: float, ells=(0.25, 0.5, 0.75)) -> dict:
    """{l: ||Lambda^{l beta} Q^l||} on the truncated matrices."""
    lam = Q.model.eigenvalues
    return {
        ell: spectral_norm(lam[:, None] ** (ell * beta) * psd_power(Q.matrix, ell, PSD_TOL))
        for ell in ells
    }


def regularity_growth(Q: CovarianceModel, beta: float, threshold: float = 0.10):
    """Compare the estimate at K and 2K.

    Returns (estimate_K, estimate_2K, unbounded) where ``unbounded`` flags a
    relative increase above ``threshold``, i.e. A^beta Q is likely not bounded
    as K grows.
    """
    a = regularity_estimate(Q, beta)
    b = regularity_estimate(Q.rebuild(2 * Q.K), beta)
    return a, b, bool(b > (1 + threshold) * a)


@dataclass(frozen=True)
class RegularityIndices:
    """Tr(A^-alpha) < inf, A^beta Q bounded; weak order gamma must satisfy gamma < gamma_sup."""

    alpha: float
    beta: float
    gamma_sup: float

    def admits(self, gamma: float) -> bool:
        return 0 < gamma < self.gamma_sup


def admissible_gamma(alpha: float, beta: float, model: SpectralModel | None = None) -> RegularityIndices:
    """Check the standing hypotheses and return gamma_sup = min(1 - alpha + beta, 1).

    The admissible orders form the open interval (0, gamma_sup). With ``model``
    the trace condition is also checked against its spectrum.
    """
    if not alpha > 0:
        raise AdmissibilityError("trace", f"trace condition needs alpha > 0, got {alpha}")
    if model is not None:
        try:
            trace_frac(model, alpha)
        except ValueError as exc:
            raise AdmissibilityError("trace", f"trace condition fails: {exc}") from None
    if beta < 0:
        raise AdmissibilityError(
            "negative-beta", f"beta={beta} < 0 is not supported (only beta >= 0)"
        )
    if not (min(alpha - 1, 0) <= beta <= alpha):
        raise AdmissibilityError(
            "Q", f"need min(alpha-1, 0) <= beta <= alpha for A^beta Q bounded, got beta={beta}"
        )
    gap = 1 - alpha + beta
    if not gap > 0:
        raise AdmissibilityError("order", f"order condition needs 1 - alpha + beta > 0, got {gap:g}")
    return RegularityIndices(float(alpha), float(beta), float(min(gap, 1.0)))
