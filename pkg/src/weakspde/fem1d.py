"""Galerkin spaces V_h on (0,1): spectral truncation or P1 finite elements.

Discrete vectors are coordinates in the discrete eigenbasis (e_{i,h}) of A_h,
which is H-orthonormal. The coupling matrix ``gamma[i, k] = (e_{i,h}, e_k)``
links them to the continuous sine basis; for P1 spaces it is exact (closed-form
integrals of hat functions against sines), truncated at the model's K modes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._linalg import top_eigenvalue_psd
from .spectral import DIRICHLET_1D, SpectralModel

RESIDUAL_TOL = 1e-9
ORTHO_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DiscreteSpace:
    variant: str  # "spectral" or "p1"
    size: int  # m for spectral, M (elements) for p1
    model: SpectralModel
    h: float
    mass: np.ndarray
    stiffness: np.ndarray
    eigenvalues: np.ndarray
    eigvecs: np.ndarray  # columns mass-orthonormal, nodal/modal coordinates
    load: np.ndarray  # load[p, k] = (phi_p, e_k) for basis function phi_p
    gamma: np.ndarray  # eigvecs.T @ load

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    @property
    def label(self) -> str:
        return f"{self.variant}({self.size})"

    def embed(self, xi) -> np.ndarray:
        """First K sine coefficients of the discrete function with eigen-coordinates xi."""
        return np.asarray(xi) @ self.gamma

    def to_nodal(self, xi) -> np.ndarray:
        return np.asarray(xi) @ self.eigvecs.T

    def from_nodal(self, u) -> np.ndarray:
        return np.asarray(u) @ (self.mass @ self.eigvecs)

    def check_invariants(self) -> None:
        V, lam = self.eigvecs, self.eigenvalues
        res = self.stiffness @ V - (self.mass @ V) * lam
        rel = np.linalg.norm(res, axis=0) / (lam * np.linalg.norm(self.mass @ V, axis=0))
        if rel.max() > RESIDUAL_TOL:
            raise RuntimeError(f"generalized eigen residual {rel.max():.2e} too large")
        ortho = np.abs(V.T @ self.mass @ V - np.eye(self.dim)).max()
        if ortho > ORTHO_TOL:
            raise RuntimeError(f"eigenvectors not mass-orthonormal ({ortho:.2e})")


def build_spectral_space(m: int, model: SpectralModel) -> DiscreteSpace:
    """V_h = span{e_1, ..., e_m}; effective mesh size h = lambda_{m+1}^{-1/2}.

    For a custom model with m = K there is no lambda_{m+1}; lambda_m is used.
    """
    K = model.mode_count
    if not 1 <= m <= K:
        raise ValueError(f"need 1 <= m <= K={K}, got m={m}")
    lam = model.eigenvalues[:m].copy()
    load = np.eye(m, K)
    return DiscreteSpace(
        variant="spectral",
        size=m,
        model=model,
        h=(model.eigenvalue(m + 1) if m < K or model.domain_tag == DIRICHLET_1D else lam[-1]) ** -0.5,
        mass=np.eye(m),
        stiffness=np.diag(lam),
        eigenvalues=lam,
        eigvecs=np.eye(m),
        load=load,
        gamma=load.copy(),
    )


def hat_sine_integrals(M: int, K: int) -> np.ndarray:
    """(phi_p, e_k) for the interior hat functions of a uniform mesh with M elements.

    For a hat of half-width h centred at x_p,
    int phi_p(x) sin(w x) dx = 2 sin(w x_p) (1 - cos(w h)) / (w^2 h).
    """
    h = 1.0 / M
    xp = np.arange(1, M)[:, None] * h
    w = np.arange(1, K + 1)[None, :] * np.pi
    return math.sqrt(2.0) * np.sin(w * xp) * 2.0 * (1.0 - np.cos(w * h)) / (w**2 * h)


def p1_matrices(M: int) -> tuple[np.ndarray, np.ndarray]:
    h = 1.0 / M
    n = M - 1
    off = np.ones(n - 1)
    mass = (h / 6.0) * (4.0 * np.eye(n) + np.diag(off, 1) + np.diag(off, -1))
    stiff = (1.0 / h) * (2.0 * np.eye(n) - np.diag(off, 1) - np.diag(off, -1))
    return mass, stiff


def p1_eigenvalue(M: int, i) -> np.ndarray:
    """Closed-form discrete eigenvalues (6/h^2)(1 - cos i pi h)/(2 + cos i pi h)."""
    h = 1.0 / M
    c = np.cos(np.asarray(i) * np.pi * h)
    return (6.0 / h**2) * (1.0 - c) / (2.0 + c)


def build_p1_space(M: int, model: SpectralModel) -> DiscreteSpace:
    """Continuous piecewise-linear elements on a uniform mesh of (0,1), h = 1/M."""
    if M < 2:
        raise ValueError("need at least 2 elements (one interior node)")
    if model.domain_tag != DIRICHLET_1D:
        raise ValueError("P1 spaces are built for the 1-D Dirichlet Laplacian")
    mass, stiff = p1_matrices(M)
    # Cholesky reduction of the generalized problem, then a symmetric eigensolve
    lam, V = scipy.linalg.eigh(stiff, mass)
    load = hat_sine_integrals(M, model.mode_count)
    space = DiscreteSpace(
        variant="p1",
        size=M,
        model=model,
        h=1.0 / M,
        mass=mass,
        stiffness=stiff,
        eigenvalues=lam,
        eigvecs=V,
        load=load,
        gamma=V.T @ load,
    )
    space.check_invariants()
    return space


def build_space(variant: str, size: int, model: SpectralModel) -> DiscreteSpace:
    if variant == "spectral":
        return build_spectral_space(size, model)
    if variant == "p1":
        return build_p1_space(size, model)
    raise ValueError(f"unknown space variant {variant!r}")


def _pad(space: DiscreteSpace, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    K = space.model.mode_count
    if f.shape[-1] > K:
        raise ValueError(f"vector has {f.shape[-1]} modes, model has {K}")
    if f.shape[-1] < K:
        f = np.concatenate([f, np.zeros(f.shape[:-1] + (K - f.shape[-1],))], axis=-1)
    return f


def ph_project(space: DiscreteSpace, f) -> np.ndarray:
    """H-orthogonal projection P_h f: solve mass u = (phi_p, f), return eigen-coordinates."""
    f = _pad(space, f)
    u = scipy.linalg.solve(space.mass, space.load @ f, assume_a="pos")
    return space.from_nodal(u)


def th_solve(space: DiscreteSpace, f) -> np.ndarray:
    """T_h f = A_h^{-1} P_h f: solve stiffness u = (phi_p, f)."""
    f = _pad(space, f)
    u = scipy.linalg.solve(space.stiffness, space.load @ f, assume_a="pos")
    return space.from_nodal(u)


def ritz_project(space: DiscreteSpace, v) -> np.ndarray:
    """V-orthogonal projection Pi_h v: solve stiffness u = ((phi_p, v)) = (phi_p, A v)."""
    v = _pad(space, v)
    rhs = space.load @ (space.model.eigenvalues * v)
    u = scipy.linalg.solve(space.stiffness, rhs, assume_a="pos")
    return space.from_nodal(u)


def discrete_power_norm(space: DiscreteSpace, xi, s: float) -> float:
    """|A_h^s u_h| for u_h with eigen-coordinates xi."""
    xi = np.asarray(xi, dtype=float)
    return float(np.sqrt(np.sum(space.eigenvalues ** (2 * s) * xi**2)))


def energy_norm_sq(space: DiscreteSpace, xi) -> float:
    """|A^{1/2} w_h|^2 = int (w_h')^2 computed from the function itself.

    P1: sum over elements of (jump of nodal values)^2 / h. Spectral: sum lambda_k c_k^2.
    """
    xi = np.asarray(xi, dtype=float)
    if space.variant == "spectral":
        return float(np.sum(space.model.eigenvalues[: space.dim] * xi**2))
    u = np.concatenate([[0.0], space.to_nodal(xi), [0.0]])
    return float(np.sum(np.diff(u) ** 2) / space.h)


_GAUSS3 = (np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)]), np.array([5.0, 8.0, 5.0]) / 9.0)


def inverse_norm_sq(space: DiscreteSpace, xi) -> float:
    """|A^{-1/2} w_h|^2 = (T w_h, w_h) computed from the function itself.

    For u = T w (-u'' = w, u(0)=u(1)=0): u' = c - W, W(x) = int_0^x w, c = int_0^1 W,
    so (T w, w) = int (u')^2 = int W^2 - (int W)^2. W is piecewise quadratic for
    P1 functions; 3-point Gauss is exact on W^2.
    """
    xi = np.asarray(xi, dtype=float)
    if space.variant == "spectral":
        return float(np.sum(xi**2 / space.model.eigenvalues[: space.dim]))
    h = space.h
    u = np.concatenate([[0.0], space.to_nodal(xi), [0.0]])
    a, b = u[:-1], u[1:]
    Wnodes = np.concatenate([[0.0], np.cumsum(h * (a + b) / 2)])
    pts, wts = _GAUSS3
    s = (pts + 1) / 2  # local coordinate in [0,1]
    # W on element e at local s: W_e + h (a s + (b - a) s^2 / 2)
    W = Wnodes[:-1, None] + h * (a[:, None] * s + (b - a)[:, None] * s**2 / 2)
    int_W = float(np.sum(W * wts) * h / 2)
    int_W2 = float(np.sum(W**2 * wts) * h / 2)
    return int_W2 - int_W**2


def projection_residuals(space: DiscreteSpace, rng: np.random.Generator, trials: int = 20) -> dict:
    """Worst relative residuals of the four elliptic identities over random inputs.

    Keys: "cea" (T_h P_h f = Pi_h T f), "interp_A" (|A^{1/2} w_h| = |A_h^{1/2} w_h|),
    "interp_T1" (|T_h^{1/2} w_h| = |T^{1/2} w_h|), "interp_T2" (positive part of
    |T_h^{1/2} P_h v| - |T^{1/2} v|, relative).

    "interp_T1_ineq" is the positive part of |T_h^{1/2} w_h| - |T^{1/2} w_h|.
    Only this one-sided version holds in general: |T^{1/2} w_h| is a sup over
    all of V while |T_h^{1/2} w_h| only sees V_h, so "interp_T1" is small for
    P1 elements (it shrinks with h) but not zero.
    """
    K = space.model.mode_count
    lam = space.model.eigenvalues
    out = {"cea": 0.0, "interp_A": 0.0, "interp_T1": 0.0, "interp_T1_ineq": 0.0, "interp_T2": 0.0}
    for _ in range(trials):
        f = rng.standard_normal(K) / np.arange(1, K + 1)
        lhs = th_solve(space, f)
        rhs = ritz_project(space, f / lam)
        out["cea"] = max(out["cea"], np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))

        xi = rng.standard_normal(space.dim)
        a = math.sqrt(energy_norm_sq(space, xi))
        b = discrete_power_norm(space, xi, 0.5)
        out["interp_A"] = max(out["interp_A"], abs(a - b) / b)
        a = math.sqrt(inverse_norm_sq(space, xi))
        b = discrete_power_norm(space, xi, -0.5)
        out["interp_T1"] = max(out["interp_T1"], abs(a - b) / b)
        out["interp_T1_ineq"] = max(out["interp_T1_ineq"], max(b - a, 0.0) / b)

        v = rng.standard_normal(K) / np.arange(1, K + 1) ** 2
        a = discrete_power_norm(space, space.gamma @ v, -0.5)
        b = float(np.sqrt(np.sum(v**2 / lam)))
        out["interp_T2"] = max(out["interp_T2"], max(a - b, 0.0) / b)
    return out


def semigroup_error(space: DiscreteSpace, t: float, norm_index: int = 0) -> float:
    """||S_h(t) P_h - S(t)|| as an operator from H (restricted to the K retained
    modes) into H (norm_index=0) or D(A^{1/2}) (norm_index=1).

    The output norm is exact: for w_h in V_h the H and energy norms come from
    the discrete eigen-decomposition and cross terms only involve the K modes
    of S(t) v. The squared norm is the top eigenvalue of the Gram matrix
    E^T W E, found by power iteration.
    """
    if not t > 0:
        raise ValueError("semigroup error estimates need t > 0")
    lam = space.model.eigenvalues
    Gm = space.gamma  # I x K
    d = np.exp(-t * space.eigenvalues)
    s = np.exp(-t * lam)
    DG = d[:, None] * Gm  # eigen-coordinates of S_h(t) P_h e_l, columns l
    C = Gm.T @ DG  # (e_k, S_h(t) P_h e_l)
    if norm_index == 0:
        G = DG.T @ DG - C * s[:, None] - (C * s[:, None]).T + np.diag(s**2)
    elif norm_index == 1:
        G = (
            DG.T @ (space.eigenvalues[:, None] * DG)
            - (lam * s)[:, None] * C
            - ((lam * s)[:, None] * C).T
            + np.diag(lam * s**2)
        )
    else:
        raise ValueError("norm_index must be 0 or 1")
    G = (G + G.T) / 2
    return float(np.sqrt(max(top_eigenvalue_psd(G), 0.0)))
