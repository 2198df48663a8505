import numpy as np


def top_eigenvalue_psd(G: np.ndarray, tol: float = 1e-10, maxiter: int = 10_000) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    G = np.asarray(G, dtype=float)
    n = G.shape[0]
    if n == 0 or not np.any(G):
        return 0.0
    # deterministic start with no special alignment to any eigenvector
    v = np.cos(np.arange(1, n + 1) * 0.7548776662466927) + 1.0
    v /= np.linalg.norm(v)
    mu = 0.0
    for _ in range(maxiter):
        w = G @ v
        mu_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(mu_new - mu) <= tol * abs(mu_new):
            return mu_new
        mu = mu_new
    return mu


def spectral_norm(M: np.ndarray, tol: float = 1e-10, maxiter: int = 10_000) -> float:
    """Operator 2-norm of M via power iteration on M^T M."""
    M = np.asarray(M, dtype=float)
    G = M.T @ M if M.shape[0] >= M.shape[1] else M @ M.T
    return float(np.sqrt(max(top_eigenvalue_psd(G, tol, maxiter), 0.0)))


def psd_power(S: np.ndarray, p: float, clamp_tol: float = 1e-10) -> np.ndarray:
    """S^p for symmetric PSD S; roundoff-negative eigenvalues are clamped to 0."""
    w, V = np.linalg.eigh((S + S.T) / 2)
    scale = max(abs(w).max(initial=0.0), 1e-300)
    if w.min(initial=0.0) < -clamp_tol * scale:
        raise ValueError(f"matrix is not PSD: eigenvalue {w.min():.3e}")
    w = np.clip(w, 0.0, None)
    return (V * w**p) @ V.T
