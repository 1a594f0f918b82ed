"""NumPy implementations of the hot numerical kernels.

Same contracts as the compiled twin in _speedups.pyx; selected at import
time by the package __init__ when the extension is unavailable.
"""
from __future__ import annotations

import numpy as np


def power_method_sym(S: np.ndarray, tol: float = 1e-12, max_iter: int = 5000) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    p = S.shape[0]
    v = np.full(p, 1.0 / np.sqrt(p))
    lam = 0.0
    for _ in range(max_iter):
        w = S @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam_new = float(v @ (S @ v))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new
        lam = lam_new
    return lam


def apg_l2_linear(
    G: np.ndarray,
    g0: np.ndarray,
    tau: float,
    L: float,
    tol: float = 1e-9,
    max_iter: int = 5000,
) -> tuple[np.ndarray, int, bool]:
    """Accelerated proximal gradient for min_w q(w) + tau*||w||_2.

    q is the quadratic with gradient G w + g0 (G symmetric PSD, Lipschitz
    constant L >= lambda_max(G)). Momentum restarts whenever it points
    uphill, which keeps the iteration monotone enough to terminate on the
    iterate-change test. Returns (w, iterations used, converged flag).
    """
    p = g0.shape[0]
    w = np.zeros(p)
    z = w.copy()
    t_k = 1.0
    shrink = tau / L
    for it in range(max_iter):
        u = z - (G @ z + g0) / L
        nu = np.linalg.norm(u)
        if nu <= shrink:
            w_new = np.zeros(p)
        else:
            w_new = (1.0 - shrink / nu) * u
        dw = w_new - w
        if (z - w_new) @ dw > 0.0:
            # momentum restart
            t_k = 1.0
            z = w_new.copy()
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
            z = w_new + ((t_k - 1.0) / t_next) * dw
            t_k = t_next
        delta = float(np.linalg.norm(dw))
        w = w_new
        if delta <= tol:
            return w, it + 1, True
    return w, max_iter, False
