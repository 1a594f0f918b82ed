"""Utilities for column-orthonormal matrices (subspace bases).

A basis is a p x r ndarray A with A.T @ A = I_r. Distances between the
subspaces spanned by two bases are measured through their orthogonal
projectors AA^T; both the spectral and the Frobenius norm of the projector
difference are rotation invariant, and the spectral distance never exceeds 1.
"""
from __future__ import annotations

import warnings

import numpy as np

ORTHO_TOL = 1e-10


class DegenerateMeanWarning(UserWarning):
    """Raised when the averaged projector has no eigen-gap at rank r."""


def is_orthonormal(A: np.ndarray, tol: float = ORTHO_TOL) -> bool:
    p, r = A.shape
    return bool(np.max(np.abs(A.T @ A - np.eye(r))) <= tol)


def _check_pair(A: np.ndarray, B: np.ndarray) -> None:
    if A.shape != B.shape:
        raise ValueError(f"basis shapes differ: {A.shape} vs {B.shape}")


def orthonormalize(M: np.ndarray) -> np.ndarray:
    """Thin QR factor of M with non-negative diagonal in the triangular part.

    The sign convention makes the result a deterministic function of M.
    Raises ValueError when M is numerically rank deficient (some |R_jj|
    below 1e-10 times the largest singular value).
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] < M.shape[1]:
        raise ValueError(f"expected a tall p x r matrix, got shape {M.shape}")
    Q, R = np.linalg.qr(M)
    diag = np.diag(R)
    sigma1 = np.max(np.abs(diag)) if diag.size else 0.0
    if sigma1 == 0.0 or np.min(np.abs(diag)) < 1e-10 * sigma1:
        raise ValueError("rank deficient")
    signs = np.where(diag < 0, -1.0, 1.0)
    return Q * signs


def projector_distance_spectral(A: np.ndarray, B: np.ndarray) -> float:
    _check_pair(A, B)
    return float(np.linalg.norm(A @ A.T - B @ B.T, 2))


def projector_distance_frobenius(A: np.ndarray, B: np.ndarray) -> float:
    _check_pair(A, B)
    return float(np.linalg.norm(A @ A.T - B @ B.T, "fro"))


def procrustes_align(A: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, float]:
    """Best r x r orthogonal R aligning B to A, and the residual ||A - BR||_F.

    R = UV^T from the SVD of B^T A. The residual obeys the sandwich
    d_F/sqrt(2) <= ||A - BR||_F <= d_F with d_F the Frobenius projector
    distance.
    """
    _check_pair(A, B)
    U, _, Vt = np.linalg.svd(B.T @ A)
    R = U @ Vt
    residual = float(np.linalg.norm(A - B @ R, "fro"))
    return R, residual


def principal_subspace(P: np.ndarray, r: int) -> np.ndarray:
    """Top-r eigenvectors of a symmetric PSD matrix, deterministically signed.

    Columns are ordered by descending eigenvalue; each column's
    largest-magnitude entry is made positive. Emits DegenerateMeanWarning
    when the eigen-gap at rank r is below 1e-12 (the subspace is then not
    unique) but still returns a basis, ties broken by eigenvalue order then
    column index.
    """
    p = P.shape[0]
    eigvals, eigvecs = np.linalg.eigh(P)
    order = np.argsort(eigvals)[::-1]
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]
    if p > r and eigvals[r - 1] - eigvals[r] < 1e-12:
        warnings.warn(
            "averaged projector has no eigen-gap at rank r; mean is degenerate",
            DegenerateMeanWarning,
        )
    V = eigvecs[:, :r]
    for j in range(r):
        k = int(np.argmax(np.abs(V[:, j])))
        if V[k, j] < 0:
            V[:, j] = -V[:, j]
    return V


def extrinsic_mean(bases: list[np.ndarray]) -> np.ndarray:
    """Top-r eigenvectors of the averaged projector (1/T) sum A_t A_t^T."""
    if not bases:
        raise ValueError("empty basis list")
    p, r = bases[0].shape
    for A in bases[1:]:
        _check_pair(bases[0], A)
    P = np.zeros((p, p))
    for A in bases:
        P += A @ A.T
    P /= len(bases)
    return principal_subspace(P, r)


def random_orthobasis(rng: np.random.Generator, p: int, r: int) -> np.ndarray:
    """Orthonormal factor of a p x r standard Gaussian matrix.

    Left singular vectors of the draw; re-draws in the (measure-zero)
    event of numerical rank deficiency.
    """
    if r > p:
        raise ValueError(f"need r <= p, got r={r}, p={p}")
    while True:
        C = rng.standard_normal((p, r))
        U, s, _ = np.linalg.svd(C, full_matrices=False)
        if s[-1] > 1e-12 * s[0]:
            return U[:, :r]
