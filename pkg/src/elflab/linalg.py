"""SVD-based pseudoinverse, kernels and projectors with a relative rank cut."""
from __future__ import annotations

import numpy as np

RCOND = 1e-10
ATOL = 1e-13


def pinv(A, rcond=RCOND, atol=ATOL):
    """Moore-Penrose pseudoinverse; singular values below ``rcond * s_max`` count as zero.

    ``atol`` additionally zeroes round-off sized values, so an operator that
    vanishes up to rounding gets the zero pseudoinverse.
    """
    A = np.asarray(A)
    if A.size == 0:
        return np.zeros(A.shape[::-1], dtype=A.dtype)
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros(A.shape[::-1], dtype=np.result_type(A, float))
    keep = s > max(rcond * s[0], atol)
    return (Vh[keep].conj().T / s[keep]) @ U[:, keep].conj().T


def kernel_basis(A, rcond=RCOND, scale=None):
    """Orthonormal basis (columns) of ker A.

    ``scale`` sets the reference for the rank cut; it defaults to the largest
    singular value, or 1 if ``A`` vanishes.
    """
    A = np.asarray(A)
    n = A.shape[1]
    if A.shape[0] == 0:
        return np.eye(n, dtype=np.result_type(A, float))
    U, s, Vh = np.linalg.svd(A, full_matrices=True)
    ref = scale if scale is not None else (s[0] if s.size and s[0] > 0 else 1.0)
    rank = int(np.sum(s > rcond * ref))
    return Vh[rank:].conj().T


def range_basis(A, rcond=RCOND):
    U, s, _ = np.linalg.svd(np.asarray(A), full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return U[:, :0]
    return U[:, s > rcond * s[0]]


def projector_onto(B):
    """Orthogonal projector onto the column span of ``B`` (orthonormalized first)."""
    B = np.asarray(B)
    if B.shape[1] == 0:
        return np.zeros((B.shape[0], B.shape[0]), dtype=np.result_type(B, float))
    Q = range_basis(B)
    return Q @ Q.conj().T


def projector_defects(P):
    """Return ``(||P^2 - P||, ||P - P^dagger||)`` in spectral norm."""
    P = np.asarray(P)
    return (float(np.linalg.norm(P @ P - P, 2)) if P.size else 0.0,
            float(np.linalg.norm(P - P.conj().T, 2)) if P.size else 0.0)


def unitarity_defect(U):
    U = np.asarray(U)
    return float(np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0]), 2))


def rank(P, tol=1e-8):
    return int(np.sum(np.linalg.svd(np.asarray(P), compute_uv=False) > tol))
