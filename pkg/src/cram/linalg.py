"""Dense linear-algebra primitives behind the penalties and the prox step.

Everything here works on the q x q Gram side, ``(1/n) P^T P``, so the cost is
dominated by one matrix product and a small symmetric eigendecomposition.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError

SYMMETRY_TOL = 1e-10
DEFAULT_RANK_TOL = 1e-6


@dataclass(frozen=True)
class SingularSystem:
    """Eigenbasis and eigenvalues of a PSD matrix, sorted descending.

    Attributes
    ----------
    basis : ndarray, shape (q, r)
        Orthonormal columns.
    values : ndarray, shape (r,)
        Nonnegative, nonincreasing.
    """

    basis: np.ndarray
    values: np.ndarray

    def reconstruct(self):
        return (self.basis * self.values) @ self.basis.T


def _check_square_symmetric(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if A.size and np.max(np.abs(A - A.T)) > SYMMETRY_TOL * scale:
        raise ContractError("matrix is not symmetric to within 1e-10")
    return A, scale


def psd_eig(A):
    """Eigendecomposition of a symmetric PSD matrix.

    Eigenvalues within ``-1e-10`` (relative to the largest entry) of zero are
    clamped to 0; anything more negative is rejected.
    """
    A, scale = _check_square_symmetric(A)
    values, basis = np.linalg.eigh(0.5 * (A + A.T))
    if values.size and values[0] < -SYMMETRY_TOL * scale:
        raise ContractError(
            f"matrix is not positive semidefinite (eigenvalue {values[0]:.3e})"
        )
    values = np.clip(values[::-1], 0.0, None)
    basis = basis[:, ::-1]
    return SingularSystem(basis=basis, values=values)


def matrix_sqrt(A):
    """Symmetric PSD square root."""
    sys_ = psd_eig(A)
    return (sys_.basis * np.sqrt(sys_.values)) @ sys_.basis.T


def sqrt_pinv(A, rank_tol=DEFAULT_RANK_TOL):
    """Pseudo-inverse of the PSD square root of ``A``.

    Only eigenvalues above ``rank_tol * max(eigenvalues)`` are inverted; the
    result vanishes on the complement of the retained eigenspace.
    """
    if rank_tol <= 0:
        raise ContractError("rank_tol must be positive")
    sys_ = psd_eig(A)
    vals = sys_.values
    top = vals[0] if vals.size else 0.0
    inv = np.zeros_like(vals)
    if top > 0:
        keep = vals > rank_tol * top
        inv[keep] = 1.0 / np.sqrt(vals[keep])
    return (sys_.basis * inv) @ sys_.basis.T


def shrink_factors(tau, lam, rank_tol=DEFAULT_RANK_TOL):
    """Per-direction factors ``[1 - lam / sqrt(tau)]_+``.

    Directions with ``sqrt(tau) <= rank_tol * sqrt(max(tau))`` get factor 0
    (the limit of the formula as tau -> 0). With ``lam == 0`` every factor is
    exactly 1, so the transform is the identity.
    """
    tau = np.asarray(tau, dtype=float)
    if lam == 0:
        return np.ones_like(tau)
    root = np.sqrt(np.clip(tau, 0.0, None))
    top = root.max() if root.size else 0.0
    out = np.zeros_like(root)
    if top > 0:
        keep = root > rank_tol * top
        out[keep] = np.maximum(0.0, 1.0 - lam / root[keep])
    return out


def shrink_transform(basis, tau, lam, rank_tol=DEFAULT_RANK_TOL):
    """q x q matrix ``U diag([1 - lam/sqrt(tau)]_+) U^T``."""
    if lam == 0:
        return np.eye(basis.shape[0])
    f = shrink_factors(tau, lam, rank_tol)
    return (basis * f) @ basis.T


def gram_system(P):
    """Singular system of ``(1/n) P^T P``."""
    P = np.asarray(P, dtype=float)
    return psd_eig(P.T @ P / P.shape[0])


def soft_threshold_svd(P, lam, rank_tol=DEFAULT_RANK_TOL):
    """Nuclear-norm prox in the sample-moment scaling.

    Returns the minimizer of ``(1/2n)||P - M||_F^2 + (lam/sqrt(n))||M||_*``,
    computed as ``P U diag([1 - lam/sqrt(tau)]_+) U^T`` with
    ``(1/n) P^T P = U diag(tau) U^T``.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] < 1 or P.shape[1] < 1:
        raise ContractError(f"expected a non-empty 2-d matrix, got shape {P.shape}")
    if lam < 0:
        raise ContractError("lambda must be nonnegative")
    if lam == 0:
        return P.copy()
    sys_ = gram_system(P)
    return P @ shrink_transform(sys_.basis, sys_.values, lam, rank_tol)


def scaled_nuclear_norm(F):
    """``(1/sqrt(n)) * sum of singular values of F``."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if F.size == 0:
        return 0.0
    return float(np.linalg.svd(F, compute_uv=False).sum() / np.sqrt(F.shape[0]))


def scaled_spectral_norm(F):
    """``(1/sqrt(n)) * largest singular value of F``."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if F.size == 0:
        return 0.0
    return float(np.linalg.svd(F, compute_uv=False)[0] / np.sqrt(F.shape[0]))


def numerical_rank(F, rel_tol=DEFAULT_RANK_TOL):
    """Number of singular values above ``rel_tol * sigma_max``."""
    if not 0 < rel_tol < 1:
        raise ContractError("rel_tol must lie in (0, 1)")
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if F.size == 0:
        return 0
    s = np.linalg.svd(F, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))
