"""Dense complex-matrix kernels.

Matrices are plain ``numpy`` arrays of dtype ``complex128``; :func:`as_matrix`
is the single entry point that validates shape and finiteness.
"""

from __future__ import annotations

import numpy as np

from tetra.errors import InvalidInputError, NotAContractionError

CONTRACTION_TOL = 1e-12
PSD_ROUNDOFF = 64 * np.finfo(float).eps
EIGEN_CLAMP = 1e-12
RELATIVE_RANK_TOL = 1e-10


def as_matrix(M, *, square: bool = False, allow_empty: bool = False, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a finite 2-D complex array, raising InvalidInputError otherwise."""
    A = np.asarray(M, dtype=np.complex128)
    if A.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-D array, got shape {A.shape}")
    if A.size == 0 and not allow_empty:
        raise InvalidInputError(f"{name} is empty")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} has non-finite entries")
    if square and A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {A.shape}")
    return A


def adjoint(M: np.ndarray) -> np.ndarray:
    return M.conj().T


def operator_norm(M) -> float:
    """Largest singular value of ``M``."""
    A = as_matrix(M, allow_empty=True)
    if A.size == 0:
        return 0.0
    return float(np.linalg.svd(A, compute_uv=False)[0])


def psd_sqrt(H: np.ndarray) -> np.ndarray:
    """Square root of a Hermitian PSD matrix.

    Eigenvalues in ``[-EIGEN_CLAMP, PSD_ROUNDOFF]`` (relative to the largest)
    are set to zero, so an exactly singular input gets an exactly singular
    root instead of one with ``sqrt(roundoff)`` entries.
    """
    H = 0.5 * (H + adjoint(H))
    w, Q = np.linalg.eigh(H)
    if w.size and w[0] < -EIGEN_CLAMP * max(1.0, abs(w[-1])):
        raise NotAContractionError(f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    w = np.where(w <= PSD_ROUNDOFF * max(1.0, abs(w[-1]) if w.size else 1.0), 0.0, w)
    R = (Q * np.sqrt(w)) @ adjoint(Q)
    return 0.5 * (R + adjoint(R))


def defect_operator(T) -> np.ndarray:
    """Return ``(I - T*T)^{1/2}`` for a square contraction ``T``."""
    T = as_matrix(T, square=True, name="T")
    nrm = operator_norm(T)
    if nrm > 1.0 + CONTRACTION_TOL:
        raise NotAContractionError(f"operator norm {nrm!r} exceeds 1")
    n = T.shape[0]
    return psd_sqrt(np.eye(n) - adjoint(T) @ T)


def restricted_inverse(M, tol: float | None = None) -> np.ndarray:
    """Moore-Penrose inverse of a Hermitian PSD matrix.

    Eigenvalues below ``tol`` (default ``1e-10`` times the largest one) are
    treated as zero, so the result inverts ``M`` on its range and kills the
    kernel.
    """
    M = as_matrix(M, square=True)
    H = 0.5 * (M + adjoint(M))
    w, Q = np.linalg.eigh(H)
    top = float(np.max(np.abs(w))) if w.size else 0.0
    cutoff = RELATIVE_RANK_TOL * top if tol is None else tol
    keep = np.abs(w) > cutoff
    if not np.any(keep):
        return np.zeros_like(H)
    Qk = Q[:, keep]
    R = (Qk / w[keep]) @ adjoint(Qk)
    return 0.5 * (R + adjoint(R))


def range_basis(M, tol: float | None = None) -> np.ndarray:
    """Orthonormal basis (as columns) of the range of a Hermitian PSD matrix.

    A full-rank input gets the standard basis, so compressed operators keep
    the coordinates they were written in.
    """
    M = as_matrix(M, square=True)
    n = M.shape[0]
    w, Q = np.linalg.eigh(0.5 * (M + adjoint(M)))
    top = float(np.max(np.abs(w))) if w.size else 0.0
    cutoff = RELATIVE_RANK_TOL * top if tol is None else tol
    keep = np.abs(w) > cutoff
    if np.all(keep):
        return np.eye(n, dtype=np.complex128)
    return Q[:, keep]


def haar_unitaries(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Stack of ``count`` Haar-distributed ``dim x dim`` unitaries.

    QR of a complex Ginibre matrix, with the columns rotated so that R has a
    positive diagonal.
    """
    z = (rng.standard_normal((count, dim, dim)) + 1j * rng.standard_normal((count, dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    ph = d / np.abs(d)
    return q * ph[:, None, :]


def random_unitary(dim: int, seed: int) -> np.ndarray:
    if dim < 1:
        raise InvalidInputError("dim must be at least 1")
    rng = np.random.default_rng(seed)
    return haar_unitaries(rng, 1, dim)[0]
