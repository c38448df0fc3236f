"""Dense linear-algebra kernels shared by every other module.

Matrices are plain ``float64`` numpy arrays; :func:`as_matrix` is the single
entry point that validates shape and finiteness.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, SvdConvergenceError, ValidationError

__all__ = [
    "SvdResult",
    "as_matrix",
    "as_vector",
    "condition_number",
    "dct_basis",
    "matrix_digest",
    "svd",
]


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return `a` as a finite 2-D float64 array with at least one row and column."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must have at least one row and column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains NaN or Inf")
    return arr


def as_vector(v, name: str = "vector", length: int | None = None) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise DimensionError(f"{name} must have length {length}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains NaN or Inf")
    return arr


def matrix_digest(a: np.ndarray) -> str:
    """Short content hash of a matrix (shape and column-major bytes)."""
    a = np.asarray(a, dtype="<f8")
    h = hashlib.sha256()
    h.update(np.asarray(a.shape, dtype="<u4").tobytes())
    h.update(np.asfortranarray(a).tobytes(order="F"))
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class SvdResult:
    """Economy SVD ``a = u @ diag(sigma) @ v.T``.

    ``u`` is d x r, ``v`` is n x r with r = min(d, n); ``sigma`` is sorted
    descending.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def rank_dim(self) -> int:
        return self.sigma.shape[0]

    def recompose(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T


def _fix_signs(u: np.ndarray, vt: np.ndarray) -> None:
    # Largest-magnitude entry of each left singular vector made positive;
    # argmax picks the first index on ties, which keeps this deterministic.
    idx = np.argmax(np.abs(u), axis=0)
    flip = u[idx, np.arange(u.shape[1])] < 0
    u[:, flip] *= -1.0
    vt[flip, :] *= -1.0


def svd(a) -> SvdResult:
    """Economy SVD with a deterministic sign convention.

    LAPACK's divide-and-conquer driver is tried first and the QR-iteration
    driver is used as a fallback; if both fail to converge
    :class:`SvdConvergenceError` is raised.
    """
    a = as_matrix(a)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError:
        try:
            u, s, vt = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise SvdConvergenceError(f"SVD did not converge for {a.shape} matrix") from exc
    u = np.array(u, order="F")
    vt = np.array(vt)
    _fix_signs(u, vt)
    return SvdResult(u=u, sigma=np.maximum(s, 0.0), v=np.ascontiguousarray(vt.T))


def condition_number(a) -> float:
    """Ratio of extreme singular values; ``inf`` when the smallest one is zero."""
    sigma = svd(a).sigma
    smax, smin = sigma[0], sigma[-1]
    if smax == 0.0:
        raise ValidationError("condition number of the zero matrix is undefined")
    if smin < smax * 1e-300:
        return float("inf")
    return float(smax / smin)


def dct_basis(d: int) -> np.ndarray:
    """Orthonormal type-II DCT synthesis matrix; column k is the k-th cosine atom."""
    if d < 1:
        raise ValidationError(f"d must be >= 1, got {d}")
    i = np.arange(d)[:, None]
    k = np.arange(d)[None, :]
    psi = np.cos(np.pi * (2 * i + 1) * k / (2 * d))
    scale = np.full(d, np.sqrt(2.0 / d))
    scale[0] = np.sqrt(1.0 / d)
    return psi * scale
