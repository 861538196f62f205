"""Dense-matrix primitives shared by every solver in the package.

Everything operates on plain float64 numpy arrays. A "mask" is a boolean
array of the same shape as the matrix it selects from.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg


class SvdConvergenceError(RuntimeError):
    """Raised when no SVD backend converges on the given matrix."""


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Validate and convert *x* to a finite 2-D float64 array."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError(f"{name} contains non-finite entries")
    return a


def as_mask(x, name: str = "mask") -> np.ndarray:
    """Validate and convert *x* to a 2-D boolean array (entries 0/1)."""
    a = np.asarray(x)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if a.dtype != np.bool_:
        vals = np.unique(a)
        if not np.isin(vals, (0, 1)).all():
            raise ValueError(f"{name} entries must be 0 or 1")
        a = a.astype(bool)
    return a


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def project_on(mask, x) -> np.ndarray:
    """Keep entries of *x* where *mask* is set, zero elsewhere."""
    m = as_mask(mask)
    a = as_matrix(x)
    _check_same_shape(m, a)
    return np.where(m, a, 0.0)


def project_off(mask, x) -> np.ndarray:
    """Keep entries of *x* where *mask* is clear, zero elsewhere.

    ``project_on(m, x) + project_off(m, x) == x`` holds exactly.
    """
    m = as_mask(mask)
    a = as_matrix(x)
    _check_same_shape(m, a)
    return np.where(m, 0.0, a)


def norm(x, kind: str) -> float:
    """Matrix norm: ``l0`` (nonzero count), ``l1``, ``frobenius`` or ``nuclear``."""
    a = as_matrix(x)
    if kind == "l0":
        return float(np.count_nonzero(a))
    if kind == "l1":
        return float(np.abs(a).sum())
    if kind == "frobenius":
        return float(np.sqrt((a * a).sum()))
    if kind == "nuclear":
        return float(svd(a).sigma.sum())
    raise ValueError(f"unknown norm kind {kind!r}")


class SvdFactors(NamedTuple):
    """Thin SVD ``u @ diag(sigma) @ v.T`` with descending nonnegative sigma."""

    u: np.ndarray       # (m, r)
    sigma: np.ndarray   # (r,)
    v: np.ndarray       # (n, r)


def svd(x) -> SvdFactors:
    """Thin SVD with r = min(m, n).

    Uses LAPACK's divide-and-conquer driver and falls back to the slower but
    more robust gesvd driver if it fails to converge; if both fail an
    :class:`SvdConvergenceError` is raised.
    """
    a = as_matrix(x)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError:
        try:
            u, s, vt = scipy.linalg.svd(a, full_matrices=False,
                                        lapack_driver="gesvd")
        except scipy.linalg.LinAlgError as exc:
            raise SvdConvergenceError(
                f"SVD failed to converge on {a.shape} matrix "
                f"(both gesdd and gesvd drivers)") from exc
    return SvdFactors(u=u, sigma=s, v=vt.T)


def svt(z, alpha: float) -> np.ndarray:
    """Singular-value thresholding: shrink every singular value by *alpha*.

    Returns the minimizer of ``0.5 * ||z - x||_F^2 + alpha * ||x||_*``.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    u, s, v = svd(z)
    shrunk = np.maximum(s - alpha, 0.0)
    return (u * shrunk) @ v.T


def rank_from_sigma(sigma: np.ndarray, tol: float = 1e-10) -> int:
    """Number of singular values above *tol*."""
    return int(np.count_nonzero(np.asarray(sigma) > tol))
