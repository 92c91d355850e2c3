"""Dense linear-algebra helpers for the small SPD matrices (n <= 5) used here."""

from __future__ import annotations

import numpy as np

__all__ = [
    "symmetrize",
    "check_finite",
    "cholesky_spd",
    "spd_inv",
    "spd_solve",
    "det_batch",
    "ensure_spd",
]

# Relative floor applied when repairing an indefinite matrix; far above the
# ~eps*|P| roundoff that rank-one downdates can leave behind, far below any
# test tolerance in this package.
_REPAIR_FLOOR = 1e-12


def symmetrize(mat: np.ndarray) -> np.ndarray:
    """Average a matrix with its transpose."""
    return 0.5 * (mat + mat.T)


def check_finite(arr: np.ndarray, name: str) -> None:
    """Raise ValueError if any entry is NaN or infinite."""
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite input: {name}")


def cholesky_spd(mat: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor; failure is the positive-definiteness test."""
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"{name} not positive definite") from exc


def spd_inv(mat: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Inverse of an SPD matrix via its Cholesky factor (Gram form keeps it SPD)."""
    inv_chol = np.linalg.inv(cholesky_spd(mat, name))
    return inv_chol.T @ inv_chol


def spd_solve(mat: np.ndarray, rhs: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Solve mat @ x = rhs for SPD mat."""
    chol = cholesky_spd(mat, name)
    return np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))


def det_batch(mats: np.ndarray) -> np.ndarray:
    """Determinants over leading axes, with closed forms for n <= 3."""
    n = mats.shape[-1]
    if n == 1:
        return mats[..., 0, 0]
    if n == 2:
        return mats[..., 0, 0] * mats[..., 1, 1] - mats[..., 0, 1] * mats[..., 1, 0]
    if n == 3:
        a, b, c = mats[..., 0, 0], mats[..., 0, 1], mats[..., 0, 2]
        d, e, f = mats[..., 1, 0], mats[..., 1, 1], mats[..., 1, 2]
        g, h, i = mats[..., 2, 0], mats[..., 2, 1], mats[..., 2, 2]
        return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    return np.linalg.det(mats)


def ensure_spd(mat: np.ndarray) -> np.ndarray:
    """Symmetrize and, only if a Cholesky probe fails, clip eigenvalues up.

    Rank-one covariance downdates with near-singular innovation scales can
    leave eigenvalues at -eps*|P| that exact arithmetic would keep positive;
    the clip restores definiteness at 1e-12 relative to the largest eigenvalue.
    """
    mat = symmetrize(mat)
    try:
        np.linalg.cholesky(mat)
        return mat
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(mat)
        floor = max(vals[-1], 0.0) * _REPAIR_FLOOR + np.finfo(float).tiny
        return (vecs * np.maximum(vals, floor)) @ vecs.T
