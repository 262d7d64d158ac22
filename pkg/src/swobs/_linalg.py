"""Small shared linear-algebra helpers."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionError


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {M.shape}")
    return M


def as_square(M, name: str = "matrix") -> np.ndarray:
    M = as_matrix(M, name)
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {M.shape}")
    return M


def frob(M) -> float:
    return float(np.linalg.norm(M, "fro")) if np.size(M) else 0.0


def skew_defect(M: np.ndarray) -> float:
    """Frobenius norm of M + M^T (zero iff M is skew-symmetric)."""
    return frob(M + M.T)


def numerical_rank(M: np.ndarray) -> int:
    """Rank by singular-value count with the max(m, n) * eps * sigma_max cutoff."""
    if min(M.shape) == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > max(M.shape) * np.finfo(float).eps * s[0]))


def stacked_observability(C: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Stack C, CA, ..., CA^(n-1) row-block-wise."""
    n = A.shape[0]
    blocks = [C]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


def spectrum_match_error(achieved, desired) -> float:
    """Largest eigenvalue mismatch under an optimal one-to-one pairing.

    Both inputs are flat complex sequences of equal length; the pairing is
    chosen to minimise the total absolute mismatch.
    """
    a = np.asarray(achieved, dtype=complex).ravel()
    d = np.asarray(desired, dtype=complex).ravel()
    if a.shape != d.shape:
        raise DimensionError(f"spectra of different sizes: {a.shape} vs {d.shape}")
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - d[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())
