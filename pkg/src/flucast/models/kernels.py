"""RBF kernel evaluation and Gram matrices."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError


def rbf_kernel(x, x2, gamma: float) -> float:
    """exp(-gamma * ||x - x2||^2) for two equally sized vectors."""
    x = np.asarray(x, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x.shape != x2.shape or x.ndim != 1:
        raise DimensionError(f"kernel arguments differ in shape: {x.shape} vs {x2.shape}")
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    diff = x - x2
    return float(np.exp(-gamma * np.dot(diff, diff)))


def rbf_gram(rows, cols, gamma: float) -> np.ndarray:
    """Gram matrix K[i, j] = exp(-gamma * ||rows[i] - cols[j]||^2)."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    cols = np.atleast_2d(np.asarray(cols, dtype=np.float64))
    if rows.shape[1] != cols.shape[1]:
        raise DimensionError(
            f"feature dimensions differ: {rows.shape[1]} vs {cols.shape[1]}"
        )
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    sq = (
        np.sum(rows * rows, axis=1)[:, None]
        + np.sum(cols * cols, axis=1)[None, :]
        - 2.0 * (rows @ cols.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)
