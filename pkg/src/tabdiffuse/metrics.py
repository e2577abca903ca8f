"""Imputation and downstream-task metrics.

Imputation metrics are computed over the missing entries only, so they are
invariant to whatever an imputer stores at known cells.
"""

from __future__ import annotations

import numpy as np


def mse_missing(x_true: np.ndarray, x_hat: np.ndarray, mask: np.ndarray) -> float:
    """Mean squared error over the missing entries (mask True = known)."""
    miss = ~np.asarray(mask, dtype=bool)
    if not miss.any():
        raise ValueError("no missing entries to score")
    d = np.asarray(x_true)[miss] - np.asarray(x_hat)[miss]
    return float(np.mean(d * d))


def pearson_missing(x_true: np.ndarray, x_hat: np.ndarray, mask: np.ndarray) -> float:
    """Centered linear correlation between truth and imputation at missing cells."""
    miss = ~np.asarray(mask, dtype=bool)
    if miss.sum() < 2:
        raise ValueError("need at least 2 missing entries")
    a = np.asarray(x_true)[miss].astype(np.float64)
    b = np.asarray(x_hat)[miss].astype(np.float64)
    ac, bc = a - a.mean(), b - b.mean()
    denom = np.sqrt((ac * ac).sum()) * np.sqrt((bc * bc).sum())
    if denom == 0.0:
        raise ValueError("correlation undefined: zero variance on one side")
    return float(np.clip((ac * bc).sum() / denom, -1.0, 1.0))


def rmse(y: np.ndarray, y_hat: np.ndarray) -> float:
    y, y_hat = np.asarray(y, dtype=np.float64), np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.size == 0:
        raise ValueError("rmse needs two equal-length nonempty vectors")
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


def accuracy(y: np.ndarray, y_hat: np.ndarray) -> float:
    y, y_hat = np.asarray(y), np.asarray(y_hat)
    if y.shape != y_hat.shape or y.size == 0:
        raise ValueError("accuracy needs two equal-length nonempty vectors")
    return float(np.mean(y == y_hat))
