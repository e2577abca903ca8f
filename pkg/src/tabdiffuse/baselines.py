"""Non-learned imputers used as comparators.

Column statistics (mean, median, mode) always come from a complete training
context, never from the test table being filled.  Known entries pass
through untouched for every method.
"""

from __future__ import annotations

import numpy as np

BASELINE_KINDS = ("mean", "median", "mode", "const0", "const1", "locf", "nocb")


class BaselineError(ValueError):
    """Requested fill is undefined for this mask (e.g. next-value fill on a
    fully missing column)."""


def _column_mode(col: np.ndarray) -> float:
    values, counts = np.unique(col, return_counts=True)
    return float(values[np.argmax(counts)])  # ties resolve to the smallest value


def _fill_directional(x: np.ndarray, mask: np.ndarray, fallback: np.ndarray,
                      downward: bool, strict: bool) -> np.ndarray:
    """Carry observed values down (or up) each column.

    Cells before the first observation in scan order take the fallback
    column statistic; ``strict`` instead rejects columns with nothing to
    carry at all.
    """
    out = x.copy()
    n_rows, n_cols = x.shape
    rows = range(n_rows) if downward else range(n_rows - 1, -1, -1)
    for j in range(n_cols):
        if strict and not mask[:, j].any():
            direction = "previous" if downward else "next"
            raise BaselineError(f"column {j} is fully missing; no {direction} value to carry")
        last = None
        for i in rows:
            if mask[i, j]:
                last = x[i, j]
            else:
                out[i, j] = fallback[j] if last is None else last
    return out


def baseline_impute(kind: str, x_obs: np.ndarray, mask: np.ndarray,
                    train_context: np.ndarray) -> np.ndarray:
    """Fill the masked entries of ``x_obs`` with a non-learned rule.

    ``mask`` is True at known cells; ``train_context`` is the complete
    training table providing the column statistics.
    """
    if kind not in BASELINE_KINDS:
        raise ValueError(f"unknown baseline {kind!r}")
    x_obs = np.asarray(x_obs, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    train_context = np.asarray(train_context, dtype=np.float64)
    if x_obs.shape != mask.shape:
        raise ValueError("observations and mask must share a shape")
    if train_context.shape[1] != x_obs.shape[1]:
        raise ValueError("training context must have the same columns")

    means = train_context.mean(axis=0)
    if kind == "mean":
        fill = means
    elif kind == "median":
        fill = np.median(train_context, axis=0)
    elif kind == "mode":
        fill = np.array([_column_mode(train_context[:, j]) for j in range(x_obs.shape[1])])
    elif kind == "const0":
        fill = np.zeros(x_obs.shape[1])
    elif kind == "const1":
        fill = np.ones(x_obs.shape[1])
    elif kind == "locf":
        return _fill_directional(x_obs, mask, means, downward=True, strict=False)
    else:  # nocb: rejected when a column has no successor to carry back
        return _fill_directional(x_obs, mask, means, downward=False, strict=True)

    out = x_obs.copy()
    out[~mask] = np.broadcast_to(fill, x_obs.shape)[~mask]
    return out
