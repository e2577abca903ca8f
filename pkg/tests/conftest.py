"""Shared test helpers, mostly the central finite-difference gradient check."""

from __future__ import annotations

import numpy as np

from tabdiffuse.tensor import Tensor


def numeric_grad(f, param: Tensor, h: float = 1e-5, coords=None) -> dict[int, float]:
    """Central-difference d f / d param[i] for flat indices ``coords``.

    ``f`` must be a deterministic closure returning a float; all state it
    reads other than ``param.data`` must stay fixed between calls.
    """
    flat = param.data.reshape(-1)
    if coords is None:
        coords = range(flat.size)
    out: dict[int, float] = {}
    for i in coords:
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        out[i] = (fp - fm) / (2.0 * h)
    return out


def max_rel_err(analytic: np.ndarray, numeric: dict[int, float]) -> float:
    """Worst relative error over the checked coordinates.

    The denominator is floored at 1e-4 so near-zero gradients are compared
    with an absolute tolerance of tol * 1e-4.
    """
    a = analytic.reshape(-1)
    worst = 0.0
    for i, n in numeric.items():
        denom = max(abs(a[i]), abs(n), 1e-4)
        worst = max(worst, abs(a[i] - n) / denom)
    return worst


def check_gradients(make_loss, params, tol: float = 1e-4, max_coords: int | None = None,
                    seed: int = 0) -> float:
    """Assert analytic gradients match central differences for all ``params``.

    ``make_loss`` returns a scalar Tensor; it is re-evaluated many times, so
    it must be deterministic.  When ``max_coords`` is set, a seeded random
    subset of coordinates per parameter is checked.
    """
    for p in params:
        p.grad = None
    loss = make_loss()
    loss.backward()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in params:
        assert p.grad is not None, "parameter received no gradient"
        n = p.data.size
        if max_coords is not None and n > max_coords:
            coords = sorted(rng.choice(n, size=max_coords, replace=False).tolist())
        else:
            coords = None
        num = numeric_grad(lambda: make_loss().item(), p, coords=coords)
        worst = max(worst, max_rel_err(p.grad, num))
    assert worst <= tol, f"gradient mismatch: max rel err {worst:.3e} > {tol}"
    return worst
