"""Central finite-difference gradients for verifying the tape."""

from __future__ import annotations

from typing import Callable

import numpy as np


def numeric_grad(fn: Callable[[dict[str, np.ndarray]], float], params: dict[str, np.ndarray], step: float = 1e-5) -> dict[str, np.ndarray]:
    """Central differences of scalar ``fn(params)`` w.r.t. every entry."""
    work = {k: np.array(v, dtype=np.float64, copy=True) for k, v in params.items()}
    out = {}
    for name, arr in work.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for n in range(flat.size):
            orig = flat[n]
            flat[n] = orig + step
            up = fn(work)
            flat[n] = orig - step
            down = fn(work)
            flat[n] = orig
            gflat[n] = (up - down) / (2.0 * step)
        out[name] = g
    return out


def relative_error(analytic: dict[str, np.ndarray], numeric: dict[str, np.ndarray]) -> float:
    """``||a - n|| / max(||a||, ||n||)`` over all parameters stacked together."""
    a = np.concatenate([analytic[k].ravel() for k in sorted(analytic)])
    n = np.concatenate([numeric[k].ravel() for k in sorted(analytic)])
    denom = max(np.linalg.norm(a), np.linalg.norm(n))
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(a - n) / denom)
