"""Pure-Python twin of the compiled coordinate sweep."""
from __future__ import annotations

import math

import numpy as np

LIPSCHITZ_FLOOR = 1e-12


def _sigmoid_neg(t: np.ndarray) -> np.ndarray:
    # 1 / (1 + exp(t)) without overflow
    e = np.exp(-np.abs(t))
    return np.where(t > 0, e / (1.0 + e), 1.0 / (1.0 + e))


def coordinate_sweep(cols, target, x, order, base_step, cap, lam, lower, upper, constrained, loss):
    """Gauss-Seidel pass over ``order`` for squared (0) or logistic (1) loss.

    ``cols[j]`` is feature column ``j`` of the batch. ``x`` is updated in
    place. Returns the first coordinate that produced a non-finite value, or -1.
    """
    m = cols.shape[1]
    inv_m = 1.0 / m
    work = cols.T @ x
    if loss == 0:
        work = work - target
    for j in order:
        col = cols[j]
        if loss == 0:
            g = float(col @ work) * inv_m
            L = float(col @ col) * inv_m
        else:
            g = -float(np.sum(target * col * _sigmoid_neg(target * work))) * inv_m
            L = float(col @ col) * 0.25 * inv_m
        L = max(L, LIPSCHITZ_FLOOR)
        alpha = min(base_step, 1.0 / L) if cap else base_step
        xj = x[j]
        if constrained[j]:
            sub = lam[j] if xj > 0 else (-lam[j] if xj < 0 else 0.0)
            v = min(max(xj - alpha * (g + sub), lower[j]), upper[j])
        else:
            v = xj - alpha * g
            thr = alpha * lam[j]
            if thr > 0:
                v = v - thr if v > thr else (v + thr if v < -thr else 0.0)
        if not (math.isfinite(v) and math.isfinite(g)):
            return int(j)
        delta = v - xj
        x[j] = v
        if delta != 0.0:
            work += delta * col
    return -1
