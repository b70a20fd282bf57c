"""Proximal maps, projections and the two block update rules."""
from __future__ import annotations

import numpy as np

from .core import ConstraintSet, Regularizer


def _as_vec(v) -> np.ndarray:
    return np.asarray(v, dtype=np.float64).ravel()


def _check_alpha(alpha: float) -> None:
    if not alpha > 0:
        raise ValueError(f"stepsize must be positive, got {alpha}")


def soft_threshold(v, tau: float) -> np.ndarray:
    """Proximal map of ``tau * ||.||_1``: ``sign(v) * max(|v| - tau, 0)``."""
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    v = _as_vec(v)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def prox(r: Regularizer, v, alpha: float) -> np.ndarray:
    """``prox_{alpha r}(v)``."""
    _check_alpha(alpha)
    v = _as_vec(v)
    if r.is_zero:
        return v.copy()
    return soft_threshold(v, alpha * r.weight)


def project(X: ConstraintSet, v) -> np.ndarray:
    """Euclidean projection onto ``X``."""
    v = _as_vec(v)
    X.check_dim(v)
    if X.kind == "all":
        return v.copy()
    if X.kind == "box":
        return np.minimum(np.maximum(v, X.lower), X.upper)
    d = v - X.center
    nrm = np.linalg.norm(d)
    if nrm <= X.radius:
        return v.copy()
    return X.center + d * (X.radius / nrm)


def project_subset(X: ConstraintSet, x_block, coords, values) -> np.ndarray:
    """Project ``values`` for ``x_block[coords]`` onto ``X`` with the other coordinates held fixed.

    ``x_block`` must be feasible. Returns the new values for ``coords`` only.
    """
    values = _as_vec(values)
    if X.kind == "all":
        return values.copy()
    if X.kind == "box":
        return np.minimum(np.maximum(values, X.lower[coords]), X.upper[coords])
    x_block = _as_vec(x_block)
    mask = np.ones(x_block.shape[0], dtype=bool)
    mask[coords] = False
    fixed = x_block[mask] - X.center[mask]
    r2 = X.radius * X.radius - float(fixed @ fixed)
    radius = np.sqrt(max(r2, 0.0))
    c = X.center[coords]
    d = values - c
    nrm = np.linalg.norm(d)
    if nrm <= radius:
        return values.copy()
    return c + d * (radius / nrm)


def prox_step(x_i, g, alpha: float, r: Regularizer) -> np.ndarray:
    """Proximal gradient block update.

    Solves ``argmin_x <g, x - x_i> + ||x - x_i||^2 / (2 alpha) + r(x)``,
    i.e. returns ``prox_{alpha r}(x_i - alpha g)``.
    """
    _check_alpha(alpha)
    x_i = _as_vec(x_i)
    g = _as_vec(g)
    if x_i.shape != g.shape:
        raise ValueError(f"dimension mismatch: block {x_i.shape[0]}, gradient {g.shape[0]}")
    return prox(r, x_i - alpha * g, alpha)


def projected_subgradient_step(x_i, g, r_sub, alpha: float, X: ConstraintSet) -> np.ndarray:
    """Constrained block update ``P_X(x_i - alpha (g + r_sub))``."""
    _check_alpha(alpha)
    x_i = _as_vec(x_i)
    g = _as_vec(g)
    r_sub = _as_vec(r_sub)
    if not (x_i.shape == g.shape == r_sub.shape):
        raise ValueError("dimension mismatch between block, gradient and subgradient")
    return project(X, x_i - alpha * (g + r_sub))


def block_update(x_i, g, alpha: float, r: Regularizer, X: ConstraintSet) -> np.ndarray:
    """Dispatch to the proximal rule for unconstrained blocks and the projected rule otherwise."""
    if X.is_whole_space:
        return prox_step(x_i, g, alpha, r)
    return projected_subgradient_step(x_i, g, r.subgradient(_as_vec(x_i)), alpha, X)


def gradient_mapping(x_before, x_after, alpha: float) -> np.ndarray:
    """``(x_before - x_after) / alpha``."""
    _check_alpha(alpha)
    return (_as_vec(x_before) - _as_vec(x_after)) / alpha


def uses_proximal_rule(X: ConstraintSet) -> bool:
    return X.is_whole_space
