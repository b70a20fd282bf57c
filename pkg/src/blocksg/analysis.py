"""Convergence constants, rate bounds, rate fitting and Monte-Carlo diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import LIPSCHITZ_FLOOR, StochasticProblem
from .prox import block_update, project, soft_threshold


@dataclass(frozen=True)
class AnalysisConstants:
    """Problem and method constants entering the rate bounds.

    Parameters
    ----------
    A : float
        Bias slope: ``||E[delta_i^k | past]|| <= A * max_j alpha_j^k``.
    sigma : float
        Uniform bound on ``sqrt(E ||delta_i^k||^2)``.
    L : float
        Lipschitz constant of every partial gradient of ``F`` in the full variable.
    rho : float
        Bound on ``sqrt(E ||x^k||^2)``.
    L_r : tuple of float
        Lipschitz constants of the regularizers, one per block.
    grad0_max : float
        ``max_i ||grad_i F(0)||``.
    x_star_norm : float
        ``||x*||``.
    theta : float
        Stepsize scale.
    mu : float
        Strong convexity modulus (0 if not strongly convex).
    """

    A: float = 0.0
    sigma: float = 0.0
    L: float = 1.0
    rho: float = 0.0
    L_r: tuple = (0.0,)
    grad0_max: float = 0.0
    x_star_norm: float = 0.0
    theta: float = 0.1
    mu: float = 0.0
    s: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "L_r", tuple(float(v) for v in self.L_r))
        if not self.L_r:
            raise ValueError("need at least one block")
        object.__setattr__(self, "s", len(self.L_r))
        for name in ("A", "sigma", "L", "rho", "grad0_max", "x_star_norm", "theta", "mu"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if any(v < 0 for v in self.L_r):
            raise ValueError("regularizer Lipschitz constants must be nonnegative")

    @property
    def L_max(self) -> float:
        return max(self.L_r)

    @property
    def M_rho(self) -> float:
        """``sqrt(4 L^2 rho^2 + 2 max_i ||grad_i F(0)||^2)``: bound on the partial-gradient norms."""
        return math.sqrt(4.0 * self.L ** 2 * self.rho ** 2 + 2.0 * self.grad0_max ** 2)


def bound_constant_D(c: AnalysisConstants, sigma_k: float | None = None) -> float:
    """Constant ``D`` of the convex rate bounds.

    ``D = s (sigma^2 + 4 L_max^2) / (1 - L theta)
    + sqrt(s) (||x*|| + rho) (A + L sqrt(sum_j 4 M^2 + 4 sigma_k^2 + 2 L_rj^2))``.
    ``sigma_k`` defaults to ``c.sigma``.
    """
    if c.L * c.theta >= 1.0:
        raise ValueError(f"L * theta = {c.L * c.theta:.6g} must be < 1")
    sk = c.sigma if sigma_k is None else float(sigma_k)
    if sk < 0:
        raise ValueError("sigma_k must be nonnegative")
    s = c.s
    M = c.M_rho
    radical = math.sqrt(sum(4.0 * M * M + 4.0 * sk * sk + 2.0 * lr * lr for lr in c.L_r))
    first = s * (c.sigma ** 2 + 4.0 * c.L_max ** 2) / (1.0 - c.L * c.theta)
    second = math.sqrt(s) * (c.x_star_norm + c.rho) * (c.A + c.L * radical)
    return first + second


def _check_K(K) -> None:
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")


def rate_bound_general_convex(c: AnalysisConstants, K: int, x_init_dist: float, sigma_k: float | None = None) -> float:
    """Ergodic gap bound for constant steps ``theta / sqrt(K)``: ``D theta / sqrt(K) + dist^2 / (2 theta sqrt(K))``."""
    _check_K(K)
    D = bound_constant_D(c, sigma_k)
    rk = math.sqrt(K)
    return D * c.theta / rk + x_init_dist ** 2 / (2.0 * c.theta * rk)


def rate_bound_diminishing(c: AnalysisConstants, K: int, x_init_dist: float, sigma_k: float | None = None) -> float:
    """Ergodic gap bound for ``theta / sqrt(k)`` steps: ``D theta (1 + log K) / sqrt(1 + K) + dist^2 / (2 theta sqrt(1 + K))``."""
    _check_K(K)
    D = bound_constant_D(c, sigma_k)
    r = math.sqrt(1.0 + K)
    return D * c.theta * (1.0 + math.log(K)) / r + x_init_dist ** 2 / (2.0 * c.theta * r)


def optimal_theta(c: AnalysisConstants, x_init_dist: float, sigma_k: float | None = None) -> float:
    """``theta = dist / sqrt(2 D)`` minimizing the fixed-horizon bound for fixed ``D``."""
    D = bound_constant_D(c, sigma_k)
    return x_init_dist / math.sqrt(2.0 * D)


def optimal_rate_bound(c: AnalysisConstants, K: int, x_init_dist: float, sigma_k: float | None = None) -> float:
    """``sqrt(2 D) dist / sqrt(K)``."""
    _check_K(K)
    D = bound_constant_D(c, sigma_k)
    return math.sqrt(2.0 * D) * x_init_dist / math.sqrt(K)


def rate_bound_strongly_convex(c: AnalysisConstants, k: int, x_init_dist: float, sigma_k: float | None = None) -> float:
    """``E ||x^k - x*||^2 <= max(2 D theta (1 + mu theta) / mu, dist^2) / k`` for ``theta / k`` steps."""
    if c.mu <= 0:
        raise ValueError("strong convexity modulus mu must be positive")
    _check_K(k)
    D = bound_constant_D(c, sigma_k)
    return max(2.0 * D * c.theta * (1.0 + c.mu * c.theta) / c.mu, x_init_dist ** 2) / k


def gamma_nu(c: AnalysisConstants, alpha: float) -> tuple[float, float]:
    """``(gamma, nu)`` for constant stepsize ``alpha`` using ``c.L``, ``c.mu`` and ``c.s``."""
    return gamma_nu_values(c.L, c.mu, c.s, alpha)


def gamma_nu_values(L: float, mu: float, s: int, alpha: float) -> tuple[float, float]:
    """Contraction parameters for constant stepsize ``alpha`` in ``(0, 2/L)``.

    ``gamma = (3L/mu^2)(1/alpha^2 + s L^2) / (1/(2 alpha) - L/4)`` and
    ``nu = gamma alpha / (2 - L alpha) + 3L/mu^2``. The expected gap contracts
    by ``gamma / (1 + gamma)`` per iteration when there is no gradient noise.
    """
    if L <= 0 or mu <= 0:
        raise ValueError("L and mu must be positive")
    if s < 1:
        raise ValueError("s must be >= 1")
    if not 0 < alpha < 2.0 / L:
        raise ValueError(f"alpha={alpha} must lie in (0, 2/L) = (0, {2.0 / L})")
    pre = 3.0 * L / mu ** 2
    gamma = pre * (1.0 / alpha ** 2 + s * L ** 2) / (1.0 / (2.0 * alpha) - L / 4.0)
    nu = gamma * alpha / (2.0 - L * alpha) + pre
    return gamma, nu


def contraction_factor(L: float, mu: float, s: int, alpha: float) -> float:
    gamma, _ = gamma_nu_values(L, mu, s, alpha)
    return gamma / (1.0 + gamma)


@dataclass(frozen=True)
class RecursionCheck:
    holds: bool
    c: float
    worst_ratio: float
    k_start: int


def recursion_constant(a: float, b: float, A1: float) -> float:
    """``c = 2b/(a-1)`` if ``a > 1`` else ``max(b/a, A1)``."""
    return 2.0 * b / (a - 1.0) if a > 1.0 else max(b / a, A1)


def check_recursion_bound(a: float, b: float, A1: float, k_max: int = 100_000) -> RecursionCheck:
    """Check ``A_k <= c/k`` for ``k in [floor(a)+1, k_max]`` along the worst admissible sequence.

    The sequence obeys ``A_{k+1} = (1 - a/k) A_k + b/k^2`` whenever the factor
    is nonnegative. While ``1 - a/k < 0`` the largest value a nonnegative
    sequence can take is ``b/k^2``, which is used instead. Every nonnegative
    sequence satisfying the inequality is dominated by this one from
    ``k = floor(a) + 1`` on.
    """
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    if A1 < 0:
        raise ValueError("A1 must be nonnegative")
    k0 = int(math.floor(a)) + 1
    if k_max < k0:
        raise ValueError(f"k_max must be >= floor(a)+1 = {k0}")
    c = recursion_constant(a, b, A1)
    A = float(A1)
    worst = A * 1.0 / c if k0 <= 1 else 0.0
    for k in range(1, k_max):
        f = 1.0 - a / k
        A = f * A + b / (k * k) if f >= 0 else b / (k * k)
        if k + 1 >= k0:
            worst = max(worst, A * (k + 1) / c)
    return RecursionCheck(worst <= 1.0 + 1e-12, c, worst, k0)


# Monte-Carlo gradient error ------------------------------------------------------


@dataclass(frozen=True)
class BiasVariance:
    bias_norm: float
    second_moment: float
    bias: np.ndarray
    n_trials: int


def estimate_bias_variance(problem: StochasticProblem, x, block: int, stepsizes, n_trials: int = 10_000,
                           batch_size: int = 1, order=None, seed=None, full_batch: bool = False) -> BiasVariance:
    """Mean and second moment of the gradient error ``delta_i = g~_i - grad_i F`` at a frozen state.

    Each trial draws a batch, applies the Gauss-Seidel updates of the blocks
    preceding ``block`` in ``order`` with stepsizes ``stepsizes[j]``, then
    compares the sampled partial gradient of ``block`` with the exact one at
    the same partially updated point.
    """
    if n_trials < 1000:
        raise ValueError("n_trials must be >= 1000 for a meaningful estimate")
    part = problem.partition
    s = part.n_blocks
    order = np.arange(s) if order is None else np.asarray(order)
    if sorted(order.tolist()) != list(range(s)):
        raise ValueError("order must be a permutation of the blocks")
    stepsizes = np.broadcast_to(np.asarray(stepsizes, dtype=np.float64), (s,))
    if np.any(stepsizes <= 0):
        raise ValueError("stepsizes must be positive")
    pos = int(np.nonzero(order == block)[0][0])
    preceding = order[:pos]
    x0 = np.array(x, dtype=np.float64)
    rng = np.random.default_rng(seed)
    sl = part.slice(block)
    total = np.zeros(sl.stop - sl.start)
    sq = 0.0
    for _ in range(n_trials):
        batch = problem.full_batch() if full_batch else problem.draw_batch(rng, batch_size)
        y = x0.copy()
        for j in preceding:
            j = int(j)
            sj = part.slice(j)
            g = problem.partial_gradient(j, y, batch)
            y[sj] = block_update(y[sj], g, float(stepsizes[j]), problem.regularizers[j], problem.constraints[j])
        d = problem.partial_gradient(block, y, batch) - problem.full_partial_gradient(block, y)
        total += d
        sq += float(d @ d)
    mean = total / n_trials
    return BiasVariance(float(np.linalg.norm(mean)), sq / n_trials, mean, n_trials)


# rates ----------------------------------------------------------------------------


def fit_rate_slope(points, tail: float = 1.0) -> float:
    """Least-squares slope of ``log gap`` against ``log k``.

    ``points`` is a sequence of ``(k, gap)``; ``tail`` keeps only the last
    fraction of the points (0.5 skips the transient first half).
    """
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("points must be (k, gap) pairs")
    if not 0 < tail <= 1:
        raise ValueError("tail must lie in (0, 1]")
    arr = arr[int(math.floor((1.0 - tail) * arr.shape[0])):]
    if arr.shape[0] < 10:
        raise ValueError("need at least 10 points to fit a rate")
    if np.any(arr[:, 1] <= 0):
        raise ValueError("nonpositive gap: the reference optimal value is probably wrong")
    if np.any(arr[:, 0] <= 0):
        raise ValueError("iteration counts must be positive")
    lk, lg = np.log(arr[:, 0]), np.log(arr[:, 1])
    slope, _ = np.polyfit(lk, lg, 1)
    return float(slope)


# stationarity ---------------------------------------------------------------------


def _min_norm_block(g: np.ndarray, x: np.ndarray, reg, con) -> np.ndarray:
    if con.is_whole_space:
        if reg.is_zero:
            return g
        lam = reg.weight
        return np.where(x != 0, g + lam * np.sign(x), np.sign(g) * np.maximum(np.abs(g) - lam, 0.0))
    if con.kind == "box":
        at_lo = x <= con.lower
        at_hi = x >= con.upper
        out = g.copy()
        out = np.where(at_lo & ~at_hi, np.minimum(g, 0.0), out)
        out = np.where(at_hi & ~at_lo, np.maximum(g, 0.0), out)
        return np.where(at_lo & at_hi, 0.0, out)
    d = x - con.center
    nrm = float(np.linalg.norm(d))
    if nrm < con.radius * (1.0 - 1e-12) or nrm == 0.0:
        return g
    u = d / nrm
    return g + max(0.0, -float(g @ u)) * u


def stationarity_measure(problem: StochasticProblem, x, gradient=None) -> float:
    """Distance from 0 to ``grad F(x) + sum_i d r^_i(x_i)``.

    ``r^_i`` is the regularizer on unconstrained blocks and the indicator of
    ``X_i`` on constrained ones. Computed per block in closed form.
    """
    x = np.asarray(x, dtype=np.float64)
    if gradient is None:
        try:
            gradient = problem.full_gradient(x)
        except NotImplementedError as exc:
            raise ValueError(f"stationarity needs a full-gradient oracle: {exc}") from exc
    gradient = np.asarray(gradient, dtype=np.float64)
    part = problem.partition
    sq = 0.0
    for i in range(part.n_blocks):
        sl = part.slice(i)
        v = _min_norm_block(gradient[sl], x[sl], problem.regularizers[i], problem.constraints[i])
        sq += float(v @ v)
    return math.sqrt(sq)


# deterministic reference ---------------------------------------------------------


def composite_prox(problem: StochasticProblem, v: np.ndarray, alpha: float) -> np.ndarray:
    """Prox of ``alpha * sum_i (r_i + indicator of X_i)`` for separable pieces."""
    part = problem.partition
    out = np.empty_like(v)
    for i in range(part.n_blocks):
        sl = part.slice(i)
        r, c = problem.regularizers[i], problem.constraints[i]
        w = v[sl] if r.is_zero else soft_threshold(v[sl], alpha * r.weight)
        if c.kind == "ball" and not r.is_zero:
            raise NotImplementedError("prox of l1 plus a ball has no closed form here")
        out[sl] = w if c.is_whole_space else project(c, w)
    return out


@dataclass(frozen=True)
class ReferenceSolution:
    x: np.ndarray
    value: float
    iterations: int


def fista_reference(problem: StochasticProblem, x0=None, iterations: int = 5000, tol: float = 0.0,
                    lipschitz: float | None = None) -> ReferenceSolution:
    """Accelerated proximal gradient on the full objective, used for ``Phi*``.

    Needs ``full_gradient``; ``lipschitz`` defaults to the full-batch constant
    of the problem. Stops early when the iterate moves less than ``tol``.
    """
    if not problem.has_full_gradient:
        raise ValueError("FISTA needs a full-gradient oracle")
    n = problem.partition.total
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    if lipschitz is None:
        lipschitz = problem.lipschitz(x, problem.full_batch())
    step = 1.0 / max(lipschitz, LIPSCHITZ_FLOOR)
    y = x.copy()
    t = 1.0
    best_x, best_val = x.copy(), problem.objective(x)
    it = 0
    for it in range(1, iterations + 1):
        x_new = composite_prox(problem, y - step * problem.full_gradient(y), step)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        moved = float(np.linalg.norm(x_new - x))
        x, t = x_new, t_new
        if tol > 0 and moved <= tol * max(1.0, float(np.linalg.norm(x))):
            break
    val = problem.objective(x)
    if val < best_val:
        best_x, best_val = x, val
    return ReferenceSolution(best_x, best_val, it)


def least_squares_constants(problem, theta: float, rho: float, A: float = 0.0, sigma: float = 0.0,
                            mu: float | None = None) -> AnalysisConstants:
    """Constants for the streaming least-squares instance (population Hessian ``I``).

    ``L = 1`` and ``mu = 1``; ``grad_i F(0) = -x_hat_i``; ``x*`` is the
    constrained optimum. ``A``, ``sigma`` and ``rho`` come from measurements.
    """
    part = problem.partition
    x_star = problem.optimum()
    g0 = max(float(np.linalg.norm(problem.x_hat[part.slice(i)])) for i in range(part.n_blocks))
    L_r = [r.lipschitz_const(part.dims[i]) for i, r in enumerate(problem.regularizers)]
    return AnalysisConstants(A=A, sigma=sigma, L=1.0, rho=rho, L_r=tuple(L_r), grad0_max=g0,
                             x_star_norm=float(np.linalg.norm(x_star)), theta=theta,
                             mu=1.0 if mu is None else mu)
