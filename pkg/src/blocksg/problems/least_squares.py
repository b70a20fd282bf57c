"""Stochastic least squares ``min E (a^T x - b)^2 / 2`` with Gaussian data."""
from __future__ import annotations

import numpy as np

from ..core import BlockPartition, ConstraintSet
from ..prox import project
from .linear import LinearBatch, LinearModelProblem

DEFAULT_NOISE_STD = 0.1


class StreamingLeastSquares(LinearModelProblem):
    """Samples ``a ~ N(0, I_n)``, ``b = a^T x_hat + eta`` with ``eta ~ N(0, noise_std^2)``.

    The smooth objective is the population value
    ``||x - x_hat||^2 / 2 + noise_std^2 / 2``, so ``x_hat`` is optimal with
    value 0.005 at the default noise level. ``n_samples`` is the nominal
    sample count that defines one epoch.
    """

    def __init__(self, x_hat, noise_std: float = DEFAULT_NOISE_STD, n_samples: int = 1,
                 partition: BlockPartition | None = None, regularizers=None, constraints=None):
        x_hat = np.array(x_hat, dtype=np.float64).ravel()
        if noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        n = x_hat.shape[0]
        # a placeholder single sample keeps the base-class checks happy
        super().__init__(np.zeros((1, n)), np.zeros(1), "squared", partition, regularizers, constraints)
        self.features = self.target = None
        self.x_hat = x_hat
        self.noise_std = float(noise_std)
        self.n_samples = int(n_samples)
        self.finite_sum = False

    @property
    def dim(self) -> int:
        return self.x_hat.shape[0]

    @property
    def noise_floor(self) -> float:
        return 0.5 * self.noise_std ** 2

    def draw_batch(self, rng, m):
        if m < 1:
            raise ValueError("empty batch")
        a = rng.standard_normal((m, self.dim))
        b = a @ self.x_hat
        if self.noise_std > 0:
            b += self.noise_std * rng.standard_normal(m)
        return LinearBatch(a, b)

    def full_batch(self):
        raise NotImplementedError("streaming least squares has no stored finite sum")

    def smooth_objective(self, x) -> float:
        d = x - self.x_hat
        return 0.5 * float(d @ d) + self.noise_floor

    def full_gradient(self, x):
        return x - self.x_hat

    def full_partial_gradient(self, i, x):
        sl = self.partition.slice(i)
        return x[sl] - self.x_hat[sl]

    def full_block_lipschitz(self, i, x) -> float:
        return 1.0

    def optimum(self) -> np.ndarray:
        """Minimizer of the population objective over the constraint sets (no regularizer)."""
        if any(not r.is_zero for r in self.regularizers):
            raise NotImplementedError("closed-form optimum only without regularizers")
        x = self.x_hat.copy()
        for i, c in enumerate(self.constraints):
            sl = self.partition.slice(i)
            x[sl] = project(c, x[sl])
        return x

    def optimal_value(self) -> float:
        return self.objective(self.optimum())

    def metric(self, x) -> float:
        return float(np.linalg.norm(x - self.x_hat))

    def objective_info(self):
        return ("population", None)


class FiniteSumLeastSquares(LinearModelProblem):
    """``(1/2N) ||A x - b||^2`` over stored samples."""

    def __init__(self, features, target, partition=None, regularizers=None, constraints=None):
        super().__init__(features, target, "squared", partition, regularizers, constraints)

    def optimum(self) -> np.ndarray:
        if any(not r.is_zero for r in self.regularizers) or any(not c.is_whole_space for c in self.constraints):
            raise NotImplementedError("closed-form optimum only for the unconstrained, unregularized problem")
        return np.linalg.lstsq(self.features, self.target, rcond=None)[0]

    def hessian(self) -> np.ndarray:
        return self.features.T @ self.features / self.n_samples

    def strong_convexity(self) -> float:
        return float(np.linalg.eigvalsh(self.hessian())[0])


def ls_generate(n: int, seed: int | np.random.Generator | None = None, noise_std: float = DEFAULT_NOISE_STD,
                n_samples: int = 1, box: float | None = None) -> StreamingLeastSquares:
    """Draw ``x_hat ~ N(0, I_n)`` and return the streaming instance.

    ``box=beta`` adds the constraint ``|x_j| <= beta`` on every coordinate,
    which moves the optimum onto the boundary for entries with ``|x_hat_j| > beta``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    x_hat = rng.standard_normal(n)
    constraints = None
    if box is not None:
        if box < 0:
            raise ValueError("box half-width must be nonnegative")
        constraints = [ConstraintSet.box([-box], [box]) for _ in range(n)]
    return StreamingLeastSquares(x_hat, noise_std=noise_std, n_samples=n_samples, constraints=constraints)


def ls_finite_sum(n: int, n_samples: int, seed: int | np.random.Generator | None = None,
                  noise_std: float = DEFAULT_NOISE_STD, partition=None) -> FiniteSumLeastSquares:
    """Stored Gaussian design with ``b = A x_hat + eta``."""
    if n < 1 or n_samples < 1:
        raise ValueError("n and n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    x_hat = rng.standard_normal(n)
    A = rng.standard_normal((n_samples, n))
    b = A @ x_hat + noise_std * rng.standard_normal(n_samples)
    prob = FiniteSumLeastSquares(A, b, partition=partition)
    prob.x_hat = x_hat
    return prob


def empirical_losses(problem: StreamingLeastSquares, points, n_eval: int = 100_000,
                     seed: int | np.random.Generator | None = None, chunk: int = 10_000) -> np.ndarray:
    """Mean of ``(a^T x - b)^2 / 2`` over ``n_eval`` fresh samples for each point.

    All points are scored on the same fresh samples.
    """
    if n_eval < 1:
        raise ValueError("n_eval must be >= 1")
    rng = np.random.default_rng(seed)
    P = np.column_stack([np.asarray(p, dtype=np.float64).ravel() for p in points])
    total = np.zeros(P.shape[1])
    done = 0
    while done < n_eval:
        m = min(chunk, n_eval - done)
        batch = problem.draw_batch(rng, m)
        R = batch.features @ P - batch.target[:, None]
        total += 0.5 * np.einsum("ij,ij->j", R, R)
        done += m
    return total / n_eval


def empirical_loss(problem: StreamingLeastSquares, x, n_eval: int = 100_000, seed=None, chunk: int = 10_000) -> float:
    return float(empirical_losses(problem, [x], n_eval, seed, chunk)[0])
