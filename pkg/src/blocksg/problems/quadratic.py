"""Quadratic ``x^T Q x / 2 - c^T x`` with optional additive gradient noise."""
from __future__ import annotations

import numpy as np

from ..core import LIPSCHITZ_FLOOR, BlockPartition, StochasticProblem


class QuadraticProblem(StochasticProblem):
    """``F(x) = x^T Q x / 2 - c^T x + const`` for symmetric PSD ``Q``.

    A sample is a noise vector ``xi ~ N(0, noise^2 I)`` entering as
    ``f(x; xi) = F(x) - xi^T x``; a batch stores the mean noise. With
    ``noise=0`` the problem is a one-sample finite sum and every batch is exact.
    """

    def __init__(self, Q, c, partition: BlockPartition | None = None, const: float = 0.0,
                 noise: float = 0.0, regularizers=None, constraints=None):
        Q = np.array(Q, dtype=np.float64)
        c = np.array(c, dtype=np.float64).ravel()
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] != c.shape[0]:
            raise ValueError("Q must be square and match c")
        if not np.allclose(Q, Q.T):
            raise ValueError("Q must be symmetric")
        if noise < 0:
            raise ValueError("noise must be nonnegative")
        self.Q, self.c, self.const, self.noise = Q, c, float(const), float(noise)
        self._init_blocks(partition or BlockPartition([c.shape[0]]), regularizers, constraints)
        if self.partition.total != c.shape[0]:
            raise ValueError("partition does not match the dimension of Q")
        self.n_samples = 1
        self.finite_sum = noise == 0.0

    def draw_batch(self, rng, m):
        if m < 1:
            raise ValueError("empty batch")
        if self.noise == 0.0:
            return (np.zeros_like(self.c), m)
        return (self.noise * rng.standard_normal(self.c.shape[0]) / np.sqrt(m), m)

    def full_batch(self):
        if self.noise != 0.0:
            raise NotImplementedError("noisy quadratic has no stored finite sum")
        return (np.zeros_like(self.c), 1)

    def batch_size(self, batch) -> int:
        return batch[1]

    def sample_objective(self, x, batch) -> float:
        return 0.5 * float(x @ self.Q @ x) - float((self.c + batch[0]) @ x) + self.const

    def smooth_objective(self, x) -> float:
        return 0.5 * float(x @ self.Q @ x) - float(self.c @ x) + self.const

    def partial_gradient(self, i, x, batch):
        sl = self.partition.slice(i)
        return self.Q[sl] @ x - self.c[sl] - batch[0][sl]

    def gradient(self, x, batch):
        return self.Q @ x - self.c - batch[0]

    def subset_gradient(self, coords, x, batch):
        return self.Q[coords] @ x - self.c[coords] - batch[0][coords]

    def full_gradient(self, x):
        return self.Q @ x - self.c

    def full_partial_gradient(self, i, x):
        sl = self.partition.slice(i)
        return self.Q[sl] @ x - self.c[sl]

    def block_lipschitz(self, i, x, batch) -> float:
        sl = self.partition.slice(i)
        return max(float(np.linalg.norm(self.Q[sl, sl], 2)), LIPSCHITZ_FLOOR)

    def full_block_lipschitz(self, i, x) -> float:
        return self.block_lipschitz(i, x, None)

    def subset_lipschitz(self, coords, x, batch) -> float:
        coords = np.asarray(coords)
        return max(float(np.linalg.norm(self.Q[np.ix_(coords, coords)], 2)), LIPSCHITZ_FLOOR)

    def uniform_lipschitz(self) -> float:
        """``max_i ||Q[block_i, :]||_2``: Lipschitz constant of each partial gradient in the full ``x``."""
        return max(float(np.linalg.norm(self.Q[self.partition.slice(i)], 2)) for i in range(self.partition.n_blocks))

    def strong_convexity(self) -> float:
        return float(np.linalg.eigvalsh(self.Q)[0])

    def optimum(self) -> np.ndarray:
        if any(not r.is_zero for r in self.regularizers) or any(not c.is_whole_space for c in self.constraints):
            raise NotImplementedError("closed-form optimum only for the unconstrained, unregularized problem")
        return np.linalg.lstsq(self.Q, self.c, rcond=None)[0]


def random_quadratic(n: int, partition: BlockPartition | None = None, cond: float = 10.0, seed=None,
                     noise: float = 0.0) -> QuadraticProblem:
    """Random SPD quadratic with eigenvalues log-spaced in ``[1, cond]``."""
    if n < 1 or cond < 1:
        raise ValueError("need n >= 1 and cond >= 1")
    rng = np.random.default_rng(seed)
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = np.logspace(0.0, np.log10(cond), n)
    Q = (U * eig) @ U.T
    Q = 0.5 * (Q + Q.T)
    return QuadraticProblem(Q, rng.standard_normal(n), partition=partition, noise=noise)
