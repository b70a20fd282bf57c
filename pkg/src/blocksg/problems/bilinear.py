"""Bilinear logistic regression ``(1/N) sum log(1 + exp(-y (tr(U^T X V) + b)))``."""
from __future__ import annotations

import numpy as np

from ..core import LIPSCHITZ_FLOOR, BlockPartition, StochasticProblem
from .datasets import dense_read
from .linear import neg_sigmoid, squared_spectral_norm


class MatrixBatch:
    __slots__ = ("X", "y")

    def __init__(self, X: np.ndarray, y: np.ndarray):
        if X.shape[0] < 1:
            raise ValueError("empty batch")
        self.X = X
        self.y = y

    @property
    def size(self) -> int:
        return self.X.shape[0]


class BilinearLogisticProblem(StochasticProblem):
    """Blocks ``U`` (d1 x r), ``V`` (d2 x r) and the scalar bias ``b``.

    Factor Lipschitz constants are ``||J_U||_2^2 / (4m)`` with row ``l`` of
    ``J_U`` equal to ``vec(X_l V)`` (symmetrically for ``V``), and ``1/4`` for
    ``b``. ``lipschitz="frobenius"`` uses ``||J||_F^2`` instead.
    """

    def __init__(self, X, y, rank: int = 2, lipschitz: str = "spectral"):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).ravel()
        if X.ndim != 3:
            raise ValueError("samples must have shape (N, d1, d2)")
        if X.shape[0] != y.shape[0] or X.shape[0] < 1:
            raise ValueError("need one label per sample")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be +1 or -1")
        if rank < 1:
            raise ValueError("rank must be >= 1")
        if lipschitz not in ("spectral", "frobenius"):
            raise ValueError(f"unknown Lipschitz rule {lipschitz!r}")
        self.X, self.y = X, y
        self.d1, self.d2 = X.shape[1:]
        self.rank = int(rank)
        self.lipschitz_rule = lipschitz
        self._init_blocks(BlockPartition([self.d1 * self.rank, self.d2 * self.rank, 1]))
        self.n_samples = X.shape[0]
        self.finite_sum = True
        self._full = MatrixBatch(X, y)

    def unpack(self, x) -> tuple[np.ndarray, np.ndarray, float]:
        p = self.partition
        U = x[p.slice(0)].reshape((self.d1, self.rank), order="F")
        V = x[p.slice(1)].reshape((self.d2, self.rank), order="F")
        return U, V, float(x[p.slice(2)][0])

    def pack(self, U, V, b) -> np.ndarray:
        return np.concatenate([np.asarray(U, dtype=np.float64).ravel(order="F"),
                               np.asarray(V, dtype=np.float64).ravel(order="F"), [float(b)]])

    def scores(self, x, batch) -> np.ndarray:
        U, V, b = self.unpack(x)
        return np.einsum("lij,ir,jr->l", batch.X, U, V, optimize=True) + b

    def draw_batch(self, rng, m):
        if m < 1:
            raise ValueError("empty batch")
        idx = rng.integers(0, self.n_samples, size=m)
        return MatrixBatch(self.X[idx], self.y[idx])

    def full_batch(self):
        return self._full

    def batch_size(self, batch) -> int:
        return batch.size

    def sample_objective(self, x, batch) -> float:
        return float(np.mean(np.logaddexp(0.0, -batch.y * self.scores(x, batch))))

    def partial_gradient(self, i, x, batch):
        if not 0 <= i < 3:
            raise IndexError(f"block index {i} out of range for 3 blocks")
        U, V, _ = self.unpack(x)
        w = -batch.y * neg_sigmoid(batch.y * self.scores(x, batch)) / batch.size
        if i == 0:
            return np.einsum("l,lij,jr->ir", w, batch.X, V, optimize=True).ravel(order="F")
        if i == 1:
            return np.einsum("l,lij,ir->jr", w, batch.X, U, optimize=True).ravel(order="F")
        return np.array([w.sum()])

    def block_lipschitz(self, i, x, batch) -> float:
        if i == 2:
            return 0.25
        U, V, _ = self.unpack(x)
        if i == 0:
            J = np.einsum("lij,jr->lri", batch.X, V, optimize=True)
        elif i == 1:
            J = np.einsum("lij,ir->lrj", batch.X, U, optimize=True)
        else:
            raise IndexError(f"block index {i} out of range for 3 blocks")
        J = J.reshape(batch.size, -1)
        L = float(np.einsum("ij,ij->", J, J)) if self.lipschitz_rule == "frobenius" else squared_spectral_norm(J)
        return max(0.25 * L / batch.size, LIPSCHITZ_FLOOR)

    def accuracy(self, x) -> float:
        return float(np.mean(np.sign(self.scores(x, self._full)) == self.y))

    def metric(self, x) -> float:
        return self.accuracy(x)


def bilinear_synthetic(d1: int = 20, d2: int = 15, n_samples: int = 400, rank: int = 2, seed=None,
                       flip: float = 0.05, lipschitz: str = "spectral") -> BilinearLogisticProblem:
    """Gaussian matrix samples labelled by a planted rank-``rank`` bilinear score.

    A fraction ``flip`` of labels is flipped at random.
    """
    if min(d1, d2, n_samples, rank) < 1:
        raise ValueError("dimensions, sample count and rank must be positive")
    if not 0 <= flip < 0.5:
        raise ValueError("flip must lie in [0, 0.5)")
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((d1, rank))
    V = rng.standard_normal((d2, rank))
    X = rng.standard_normal((n_samples, d1, d2))
    s = np.einsum("lij,ir,jr->l", X, U, V, optimize=True)
    y = np.where(s >= 0, 1.0, -1.0)
    y[rng.random(n_samples) < flip] *= -1.0
    return BilinearLogisticProblem(X, y, rank=rank, lipschitz=lipschitz)


def bilinear_from_dense(path, rank: int = 2, lipschitz: str = "spectral") -> BilinearLogisticProblem:
    X, y = dense_read(path)
    return BilinearLogisticProblem(X, y, rank=rank, lipschitz=lipschitz)
