"""Shared machinery for problems whose loss depends on ``x`` through ``A x``."""
from __future__ import annotations

import numpy as np

from ..core import LIPSCHITZ_FLOOR, BlockPartition, StochasticProblem

LOSS_CODES = {"squared": 0, "logistic": 1}


def neg_sigmoid(t: np.ndarray) -> np.ndarray:
    """``1 / (1 + exp(t))`` evaluated without overflow."""
    e = np.exp(-np.abs(t))
    return np.where(t > 0, e / (1.0 + e), 1.0 / (1.0 + e))


def squared_spectral_norm(M: np.ndarray) -> float:
    """``||M||_2^2`` via the smaller Gram matrix."""
    if M.shape[1] == 1:
        return float(M[:, 0] @ M[:, 0])
    if M.shape[0] == 1:
        return float(M[0] @ M[0])
    G = M.T @ M if M.shape[0] >= M.shape[1] else M @ M.T
    return float(np.linalg.eigvalsh(G)[-1])


class LinearBatch:
    """Mini-batch of rows ``features`` (m x p) with targets (values or labels)."""

    __slots__ = ("features", "target", "_columns")

    def __init__(self, features: np.ndarray, target: np.ndarray):
        if features.shape[0] < 1:
            raise ValueError("empty batch")
        self.features = features
        self.target = target
        self._columns = None

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def columns(self) -> np.ndarray:
        """C-contiguous transpose, one row per feature."""
        if self._columns is None:
            self._columns = np.ascontiguousarray(self.features.T)
        return self._columns


class LinearModelProblem(StochasticProblem):
    """Finite-sum loss ``(1/N) sum_l f(a_l^T x; t_l)`` for squared or logistic ``f``.

    Squared: ``f = (a^T x - b)^2 / 2``. Logistic: ``f = log(1 + exp(-y a^T x))``.
    Any contiguous block partition works; coordinate blocks use the compiled sweep.
    """

    supports_linear_sweep = True

    def __init__(self, features, target, loss: str, partition: BlockPartition | None = None,
                 regularizers=None, constraints=None):
        if loss not in LOSS_CODES:
            raise ValueError(f"unknown loss {loss!r}")
        features = np.ascontiguousarray(features, dtype=np.float64)
        target = np.ascontiguousarray(target, dtype=np.float64).ravel()
        if features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if features.shape[0] != target.shape[0]:
            raise ValueError("need one target per sample")
        if features.shape[0] < 1:
            raise ValueError("a finite-sum problem needs at least one sample")
        if not np.all(np.isfinite(features)):
            raise ValueError("features must be finite")
        self.features = features
        self.target = target
        self.loss = loss
        self.loss_code = LOSS_CODES[loss]
        self._lip_scale = 1.0 if loss == "squared" else 0.25
        p = features.shape[1]
        self._init_blocks(partition or BlockPartition.coordinates(p), regularizers, constraints)
        if self.partition.total != p:
            raise ValueError(f"partition covers {self.partition.total} coordinates, features have {p}")
        self.n_samples = features.shape[0]
        self.finite_sum = True
        self._full = None

    # sampling ---------------------------------------------------------------
    def draw_batch(self, rng, m):
        if m < 1:
            raise ValueError("empty batch")
        idx = rng.integers(0, self.n_samples, size=m)
        return LinearBatch(self.features[idx], self.target[idx])

    def full_batch(self):
        if self._full is None:
            self._full = LinearBatch(self.features, self.target)
        return self._full

    def batch_size(self, batch) -> int:
        return batch.size

    # oracles ----------------------------------------------------------------
    def _loss_weights(self, z: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Derivative of ``f`` with respect to the linear score."""
        if self.loss_code == 0:
            return z - t
        return -t * neg_sigmoid(t * z)

    def sample_objective(self, x, batch) -> float:
        z = batch.features @ x
        if self.loss_code == 0:
            r = z - batch.target
            return 0.5 * float(r @ r) / batch.size
        return float(np.mean(np.logaddexp(0.0, -batch.target * z)))

    def _weights(self, x, batch) -> np.ndarray:
        return self._loss_weights(batch.features @ x, batch.target) / batch.size

    def partial_gradient(self, i, x, batch):
        sl = self.partition.slice(i)
        return batch.features[:, sl].T @ self._weights(x, batch)

    def gradient(self, x, batch):
        return batch.features.T @ self._weights(x, batch)

    def subset_gradient(self, coords, x, batch):
        return batch.features[:, coords].T @ self._weights(x, batch)

    def block_lipschitz(self, i, x, batch) -> float:
        sl = self.partition.slice(i)
        L = self._lip_scale * squared_spectral_norm(batch.features[:, sl]) / batch.size
        return max(L, LIPSCHITZ_FLOOR)

    def subset_lipschitz(self, coords, x, batch) -> float:
        L = self._lip_scale * squared_spectral_norm(batch.features[:, coords]) / batch.size
        return max(L, LIPSCHITZ_FLOOR)

    def lipschitz(self, x, batch) -> float:
        L = self._lip_scale * squared_spectral_norm(batch.features) / batch.size
        return max(L, LIPSCHITZ_FLOOR)

    def linear_sweep_data(self, batch):
        return batch.columns, batch.target, self.loss_code
