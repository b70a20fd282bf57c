"""Low-rank tensor recovery from dense Gaussian linear measurements.

Minimizes ``(1/2N) sum_l (<G_l, [[X1, X2, X3]]> - b_l)^2 + lam * sum_d ||X_d||_1``
over CP factor matrices, each stored column-major in its own block.
"""
from __future__ import annotations

import numpy as np

from ..core import LIPSCHITZ_FLOOR, BlockPartition, Regularizer, StochasticProblem
from .linear import squared_spectral_norm

# einsum specs contracting a (batch, I1, I2, I3) array with the two other factors
_CONTRACT = {
    0: "lijk,jr,kr->lir",
    1: "lijk,ir,kr->ljr",
    2: "lijk,ir,jr->lkr",
}
_GRAD = {
    0: "ijk,jr,kr->ir",
    1: "ijk,ir,kr->jr",
    2: "ijk,ir,jr->kr",
}


def cp_reconstruct(X1, X2, X3) -> np.ndarray:
    """``sum_r X1[:, r] (x) X2[:, r] (x) X3[:, r]``."""
    return np.einsum("ir,jr,kr->ijk", X1, X2, X3)


def tensor_generate_shape(sizes, slab_width: int) -> np.ndarray:
    """Ones on the centered ``slab_width``-cube, zeros elsewhere (rank one)."""
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) != 3:
        raise ValueError("expected three mode sizes")
    if slab_width < 1 or any(slab_width > s for s in sizes):
        raise ValueError(f"slab width {slab_width} does not fit in a tensor of size {sizes}")
    us = []
    for s in sizes:
        u = np.zeros(s)
        start = (s - slab_width) // 2
        u[start:start + slab_width] = 1.0
        us.append(u)
    return np.einsum("i,j,k->ijk", *us)


class TensorBatch:
    __slots__ = ("G", "b")

    def __init__(self, G: np.ndarray, b: np.ndarray):
        if G.shape[0] < 1:
            raise ValueError("empty batch")
        self.G = G
        self.b = b

    @property
    def size(self) -> int:
        return self.G.shape[0]


class TensorRecoveryProblem(StochasticProblem):
    """Three factor blocks ``X_d`` of shape ``(I_d, rank)``.

    ``lipschitz="spectral"`` (default) uses ``||J_d||_2^2 / m`` where row ``l``
    of ``J_d`` is the derivative of ``<G_l, T(X)>`` with respect to ``X_d``;
    ``"frobenius"`` uses the cheaper upper bound ``||J_d||_F^2 / m``.
    """

    def __init__(self, G, b, rank: int, truth=None, lam: float = 0.0, lipschitz: str = "spectral"):
        G = np.ascontiguousarray(G, dtype=np.float64)
        b = np.ascontiguousarray(b, dtype=np.float64).ravel()
        if G.ndim != 4:
            raise ValueError("measurements must have shape (N, I1, I2, I3)")
        if G.shape[0] != b.shape[0] or G.shape[0] < 1:
            raise ValueError("need one value per measurement tensor")
        if rank < 1:
            raise ValueError("rank must be >= 1")
        if lipschitz not in ("spectral", "frobenius"):
            raise ValueError(f"unknown Lipschitz rule {lipschitz!r}")
        self.G, self.b = G, b
        self.sizes = G.shape[1:]
        self.rank = int(rank)
        self.truth = None if truth is None else np.asarray(truth, dtype=np.float64)
        if self.truth is not None and self.truth.shape != self.sizes:
            raise ValueError("ground truth shape does not match the measurements")
        self.lam = float(lam)
        self.lipschitz_rule = lipschitz
        reg = Regularizer.l1(lam) if lam > 0 else Regularizer.zero()
        self._init_blocks(BlockPartition([s * self.rank for s in self.sizes]), [reg] * 3)
        self.n_samples = G.shape[0]
        self.finite_sum = True
        self._full = TensorBatch(G, b)

    # layout --------------------------------------------------------------
    def factors(self, x) -> list[np.ndarray]:
        """Factor matrices from the flat point (column-major within blocks)."""
        return [x[self.partition.slice(d)].reshape((s, self.rank), order="F") for d, s in enumerate(self.sizes)]

    def pack(self, factors) -> np.ndarray:
        return np.concatenate([np.asarray(F, dtype=np.float64).ravel(order="F") for F in factors])

    def reconstruct(self, x) -> np.ndarray:
        return cp_reconstruct(*self.factors(x))

    # sampling ---------------------------------------------------------------
    def draw_batch(self, rng, m):
        if m < 1:
            raise ValueError("empty batch")
        idx = rng.integers(0, self.n_samples, size=m)
        return TensorBatch(self.G[idx], self.b[idx])

    def full_batch(self):
        return self._full

    def batch_size(self, batch) -> int:
        return batch.size

    # oracles ----------------------------------------------------------------
    def _residual(self, x, batch) -> np.ndarray:
        T = self.reconstruct(x)
        return batch.G.reshape(batch.size, -1) @ T.ravel() - batch.b

    def sample_objective(self, x, batch) -> float:
        r = self._residual(x, batch)
        return 0.5 * float(r @ r) / batch.size

    def partial_gradient(self, i, x, batch):
        F = self.factors(x)
        r = self._residual(x, batch)
        W = (r @ batch.G.reshape(batch.size, -1)).reshape(self.sizes) / batch.size
        others = [F[d] for d in range(3) if d != i]
        grad = np.einsum(_GRAD[i], W, *others)
        return grad.ravel(order="F")

    def _jacobian(self, i, x, batch) -> np.ndarray:
        F = self.factors(x)
        others = [F[d] for d in range(3) if d != i]
        J = np.einsum(_CONTRACT[i], batch.G, *others, optimize=True)
        # column-major vec of each (I_i, R) slice
        return J.transpose(0, 2, 1).reshape(batch.size, -1)

    def block_lipschitz(self, i, x, batch) -> float:
        J = self._jacobian(i, x, batch)
        if self.lipschitz_rule == "frobenius":
            L = float(np.einsum("ij,ij->", J, J))
        else:
            L = squared_spectral_norm(J)
        return max(L / batch.size, LIPSCHITZ_FLOOR)

    def relative_error(self, x) -> float:
        return tensor_relative_error(self.reconstruct(x), self.truth)

    def metric(self, x):
        return None if self.truth is None else self.relative_error(x)


def tensor_relative_error(T, truth) -> float:
    """``||T - truth||_F / ||truth||_F``."""
    if truth is None:
        raise ValueError("no ground truth available")
    T = np.asarray(T, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if T.shape != truth.shape:
        raise ValueError(f"shape mismatch {T.shape} vs {truth.shape}")
    nrm = np.linalg.norm(truth)
    if nrm == 0:
        raise ValueError("relative error undefined for a zero ground truth")
    return float(np.linalg.norm(T - truth) / nrm)


def tensor_generate(sizes=(16, 16, 16), slab_width: int = 4, rank: int = 5, n_samples: int = 2000,
                    lam: float = 0.0, seed=None, lipschitz: str = "spectral") -> TensorRecoveryProblem:
    """Cube-shaped ground truth measured by ``n_samples`` i.i.d. Gaussian tensors."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    M = tensor_generate_shape(sizes, slab_width)
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n_samples,) + M.shape)
    b = G.reshape(n_samples, -1) @ M.ravel()
    return TensorRecoveryProblem(G, b, rank, truth=M, lam=lam, lipschitz=lipschitz)
