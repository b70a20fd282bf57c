"""Block-structured points, regularizers, constraint sets and the problem oracle."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

# Lower bound applied to every sampled Lipschitz constant so 1/L stays finite.
LIPSCHITZ_FLOOR = 1e-12
# Relative slack for membership tests after floating-point projections.
_FEAS_TOL = 1e-12


class NumericalError(RuntimeError):
    """Raised when an iterate or gradient stops being finite."""


@dataclass(frozen=True)
class BlockPartition:
    """Split of ``R^n`` into ``s`` contiguous blocks of sizes ``dims``.

    Blocks are indexed from 0.
    """

    dims: tuple[int, ...]
    offsets: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __init__(self, dims: Sequence[int]):
        dims = tuple(int(d) for d in dims)
        if len(dims) < 1:
            raise ValueError("a partition needs at least one block")
        if any(d < 1 for d in dims):
            raise ValueError(f"block dimensions must be positive, got {dims}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "offsets", tuple(np.concatenate([[0], np.cumsum(dims)]).tolist()))

    @classmethod
    def coordinates(cls, n: int) -> "BlockPartition":
        """One block per coordinate."""
        return cls([1] * int(n))

    @property
    def total(self) -> int:
        return self.offsets[-1]

    @property
    def n_blocks(self) -> int:
        return len(self.dims)

    @property
    def is_coordinatewise(self) -> bool:
        return all(d == 1 for d in self.dims)

    def slice(self, i: int) -> slice:
        if not 0 <= i < len(self.dims):
            raise IndexError(f"block index {i} out of range for {len(self.dims)} blocks")
        return slice(self.offsets[i], self.offsets[i + 1])

    def block_of(self, coord: int) -> int:
        """Index of the block holding flat coordinate ``coord``."""
        return int(np.searchsorted(self.offsets, coord, side="right") - 1)


class BlockPoint:
    """A point ``x = (x_1, ..., x_s)`` stored as one flat float64 array."""

    __slots__ = ("partition", "values")

    def __init__(self, partition: BlockPartition, values=None):
        self.partition = partition
        if values is None:
            values = np.zeros(partition.total)
        values = np.array(values, dtype=np.float64).ravel()
        if values.shape[0] != partition.total:
            raise ValueError(
                f"expected {partition.total} values for partition {partition.dims}, got {values.shape[0]}"
            )
        self.values = values

    def block(self, i: int) -> np.ndarray:
        """Writable view of block ``i``."""
        return self.values[self.partition.slice(i)]

    def set_block(self, i: int, v) -> None:
        sl = self.partition.slice(i)
        v = np.asarray(v, dtype=np.float64).ravel()
        if v.shape[0] != sl.stop - sl.start:
            raise ValueError(f"block {i} has {sl.stop - sl.start} entries, got {v.shape[0]}")
        self.values[sl] = v

    def copy(self) -> "BlockPoint":
        return BlockPoint(self.partition, self.values.copy())

    def __len__(self) -> int:
        return self.values.shape[0]

    def __repr__(self) -> str:
        return f"BlockPoint(dims={self.partition.dims}, values={self.values!r})"


def block_view(x: BlockPoint, i: int) -> np.ndarray:
    return x.block(i)


@dataclass(frozen=True)
class Regularizer:
    """Per-block regularizer: ``zero`` or ``l1`` with weight ``weight``."""

    kind: str = "zero"
    weight: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "l1"):
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.weight < 0:
            raise ValueError("regularizer weight must be nonnegative")
        if self.kind == "zero" and self.weight != 0.0:
            raise ValueError("the zero regularizer carries no weight")

    @classmethod
    def zero(cls) -> "Regularizer":
        return cls("zero", 0.0)

    @classmethod
    def l1(cls, weight: float) -> "Regularizer":
        return cls("l1", float(weight))

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.weight == 0.0

    def lipschitz_const(self, n_i: int) -> float:
        """Lipschitz constant of ``r_i`` on ``R^{n_i}`` (``weight * sqrt(n_i)`` for l1)."""
        if self.kind == "zero":
            return 0.0
        return self.weight * float(np.sqrt(n_i))

    def value(self, v: np.ndarray) -> float:
        if self.kind == "zero":
            return 0.0
        return self.weight * float(np.abs(v).sum())

    def subgradient(self, v: np.ndarray) -> np.ndarray:
        """Minimum-norm subgradient (zero at the kink)."""
        if self.kind == "zero":
            return np.zeros_like(v)
        return self.weight * np.sign(v)


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Convex set ``X_i``: the whole space, a box, or a Euclidean ball."""

    kind: str = "all"
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    center: np.ndarray | None = None
    radius: float | None = None

    def __post_init__(self):
        if self.kind == "all":
            return
        if self.kind == "box":
            lo = np.asarray(self.lower, dtype=np.float64).ravel()
            hi = np.asarray(self.upper, dtype=np.float64).ravel()
            if lo.shape != hi.shape:
                raise ValueError("box bounds must have the same length")
            if np.any(lo > hi):
                raise ValueError("box requires lower <= upper coordinatewise")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        elif self.kind == "ball":
            c = np.asarray(self.center, dtype=np.float64).ravel()
            if self.radius is None or self.radius < 0:
                raise ValueError("ball requires radius >= 0")
            object.__setattr__(self, "center", c)
            object.__setattr__(self, "radius", float(self.radius))
        else:
            raise ValueError(f"unknown constraint kind {self.kind!r}")

    @classmethod
    def all(cls) -> "ConstraintSet":
        return cls("all")

    @classmethod
    def box(cls, lower, upper) -> "ConstraintSet":
        return cls("box", lower=lower, upper=upper)

    @classmethod
    def ball(cls, center, radius: float) -> "ConstraintSet":
        return cls("ball", center=center, radius=radius)

    @property
    def is_whole_space(self) -> bool:
        return self.kind == "all"

    @property
    def dim(self) -> int | None:
        if self.kind == "box":
            return self.lower.shape[0]
        if self.kind == "ball":
            return self.center.shape[0]
        return None

    def check_dim(self, v: np.ndarray) -> None:
        d = self.dim
        if d is not None and v.shape[0] != d:
            raise ValueError(f"dimension mismatch: set has dimension {d}, vector has {v.shape[0]}")

    def contains(self, v) -> bool:
        v = np.asarray(v, dtype=np.float64).ravel()
        self.check_dim(v)
        if self.kind == "all":
            return True
        if self.kind == "box":
            return bool(np.all(v >= self.lower) and np.all(v <= self.upper))
        return bool(np.linalg.norm(v - self.center) <= self.radius * (1.0 + _FEAS_TOL) + _FEAS_TOL)

    def __repr__(self) -> str:
        if self.kind == "box":
            return f"ConstraintSet.box({self.lower.tolist()}, {self.upper.tolist()})"
        if self.kind == "ball":
            return f"ConstraintSet.ball({self.center.tolist()}, {self.radius})"
        return "ConstraintSet.all()"


def constraint_contains(c: ConstraintSet, v) -> bool:
    return c.contains(v)


class StochasticProblem:
    """Oracle bundle for ``min E f(x; xi) + sum_i r_i(x_i)  s.t. x_i in X_i``.

    Subclasses implement the sampling and gradient oracles. Points are passed
    to oracles as flat float64 arrays laid out by ``partition``; batches are
    whatever ``draw_batch`` returns.

    Attributes
    ----------
    partition : BlockPartition
    regularizers : list of Regularizer, one per block
    constraints : list of ConstraintSet, one per block
    n_samples : int or None
        Size of the finite sum, or the nominal sample count that defines one
        epoch for streaming problems. ``None`` means an epoch is one sample.
    finite_sum : bool
        True when the objective is an exact finite average over stored samples.
    """

    partition: BlockPartition
    regularizers: list
    constraints: list
    n_samples: int | None = None
    finite_sum: bool = False
    # True when linear_sweep_data can feed the compiled coordinate sweep.
    supports_linear_sweep: bool = False

    def _init_blocks(self, partition, regularizers=None, constraints=None):
        s = partition.n_blocks
        self.partition = partition
        self.regularizers = list(regularizers) if regularizers is not None else [Regularizer.zero()] * s
        self.constraints = list(constraints) if constraints is not None else [ConstraintSet.all()] * s
        if len(self.regularizers) != s or len(self.constraints) != s:
            raise ValueError("need one regularizer and one constraint set per block")
        for i, c in enumerate(self.constraints):
            if c.dim is not None and c.dim != partition.dims[i]:
                raise ValueError(f"constraint set of block {i} has dimension {c.dim}, block has {partition.dims[i]}")

    # sampling -----------------------------------------------------------
    def draw_batch(self, rng: np.random.Generator, m: int) -> Any:
        raise NotImplementedError

    def full_batch(self) -> Any:
        """The whole finite sum as one batch."""
        raise NotImplementedError(f"{type(self).__name__} has no full-gradient oracle")

    def batch_size(self, batch) -> int:
        raise NotImplementedError

    # smooth part -------------------------------------------------------
    def sample_objective(self, x: np.ndarray, batch) -> float:
        """Mean of ``f(x; xi)`` over the batch."""
        raise NotImplementedError

    def partial_gradient(self, i: int, x: np.ndarray, batch) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x: np.ndarray, batch) -> np.ndarray:
        return np.concatenate([self.partial_gradient(i, x, batch) for i in range(self.partition.n_blocks)])

    def subset_gradient(self, coords: np.ndarray, x: np.ndarray, batch) -> np.ndarray:
        return self.gradient(x, batch)[coords]

    def block_lipschitz(self, i: int, x: np.ndarray, batch) -> float:
        raise NotImplementedError

    def subset_lipschitz(self, coords: np.ndarray, x: np.ndarray, batch) -> float:
        """Lipschitz constant of the sampled gradient restricted to ``coords``."""
        if self.partition.n_blocks == 1 and len(coords) == self.partition.total:
            return self.block_lipschitz(0, x, batch)
        raise NotImplementedError(f"{type(self).__name__} has no coordinate-subset Lipschitz oracle")

    def lipschitz(self, x: np.ndarray, batch) -> float:
        """Lipschitz constant of the full sampled gradient."""
        return self.subset_lipschitz(np.arange(self.partition.total), x, batch)

    def smooth_objective(self, x: np.ndarray) -> float:
        """``F(x)``: exact finite sum, or population value when known."""
        return self.sample_objective(x, self.full_batch())

    def full_partial_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        return self.partial_gradient(i, x, self.full_batch())

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        return self.gradient(x, self.full_batch())

    def full_block_lipschitz(self, i: int, x: np.ndarray) -> float:
        return self.block_lipschitz(i, x, self.full_batch())

    @property
    def has_full_gradient(self) -> bool:
        try:
            self.full_batch()
        except NotImplementedError:
            return False
        return True

    # composite objective -------------------------------------------------
    def regularization(self, x: np.ndarray) -> float:
        part = self.partition
        return float(sum(r.value(x[part.slice(i)]) for i, r in enumerate(self.regularizers) if not r.is_zero))

    def objective(self, x: np.ndarray) -> float:
        """``Phi(x) = F(x) + sum_i r_i(x_i)``."""
        return self.smooth_objective(x) + self.regularization(x)

    def objective_info(self) -> tuple[str, int | None]:
        """How ``objective`` is computed: ``("finite_sum", N)`` or ``("population", None)``.

        Monte-Carlo estimates made elsewhere report their own sample count.
        """
        return ("finite_sum", self.n_samples) if self.finite_sum else ("population", None)

    def metric(self, x: np.ndarray) -> float | None:
        """Problem-specific progress metric recorded next to the objective."""
        return None

    def is_feasible(self, x: np.ndarray) -> bool:
        part = self.partition
        return all(c.contains(x[part.slice(i)]) for i, c in enumerate(self.constraints))

    # fast path ----------------------------------------------------------
    def linear_sweep_data(self, batch):
        """``(columns, target, loss_code)`` for the compiled coordinate sweep, or None."""
        return None
