"""Stepsize, batch-size and block-order schedules."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

STEPSIZE_KINDS = ("dim_sqrt", "dim_sqrt_log", "dim_linear", "fixed_horizon", "lipschitz", "constant")


@dataclass(frozen=True)
class StepsizeSchedule:
    """Stepsize ``alpha_k`` optionally capped by ``1/L`` of the sampled block gradient.

    kinds
        ``dim_sqrt``       theta / sqrt(k)
        ``dim_sqrt_log``   theta / (sqrt(k) * max(log k, 1))
        ``dim_linear``     theta / k
        ``fixed_horizon``  theta / sqrt(horizon) for every k
        ``constant``       theta
        ``lipschitz``      1 / L (the cap alone)
    """

    kind: str = "dim_sqrt"
    theta: float = 1.0
    horizon: int | None = None
    cap: bool = True

    def __post_init__(self):
        if self.kind not in STEPSIZE_KINDS:
            raise ValueError(f"unknown stepsize kind {self.kind!r}")
        if self.kind != "lipschitz" and not self.theta > 0:
            raise ValueError("theta must be positive")
        if self.kind == "fixed_horizon" and (self.horizon is None or self.horizon < 1):
            raise ValueError("fixed_horizon needs a horizon K >= 1")
        if self.kind == "lipschitz":
            object.__setattr__(self, "cap", True)

    @classmethod
    def lipschitz_only(cls) -> "StepsizeSchedule":
        return cls("lipschitz", cap=True)

    def base(self, k: int) -> float:
        """Uncapped schedule value (``inf`` for ``lipschitz``)."""
        if k < 1:
            raise ValueError(f"iteration index must be >= 1, got {k}")
        kind = self.kind
        if kind == "dim_sqrt":
            return self.theta / math.sqrt(k)
        if kind == "dim_sqrt_log":
            return self.theta / (math.sqrt(k) * max(math.log(k), 1.0))
        if kind == "dim_linear":
            return self.theta / k
        if kind == "fixed_horizon":
            return self.theta / math.sqrt(self.horizon)
        if kind == "constant":
            return self.theta
        return math.inf

    def value(self, k: int, lipschitz: float) -> float:
        b = self.base(k)
        if not self.cap:
            return b
        if not lipschitz > 0:
            raise ValueError(f"Lipschitz constant must be positive, got {lipschitz}")
        return min(b, 1.0 / lipschitz)


def stepsize_value(schedule: StepsizeSchedule, k: int, lipschitz: float) -> float:
    return schedule.value(k, lipschitz)


BATCH_KINDS = ("constant", "linear", "polynomial", "full")


@dataclass(frozen=True)
class BatchSchedule:
    """Mini-batch size ``m_k``.

    ``constant``: m. ``linear``: m1 + ceil((k-1)/stride). ``polynomial``:
    ceil(m1 * k**(1+eps)). ``full``: every sample of a finite sum, in order.
    """

    kind: str = "constant"
    m: int = 1
    stride: int = 10
    eps: float = 0.1

    def __post_init__(self):
        if self.kind not in BATCH_KINDS:
            raise ValueError(f"unknown batch kind {self.kind!r}")
        if self.m < 1:
            raise ValueError("batch size must be >= 1")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.eps <= 0 and self.kind == "polynomial":
            raise ValueError("polynomial growth needs eps > 0")

    def size(self, k: int, n_samples: int | None = None) -> int:
        if k < 1:
            raise ValueError(f"iteration index must be >= 1, got {k}")
        if self.kind == "constant":
            return self.m
        if self.kind == "linear":
            return self.m + -(-(k - 1) // self.stride)
        if self.kind == "polynomial":
            return int(math.ceil(self.m * k ** (1.0 + self.eps)))
        if n_samples is None:
            raise ValueError("a full batch needs a finite-sum problem")
        return n_samples


@dataclass(frozen=True)
class UpdateOrder:
    """``fixed`` (0, 1, ..., s-1) or ``shuffled`` (fresh permutation per iteration)."""

    kind: str = "fixed"

    def __post_init__(self):
        if self.kind not in ("fixed", "shuffled"):
            raise ValueError(f"unknown update order {self.kind!r}")

    def order(self, s: int, rng: np.random.Generator | None = None) -> np.ndarray:
        if self.kind == "fixed":
            return np.arange(s)
        if rng is None:
            raise ValueError("shuffled order needs a random stream")
        return rng.permutation(s)
