"""BSG, SG, SBMD and BCGD iterations with shared run-loop bookkeeping."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .core import BlockPoint, NumericalError, StochasticProblem
from .prox import block_update, project_subset, soft_threshold
from .schedules import BatchSchedule, StepsizeSchedule, UpdateOrder

METHODS = ("bsg", "sg", "sbmd", "bcgd")


@dataclass(frozen=True)
class SolverConfig:
    """Method, schedules and budget for one run.

    At least one of ``epochs``, ``iterations`` or ``seconds`` bounds the run.
    The wall-clock budget is only checked when a trace record is written.
    """

    method: str = "bsg"
    stepsize: StepsizeSchedule = field(default_factory=StepsizeSchedule)
    batch: BatchSchedule = field(default_factory=BatchSchedule)
    order: UpdateOrder = field(default_factory=UpdateOrder)
    epochs: float | None = None
    iterations: int | None = None
    seconds: float | None = None
    seed: int = 0
    record_every: float = 1.0
    sbmd_coords: int = 1
    use_kernel: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.epochs is None and self.iterations is None and self.seconds is None:
            raise ValueError("a run needs an epoch, iteration or wall-clock budget")
        for name in ("epochs", "iterations", "seconds"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} budget must be nonnegative")
        if not self.record_every > 0:
            raise ValueError("record_every must be positive")
        if self.sbmd_coords < 1:
            raise ValueError("SBMD needs at least one coordinate per iteration")

    def validate_for(self, problem: StochasticProblem) -> None:
        """Raise ValueError if the problem cannot support this method."""
        n = problem.partition.total
        if self.method == "sbmd" and self.sbmd_coords > n:
            raise ValueError(f"SBMD selects {self.sbmd_coords} coordinates but the problem has {n}")
        if self.method == "bcgd" and not problem.has_full_gradient:
            raise ValueError("BCGD needs a full-gradient oracle")
        if self.batch.kind == "full" and not problem.finite_sum:
            raise ValueError("full batches need a finite-sum problem")
        if self.method in ("sg", "sbmd"):
            x = np.zeros(n)
            try:
                batch = problem.draw_batch(np.random.default_rng(0), 1)
                problem.subset_lipschitz(np.arange(min(n, self.sbmd_coords if self.method == "sbmd" else n)), x, batch)
            except NotImplementedError as exc:
                raise ValueError(f"{self.method.upper()} is not available for {type(problem).__name__}: {exc}") from exc


@dataclass
class TraceRecord:
    epoch: float
    seconds: float
    objective: float
    metric: float | None = None


@dataclass
class RunTrace:
    records: list
    final_point: BlockPoint
    iterations: int = 0
    samples_consumed: int = 0

    @property
    def epochs(self) -> np.ndarray:
        return np.array([r.epoch for r in self.records])

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    @property
    def metrics(self) -> np.ndarray:
        return np.array([np.nan if r.metric is None else r.metric for r in self.records])

    def objective_at(self, epoch: float) -> float:
        """Objective of the first record at or after ``epoch``."""
        for r in self.records:
            if r.epoch >= epoch - 1e-12:
                return r.objective
        return self.records[-1].objective


def _streams(seed: int, batch_seed: int | None):
    """Independent streams for sample draws and for solver-internal choices."""
    ss = np.random.SeedSequence(seed)
    batch_ss, solver_ss = ss.spawn(2)
    if batch_seed is not None:
        batch_ss = np.random.SeedSequence(batch_seed)
    return np.random.default_rng(batch_ss), np.random.default_rng(solver_ss)


def _as_flat(problem: StochasticProblem, x) -> np.ndarray:
    if isinstance(x, BlockPoint):
        if x.partition != problem.partition:
            raise ValueError("point partition does not match the problem partition")
        return x.values.copy()
    x = np.array(x, dtype=np.float64).ravel()
    if x.shape[0] != problem.partition.total:
        raise ValueError(f"expected a point of length {problem.partition.total}, got {x.shape[0]}")
    return x


def _check_finite(v: np.ndarray, what: str, block: int, k: int) -> None:
    if not np.all(np.isfinite(v)):
        raise NumericalError(f"non-finite {what} in block {block} at iteration {k}")


def _draw(problem: StochasticProblem, config: SolverConfig, k: int, batch_rng):
    if config.batch.kind == "full":
        return problem.full_batch()
    m = config.batch.size(k, problem.n_samples)
    if m < 1:
        raise ValueError("empty batch")
    return problem.draw_batch(batch_rng, m)


def _kernel_params(problem: StochasticProblem, config: SolverConfig):
    if not (config.use_kernel and problem.partition.is_coordinatewise):
        return None
    probe = getattr(problem, "supports_linear_sweep", False)
    if not probe:
        return None
    return _CoordinateRule.build(problem)


def bsg_iteration(problem, x: np.ndarray, k: int, stepsize: StepsizeSchedule, batch, order: np.ndarray,
                  kparams=None) -> None:
    """One Gauss-Seidel pass over ``order`` using one shared batch; updates ``x`` in place."""
    if kparams is not None:
        cols, target, loss = problem.linear_sweep_data(batch)
        base = stepsize.base(k)
        bad = kernels.coordinate_sweep(cols, target, x, np.ascontiguousarray(order, dtype=np.int64), base,
                                       stepsize.cap, kparams.lam, kparams.lower, kparams.upper,
                                       kparams.constrained_u8, loss)
        if bad >= 0:
            raise NumericalError(f"non-finite iterate in block {bad} at iteration {k}")
        return
    part = problem.partition
    regs, cons = problem.regularizers, problem.constraints
    for i in order:
        i = int(i)
        sl = part.slice(i)
        g = problem.partial_gradient(i, x, batch)
        _check_finite(g, "gradient", i, k)
        L = problem.block_lipschitz(i, x, batch)
        alpha = stepsize.value(k, L)
        new = block_update(x[sl], g, alpha, regs[i], cons[i])
        _check_finite(new, "iterate", i, k)
        x[sl] = new


class _CoordinateRule:
    """Vectorized prox/projected update for problems whose blocks are all separable by coordinate.

    Applies when every constraint set is the whole space, a box, or a
    one-dimensional ball; otherwise ``build`` returns None.
    """

    def __init__(self, lam, lower, upper, constrained):
        self.lam, self.lower, self.upper, self.constrained = lam, lower, upper, constrained
        self.any_constrained = bool(constrained.any())
        self.constrained_u8 = constrained.astype(np.uint8)

    @classmethod
    def build(cls, problem: StochasticProblem):
        part = problem.partition
        n = part.total
        lam = np.zeros(n)
        lower = np.full(n, -np.inf)
        upper = np.full(n, np.inf)
        constrained = np.zeros(n, dtype=bool)
        for i, (r, c) in enumerate(zip(problem.regularizers, problem.constraints)):
            sl = part.slice(i)
            lam[sl] = 0.0 if r.is_zero else r.weight
            if c.kind == "box":
                lower[sl], upper[sl] = c.lower, c.upper
                constrained[sl] = True
            elif c.kind == "ball":
                if part.dims[i] != 1:
                    return None
                lower[sl], upper[sl] = c.center - c.radius, c.center + c.radius
                constrained[sl] = True
        return cls(lam, lower, upper, constrained)

    def apply(self, x, g, alpha, coords=None):
        lam = self.lam if coords is None else self.lam[coords]
        v = x - alpha * g
        out = np.sign(v) * np.maximum(np.abs(v) - alpha * lam, 0.0)
        if self.any_constrained:
            con = self.constrained if coords is None else self.constrained[coords]
            lo = self.lower if coords is None else self.lower[coords]
            hi = self.upper if coords is None else self.upper[coords]
            proj = np.minimum(np.maximum(v - alpha * lam * np.sign(x), lo), hi)
            out = np.where(con, proj, out)
        return out


def _sg_iteration(problem, x: np.ndarray, k: int, stepsize: StepsizeSchedule, batch, rule=None) -> None:
    g = problem.gradient(x, batch)
    _check_finite(g, "gradient", -1, k)
    L = problem.lipschitz(x, batch)
    alpha = stepsize.value(k, L)
    if rule is not None:
        new = rule.apply(x, g, alpha)
    else:
        part = problem.partition
        new = x.copy()
        for i in range(part.n_blocks):
            sl = part.slice(i)
            new[sl] = block_update(x[sl], g[sl], alpha, problem.regularizers[i], problem.constraints[i])
    _check_finite(new, "iterate", -1, k)
    x[:] = new


def _sbmd_iteration(problem, x: np.ndarray, k: int, stepsize: StepsizeSchedule, batch, coords: np.ndarray,
                    rule=None) -> None:
    coords = np.sort(coords)
    g = problem.subset_gradient(coords, x, batch)
    _check_finite(g, "gradient", -1, k)
    L = problem.subset_lipschitz(coords, x, batch)
    alpha = stepsize.value(k, L)
    if rule is not None:
        new_vals = rule.apply(x[coords], g, alpha, coords)
        _check_finite(new_vals, "iterate", -1, k)
        x[coords] = new_vals
        return
    part = problem.partition
    blocks = np.searchsorted(np.asarray(part.offsets), coords, side="right") - 1
    new = x.copy()
    start = 0
    while start < len(coords):
        i = int(blocks[start])
        stop = start
        while stop < len(coords) and blocks[stop] == i:
            stop += 1
        sl = part.slice(i)
        local = coords[start:stop] - sl.start
        gi = g[start:stop]
        reg, con = problem.regularizers[i], problem.constraints[i]
        xi = x[sl]
        if len(local) == part.dims[i]:
            new[sl] = block_update(xi, gi, alpha, reg, con)
        elif con.is_whole_space:
            v = xi[local] - alpha * gi
            new[coords[start:stop]] = v if reg.is_zero else soft_threshold(v, alpha * reg.weight)
        else:
            v = xi[local] - alpha * (gi + reg.subgradient(xi[local]))
            new[coords[start:stop]] = project_subset(con, xi, local, v)
        start = stop
    _check_finite(new, "iterate", -1, k)
    x[:] = new


def bsg_step(problem: StochasticProblem, x, k: int, config: SolverConfig, rng: np.random.Generator,
             order_rng: np.random.Generator | None = None) -> BlockPoint:
    """One iteration of the block stochastic gradient method.

    Draws one batch from ``rng``, picks the block order (from ``order_rng``,
    defaulting to ``rng``), and updates every block in turn at the partially
    updated point. Returns a new point; ``x`` is not modified.
    """
    xv = _as_flat(problem, x)
    batch = _draw(problem, config, k, rng)
    order = config.order.order(problem.partition.n_blocks, order_rng if order_rng is not None else rng)
    bsg_iteration(problem, xv, k, config.stepsize, batch, order, _kernel_params(problem, config))
    return BlockPoint(problem.partition, xv)


def _run(problem: StochasticProblem, x0, config: SolverConfig, iterate,
         callback: Callable | None = None, batch_seed: int | None = None) -> RunTrace:
    config.validate_for(problem)
    x = _as_flat(problem, x0)
    batch_rng, solver_rng = _streams(config.seed, batch_seed)
    N = problem.n_samples
    t0 = time.perf_counter()

    def record(epoch):
        return TraceRecord(epoch, time.perf_counter() - t0, problem.objective(x), problem.metric(x))

    records = [record(0.0)]
    k = 0
    samples = 0
    epoch = 0.0
    next_record = config.record_every
    sample_budget = None if config.epochs is None else config.epochs * (N if N else 1)
    while True:
        if config.iterations is not None and k >= config.iterations:
            break
        if sample_budget is not None and samples >= sample_budget - 1e-9:
            break
        k += 1
        samples += iterate(x, k, batch_rng, solver_rng)
        epoch = samples / N if N else float(samples)
        if callback is not None:
            callback(k, x)
        if epoch >= next_record - 1e-12:
            records.append(record(epoch))
            next_record = (math.floor(epoch / config.record_every + 1e-9) + 1) * config.record_every
            if config.seconds is not None and records[-1].seconds >= config.seconds:
                break
    if records[-1].epoch != epoch or len(records) == 1 and k > 0:
        records.append(record(epoch))
    return RunTrace(records, BlockPoint(problem.partition, x), iterations=k, samples_consumed=samples)


def bsg_run(problem: StochasticProblem, x0, config: SolverConfig, callback=None, batch_seed=None) -> RunTrace:
    """Run the block stochastic gradient method until the budget is spent.

    ``callback(k, x)`` is called after each iteration with the live flat iterate.
    ``batch_seed`` overrides the sample stream so several solvers can share data.
    """
    kparams = _kernel_params(problem, config)
    s = problem.partition.n_blocks

    def iterate(x, k, batch_rng, solver_rng):
        batch = _draw(problem, config, k, batch_rng)
        order = config.order.order(s, solver_rng)
        bsg_iteration(problem, x, k, config.stepsize, batch, order, kparams)
        return problem.batch_size(batch)

    return _run(problem, x0, config, iterate, callback=callback, batch_seed=batch_seed)


def sg_run(problem: StochasticProblem, x0, config: SolverConfig, callback=None, batch_seed=None) -> RunTrace:
    """Stochastic (proximal) gradient: all blocks updated from gradients at ``x^k``."""
    rule = _CoordinateRule.build(problem)

    def iterate(x, k, batch_rng, solver_rng):
        batch = _draw(problem, config, k, batch_rng)
        _sg_iteration(problem, x, k, config.stepsize, batch, rule)
        return problem.batch_size(batch)

    return _run(problem, x0, config, iterate, callback=callback, batch_seed=batch_seed)


def sbmd_run(problem: StochasticProblem, x0, config: SolverConfig, callback=None, batch_seed=None) -> RunTrace:
    """Update ``config.sbmd_coords`` coordinates, chosen uniformly without replacement, per iteration."""
    n = problem.partition.total
    t = config.sbmd_coords
    rule = _CoordinateRule.build(problem)

    def iterate(x, k, batch_rng, solver_rng):
        batch = _draw(problem, config, k, batch_rng)
        coords = np.arange(n) if t == n else solver_rng.choice(n, size=t, replace=False)
        _sbmd_iteration(problem, x, k, config.stepsize, batch, coords, rule)
        return problem.batch_size(batch)

    return _run(problem, x0, config, iterate, callback=callback, batch_seed=batch_seed)


def bcgd_run(problem: StochasticProblem, x0, config: SolverConfig, callback=None, batch_seed=None) -> RunTrace:
    """Deterministic cyclic block coordinate gradient descent with ``1/L_i`` steps."""
    if not problem.has_full_gradient:
        raise ValueError("BCGD needs a full-gradient oracle")
    kparams = _kernel_params(problem, config)
    s = problem.partition.n_blocks
    order = np.arange(s)
    step = StepsizeSchedule.lipschitz_only()
    N = problem.n_samples

    def iterate(x, k, batch_rng, solver_rng):
        bsg_iteration(problem, x, k, step, problem.full_batch(), order, kparams)
        return N

    return _run(problem, x0, config, iterate, callback=callback, batch_seed=batch_seed)


RUNNERS = {"bsg": bsg_run, "sg": sg_run, "sbmd": sbmd_run, "bcgd": bcgd_run}


def run(problem: StochasticProblem, x0, config: SolverConfig, **kwargs) -> RunTrace:
    return RUNNERS[config.method](problem, x0, config, **kwargs)


def ergodic_average(points, stepsizes) -> BlockPoint | np.ndarray:
    """Stepsize-weighted average ``sum_k a_k x_k / sum_k a_k``."""
    points = list(points)
    stepsizes = np.asarray(stepsizes, dtype=np.float64)
    if not points:
        raise ValueError("cannot average an empty list of points")
    if len(points) != stepsizes.shape[0]:
        raise ValueError("need one stepsize per point")
    if np.any(stepsizes <= 0):
        raise ValueError("stepsizes must be positive")
    part = points[0].partition if isinstance(points[0], BlockPoint) else None
    arr = np.stack([p.values if isinstance(p, BlockPoint) else np.asarray(p, dtype=np.float64) for p in points])
    avg = stepsizes @ arr / stepsizes.sum()
    return BlockPoint(part, avg) if part is not None else avg


class ErgodicAverager:
    """Running stepsize-weighted average, usable as a run callback."""

    def __init__(self, schedule: StepsizeSchedule):
        self.schedule = schedule
        self.weighted = None
        self.total = 0.0

    def __call__(self, k, x):
        a = self.schedule.base(k)
        if self.weighted is None:
            self.weighted = np.zeros_like(x)
        self.weighted += a * x
        self.total += a

    @property
    def average(self) -> np.ndarray:
        if self.weighted is None:
            raise ValueError("no iterates recorded")
        return self.weighted / self.total
