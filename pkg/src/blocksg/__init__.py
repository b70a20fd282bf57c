"""Block stochastic gradient methods for composite stochastic optimization."""
from .core import (
    BlockPartition,
    BlockPoint,
    ConstraintSet,
    NumericalError,
    Regularizer,
    StochasticProblem,
    block_view,
    constraint_contains,
)
from .kernels import BACKEND
from .prox import gradient_mapping, project, projected_subgradient_step, prox, prox_step, soft_threshold
from .schedules import BatchSchedule, StepsizeSchedule, UpdateOrder, stepsize_value
from .solvers import (
    RunTrace,
    SolverConfig,
    TraceRecord,
    bcgd_run,
    bsg_run,
    bsg_step,
    ergodic_average,
    run,
    sbmd_run,
    sg_run,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BatchSchedule", "BlockPartition", "BlockPoint", "ConstraintSet", "NumericalError",
    "Regularizer", "RunTrace", "SolverConfig", "StepsizeSchedule", "StochasticProblem", "TraceRecord",
    "UpdateOrder", "bcgd_run", "block_view", "bsg_run", "bsg_step", "constraint_contains",
    "ergodic_average", "gradient_mapping", "project", "projected_subgradient_step", "prox", "prox_step",
    "run", "sbmd_run", "sg_run", "soft_threshold", "stepsize_value",
]
