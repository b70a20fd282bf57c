"""Benchmark problems: least squares, logistic, tensor recovery, bilinear logistic."""
from __future__ import annotations

import numpy as np

from ..core import StochasticProblem
from ..prox import project
from .bilinear import BilinearLogisticProblem, bilinear_from_dense, bilinear_synthetic
from .datasets import DatasetError, dense_read, dense_write, libsvm_read, libsvm_write, subsample_temporal
from .least_squares import (
    FiniteSumLeastSquares,
    StreamingLeastSquares,
    empirical_loss,
    empirical_losses,
    ls_finite_sum,
    ls_generate,
)
from .linear import LinearBatch, LinearModelProblem
from .logistic import LogisticProblem, logistic_from_libsvm, logistic_synthetic
from .quadratic import QuadraticProblem, random_quadratic
from .tensor import (
    TensorRecoveryProblem,
    cp_reconstruct,
    tensor_generate,
    tensor_generate_shape,
    tensor_relative_error,
)


def random_start(problem: StochasticProblem, seed=None, scale: float = 0.1) -> np.ndarray:
    """``scale * N(0, I)`` projected onto the constraint sets."""
    rng = np.random.default_rng(seed)
    x = scale * rng.standard_normal(problem.partition.total)
    for i, c in enumerate(problem.constraints):
        if not c.is_whole_space:
            sl = problem.partition.slice(i)
            x[sl] = project(c, x[sl])
    return x


__all__ = [
    "BilinearLogisticProblem", "DatasetError", "FiniteSumLeastSquares", "LinearBatch", "LinearModelProblem",
    "LogisticProblem", "QuadraticProblem", "StreamingLeastSquares", "TensorRecoveryProblem",
    "bilinear_from_dense", "bilinear_synthetic", "cp_reconstruct", "dense_read", "dense_write",
    "empirical_loss", "empirical_losses", "libsvm_read", "libsvm_write", "logistic_from_libsvm",
    "logistic_synthetic", "ls_finite_sum", "ls_generate", "random_quadratic", "random_start",
    "subsample_temporal", "tensor_generate", "tensor_generate_shape", "tensor_relative_error",
]
