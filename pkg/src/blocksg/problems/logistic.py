"""Logistic regression ``(1/N) sum log(1 + exp(-y (x^T w + b)))`` with coordinate blocks."""
from __future__ import annotations

import numpy as np

from .datasets import libsvm_read
from .linear import LinearModelProblem


class LogisticProblem(LinearModelProblem):
    """Variable ``(w, b)`` of length ``n + 1``; the intercept is the last coordinate.

    Each coordinate is its own block unless ``partition`` says otherwise.
    Coordinate Lipschitz constants are ``sum_l x_{l,j}^2 / (4m)`` and ``1/4``
    for the intercept.
    """

    def __init__(self, features, labels, partition=None, regularizers=None, constraints=None):
        X = np.asarray(features, dtype=np.float64)
        y = np.asarray(labels, dtype=np.float64).ravel()
        if X.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be +1 or -1")
        design = np.hstack([X, np.ones((X.shape[0], 1))])
        super().__init__(design, y, "logistic", partition, regularizers, constraints)
        self.n_features = X.shape[1]

    @property
    def labels(self) -> np.ndarray:
        return self.target

    def split(self, x) -> tuple[np.ndarray, float]:
        """``(w, b)`` from a flat point."""
        x = np.asarray(x, dtype=np.float64)
        return x[:-1], float(x[-1])

    def accuracy(self, x) -> float:
        return float(np.mean(np.sign(self.features @ x) == self.target))

    def metric(self, x) -> float:
        return self.accuracy(x)


def logistic_synthetic(n: int = 200, n_samples: int = 2000, seed=None, mean: float = 5.0) -> LogisticProblem:
    """Two Gaussian classes ``N(+mean, 1)`` and ``N(-mean, 1)``, exactly half each."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n_samples < 2 or n_samples % 2:
        raise ValueError("n_samples must be a positive even number")
    rng = np.random.default_rng(seed)
    half = n_samples // 2
    pos = rng.normal(mean, 1.0, size=(half, n))
    neg = rng.normal(-mean, 1.0, size=(half, n))
    X = np.vstack([pos, neg])
    y = np.concatenate([np.ones(half), -np.ones(half)])
    return LogisticProblem(X, y)


def logistic_from_libsvm(path, n_features: int | None = None) -> LogisticProblem:
    X, y = libsvm_read(path, n_features=n_features)
    return LogisticProblem(X, y)
