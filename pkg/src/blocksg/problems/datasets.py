"""Readers and writers for LIBSVM text files and dense matrix-sample files."""
from __future__ import annotations

import os

import numpy as np


class DatasetError(ValueError):
    """Malformed or unreadable dataset file."""


def _map_labels(raw: np.ndarray, path) -> np.ndarray:
    values = set(np.unique(raw).tolist())
    if values <= {-1.0, 1.0}:
        return raw.copy()
    if values <= {0.0, 1.0}:
        return np.where(raw > 0, 1.0, -1.0)
    raise DatasetError(f"{path}: labels must be in {{-1, +1}} or {{0, 1}}, found {sorted(values)}")


def libsvm_read(path, n_features: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Dense ``(X, y)`` from a LIBSVM file with 1-based ``index:value`` pairs.

    Labels ``{0, 1}`` are mapped to ``{-1, +1}``; anything else is an error.
    Blank lines and ``#`` comments are skipped.
    """
    rows, labels = [], []
    max_index = 0
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = float(tokens[0])
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: bad label {tokens[0]!r}") from None
            entries = {}
            for tok in tokens[1:]:
                idx, sep, val = tok.partition(":")
                if not sep:
                    raise DatasetError(f"{path}:{lineno}: expected index:value, got {tok!r}")
                try:
                    j = int(idx)
                    v = float(val)
                except ValueError:
                    raise DatasetError(f"{path}:{lineno}: bad pair {tok!r}") from None
                if j < 1:
                    raise DatasetError(f"{path}:{lineno}: feature indices are 1-based, got {j}")
                if not np.isfinite(v):
                    raise DatasetError(f"{path}:{lineno}: non-finite value {tok!r}")
                if j in entries:
                    raise DatasetError(f"{path}:{lineno}: duplicate feature index {j}")
                entries[j] = v
                max_index = max(max_index, j)
            rows.append(entries)
            labels.append(label)
    if not rows:
        raise DatasetError(f"{path}: no samples")
    n = max_index if n_features is None else n_features
    if n < max_index:
        raise DatasetError(f"{path}: feature index {max_index} exceeds n_features={n}")
    X = np.zeros((len(rows), n))
    for r, entries in enumerate(rows):
        for j, v in entries.items():
            X[r, j - 1] = v
    return X, _map_labels(np.array(labels), path)


def libsvm_write(path, X, y) -> None:
    """Write nonzero entries with 17 significant digits so reading back is exact."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.shape[0]:
        raise ValueError("need one label per row")
    with open(path, "w", encoding="ascii") as fh:
        for row, label in zip(X, y):
            parts = ["%+d" % int(label)]
            parts += ["%d:%.17g" % (j + 1, v) for j, v in enumerate(row) if v != 0.0]
            fh.write(" ".join(parts) + "\n")


def dense_read(path) -> tuple[np.ndarray, np.ndarray]:
    """Matrix samples ``(X, y)`` with ``X`` of shape ``(N, rows, cols)``.

    Format: a header line ``rows cols``, then one sample per line: the
    label followed by ``rows * cols`` entries in row-major order.
    """
    if not os.path.exists(path):
        raise DatasetError(f"{path}: no such file")
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln for ln in (l.strip() for l in fh) if ln]
    if not lines:
        raise DatasetError(f"{path}: empty file")
    try:
        rows, cols = (int(t) for t in lines[0].split())
    except ValueError:
        raise DatasetError(f"{path}:1: header must be 'rows cols'") from None
    if rows < 1 or cols < 1:
        raise DatasetError(f"{path}:1: matrix dimensions must be positive")
    if len(lines) < 2:
        raise DatasetError(f"{path}: no samples")
    X = np.empty((len(lines) - 1, rows, cols))
    y = np.empty(len(lines) - 1)
    for r, line in enumerate(lines[1:]):
        try:
            vals = np.array(line.split(), dtype=np.float64)
        except ValueError:
            raise DatasetError(f"{path}:{r + 2}: non-numeric entry") from None
        if vals.shape[0] != rows * cols + 1:
            raise DatasetError(f"{path}:{r + 2}: expected {rows * cols + 1} numbers, got {vals.shape[0]}")
        y[r] = vals[0]
        X[r] = vals[1:].reshape(rows, cols)
    return X, _map_labels(y, path)


def dense_write(path, X, y) -> None:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 3 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (N, rows, cols) with one label per sample")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{X.shape[1]} {X.shape[2]}\n")
        for mat, label in zip(X, y):
            fh.write("%+d " % int(label) + " ".join("%.17g" % v for v in mat.ravel()) + "\n")


def subsample_temporal(data, labels, n_slices: int = 100, repeats: int = 10, seed=None):
    """Random temporal subsampling of ``(trials, channels, time)`` recordings.

    Each trial yields ``repeats`` samples of ``n_slices`` time points drawn
    without replacement and kept in temporal order.
    """
    data = np.asarray(data, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if data.ndim != 3:
        raise ValueError("data must have shape (trials, channels, time)")
    if data.shape[0] != labels.shape[0]:
        raise ValueError("need one label per trial")
    if not 1 <= n_slices <= data.shape[2]:
        raise ValueError(f"cannot take {n_slices} slices from {data.shape[2]} time points")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rng = np.random.default_rng(seed)
    out = np.empty((data.shape[0] * repeats, data.shape[1], n_slices))
    out_y = np.repeat(labels, repeats)
    for t in range(data.shape[0]):
        for r in range(repeats):
            idx = np.sort(rng.choice(data.shape[2], size=n_slices, replace=False))
            out[t * repeats + r] = data[t][:, idx]
    return out, out_y
