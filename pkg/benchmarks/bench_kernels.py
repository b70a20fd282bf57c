"""Compare the compiled coordinate sweep with its pure-Python twin.

Two measurements:

* the sweep alone on random batches of several shapes, both loss types;
* one epoch of BSG on a coordinatewise least-squares problem with the
  compiled kernel, the pure-Python kernel and the generic per-block loop.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from blocksg import BatchSchedule, BlockPartition, SolverConfig, StepsizeSchedule, UpdateOrder, bsg_run, kernels
from blocksg._kernels_py import coordinate_sweep as py_sweep
from blocksg.problems import logistic_synthetic, ls_finite_sum

try:
    from blocksg._kernels import coordinate_sweep as cy_sweep
except ImportError:
    cy_sweep = None


def sweep_inputs(p: int, m: int, loss: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    cols = np.ascontiguousarray(rng.standard_normal((p, m)))
    target = rng.choice([-1.0, 1.0], m) if loss else rng.standard_normal(m)
    return (cols, target, np.zeros(p), rng.permutation(p).astype(np.int64), 0.1, True, np.full(p, 0.01),
            np.full(p, -np.inf), np.full(p, np.inf), np.zeros(p, np.uint8), loss)


def best_time(fn, repeat: int, number: int) -> float:
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_sweep(repeat: int) -> None:
    print("coordinate sweep, seconds per call")
    print(f"{'loss':>9} {'p':>6} {'m':>5} {'python':>10} {'cython':>10} {'speedup':>8}")
    for loss, name in ((0, "squared"), (1, "logistic")):
        for p, m in ((200, 1), (200, 16), (1000, 64), (4000, 8)):
            args = sweep_inputs(p, m, loss)
            number = max(1, 2000 // p)
            t_py = best_time(lambda: py_sweep(args[0], args[1], args[2].copy(), *args[3:]), repeat, number)
            if cy_sweep is None:
                print(f"{name:>9} {p:6d} {m:5d} {t_py:10.3e} {'-':>10} {'-':>8}")
                continue
            t_cy = best_time(lambda: cy_sweep(args[0], args[1], args[2].copy(), *args[3:]), repeat, number * 50)
            print(f"{name:>9} {p:6d} {m:5d} {t_py:10.3e} {t_cy:10.3e} {t_py / t_cy:8.1f}")


def _epoch(problem, use_kernel: bool) -> float:
    cfg = SolverConfig("bsg", StepsizeSchedule("dim_sqrt", theta=0.1), BatchSchedule("constant", 1),
                       UpdateOrder("fixed"), epochs=1.0, record_every=1.0, seed=0, use_kernel=use_kernel)
    x0 = np.zeros(problem.partition.total)
    return bsg_run(problem, x0, cfg, batch_seed=1).final_point.values


def bench_end_to_end(repeat: int) -> None:
    print("\none BSG epoch with m = 1, seconds")
    print(f"{'problem':>20} {'generic':>10} {'python':>10} {'cython':>10}")
    cases = {
        "least squares 100": ls_finite_sum(100, 2000, seed=0, partition=BlockPartition.coordinates(100)),
        "logistic 50": logistic_synthetic(49, 1000, seed=0),
    }
    compiled = kernels.coordinate_sweep
    for name, prob in cases.items():
        if not prob.partition.is_coordinatewise:
            prob = type(prob)(prob.features, prob.labels, partition=BlockPartition.coordinates(prob.partition.total))
        t_gen = best_time(lambda: _epoch(prob, False), repeat, 1)
        kernels.coordinate_sweep = py_sweep
        try:
            t_py = best_time(lambda: _epoch(prob, True), repeat, 1)
        finally:
            kernels.coordinate_sweep = compiled
        t_cy = best_time(lambda: _epoch(prob, True), repeat, 1) if kernels.BACKEND == "cython" else float("nan")
        print(f"{name:>20} {t_gen:10.3e} {t_py:10.3e} {t_cy:10.3e}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"kernel backend: {kernels.BACKEND}\n")
    bench_sweep(args.repeat)
    bench_end_to_end(args.repeat)


if __name__ == "__main__":
    main()
