"""Command-line entry point.

Subcommands::

    blocksg run <config.toml>
    blocksg report <output-prefix>
    blocksg gen-data <problem> <k=v,k=v,...> <path>
    blocksg check [--suite NAME ...] [--seed N]

Exit codes: 0 success, 1 configuration or usage error, 2 runtime or numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import checks
from . import problems as P
from .core import NumericalError
from .experiment import ConfigError, format_summary, load_config, report_table, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

GEN_DEFAULTS = {
    "logistic": {"n_features": 200, "n_samples": 2000, "mean": 5.0, "seed": 0},
    "bilinear": {"d1": 20, "d2": 15, "n_samples": 400, "rank": 2, "flip": 0.05, "seed": 0},
    "subsample": {"source": None, "n_slices": 100, "repeats": 10, "seed": 0},
}


def parse_params(text: str) -> dict:
    """``"a=1,b=0.5,c=name"`` to a dict; values become int, float or str in that order of preference."""
    out = {}
    if not text.strip():
        return out
    for item in text.split(","):
        if "=" not in item:
            raise ConfigError(f"parameter {item!r} is not of the form key=value")
        key, val = (s.strip() for s in item.split("=", 1))
        if not key:
            raise ConfigError(f"empty parameter name in {item!r}")
        for cast in (int, float):
            try:
                out[key] = cast(val)
                break
            except ValueError:
                continue
        else:
            out[key] = val
    return out


def generate_data(problem: str, params: dict, path) -> str:
    """Write a dataset file for ``problem``; returns a one-line description."""
    if problem not in GEN_DEFAULTS:
        raise ConfigError(f"gen-data supports {sorted(GEN_DEFAULTS)}, not {problem!r}")
    unknown = sorted(set(params) - set(GEN_DEFAULTS[problem]))
    if unknown:
        raise ConfigError(f"unknown parameter(s) for {problem}: {', '.join(unknown)}")
    p = {**GEN_DEFAULTS[problem], **params}
    path = Path(path)
    try:
        if problem == "logistic":
            prob = P.logistic_synthetic(int(p["n_features"]), int(p["n_samples"]), seed=int(p["seed"]),
                                        mean=float(p["mean"]))
            P.libsvm_write(path, prob.features[:, :-1], prob.labels)
            return f"wrote {prob.n_samples} LIBSVM samples with {int(p['n_features'])} features to {path}"
        if problem == "bilinear":
            prob = P.bilinear_synthetic(int(p["d1"]), int(p["d2"]), int(p["n_samples"]), int(p["rank"]),
                                        seed=int(p["seed"]), flip=float(p["flip"]))
            P.dense_write(path, prob.X, prob.y)
            return f"wrote {prob.n_samples} {p['d1']}x{p['d2']} matrix samples to {path}"
        if p["source"] is None:
            raise ConfigError("subsample needs source=<dense matrix file>")
        data, labels = P.dense_read(p["source"])
        sub, lab = P.subsample_temporal(data, labels, int(p["n_slices"]), int(p["repeats"]), seed=int(p["seed"]))
        P.dense_write(path, sub, lab)
        return f"wrote {sub.shape[0]} subsampled {sub.shape[1]}x{sub.shape[2]} samples to {path}"
    except P.DatasetError as exc:
        raise ConfigError(str(exc)) from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{problem}: {exc}") from exc


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr))
    results = run_experiment(cfg, log=log)
    rows, table = report_table(cfg.output)
    print(format_summary(rows), end="")
    print(table, end="")
    print(f"{len(results)} runs written to {cfg.output}")
    return EXIT_OK


def _cmd_report(args) -> int:
    try:
        rows, table = report_table(args.prefix)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(format_summary(rows), end="")
    print(table, end="")
    return EXIT_OK


def _cmd_gen(args) -> int:
    print(generate_data(args.problem, parse_params(args.params), args.path))
    return EXIT_OK


def _cmd_check(args) -> int:
    try:
        results = checks.run_all(seed=args.seed, names=args.suite)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for r in results:
        print(r.line())
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} suites passed")
    return EXIT_OK if n_fail == 0 else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blocksg", description="Block stochastic gradient experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a TOML config")
    r.add_argument("config")
    r.add_argument("-q", "--quiet", action="store_true", help="no per-trial progress on stderr")
    r.set_defaults(func=_cmd_run)
    rp = sub.add_parser("report", help="summarize the results under an output prefix")
    rp.add_argument("prefix")
    rp.set_defaults(func=_cmd_report)
    g = sub.add_parser("gen-data", help="write a synthetic or subsampled dataset file")
    g.add_argument("problem", choices=sorted(GEN_DEFAULTS))
    g.add_argument("params", help="comma-separated key=value pairs ('' for defaults)")
    g.add_argument("path")
    g.set_defaults(func=_cmd_gen)
    c = sub.add_parser("check", help="run the analysis property suites")
    c.add_argument("--suite", action="append", choices=sorted(checks.SUITES))
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=_cmd_check)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError, RuntimeError, OSError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
