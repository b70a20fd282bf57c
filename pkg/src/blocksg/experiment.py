"""Config-driven experiment harness: seeded trials, trace CSVs and summary tables.

Seeds
-----
Every random stream is seeded by ``derive_seed(*words)``, which folds 64-bit
words through the splitmix64 finalizer: ``h = 0; for w in words:
h = splitmix64(h ^ w)``. The streams of one trial are

* data: ``derive_seed(master, DATA_TAG, sweep, trial)``, masked to 63 bits
* starting point: ``derive_seed(master, DATA_TAG + 1, sweep, trial)``
* sample stream, shared by all solvers: ``derive_seed(master, BATCH_TAG, sweep, trial)``
* fresh evaluation samples: ``derive_seed(master, EVAL_TAG, sweep, trial)``
* solver-internal choices: ``derive_seed(master, solver_index, trial, sweep)``

so all solvers of a trial see the same data, start and samples.
"""
from __future__ import annotations

import csv
import io
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import problems as P
from .analysis import fista_reference
from .schedules import BATCH_KINDS, STEPSIZE_KINDS, BatchSchedule, StepsizeSchedule, UpdateOrder
from .solvers import METHODS, SolverConfig, run

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MASK64 = (1 << 64) - 1
DATA_TAG = 0xD47A
BATCH_TAG = 0xBA7C
EVAL_TAG = 0xE7A1
TRACE_HEADER = ["trial", "solver", "epoch", "seconds", "objective", "metric"]


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 1)."""


def splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(*words: int) -> int:
    h = 0
    for w in words:
        h = splitmix64(h ^ (int(w) & MASK64))
    return h


def fmt(v) -> str:
    """17 significant digits; empty for missing values."""
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return "%.17g" % v


# config -------------------------------------------------------------------------

PROBLEM_KEYS = {
    "least_squares": {"dim": 200, "n_samples": 10000, "noise_std": 0.1, "box": None, "mode": "streaming"},
    "logistic": {"n_features": 200, "n_samples": 2000, "mean": 5.0, "data": None},
    "tensor": {"sizes": [16, 16, 16], "slab": 4, "rank": 5, "n_samples": 2000, "lam": 0.0,
               "lipschitz": "spectral"},
    "bilinear": {"d1": 20, "d2": 15, "rank": 2, "n_samples": 400, "flip": 0.05, "data": None,
                 "lipschitz": "spectral"},
}
COMMON_PROBLEM_KEYS = {"name": None, "init_scale": 0.1}
EXPERIMENT_KEYS = {"name": "experiment", "trials": 1, "master_seed": 0, "output": "out", "wall_clock": False}
EVALUATION_KEYS = {"final": "objective", "fresh_samples": 100_000, "reference": "none", "fista_iterations": 5000}
SOLVER_KEYS = {"name", "method", "order", "epochs", "seconds", "iterations", "record_every", "t", "kernel",
               "stepsize", "batch"}
STEPSIZE_KEYS = {"kind", "theta", "cap", "horizon"}
BATCH_KEYS = {"kind", "m", "stride", "eps"}
FINAL_KINDS = ("objective", "gap", "metric", "empirical_loss")
REFERENCE_KINDS = ("none", "closed_form", "fista")


@dataclass
class ProblemSpec:
    name: str
    params: dict
    init_scale: float
    sweep: list

    @property
    def sweep_labels(self) -> list[str]:
        if len(self.sweep) == 1 and not isinstance(self.params.get("n_samples"), list):
            return ["all"]
        return [f"N{n}" for n in self.sweep]


@dataclass
class SolverSpec:
    name: str
    config: SolverConfig


@dataclass
class ExperimentConfig:
    name: str
    trials: int
    master_seed: int
    output: Path
    wall_clock: bool
    problem: ProblemSpec
    evaluation: dict
    solvers: list = field(default_factory=list)


def _check_keys(section: str, got: dict, allowed) -> None:
    unknown = sorted(set(got) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")


def _typed(section, key, value, kind):
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"[{section}] {key} must be true or false")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"[{section}] {key} must be an integer")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"[{section}] {key} must be a number")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"[{section}] {key} must be a string")
    return value


def _solver_config(idx: int, raw: dict) -> SolverSpec:
    sec = f"solver #{idx + 1}"
    _check_keys(sec, raw, SOLVER_KEYS)
    method = _typed(sec, "method", raw.get("method", "bsg"), str)
    if method not in METHODS:
        raise ConfigError(f"[{sec}] method must be one of {METHODS}")
    name = _typed(sec, "name", raw.get("name", method.upper()), str)
    if not name or any(ch in name for ch in "/\\,\n"):
        raise ConfigError(f"[{sec}] name must be non-empty without '/', '\\' or ','")
    st = raw.get("stepsize", {})
    if not isinstance(st, dict):
        raise ConfigError(f"[{sec}] stepsize must be a table")
    _check_keys(sec + ".stepsize", st, STEPSIZE_KEYS)
    ba = raw.get("batch", {})
    if not isinstance(ba, dict):
        raise ConfigError(f"[{sec}] batch must be a table")
    _check_keys(sec + ".batch", ba, BATCH_KEYS)
    kind = _typed(sec, "stepsize.kind", st.get("kind", "dim_sqrt"), str)
    if kind not in STEPSIZE_KINDS:
        raise ConfigError(f"[{sec}] stepsize.kind must be one of {STEPSIZE_KINDS}")
    bkind = _typed(sec, "batch.kind", ba.get("kind", "constant"), str)
    if bkind not in BATCH_KINDS:
        raise ConfigError(f"[{sec}] batch.kind must be one of {BATCH_KINDS}")
    try:
        stepsize = StepsizeSchedule(
            kind,
            theta=_typed(sec, "stepsize.theta", st.get("theta", 1.0), float),
            horizon=None if "horizon" not in st else _typed(sec, "stepsize.horizon", st["horizon"], int),
            cap=_typed(sec, "stepsize.cap", st.get("cap", True), bool),
        )
        batch = BatchSchedule(
            bkind,
            m=_typed(sec, "batch.m", ba.get("m", 1), int),
            stride=_typed(sec, "batch.stride", ba.get("stride", 10), int),
            eps=_typed(sec, "batch.eps", ba.get("eps", 0.1), float),
        )
        order = UpdateOrder(_typed(sec, "order", raw.get("order", "fixed"), str))
        budget = {}
        for key, kind_ in (("epochs", float), ("seconds", float), ("iterations", int)):
            if key in raw:
                budget[key] = _typed(sec, key, raw[key], kind_)
        cfg = SolverConfig(
            method=method, stepsize=stepsize, batch=batch, order=order,
            record_every=_typed(sec, "record_every", raw.get("record_every", 1.0), float),
            sbmd_coords=_typed(sec, "t", raw.get("t", 1), int),
            use_kernel=_typed(sec, "kernel", raw.get("kernel", True), bool),
            **budget,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[{sec}] {exc}") from exc
    return SolverSpec(name, cfg)


def parse_config(raw: dict, base_dir=".") -> ExperimentConfig:
    """Validate a parsed config mapping; paths are resolved against ``base_dir``."""
    _check_keys("top level", raw, {"experiment", "problem", "evaluation", "solver"})
    base = Path(base_dir)
    ex = raw.get("experiment", {})
    _check_keys("experiment", ex, EXPERIMENT_KEYS)
    ex = {**EXPERIMENT_KEYS, **ex}
    trials = _typed("experiment", "trials", ex["trials"], int)
    if trials < 1:
        raise ConfigError("[experiment] trials must be >= 1")
    master = _typed("experiment", "master_seed", ex["master_seed"], int)
    if not 0 <= master <= MASK64:
        raise ConfigError("[experiment] master_seed must be a 64-bit unsigned integer")
    output = Path(_typed("experiment", "output", ex["output"], str))
    if not output.is_absolute():
        output = base / output

    pr = raw.get("problem")
    if not isinstance(pr, dict) or "name" not in pr:
        raise ConfigError("[problem] section with a name is required")
    pname = _typed("problem", "name", pr["name"], str)
    if pname not in PROBLEM_KEYS:
        raise ConfigError(f"[problem] name must be one of {sorted(PROBLEM_KEYS)}")
    _check_keys("problem", pr, set(PROBLEM_KEYS[pname]) | set(COMMON_PROBLEM_KEYS))
    params = {**PROBLEM_KEYS[pname], **{k: v for k, v in pr.items() if k not in COMMON_PROBLEM_KEYS}}
    init_scale = _typed("problem", "init_scale", pr.get("init_scale", 0.1), float)
    if init_scale < 0:
        raise ConfigError("[problem] init_scale must be nonnegative")
    ns = params["n_samples"]
    sweep = ns if isinstance(ns, list) else [ns]
    if not sweep or any(isinstance(n, bool) or not isinstance(n, int) or n < 1 for n in sweep):
        raise ConfigError("[problem] n_samples must be a positive integer or a list of them")
    if params.get("data") is not None:
        path = Path(_typed("problem", "data", params["data"], str))
        params["data"] = str(path if path.is_absolute() else base / path)
    problem = ProblemSpec(pname, params, init_scale, list(sweep))

    ev = raw.get("evaluation", {})
    _check_keys("evaluation", ev, EVALUATION_KEYS)
    ev = {**EVALUATION_KEYS, **ev}
    if ev["final"] not in FINAL_KINDS:
        raise ConfigError(f"[evaluation] final must be one of {FINAL_KINDS}")
    if ev["reference"] not in REFERENCE_KINDS:
        raise ConfigError(f"[evaluation] reference must be one of {REFERENCE_KINDS}")
    if ev["final"] == "empirical_loss" and not (pname == "least_squares" and params["mode"] == "streaming"):
        raise ConfigError("[evaluation] empirical_loss needs the streaming least-squares problem")
    if ev["final"] == "gap" and ev["reference"] == "none":
        raise ConfigError("[evaluation] final = 'gap' needs a reference")
    if ev["reference"] == "closed_form" and pname != "least_squares":
        raise ConfigError("[evaluation] closed_form reference only exists for least squares")
    _typed("evaluation", "fresh_samples", ev["fresh_samples"], int)
    _typed("evaluation", "fista_iterations", ev["fista_iterations"], int)

    raw_solvers = raw.get("solver", [])
    if not isinstance(raw_solvers, list) or not raw_solvers:
        raise ConfigError("at least one [[solver]] entry is required")
    solvers = [_solver_config(i, s) for i, s in enumerate(raw_solvers)]
    names = [s.name for s in solvers]
    if len(set(names)) != len(names):
        raise ConfigError("solver names must be unique")
    cfg = ExperimentConfig(
        name=_typed("experiment", "name", ex["name"], str), trials=trials, master_seed=master, output=output,
        wall_clock=_typed("experiment", "wall_clock", ex["wall_clock"], bool), problem=problem,
        evaluation=ev, solvers=solvers,
    )
    _validate_against_problem(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(raw, path.parent)


# problem construction ------------------------------------------------------------


def build_problem(pspec: ProblemSpec, n_samples: int, seed: int):
    """Instantiate the problem for one sweep point and trial."""
    p = pspec.params
    try:
        if pspec.name == "least_squares":
            if p["mode"] == "streaming":
                return P.ls_generate(int(p["dim"]), seed=seed, noise_std=float(p["noise_std"]),
                                     n_samples=n_samples, box=p["box"])
            if p["mode"] == "finite_sum":
                if p["box"] is not None:
                    raise ConfigError("[problem] box is only supported in streaming mode")
                return P.ls_finite_sum(int(p["dim"]), n_samples, seed=seed, noise_std=float(p["noise_std"]))
            raise ConfigError("[problem] mode must be 'streaming' or 'finite_sum'")
        if pspec.name == "logistic":
            if p["data"] is not None:
                return P.logistic_from_libsvm(p["data"])
            return P.logistic_synthetic(int(p["n_features"]), n_samples, seed=seed, mean=float(p["mean"]))
        if pspec.name == "tensor":
            return P.tensor_generate(tuple(int(v) for v in p["sizes"]), int(p["slab"]), int(p["rank"]), n_samples,
                                     lam=float(p["lam"]), seed=seed, lipschitz=p["lipschitz"])
        if p["data"] is not None:
            return P.bilinear_from_dense(p["data"], rank=int(p["rank"]), lipschitz=p["lipschitz"])
        return P.bilinear_synthetic(int(p["d1"]), int(p["d2"]), n_samples, int(p["rank"]), seed=seed,
                                    flip=float(p["flip"]), lipschitz=p["lipschitz"])
    except P.DatasetError as exc:
        raise ConfigError(str(exc)) from exc
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"[problem] bad parameter: {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[problem] {exc}") from exc


def _validate_against_problem(cfg: ExperimentConfig) -> None:
    """Build one small instance so dataset and solver errors surface before any run."""
    pspec = cfg.problem
    n = min(pspec.sweep)
    if pspec.params.get("data") is None:
        # validation depends on dimensions and oracles, not on the sample count
        n = min(n, 8)
    problem = build_problem(pspec, n, 0)
    for s in cfg.solvers:
        try:
            s.config.validate_for(problem)
        except ValueError as exc:
            raise ConfigError(f"solver {s.name!r}: {exc}") from exc


# running --------------------------------------------------------------------------


@dataclass
class TrialResult:
    sweep: str
    n_samples: int
    trial: int
    solver: str
    final_objective: float
    final_metric: float | None
    final_value: float


def _reference_value(cfg: ExperimentConfig, problem) -> float | None:
    kind = cfg.evaluation["reference"]
    if kind == "none":
        return None
    if kind == "closed_form":
        if isinstance(problem, P.StreamingLeastSquares):
            return problem.optimal_value()
        return problem.objective(problem.optimum())
    return fista_reference(problem, iterations=int(cfg.evaluation["fista_iterations"])).value


def _write_trace(path: Path, trial: int, solver: str, trace, wall_clock: bool) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for r in trace.records:
        w.writerow([trial, solver, fmt(r.epoch), fmt(r.seconds if wall_clock else 0.0), fmt(r.objective),
                    fmt(r.metric)])
    path.write_text(buf.getvalue())


def run_experiment(cfg: ExperimentConfig, log=None) -> list[TrialResult]:
    """Run every (sweep point, trial, solver) and write traces plus summaries under ``cfg.output``."""
    out = cfg.output
    out.mkdir(parents=True, exist_ok=True)
    results: list[TrialResult] = []
    labels = cfg.problem.sweep_labels
    for si, (label, n) in enumerate(zip(labels, cfg.problem.sweep)):
        tdir = out / "traces" / label
        tdir.mkdir(parents=True, exist_ok=True)
        for trial in range(cfg.trials):
            t0 = time.perf_counter()
            problem = build_problem(cfg.problem, n, derive_seed(cfg.master_seed, DATA_TAG, si, trial) & 0x7FFFFFFFFFFFFFFF)
            x0 = P.random_start(problem, derive_seed(cfg.master_seed, DATA_TAG + 1, si, trial), cfg.problem.init_scale)
            batch_seed = derive_seed(cfg.master_seed, BATCH_TAG, si, trial)
            ref = _reference_value(cfg, problem)
            finals = []
            for idx, s in enumerate(cfg.solvers):
                solver_cfg = SolverConfig(**{**s.config.__dict__, "seed": derive_seed(cfg.master_seed, idx, trial, si)})
                trace = run(problem, x0, solver_cfg, batch_seed=batch_seed)
                _write_trace(tdir / f"trial{trial:04d}__{s.name}.csv", trial, s.name, trace, cfg.wall_clock)
                finals.append(trace)
            if cfg.evaluation["final"] == "empirical_loss":
                values = P.empirical_losses(problem, [t.final_point.values for t in finals],
                                            int(cfg.evaluation["fresh_samples"]),
                                            seed=derive_seed(cfg.master_seed, EVAL_TAG, si, trial))
            else:
                values = []
                for t in finals:
                    obj = t.records[-1].objective
                    if cfg.evaluation["final"] == "objective":
                        values.append(obj)
                    elif cfg.evaluation["final"] == "gap":
                        values.append(obj - ref)
                    else:
                        values.append(np.nan if t.records[-1].metric is None else t.records[-1].metric)
            for s, t, v in zip(cfg.solvers, finals, values):
                results.append(TrialResult(label, n, trial, s.name, t.records[-1].objective, t.records[-1].metric,
                                           float(v)))
            if log is not None:
                log(f"{label} trial {trial + 1}/{cfg.trials} done in {time.perf_counter() - t0:.2f}s")
    _write_finals(out / "final.csv", results)
    summary = summarize(results)
    _write_summary(out, summary, [s.name for s in cfg.solvers], labels)
    return results


# reporting -------------------------------------------------------------------------

FINAL_HEADER = ["sweep", "n_samples", "trial", "solver", "final_objective", "final_metric", "final_value"]
SUMMARY_HEADER = ["sweep", "solver", "count", "mean", "std", "min", "max"]


def _write_finals(path: Path, results) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FINAL_HEADER)
    for r in results:
        w.writerow([r.sweep, r.n_samples, r.trial, r.solver, fmt(r.final_objective), fmt(r.final_metric),
                    fmt(r.final_value)])
    path.write_text(buf.getvalue())


@dataclass(frozen=True)
class SummaryRow:
    sweep: str
    solver: str
    count: int
    mean: float
    std: float
    min: float
    max: float


def summary_stats(values) -> tuple[int, float, float, float, float]:
    """Count, mean, sample standard deviation (0 for one value), min, max."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("no values to summarize")
    std = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return int(v.size), float(np.mean(v)), std, float(np.min(v)), float(np.max(v))


def summarize(results) -> list[SummaryRow]:
    groups: dict = {}
    for r in results:
        groups.setdefault((r.sweep, r.solver), []).append(r.final_value)
    return [SummaryRow(sw, so, *summary_stats(vals)) for (sw, so), vals in groups.items()]


def _write_summary(out: Path, rows, solver_order, sweep_order) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for r in rows:
        w.writerow([r.sweep, r.solver, r.count, fmt(r.mean), fmt(r.std), fmt(r.min), fmt(r.max)])
    (out / "summary.csv").write_text(buf.getvalue())
    (out / "summary.txt").write_text(format_summary(rows))
    (out / "table.txt").write_text(format_table(rows, solver_order, sweep_order))


def _aligned(header, body) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *body)]
    lines = ["  ".join(str(x).rjust(wd) for x, wd in zip(row, widths)) for row in [header] + body]
    return "\n".join(lines) + "\n"


def format_summary(rows) -> str:
    body = [[r.sweep, r.solver, r.count, "%.4e" % r.mean, "%.4e" % r.std, "%.4e" % r.min, "%.4e" % r.max]
            for r in rows]
    return _aligned(SUMMARY_HEADER, body)


def format_table(rows, solver_order=None, sweep_order=None) -> str:
    """One row per sweep point, one column per solver, cells are means."""
    solver_order = solver_order or list(dict.fromkeys(r.solver for r in rows))
    sweep_order = sweep_order or list(dict.fromkeys(r.sweep for r in rows))
    means = {(r.sweep, r.solver): r.mean for r in rows}
    body = [[sw] + ["%.2e" % means[(sw, so)] if (sw, so) in means else "-" for so in solver_order]
            for sw in sweep_order]
    return _aligned(["N"] + list(solver_order), body)


def report_table(prefix) -> tuple[list[SummaryRow], str]:
    """Recompute summary and table from ``<prefix>/final.csv``; rewrites the summary files."""
    out = Path(prefix)
    path = out / "final.csv"
    if not path.is_file():
        raise FileNotFoundError(f"no results at {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != FINAL_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        results = []
        for row in reader:
            results.append(TrialResult(row[0], int(row[1]), int(row[2]), row[3], float(row[4]),
                                       float(row[5]) if row[5] else None, float(row[6]) if row[6] else np.nan))
    if not results:
        raise ValueError(f"{path}: no completed trials")
    rows = summarize(results)
    solvers = list(dict.fromkeys(r.solver for r in results))
    sweeps = list(dict.fromkeys(r.sweep for r in results))
    _write_summary(out, rows, solvers, sweeps)
    return rows, format_table(rows, solvers, sweeps)


def config_from_path_or_dict(cfg, base_dir="."):
    if isinstance(cfg, ExperimentConfig):
        return cfg
    if isinstance(cfg, dict):
        return parse_config(cfg, base_dir)
    if isinstance(cfg, (str, os.PathLike)):
        return load_config(cfg)
    raise TypeError("expected a config path, mapping or ExperimentConfig")
