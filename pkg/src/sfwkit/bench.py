"""Experiment orchestration: shared-budget solver comparisons and their reports.

Each (solver, seed) pair is one :func:`run_solver` call under a common
derivative budget. Traces are written one file per run; a JSON summary with
the problem constants, the reference optimum and the final relative
suboptimalities is written once all runs are done.
"""
import csv
import json
import os
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .constraints import ConstraintSet
from .diagnostics import problem_stats
from .problem import Problem
from .solvers import SOLVER_KINDS, TraceRow, reference_optimum, run_solver

SCHEMA_VERSION = 1
LOSS_FOR_TASK = {"classification": "logistic", "regression": "squared"}


class DegenerateRunError(ValueError):
    """All compared objective values coincide, so no normalisation exists."""


def default_batch_size(n):
    """One percent of the samples, at least one."""
    return max(1, n // 100)


def relative_suboptimality(traces, f_min=None):
    """Map objectives into [0, 1] using extremes over all compared traces.

    ``traces`` maps a key to a sequence of objective values (or to a
    :class:`~sfwkit.solvers.Trace`). ``f_min`` may lower the floor, e.g. to a
    reference optimum; it never raises it above the observed minimum.
    Returns a dict of arrays with the same keys.
    """
    series = {k: _objectives(v) for k, v in traces.items()}
    if not series:
        raise ValueError("need at least one trace")
    values = np.concatenate([v for v in series.values()])
    if values.size == 0:
        raise ValueError("traces contain no objective values")
    lo = float(np.min(values))
    if f_min is not None:
        lo = min(lo, float(f_min))
    hi = float(np.max(values))
    if not hi > lo:
        raise DegenerateRunError(f"f_max == f_min == {hi!r}; relative suboptimality undefined")
    return {k: np.clip((v - lo) / (hi - lo), 0.0, 1.0) for k, v in series.items()}


def _objectives(trace):
    if len(trace) and isinstance(trace[0], TraceRow):
        return np.array([row.objective for row in trace], dtype=np.float64)
    return np.asarray(trace, dtype=np.float64)


@dataclass
class BenchConfig:
    """Everything needed to reproduce one comparison.

    ``source`` is a file path for libsvm/csv data or a synthetic spec string
    such as ``"n=683,d=10,task=classification,seed=0"``.
    """

    source: str
    fmt: str = "libsvm"
    loss: Optional[str] = None
    constraint: str = "l1:1"
    solvers: Sequence[str] = ("sfw",)
    batch_size: Optional[int] = None
    grad_budget: Optional[int] = None
    seeds: Sequence[int] = (0,)
    trace_every: int = 1
    gap_stop: Optional[float] = None
    exact_diagnostics: bool = False
    out_dir: str = "results"
    out_format: str = "csv"
    reference_budget: int = 10**5
    target: object = -1

    def __post_init__(self):
        self.solvers = tuple(self.solvers)
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.solvers:
            raise ValueError("at least one solver is required")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        bad = [s for s in self.solvers if s not in SOLVER_KINDS]
        if bad:
            raise ValueError(f"unknown solver(s) {bad}; choose from {list(SOLVER_KINDS)}")
        if self.out_format not in ("csv", "json"):
            raise ValueError("out_format must be csv or json")
        ConstraintSet.parse(self.constraint)

    def resolve_batch(self, n):
        b = default_batch_size(n) if self.batch_size is None else int(self.batch_size)
        if not 1 <= b <= n:
            raise ValueError(f"batch size {b} must lie in [1, {n}]")
        return b

    def resolve_budget(self, n):
        return 100 * n if self.grad_budget is None else int(self.grad_budget)


def trace_records(trace):
    """Rows as dicts in the fixed column order (None for uncomputed values)."""
    return [dict(zip(TraceRow.FIELDS, row.as_tuple())) for row in trace]


def write_trace_csv(trace, fh):
    """CSV with the fixed column order; uncomputed values are empty cells."""
    out = csv.writer(fh)
    out.writerow(TraceRow.FIELDS)
    for row in trace:
        out.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row.as_tuple()])


def write_trace(trace, path, out_format="csv"):
    if out_format == "json":
        _write_json(path, {"solver": trace.solver, "seed": trace.seed, "rows": trace_records(trace)})
        return
    try:
        with open(path, "w", newline="") as fh:
            write_trace_csv(trace, fh)
    except OSError as exc:
        raise OSError(f"cannot write trace {path!r}: {exc.strerror or exc}") from exc


def _write_json(path, payload):
    try:
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, allow_nan=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path!r}: {exc.strerror or exc}") from exc


def build_problem(dataset, loss=None):
    kind = loss or LOSS_FOR_TASK[dataset.task]
    return Problem.build(dataset.X, dataset.y, kind)


def run_benchmark(config, dataset=None):
    """Run every (solver, seed) pair, write the reports and return the summary.

    Runs execute one after another. A failing run is recorded in the summary
    with its error message and does not stop the others.
    """
    from .data import load_dataset

    if dataset is None:
        dataset = load_dataset(config.source, config.fmt, target=config.target)
    problem = build_problem(dataset, config.loss)
    cset = ConstraintSet.parse(config.constraint)
    n = problem.n
    b = config.resolve_batch(n)
    budget = config.resolve_budget(n)
    try:
        os.makedirs(config.out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {config.out_dir!r}: {exc.strerror or exc}") from exc

    runs, traces = [], {}
    for solver in config.solvers:
        for seed in config.seeds:
            path = os.path.join(config.out_dir, f"{solver}_seed{seed}.{config.out_format}")
            entry = {"solver": solver, "seed": seed, "trace": path}
            t0 = time.perf_counter()
            try:
                trace = run_solver(
                    problem,
                    cset,
                    solver,
                    batch_size=b,
                    budget=budget,
                    seed=seed,
                    trace_every=config.trace_every,
                    gap_stop=config.gap_stop,
                    exact_diagnostics=config.exact_diagnostics,
                )
            except Exception as exc:  # recorded, siblings keep running
                entry.update(status="error", error=f"{type(exc).__name__}: {exc}")
                entry["trace"] = None
                runs.append(entry)
                continue
            write_trace(trace, path, config.out_format)
            traces[(solver, seed)] = trace
            last = trace[-1]
            entry.update(
                status="ok",
                stopped_by=trace.stopped_by,
                iterations=last.t,
                grad_calls=last.grad_calls,
                final_objective=last.objective,
                seconds=time.perf_counter() - t0,
            )
            runs.append(entry)

    f_ref = None
    if config.reference_budget and n:
        f_ref, _ = reference_optimum(problem, cset, budget=config.reference_budget)
    rel = {}
    if traces:
        try:
            rel = relative_suboptimality(traces, f_min=f_ref)
        except DegenerateRunError:
            rel = {}
    for entry in runs:
        key = (entry["solver"], entry["seed"])
        if key in rel:
            entry["final_relative_suboptimality"] = float(rel[key][-1])

    summary = {
        "schema_version": SCHEMA_VERSION,
        "dataset": {"name": dataset.name, "task": dataset.task},
        "stats": problem_stats(problem, cset),
        "batch_size": b,
        "grad_budget": budget,
        "reference_optimum": f_ref,
        "f_min": min((float(np.min(_objectives(t))) for t in traces.values()), default=None),
        "f_max": max((float(np.max(_objectives(t))) for t in traces.values()), default=None),
        "runs": runs,
    }
    if f_ref is not None and summary["f_min"] is not None:
        summary["f_min"] = min(summary["f_min"], f_ref)
    _write_json(os.path.join(config.out_dir, "summary.json"), summary)
    return summary
