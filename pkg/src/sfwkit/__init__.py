"""Constant batch-size stochastic Frank-Wolfe for constrained finite sums.

The solvers minimise (1/n) sum_i f_i(x_i^T w) over an l1 ball, scaled simplex
or l_inf ball, keeping a table of the most recent per-sample derivatives so
each iteration costs O(batch support). Baselines (deterministic Frank-Wolfe
and two published stochastic variants) share the same state layout, and
:mod:`sfwkit.diagnostics` evaluates the convergence bounds they are checked
against.
"""
from .bench import BenchConfig, relative_suboptimality, run_benchmark
from .constraints import ConstraintSet, VertexStep, diameter, kappa, lmo, vertices
from .data import Dataset, parse_csv, parse_libsvm, serialize_libsvm, synth_dataset
from .numkit import ArgmaxTracker, DesignMatrix, argmax_abs, row_dot, scatter_axpy
from .problem import LossModel, Problem, full_gradient, grad_table, objective
from .solvers import (
    Schedule,
    SolverState,
    Trace,
    TraceRow,
    fw_step,
    init_state,
    lufreund_step,
    mokhtari_step,
    reference_optimum,
    run_solver,
    sample_batch,
    sfw_step,
)

__version__ = "0.1.0"

__all__ = [
    "ArgmaxTracker",
    "BenchConfig",
    "ConstraintSet",
    "Dataset",
    "DesignMatrix",
    "LossModel",
    "Problem",
    "Schedule",
    "SolverState",
    "Trace",
    "TraceRow",
    "VertexStep",
    "argmax_abs",
    "diameter",
    "full_gradient",
    "fw_step",
    "grad_table",
    "init_state",
    "kappa",
    "lmo",
    "lufreund_step",
    "mokhtari_step",
    "objective",
    "parse_csv",
    "parse_libsvm",
    "reference_optimum",
    "relative_suboptimality",
    "row_dot",
    "run_benchmark",
    "run_solver",
    "sample_batch",
    "scatter_axpy",
    "serialize_libsvm",
    "sfw_step",
    "synth_dataset",
    "vertices",
]
