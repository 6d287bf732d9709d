"""Command-line interface: ``sfwkit run|solve|verify|stats``."""
import argparse
import json
import os
import sys

from .bench import (
    BenchConfig,
    build_problem,
    default_batch_size,
    run_benchmark,
    trace_records,
    write_trace,
    write_trace_csv,
)
from .constraints import ConstraintSet
from .data import load_dataset
from .diagnostics import problem_stats
from .solvers import SOLVER_KINDS, run_solver


def _int_list(text):
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None


def _solver_list(text):
    kinds = [s.strip() for s in text.split(",") if s.strip()]
    bad = [k for k in kinds if k not in SOLVER_KINDS]
    if bad or not kinds:
        raise argparse.ArgumentTypeError(f"solvers must be drawn from {','.join(SOLVER_KINDS)}")
    return kinds


def _data_args(p):
    p.add_argument("--data", required=True,
                   help="dataset path (relative paths also searched under $SFWKIT_DATA_DIR) or a synthetic spec")
    p.add_argument("--format", dest="fmt", choices=("libsvm", "csv", "synth"), default="libsvm")
    p.add_argument("--target", default="-1", help="CSV target column (index or header name)")
    p.add_argument("--loss", choices=("logistic", "squared", "geman"),
                   help="default: logistic for classification data, squared for regression")
    p.add_argument("--constraint", default="l1:1", help="l1:R, simplex:R or linf:R")


def _run_args(p):
    p.add_argument("--batch-size", type=int, help="default: max(1, n // 100)")
    p.add_argument("--grad-budget", type=int, help="derivative evaluations per run (default 100 n)")
    p.add_argument("--trace-every", type=int, default=1, help="record every k-th iteration (0: first/last only)")
    p.add_argument("--gap-stop", type=float, help="stop once the stochastic gap drops below this value")
    p.add_argument("--exact-diagnostics", action="store_true", help="record the exact gap and H_t at checkpoints")
    p.add_argument("--out-format", choices=("csv", "json"), default="csv")


def build_parser():
    parser = argparse.ArgumentParser(prog="sfwkit", description="Stochastic Frank-Wolfe solvers and diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="benchmark several solvers and seeds under one budget")
    _data_args(run)
    _run_args(run)
    run.add_argument("--solver", type=_solver_list, default=["sfw"], help="comma-separated solver list")
    run.add_argument("--seeds", type=_int_list, default=[0], help="comma-separated seeds")
    run.add_argument("--out", default="results", help="output directory")
    run.add_argument("--reference-budget", type=int, default=10**5,
                     help="derivative evaluations for the reference optimum (0 disables)")

    solve = sub.add_parser("solve", help="one solver run; the trace goes to --out or stdout")
    _data_args(solve)
    _run_args(solve)
    solve.add_argument("--solver", choices=SOLVER_KINDS, default="sfw")
    solve.add_argument("--seeds", type=_int_list, default=[0], help="seed (first entry is used)")
    solve.add_argument("--out", help="output file (default: stdout)")

    verify = sub.add_parser("verify", help="run the diagnostics battery and print a JSON report")
    verify.add_argument("--quick", action="store_true", help="reduced problem sizes")
    verify.add_argument("--check", action="append", help="run only this check (repeatable)")
    verify.add_argument("--out", help="also write the report to this file")

    stats = sub.add_parser("stats", help="kappa, diameters and L for a dataset and constraint")
    _data_args(stats)
    return parser


def _load(args):
    target = int(args.target) if args.target.lstrip("-").isdigit() else args.target
    dataset = load_dataset(args.data, args.fmt, target=target)
    loss = {"geman": "geman_mcclure"}.get(args.loss, args.loss)
    return dataset, build_problem(dataset, loss), ConstraintSet.parse(args.constraint)


def _cmd_run(args):
    dataset, _, _ = _load(args)
    config = BenchConfig(
        source=args.data,
        fmt=args.fmt,
        loss={"geman": "geman_mcclure"}.get(args.loss, args.loss),
        constraint=args.constraint,
        solvers=args.solver,
        batch_size=args.batch_size,
        grad_budget=args.grad_budget,
        seeds=args.seeds,
        trace_every=args.trace_every,
        gap_stop=args.gap_stop,
        exact_diagnostics=args.exact_diagnostics,
        out_dir=args.out,
        out_format=args.out_format,
        reference_budget=args.reference_budget,
    )
    summary = run_benchmark(config, dataset)
    failed = [r for r in summary["runs"] if r["status"] != "ok"]
    print(f"{len(summary['runs']) - len(failed)} runs ok, {len(failed)} failed; summary in "
          f"{os.path.join(args.out, 'summary.json')}")
    for r in failed:
        print(f"  {r['solver']} seed {r['seed']}: {r['error']}", file=sys.stderr)
    return 1 if failed else 0


def _cmd_solve(args):
    _, problem, cset = _load(args)
    b = default_batch_size(problem.n) if args.batch_size is None else args.batch_size
    trace = run_solver(
        problem,
        cset,
        args.solver,
        batch_size=b,
        budget=args.grad_budget,
        seed=args.seeds[0],
        trace_every=args.trace_every,
        gap_stop=args.gap_stop,
        exact_diagnostics=args.exact_diagnostics,
    )
    if args.out:
        write_trace(trace, args.out, args.out_format)
    elif args.out_format == "json":
        json.dump({"solver": trace.solver, "seed": trace.seed, "rows": trace_records(trace)}, sys.stdout, indent=2)
        print()
    else:
        write_trace_csv(trace, sys.stdout)
    return 0


def _cmd_verify(args):
    from .verify import run_battery

    report = run_battery(args.check, quick=args.quick)
    text = json.dumps(report, indent=2, default=float)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return 0 if report["passed"] else 1


def _cmd_stats(args):
    _, problem, cset = _load(args)
    print(json.dumps(problem_stats(problem, cset), indent=2))
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "solve": _cmd_solve, "verify": _cmd_verify, "stats": _cmd_stats}[args.command]
    try:
        return handler(args)
    except (OSError, ValueError) as exc:
        print(f"sfwkit: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
