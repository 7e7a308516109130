"""Command-line interface.

Commands: ``validate``, ``solve``, ``bench-pendulum``, ``bench-random``,
``rollout``.  Exit codes: 0 success, 2 input/validation error, 3
solver/benchmark failure; no other nonzero codes are produced.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor

from . import bench, riccati
from .exceptions import MnlqgError, ProblemFormatError
from .model import load_controller, load_problem, validate

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3

METHOD_NAMES = {"pi": "policy_iteration", "vi": "value_iteration"}


def _read(path):
    with open(path, encoding="utf-8") as handle:
        return handle.read()


def _load_problem_checked(path):
    """Load and validate a problem file; returns (problem, exit_code|None)."""
    problem = load_problem(_read(path))
    report = validate(problem)
    for violation in report.warnings:
        print(f"note: {violation}", file=sys.stderr)
    if report.errors:
        for violation in report.errors:
            print(violation)
        return problem, EXIT_INPUT
    return problem, None


def cmd_validate(args) -> int:
    problem = load_problem(_read(args.problem))
    report = validate(problem)
    for violation in report.violations:
        print(violation)
    if report.ok:
        print("ok")
    elif not report.errors:
        print("ok (with warnings)")
    return EXIT_OK if not report.errors else EXIT_INPUT


def _parse_methods(value: str):
    methods = []
    for name in value.split(","):
        name = name.strip()
        if name not in METHOD_NAMES:
            raise ValueError(f"unknown method {name!r} (expected pi, vi)")
        full = METHOD_NAMES[name]
        if full not in methods:
            methods.append(full)
    if not methods:
        raise ValueError("at least one method is required")
    return tuple(methods)


def _resolve_initial(problem, init):
    if init == "auto":
        return riccati.stabilizing_initial_controller(problem)
    if init == "open-loop":
        return riccati.open_loop_controller(problem)
    if init == "lqg":
        return riccati.noise_free_controller(problem)
    return load_controller(_read(init))


def _history_documents(report, e_k):
    rows = []
    for k, entry in enumerate(report.history):
        row = {"k": k, "delta": entry.delta, "seconds": entry.seconds}
        if e_k is not None:
            row["e_k"] = e_k[k]
        rows.append(row)
    return rows


def _report_document(report, e_k=None):
    return {
        "method": report.method,
        "converged": report.converged,
        "iterations": report.iterations,
        "residual_norm": report.residual_norm,
        "cost": report.cost,
        "controller": {
            "F": report.controller.F.tolist(),
            "K": report.controller.K.tolist(),
            "L": report.controller.L.tolist(),
        },
        "solution": {
            "P": report.solution.P.tolist(),
            "Phat": report.solution.Phat.tolist(),
            "S": report.solution.S.tolist(),
            "Shat": report.solution.Shat.tolist(),
        },
        "history": _history_documents(report, e_k),
    }


def cmd_solve(args) -> int:
    problem, code = _load_problem_checked(args.problem)
    if code is not None:
        return code
    method = METHOD_NAMES[args.method]
    if args.max_iter is not None:
        max_iter = args.max_iter
    elif method == "policy_iteration":
        max_iter = riccati.PI_MAX_ITER
    else:
        max_iter = riccati.VI_MAX_ITER

    if method == "value_iteration":
        report = riccati.value_iteration_solve(problem, tol=args.tol, max_iter=max_iter)
    else:
        initial = _resolve_initial(problem, args.init)
        report = riccati.policy_iteration_solve(
            problem, initial, tol=args.tol, max_iter=max_iter
        )

    e_k = None
    if args.trace:
        e_k = bench.convergence_metric(report.solution_history, report.solution)
    with open(args.out, "w", encoding="utf-8") as handle:
        json.dump(_report_document(report, e_k), handle, indent=2)
        handle.write("\n")
    print(f"method: {report.method}")
    print(f"converged: {str(report.converged).lower()}")
    print(f"iterations: {report.iterations}")
    print(f"residual_norm: {report.residual_norm!r}")
    print(f"cost: {report.cost!r}")
    print(f"report written to {args.out}")
    return EXIT_OK


def _write_bench_outputs(prefix, entries):
    summary_path = f"{prefix}_summary.csv"
    trace_path = f"{prefix}_trace.csv"
    bench.write_summary_csv(summary_path, entries)
    bench.write_trace_csv(trace_path, entries)
    print(f"summary written to {summary_path}")
    print(f"trace written to {trace_path}")


def cmd_bench_pendulum(args) -> int:
    try:
        etas = tuple(float(tok) for tok in args.etas.split(",") if tok.strip())
    except ValueError as exc:
        raise ValueError(f"could not parse --etas: {exc}") from exc
    if not etas:
        raise ValueError("--etas must list at least one value")
    methods = _parse_methods(args.methods)
    config = bench.BenchConfig(etas=etas, methods=methods)
    entries = []
    for eta in etas:
        problem = bench.pendulum_problem(eta)
        result = bench.run_comparison(problem, config)
        entries.append((0, eta, result))
        for rec in result.records:
            if rec.error:
                print(f"eta={eta} {rec.method}: {rec.error}", file=sys.stderr)
    _write_bench_outputs(args.out, entries)
    return EXIT_OK


def cmd_bench_random(args) -> int:
    if args.count < 1:
        raise ValueError("--count must be >= 1")
    if args.jobs < 1:
        raise ValueError("--jobs must be >= 1")
    methods = _parse_methods(args.methods)
    config = bench.BenchConfig(count=args.count, seed=args.seed, methods=methods)
    seeds = [args.seed + index for index in range(args.count)]

    def run_instance(instance_seed):
        try:
            problem, eta = bench.random_problem(instance_seed)
            return instance_seed, eta, bench.run_comparison(problem, config)
        except MnlqgError as exc:
            return instance_seed, None, exc

    if args.jobs == 1:
        results = list(map(run_instance, seeds))
    else:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run_instance, seeds))

    failed = False
    entries = []
    for instance_seed, eta, result in results:
        if eta is None:
            print(f"seed={instance_seed}: {result}", file=sys.stderr)
            failed = True
            continue
        entries.append((instance_seed, eta, result))
        for rec in result.records:
            if rec.error:
                print(f"seed={instance_seed} {rec.method}: {rec.error}", file=sys.stderr)
    _write_bench_outputs(args.out, entries)
    return EXIT_SOLVER if failed else EXIT_OK


def cmd_rollout(args) -> int:
    problem, code = _load_problem_checked(args.problem)
    if code is not None:
        return code
    ctrl = load_controller(_read(args.controller))
    estimate = bench.monte_carlo_cost(
        problem, ctrl, horizon=args.horizon, trials=args.trials, seed=args.seed
    )
    print(f"horizon: {estimate.horizon}")
    print(f"trials: {estimate.trials}")
    print(f"cost_mean: {estimate.cost_mean!r}")
    print(f"cost_stderr: {estimate.cost_stderr!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mnlqg",
        description=(
            "Solvers and benchmarks for optimal linear dynamic output feedback "
            "of discrete-time systems with multiplicative noise."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a problem file against the format invariants")
    p.add_argument("problem", help="path to a problem JSON document")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="solve one problem instance")
    p.add_argument("problem", help="path to a problem JSON document")
    p.add_argument("--method", choices=("pi", "vi"), default="pi")
    p.add_argument("--tol", type=float, default=riccati.DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument(
        "--init",
        default="auto",
        help=(
            "initial policy for pi: 'auto' (open loop, falling back to the "
            "noise-free design), 'open-loop', 'lqg', or a controller JSON path"
        ),
    )
    p.add_argument("--trace", action="store_true", help="include e_k in the report history")
    p.add_argument("--out", required=True, help="path for the report JSON document")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench-pendulum", help="run the pendulum noise-level sweep")
    p.add_argument("--etas", required=True, help="comma-separated noise levels in [0, 1]")
    p.add_argument("--methods", default="pi,vi")
    p.add_argument("--out", required=True, help="output prefix for the CSV files")
    p.set_defaults(func=cmd_bench_pendulum)

    p = sub.add_parser("bench-random", help="run the random-ensemble comparison")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--methods", default="pi,vi")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="output prefix for the CSV files")
    p.set_defaults(func=cmd_bench_random)

    p = sub.add_parser("rollout", help="Monte-Carlo cost estimate for a controller")
    p.add_argument("problem", help="path to a problem JSON document")
    p.add_argument("controller", help="path to a controller JSON document")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_rollout)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ProblemFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except MnlqgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except Exception as exc:  # never leak other nonzero exit codes
        print(f"unexpected error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def console_main() -> None:
    sys.exit(main())
