"""Command-line front end.

Exit codes: 0 ok, 2 input error, 3 solver non-convergence, 4 safety violation.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from .datasets import (GroupSpec, Generator, generate_groups, load_matrix, load_response, standardize,
                       synth_data, write_group_file)
from .model import Kind, ProblemError, build_problem
from .path import (LambdaPath, SafetyViolation, SolverFailure, find_lambda_prime, lambda_one,
                   run_sequential)
from .screening import Rule
from .solver import SolverConfig, solve

logger = logging.getLogger("ogscreen")

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_SAFETY = 0, 2, 3, 4


@dataclass
class RunSpec:
    x_path: str | None = None
    y_path: str | None = None
    groups_path: str | None = None
    header: bool = False
    groups: GroupSpec = field(default_factory=GroupSpec)
    kind: Kind = Kind.SPARSE_OVERLAPPING
    l1_ratio: float = 1.0
    rule: Rule | None = Rule.OLS
    ratio: float = 0.9
    steps: int = 30
    lambdas: list[float] | None = None
    seed: int = 0
    n_samples: int = 100
    n_features: int = 200
    sparsity: float = 0.1
    noise: float = 0.1
    standardize: bool | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    safe_eps: float = 0.0
    zero_tol: float = 1e-6
    out: str | None = None

    @property
    def synthetic(self) -> bool:
        return self.x_path is None


def load_problem(spec: RunSpec):
    """Read or synthesize the data and assemble the problem."""
    if spec.synthetic:
        if spec.y_path is not None:
            raise ProblemError("--y given without --x")
        # synthetic columns are always unit-norm; the truth follows the group structure
        gs = generate_groups(spec.groups, spec.n_features)
        data = synth_data(spec.n_samples, spec.n_features, spec.sparsity, spec.noise, spec.seed, gs)
        x, y = data.x.values, data.y
    else:
        if spec.y_path is None:
            raise ProblemError("--y is required with --x")
        x = load_matrix(spec.x_path, spec.header)
        y = load_response(spec.y_path, spec.header)
        if spec.standardize:
            x = standardize(x)
        gs = generate_groups(spec.groups, x.shape[1])
    return build_problem(x, y, gs, spec.kind, spec.l1_ratio, spec.groups.window)


def _lambda_path(problem, spec: RunSpec) -> LambdaPath:
    lp = find_lambda_prime(problem, spec.ratio)
    if spec.lambdas:
        return LambdaPath(np.array(spec.lambdas, dtype=float), anchor=lp)
    return LambdaPath.geometric(lp, spec.ratio, spec.steps)


def run(spec: RunSpec) -> int:
    """Screened path plus unscreened reference; writes the CSV and a JSON summary."""
    try:
        problem = load_problem(spec)
        path = _lambda_path(problem, spec)
    except (ProblemError, ValueError, OSError) as exc:
        logger.error("input error: %s", exc)
        return EXIT_INPUT
    try:
        ref = run_sequential(problem, path, None, config=spec.solver)
        result = ref
        if spec.rule is not None:
            result = run_sequential(problem, path, spec.rule, config=spec.solver, lambda0=path.anchor,
                                    reference=ref.betas, zero_tol=spec.zero_tol, safe_eps=spec.safe_eps)
    except SolverFailure as exc:
        logger.error("%s", exc)
        return EXIT_SOLVER
    except SafetyViolation as exc:
        logger.error("safety violation: %s", exc)
        return EXIT_SAFETY

    summary = {
        "rule": spec.rule.value if spec.rule else "none",
        "n_samples": problem.n_samples,
        "n_features": problem.n_features,
        "n_groups": len(problem.groups),
        "lambda_prime": path.anchor,
        "reference_seconds": ref.total_time,
        "screened_seconds": result.total_time,
    }
    if spec.rule is not None:
        ratios = result.rejection_ratios
        summary["speedup"] = ref.total_time / result.total_time if result.total_time > 0 else math.inf
        summary["mean_rejection_ratio"] = float(np.mean(ratios))
        summary["rejection_ratios"] = [float(r) for r in ratios]
        summary["max_rel_objective_diff"] = max(
            abs(a.solution.objective - b.solution.objective) / max(abs(b.solution.objective), 1e-300)
            for a, b in zip(result.steps, ref.steps))
    if spec.out:
        result.to_csv(spec.out)
        with open(spec.out + ".summary.json", "w") as fh:
            json.dump(summary, fh, indent=2)
    else:
        w = csv.DictWriter(sys.stdout, fieldnames=result.columns())
        w.writeheader()
        w.writerows(result.rows())
    logger.info("summary: %s", json.dumps({k: v for k, v in summary.items() if k != "rejection_ratios"}))
    return EXIT_OK


def _data_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data")
    g.add_argument("--x", dest="x_path", help="design matrix CSV (rows are samples)")
    g.add_argument("--y", dest="y_path", help="single-column response CSV")
    g.add_argument("--header", action="store_true", help="skip one header row in the CSV files")
    g.add_argument("--groups", dest="groups_path", help="group file (one group per line)")
    g.add_argument("--generator", choices=[e.value for e in Generator],
                   help="group structure; default 'file' with --groups, else 'overlap'")
    g.add_argument("--group-size", type=int, default=20)
    g.add_argument("--overlap", type=int, default=5)
    g.add_argument("--kind", choices=[k.value for k in Kind], default=Kind.SPARSE_OVERLAPPING.value)
    g.add_argument("--l1-ratio", type=float, default=1.0, help="l1 weight relative to the group weight")
    g.add_argument("--window", type=int, default=50, help="search window for nested groups")
    g.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=None,
                   help="scale columns to unit norm (default: on for synthetic data, off for files)")
    s = p.add_argument_group("synthetic data (used when --x is absent)")
    s.add_argument("--n-samples", type=int, default=100)
    s.add_argument("--n-features", type=int, default=200)
    s.add_argument("--sparsity", type=float, default=0.1)
    s.add_argument("--noise", type=float, default=0.1)
    s.add_argument("--seed", type=int, default=0)
    v = p.add_argument_group("solver")
    v.add_argument("--tol", type=float, default=1e-10, help="relative objective change for stopping")
    v.add_argument("--max-iter", type=int, default=10000)


def _spec_from_args(args) -> RunSpec:
    gen = args.generator or (Generator.FILE.value if args.groups_path else Generator.OVERLAP.value)
    if gen == Generator.FILE.value and not args.groups_path:
        raise ProblemError("--generator file needs --groups")
    groups = GroupSpec(Generator(gen), args.group_size, args.overlap, path=args.groups_path, window=args.window)
    return RunSpec(
        x_path=args.x_path, y_path=args.y_path, groups_path=args.groups_path, header=args.header,
        groups=groups, kind=Kind(args.kind), l1_ratio=args.l1_ratio,
        seed=args.seed, n_samples=args.n_samples, n_features=args.n_features, sparsity=args.sparsity,
        noise=args.noise, standardize=args.standardize,
        solver=SolverConfig(outer_tol=args.tol, max_outer_iters=args.max_iter),
    )


def _write_vector(path, values, header=None) -> None:
    out = sys.stdout if path is None else open(path, "w")
    try:
        if header:
            out.write(header + "\n")
        for v in values:
            out.write(repr(float(v)) + "\n")
    finally:
        if path is not None:
            out.close()


def cmd_path(args) -> int:
    spec = _spec_from_args(args)
    spec = replace(spec, rule=None if args.rule == "none" else Rule(args.rule), ratio=args.ratio,
                   steps=args.steps, lambdas=args.lambdas, safe_eps=args.safe_eps, zero_tol=args.zero_tol,
                   out=args.out)
    return run(spec)


def cmd_solve(args) -> int:
    problem = load_problem(_spec_from_args(args))
    sol = solve(problem, args.lam, config=SolverConfig(outer_tol=args.tol, max_outer_iters=args.max_iter))
    logger.info("objective %.12g after %d iterations (gap %.3g)", sol.objective, sol.iterations, sol.gap_estimate)
    _write_vector(args.out, sol.beta)
    return EXIT_OK if sol.converged else EXIT_SOLVER


def cmd_lambda_prime(args) -> int:
    problem = load_problem(_spec_from_args(args))
    lp = find_lambda_prime(problem, args.ratio, rule=Rule(args.rule))
    print(json.dumps({"lambda_one": lambda_one(problem), "lambda_prime": lp}))
    return EXIT_OK


def cmd_gen_groups(args) -> int:
    gen = Generator(args.generator)
    if gen is Generator.FILE:
        raise ProblemError("gen-groups needs a synthetic generator")
    gs = generate_groups(GroupSpec(gen, args.group_size, args.overlap), args.n_features)
    if args.out:
        write_group_file(args.out, gs)
    else:
        for g in gs:
            print(" ".join(map(str, g.indices)))
    return EXIT_OK


def cmd_synth(args) -> int:
    groups = None
    if args.generator and args.generator != Generator.FILE.value:
        groups = generate_groups(GroupSpec(Generator(args.generator), args.group_size, args.overlap),
                                 args.n_features)
    data = synth_data(args.n_samples, args.n_features, args.sparsity, args.noise, args.seed, groups)
    os.makedirs(args.out, exist_ok=True)
    np.savetxt(os.path.join(args.out, "X.csv"), data.x.values, delimiter=",", fmt="%.17g")
    np.savetxt(os.path.join(args.out, "y.csv"), data.y, fmt="%.17g")
    np.savetxt(os.path.join(args.out, "beta.csv"), data.beta, fmt="%.17g")
    write_group_file(os.path.join(args.out, "groups.txt"), data.groups)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ogscreen", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("path", help="screened regularization path with reference comparison")
    _data_args(p)
    p.add_argument("--rule", choices=["gdpp", "ols", "sols", "none"], default="ols")
    p.add_argument("--ratio", type=float, default=0.9, help="geometric ratio of the path")
    p.add_argument("--steps", type=int, default=30)
    p.add_argument("--lambdas", type=float, nargs="+", help="explicit decreasing path")
    p.add_argument("--safe-eps", type=float, default=0.0, help="inflate the dual sphere radius")
    p.add_argument("--zero-tol", type=float, default=1e-6)
    p.add_argument("--out", help="CSV output path (summary goes to OUT.summary.json)")
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("solve", help="solve at a single lambda")
    _data_args(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("lambda-prime", help="smallest path value with a certified zero solution")
    _data_args(p)
    p.add_argument("--rule", choices=["gdpp", "ols", "sols"], default="ols")
    p.add_argument("--ratio", type=float, default=0.9)
    p.set_defaults(func=cmd_lambda_prime)

    p = sub.add_parser("gen-groups", help="write a synthetic group file")
    p.add_argument("--generator", choices=["nonoverlap", "tree", "overlap"], default="overlap")
    p.add_argument("--n-features", type=int, required=True)
    p.add_argument("--group-size", type=int, default=20)
    p.add_argument("--overlap", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_groups)

    p = sub.add_parser("synth", help="write synthetic X.csv, y.csv, beta.csv and groups.txt")
    p.add_argument("--n-samples", type=int, default=100)
    p.add_argument("--n-features", type=int, default=200)
    p.add_argument("--sparsity", type=float, default=0.1)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--generator", choices=["nonoverlap", "tree", "overlap"], default="nonoverlap")
    p.add_argument("--group-size", type=int, default=20)
    p.add_argument("--overlap", type=int, default=5)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ProblemError, ValueError, OSError) as exc:
        logger.error("input error: %s", exc)
        return EXIT_INPUT
    except SolverFailure as exc:
        logger.error("%s", exc)
        return EXIT_SOLVER
    except SafetyViolation as exc:
        logger.error("safety violation: %s", exc)
        return EXIT_SAFETY


if __name__ == "__main__":
    sys.exit(main())
