"""Sequential screening along a decreasing regularization path."""
from __future__ import annotations

import csv
import enum
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import DesignMatrix, DualPoint, Group, GroupSet, Problem, ProblemError, Solution, objective, sort_key
from .screening import Rule, ScreenReport, screen
from .solver import SolverConfig, dual_point, solve

logger = logging.getLogger(__name__)


class SafetyViolation(RuntimeError):
    """A discarded coefficient is nonzero in the reference solution."""


class SolverFailure(RuntimeError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class PathOrigin(str, enum.Enum):
    GEOMETRIC = "geometric"
    EXPLICIT = "explicit"


@dataclass(frozen=True, eq=False)
class LambdaPath:
    values: np.ndarray
    origin: PathOrigin = PathOrigin.EXPLICIT
    anchor: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or len(v) == 0:
            raise ValueError("path needs at least one value")
        if np.any(v <= 0) or np.any(np.diff(v) >= 0):
            raise ValueError("path values must be positive and strictly decreasing")
        object.__setattr__(self, "values", v)

    @classmethod
    def geometric(cls, lambda_prime: float, ratio: float = 0.9, steps: int = 30) -> "LambdaPath":
        vals = lambda_prime * ratio ** np.arange(1, steps + 1)
        return cls(vals, PathOrigin.GEOMETRIC, float(lambda_prime))

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


def lambda_one(problem: Problem) -> float:
    """``max_g ||X_g^T y|| / w_g``: the exact zero threshold when groups do not overlap."""
    if problem.y_norm == 0:
        raise ProblemError("degenerate response: y is identically zero")
    c = problem.x.values.T @ problem.y
    return float(max(np.linalg.norm(c[list(g.indices)]) / w for g, w in zip(problem.groups, problem.weights)))


def find_lambda_prime(problem: Problem, ratio: float = 0.9, t_max: int = 200,
                      rule: Rule | str = Rule.OLS, window: int | None = None) -> float:
    """Largest-to-smallest sweep until screening stops certifying the zero solution.

    Walks ``lam_t = lam_{t-1} * ratio`` from :func:`lambda_one`, screening at
    ``lam_t`` with ``theta = y / lam_{t-1}``, and returns the last ``lam_{t-1}``
    at which every group was still discarded.
    """
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    prev = lambda_one(problem)
    for _ in range(2, t_max + 1):
        cur = prev * ratio
        report = screen(problem, cur, DualPoint.exact_zero(problem.y, prev), rule, window)
        if len(report.survivors):
            return prev
        prev = cur
    logger.warning("every group still discarded after %d steps; returning %g", t_max, prev)
    return prev


@dataclass(frozen=True, eq=False)
class Embedding:
    """Maps a reduced coefficient vector back to the full feature space."""

    kept: np.ndarray
    n_features: int

    def scatter(self, beta_reduced) -> np.ndarray:
        out = np.zeros(self.n_features)
        out[self.kept] = beta_reduced
        return out

    def gather(self, beta) -> np.ndarray:
        return np.asarray(beta, dtype=float)[self.kept]


def reduce_problem(problem: Problem, report: ScreenReport) -> tuple[Problem | None, Embedding]:
    """Restrict the problem to features outside every discarded group.

    Surviving groups keep their original weights; groups left empty are dropped
    and groups that collapse onto the same index set merge by adding weights.
    Returns ``(None, embedding)`` when nothing survives.
    """
    zero = np.zeros(problem.n_features, dtype=bool)
    zero[report.zero_features(problem)] = True
    kept = np.flatnonzero(~zero)
    emb = Embedding(kept, problem.n_features)
    if len(kept) == 0 or len(report.survivors) == 0:
        return None, emb
    if len(kept) == problem.n_features and len(report.survivors) == len(problem.groups):
        return problem, emb

    remap = np.full(problem.n_features, -1, dtype=np.int64)
    remap[kept] = np.arange(len(kept))
    merged: dict[tuple[int, ...], float] = {}
    for m in report.survivors:
        g = problem.groups[m]
        red = tuple(int(remap[j]) for j in g.indices if remap[j] >= 0)
        if red:
            merged[red] = merged.get(red, 0.0) + float(problem.weights[m])
    x = DesignMatrix.from_array(problem.x.values[:, kept])
    groups = sorted((Group(k) for k in merged), key=sort_key)
    gs = GroupSet(tuple(groups), problem.groups.window).bind(x)
    weights = np.array([merged[g.indices] for g in gs.groups])
    return Problem(x, problem.y, gs, problem.kind, problem.lambda1_ratio, weights), emb


def rejection_ratio(report_or_zero, reference_beta, tol: float = 1e-6) -> float:
    """Discarded coefficients over coefficients that are zero (within ``tol``) in the reference.

    ``report_or_zero`` is the array of discarded feature indices.
    """
    zero = np.asarray(report_or_zero, dtype=np.int64)
    ref = np.abs(np.asarray(reference_beta, dtype=float))
    bad = zero[ref[zero] > tol] if len(zero) else zero
    if len(bad):
        raise SafetyViolation(
            f"{len(bad)} discarded coefficients are nonzero in the reference (max {ref[bad].max():.3g})")
    denom = int(np.sum(ref <= tol))
    if denom == 0:
        return 1.0
    return len(zero) / denom


@dataclass
class PathStep:
    lam: float
    solution: Solution
    survivors: np.ndarray | None
    n_discarded_coeffs: int
    screen_time: float
    solve_time: float
    screening_active: bool
    rejection_ratio: float = math.nan
    n_true_zero_coeffs: int = -1

    @property
    def beta(self) -> np.ndarray:
        return self.solution.beta


@dataclass
class PathResult:
    rule: Rule | None
    steps: list[PathStep] = field(default_factory=list)
    lambda0: float | None = None

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([s.lam for s in self.steps])

    @property
    def betas(self) -> np.ndarray:
        return np.array([s.beta for s in self.steps])

    @property
    def rejection_ratios(self) -> np.ndarray:
        return np.array([s.rejection_ratio for s in self.steps])

    @property
    def total_time(self) -> float:
        return sum(s.screen_time + s.solve_time for s in self.steps)

    def columns(self) -> list[str]:
        if self.rule is None:
            return ["lambda", "rule", "solve_ms", "objective"]
        return ["lambda", "rule", "n_survivor_groups", "n_discarded_coeffs", "n_true_zero_coeffs",
                "rejection_ratio", "screen_ms", "solve_ms", "objective"]

    def rows(self) -> list[dict]:
        out = []
        for s in self.steps:
            row = {"lambda": repr(float(s.lam)), "rule": self.rule.value if self.rule else "none",
                   "solve_ms": f"{1e3 * s.solve_time:.3f}", "objective": repr(float(s.solution.objective))}
            if self.rule is not None:
                row.update({
                    "n_survivor_groups": "" if s.survivors is None else len(s.survivors),
                    "n_discarded_coeffs": s.n_discarded_coeffs,
                    "n_true_zero_coeffs": "" if s.n_true_zero_coeffs < 0 else s.n_true_zero_coeffs,
                    "rejection_ratio": "" if math.isnan(s.rejection_ratio) else f"{s.rejection_ratio:.6f}",
                    "screen_ms": f"{1e3 * s.screen_time:.3f}",
                })
            out.append(row)
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=self.columns())
            w.writeheader()
            w.writerows(self.rows())


def run_sequential(problem: Problem, path: LambdaPath, rule: Rule | str | None = Rule.OLS,
                   window: int | None = None, config: SolverConfig | None = None, *,
                   lambda0: float | None = None, reference: Sequence[np.ndarray] | None = None,
                   zero_tol: float = 1e-6, safe_eps: float = 0.0) -> PathResult:
    """Solve along ``path`` with sequential screening.

    The first point screens against ``lambda0`` (default ``path.anchor``, the
    value returned by :func:`find_lambda_prime`) with the all-zero solution;
    later points use the previous solution's dual point. Once a step
    discards nothing, screening is switched off for the rest of the path.
    ``rule=None`` gives the unscreened reference run. When ``reference``
    solutions are supplied, rejection ratios are computed and any unsafe
    discard raises :class:`SafetyViolation`.
    """
    rule = None if rule is None or rule == "none" else Rule(rule)
    config = config or SolverConfig()
    anchor = path.anchor if lambda0 is None else lambda0
    if rule is not None and anchor is None:
        anchor = find_lambda_prime(problem, window=window)
    result = PathResult(rule, lambda0=anchor)

    beta = np.zeros(problem.n_features)
    theta = None if anchor is None else DualPoint.exact_zero(problem.y, anchor)
    active = rule is not None
    step_len = None
    for t, lam in enumerate(path.values):
        survivors = None
        n_disc = 0
        t_screen = 0.0
        if active and t == 0 and lam >= anchor:
            # the certified zero solution persists above lambda0
            sol = Solution(np.zeros(problem.n_features), float(lam), 0.5 * problem.y_norm ** 2, 0.0, 0)
            n_disc = problem.n_features
            step = PathStep(float(lam), sol, np.array([], dtype=np.int64), n_disc, 0.0, 0.0, True)
            _attach_ratio(step, np.arange(problem.n_features), reference, t, zero_tol)
            result.steps.append(step)
            continue
        if active:
            report = screen(problem, float(lam), theta, rule, window, safe_eps)
            t_screen = report.elapsed
            zero = report.zero_features(problem)
            survivors = report.survivors
            n_disc = len(zero)
            reduced, emb = reduce_problem(problem, report)
            t0 = time.perf_counter()
            if reduced is None:
                sol = Solution(np.zeros(problem.n_features), float(lam), 0.5 * problem.y_norm ** 2, 0.0, 0)
            else:
                rsol = solve(reduced, float(lam), emb.gather(beta), config, step=step_len)
                step_len = rsol.step
                full = emb.scatter(rsol.beta)
                sol = Solution(full, rsol.lam, objective(problem, full, lam), rsol.gap_estimate, rsol.iterations,
                               rsol.converged, rsol.prox_exact, rsol.step)
            t_solve = time.perf_counter() - t0
        else:
            zero = np.array([], dtype=np.int64)
            t0 = time.perf_counter()
            sol = solve(problem, float(lam), beta, config, step=step_len)
            step_len = sol.step
            t_solve = time.perf_counter() - t0

        step = PathStep(float(lam), sol, survivors, n_disc, t_screen, t_solve, active)
        if rule is not None:
            _attach_ratio(step, zero, reference, t, zero_tol)
        result.steps.append(step)
        if not sol.converged:
            raise SolverFailure(f"solver did not converge at lambda={lam:g}", result)
        beta = sol.beta
        theta = dual_point(problem, sol)
        if active and n_disc == 0:
            active = False
    return result


def _attach_ratio(step: PathStep, zero, reference, t, tol) -> None:
    if reference is None:
        return
    ref = np.asarray(reference[t])
    step.n_true_zero_coeffs = int(np.sum(np.abs(ref) <= tol))
    step.rejection_ratio = rejection_ratio(zero, ref, tol)


def reference_path(problem: Problem, path: LambdaPath, config: SolverConfig | None = None) -> PathResult:
    """Warm-started path without screening."""
    return run_sequential(problem, path, None, config=config)
