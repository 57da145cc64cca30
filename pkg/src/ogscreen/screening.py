"""Safe screening rules for the overlapping group lasso.

All rules share the same sphere bound on the dual optimum: given the dual
point ``theta0`` at ``lam0 > lam``, a group ``g`` is provably zero at ``lam`` if

    lhs_g < w_g - ||X_g||_F * ||y|| * |1/lam - 1/lam0|

The rules differ only in how tightly they bound ``lhs_g``:

* ``GDPP``: ``||X_g^T theta0||``, ignoring every other group.
* ``OLS``: subtracts budgeted subgradients of groups nested inside ``g``.
* ``SOLS``: the same with only the l1 singletons of the sparse variant.
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import _kernels
from .model import DualPoint, Group, Kind, Problem, inclusive_groups


class Rule(str, enum.Enum):
    GDPP = "gdpp"
    OLS = "ols"
    SOLS = "sols"


class ScreeningError(ValueError):
    pass


@dataclass(frozen=True)
class ScreenDecision:
    group_id: int
    discard: bool
    lhs: float
    threshold: float
    rule: Rule


@dataclass(frozen=True, eq=False)
class ScreenReport:
    rule: Rule
    lhs: np.ndarray
    thresholds: np.ndarray
    lam: float
    lambda0: float
    elapsed: float

    @property
    def discard(self) -> np.ndarray:
        return self.lhs < self.thresholds

    @property
    def survivors(self) -> np.ndarray:
        return np.flatnonzero(~self.discard)

    @property
    def discarded(self) -> np.ndarray:
        return np.flatnonzero(self.discard)

    @property
    def decisions(self) -> list[ScreenDecision]:
        return list(self)

    def __iter__(self) -> Iterator[ScreenDecision]:
        for g, (lhs, thr) in enumerate(zip(self.lhs, self.thresholds)):
            yield ScreenDecision(g, bool(lhs < thr), float(lhs), float(thr), self.rule)

    def __len__(self) -> int:
        return len(self.lhs)

    def zero_features(self, problem: Problem) -> np.ndarray:
        """Sorted union of the indices of all discarded groups."""
        ptr, idx = problem.groups.csr
        mask = np.zeros(problem.n_features, dtype=bool)
        for g in self.discarded:
            mask[idx[ptr[g]:ptr[g + 1]]] = True
        return np.flatnonzero(mask)


def threshold(g: Group, lam: float, lam0: float, y_norm: float, weight: float | None = None,
              safe_eps: float = 0.0) -> float:
    """Right-hand side of the test; negative values mean the group can never be dropped."""
    if lam <= 0 or lam0 <= 0:
        raise ValueError("lambda values must be positive")
    w = g.weight if weight is None else weight
    return w - g.frob_norm * (y_norm * abs(1.0 / lam - 1.0 / lam0) + safe_eps)


def thresholds(problem: Problem, lam: float, lam0: float, safe_eps: float = 0.0) -> np.ndarray:
    radius = problem.y_norm * abs(1.0 / lam - 1.0 / lam0) + safe_eps
    return problem.weights - problem.frob_norms * radius


def w_update(corr: float, n_h: float, d: float) -> tuple[float, float, float]:
    """Fit one coordinate of a nested group's subgradient within the remaining budget ``d``.

    Returns ``(w, d_next, residual_sq)``.
    """
    if d < 0:
        raise ValueError("budget must be non-negative")
    return _kernels.saturate(float(corr), math.sqrt(n_h), float(d))


def ols_lhs(g: Group, ghat1: list[Group], corr: np.ndarray, weights: dict | None = None) -> float:
    """Bound for a single group given its nested groups and ``corr = X^T theta0``.

    ``weights`` optionally maps a nested group's index tuple to its penalty
    weight (default ``sqrt(n_h)``).
    """
    corr = np.asarray(corr, dtype=float)
    active = set(g.indices)
    acc = 0.0
    for h in ghat1:
        hp = [j for j in h.indices if j in active]
        if not hp:
            continue
        wh = h.weight if weights is None else weights.get(h.indices, h.weight)
        if math.sqrt(sum(corr[j] ** 2 for j in hp)) > wh:
            d = 1.0
            for j in hp:
                _, d, r = _kernels.saturate(corr[j], wh, d)
                acc += r
        active.difference_update(hp)
    return math.sqrt(acc + sum(corr[j] ** 2 for j in active))


def _check(problem: Problem, lam: float, theta0: DualPoint, lam0: float | None) -> float:
    lam0 = theta0.lambda0 if lam0 is None else lam0
    if not math.isclose(lam0, theta0.lambda0, rel_tol=1e-12):
        raise ScreeningError(f"dual point certifies lambda={theta0.lambda0}, not {lam0}")
    if lam > lam0:
        raise ScreeningError(f"lambda={lam} must not exceed lambda0={lam0}")
    if theta0.theta.shape != (problem.n_samples,):
        raise ScreeningError("dual point has the wrong length")
    return lam0


def correlations(problem: Problem, theta0: DualPoint) -> np.ndarray:
    return problem.x.values.T @ theta0.theta


def screen_gdpp(problem: Problem, lam: float, lam0: float | None, theta0: DualPoint,
                safe_eps: float = 0.0) -> ScreenReport:
    lam0 = _check(problem, lam, theta0, lam0)
    start = time.perf_counter()
    corr = correlations(problem, theta0)
    ptr, idx = problem.groups.csr
    lhs = np.sqrt(_kernels.group_sq_norms(corr, ptr, idx, np.empty(len(problem.groups))))
    thr = thresholds(problem, lam, lam0, safe_eps)
    return ScreenReport(Rule.GDPP, lhs, thr, lam, lam0, time.perf_counter() - start)


def screen_ols(problem: Problem, lam: float, lam0: float | None, theta0: DualPoint,
               window: int | None = None, safe_eps: float = 0.0) -> ScreenReport:
    """Overlap-aware rule.

    For each group, nested groups found within the next ``window`` sorted
    positions absorb part of the correlation vector, coordinate by
    coordinate, under a unit budget on each nested group's subgradient.
    """
    lam0 = _check(problem, lam, theta0, lam0)
    start = time.perf_counter()
    corr = correlations(problem, theta0)
    ptr, idx = problem.groups.csr
    cand_ptr, cand = problem.groups.inclusive_table(window)
    lhs = _kernels.ols_lhs(corr, ptr, idx, problem.weights, cand_ptr, cand, np.empty(len(problem.groups)))
    thr = thresholds(problem, lam, lam0, safe_eps)
    return ScreenReport(Rule.OLS, lhs, thr, lam, lam0, time.perf_counter() - start)


def screen_sols(problem: Problem, lam: float, lam0: float | None, theta0: DualPoint,
                safe_eps: float = 0.0) -> ScreenReport:
    """Rule for the sparse variant: only the l1 singletons are used as nested groups."""
    if problem.kind is not Kind.SPARSE_OVERLAPPING:
        raise ScreeningError("SOLS needs a sparse overlapping problem")
    lam0 = _check(problem, lam, theta0, lam0)
    start = time.perf_counter()
    corr = correlations(problem, theta0)
    ptr, idx = problem.groups.csr
    lhs = _kernels.sols_lhs(corr, ptr, idx, problem.lambda1_ratio, np.empty(len(problem.groups)))
    thr = thresholds(problem, lam, lam0, safe_eps)
    return ScreenReport(Rule.SOLS, lhs, thr, lam, lam0, time.perf_counter() - start)


def screen(problem: Problem, lam: float, theta0: DualPoint, rule: Rule | str = Rule.OLS,
           window: int | None = None, safe_eps: float = 0.0) -> ScreenReport:
    rule = Rule(rule)
    if rule is Rule.GDPP:
        return screen_gdpp(problem, lam, None, theta0, safe_eps)
    if rule is Rule.OLS:
        return screen_ols(problem, lam, None, theta0, window, safe_eps)
    return screen_sols(problem, lam, None, theta0, safe_eps)


__all__ = [
    "Rule", "ScreenDecision", "ScreenReport", "ScreeningError", "correlations", "inclusive_groups",
    "ols_lhs", "screen", "screen_gdpp", "screen_ols", "screen_sols", "threshold", "thresholds",
    "w_update",
]
