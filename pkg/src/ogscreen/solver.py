"""Accelerated proximal gradient solver for the overlapping group lasso.

The proximal step has no closed form when groups overlap; it is computed by
block coordinate ascent on one dual vector per group (see :func:`prox_overlap`).
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .model import DualPoint, DualSource, GroupSet, Problem, Solution

logger = logging.getLogger(__name__)


class StepRule(str, enum.Enum):
    FIXED_LIPSCHITZ = "fixed"
    BACKTRACKING = "backtracking"


@dataclass(frozen=True)
class SolverConfig:
    max_outer_iters: int = 10000
    outer_tol: float = 1e-10
    prox_max_iters: int = 500
    prox_tol: float = 1e-12
    step_rule: StepRule = StepRule.BACKTRACKING
    patience: int = 5
    # extra guard on the proximal-gradient mapping, relative to max(1, |X^T y|_inf);
    # None stops on the objective criterion alone
    kkt_tol: float | None = 1e-9

    def __post_init__(self):
        if min(self.outer_tol, self.prox_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if min(self.max_outer_iters, self.prox_max_iters, self.patience) <= 0:
            raise ValueError("iteration caps must be positive")


class ProxResult(NamedTuple):
    b: np.ndarray
    xi: np.ndarray
    sweeps: int
    exact: bool


def _block_order(groups: GroupSet) -> np.ndarray:
    # Small groups first: for nested (tree) structures one sweep is then exact.
    return np.lexsort((np.arange(len(groups)), groups.sizes)).astype(np.int64)


def prox_overlap(v, tau: float, groups: GroupSet, config: SolverConfig | None = None, *,
                 weights=None, xi0=None, full_output: bool = False):
    """Proximal operator of ``tau * sum_g w_g ||b_g||_2``.

    Solves ``argmin_b 1/2 ||b - v||^2 + tau * sum_g w_g ||b_g||`` through its
    dual: one vector ``xi_g`` per group with ``||xi_g|| <= tau * w_g`` and
    ``b = v - sum_g xi_g``. Each block update projects the partial residual
    onto its ball; sweeps stop once the largest block change is below
    ``config.prox_tol``.

    Parameters
    ----------
    v : ndarray, shape (n_features,)
    tau : float
        Positive scaling of the penalty.
    groups : GroupSet
    weights : ndarray, optional
        Per-group weights, default ``sqrt(n_g)``.
    xi0 : ndarray, optional
        Warm start for the flattened dual vectors (aligned with ``groups.csr``).
    full_output : bool
        Return a :class:`ProxResult` instead of the primal vector only.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    config = config or SolverConfig()
    v = np.asarray(v, dtype=float)
    ptr, idx = groups.csr
    if weights is None:
        weights = np.sqrt(groups.sizes.astype(float))
    xi = np.zeros(len(idx)) if xi0 is None else np.array(xi0, dtype=float)
    order = groups.__dict__.get("_block_order")
    if order is None:
        order = groups.__dict__.setdefault("_block_order", _block_order(groups))
    b, sweeps, exact = _kernels.prox_bcd(v, float(tau), ptr, idx, np.asarray(weights, dtype=float),
                                         order, xi, config.prox_max_iters, config.prox_tol)
    if not exact:
        logger.debug("prox did not reach tolerance in %d sweeps", sweeps)
    if full_output:
        return ProxResult(b, xi, sweeps, exact)
    return b


def dual_blocks(groups: GroupSet, xi: np.ndarray) -> list[np.ndarray]:
    """Split a flat dual vector into per-group blocks."""
    ptr, _ = groups.csr
    return [xi[ptr[m]:ptr[m + 1]] for m in range(len(groups))]


def lipschitz(problem: Problem) -> float:
    return float(np.linalg.norm(problem.x.values, 2) ** 2)


def solve(problem: Problem, lam: float, warm_start=None, config: SolverConfig | None = None,
          step: float | None = None, callback=None) -> Solution:
    """Minimize the penalized least squares objective at ``lam``.

    FISTA with function-value restart, so the recorded objective never
    increases. Stops when the relative objective decrease stays below
    ``config.outer_tol`` for ``config.patience`` consecutive iterations.

    ``step`` seeds the backtracking search (e.g. the step found at the
    previous point of a path). ``callback(iteration, beta, objective)`` is
    called after every accepted iterate.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    config = config or SolverConfig()
    X = problem.x.values
    y = problem.y
    n_features = problem.n_features
    groups = problem.groups
    weights = problem.weights

    if config.step_rule is StepRule.FIXED_LIPSCHITZ:
        L = lipschitz(problem)
        fixed = True
    else:
        if step is not None:
            L = 1.0 / step
        else:
            fro2 = float(np.sum(problem.x.col_norms ** 2))
            # average squared singular value: never above the true constant
            L = fro2 / min(problem.x.shape)
        fixed = False
    L = max(L, 1e-300)
    kkt_scale = max(1.0, float(np.max(np.abs(X.T @ y)))) if config.kkt_tol else 0.0

    beta = np.zeros(n_features) if warm_start is None else np.array(warm_start, dtype=float)
    Xb = X @ beta
    r = Xb - y
    F = 0.5 * float(r @ r) + lam * problem.penalty(beta)
    z, Xz = beta, Xb
    t = 1.0
    xi = np.zeros(len(groups.csr[1]))
    xi_tau = None
    quiet = 0
    prox_exact = True
    converged = False
    it = 0

    def prox_step(point, grad, L):
        nonlocal xi, xi_tau, prox_exact
        tau = lam / L
        if xi_tau is not None:
            xi *= tau / xi_tau
        res = prox_overlap(point - grad / L, tau, groups, config, weights=weights, xi0=xi, full_output=True)
        xi, xi_tau = res.xi, tau
        prox_exact &= res.exact
        return res.b

    while it < config.max_outer_iters:
        it += 1
        gz = X.T @ (Xz - y)
        while True:
            new = prox_step(z, gz, L)
            d = new - z
            # X d directly rather than X new - X z, which cancels once steps are tiny
            Xd = X @ d
            # f(new) = f(z) + <grad, d> + |Xd|^2 / 2 exactly, so the descent
            # condition reduces to a curvature check
            if fixed or float(Xd @ Xd) <= L * float(d @ d):
                break
            L *= 2.0
        Xnew = Xz + Xd
        # objective change from differences, immune to cancellation in F
        dF = 0.5 * float((Xnew - Xb) @ (Xnew + Xb - 2.0 * y)) + lam * _penalty_change(problem, beta, new)

        if dF > 0.0:
            if z is not beta:
                z, Xz, t = beta, Xb, 1.0
                continue
            # a plain proximal step cannot increase F; this is rounding noise,
            # so take the step but keep the recorded objective
            dF = 0.0

        rel = -dF / max(abs(F), 1e-300)
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        mom = (t - 1.0) / t_next
        z = new + mom * (new - beta)
        Xz = Xnew + mom * (Xnew - Xb)
        beta, Xb, F, t = new, Xnew, F + dF, t_next
        if callback is not None:
            callback(it, beta, F)
        if mom == 0.0:
            z = beta
        if it % 200 == 0:
            # resynchronize the running products with the iterates
            Xb = X @ beta
            Xz = Xb if z is beta else X @ z
        quiet = quiet + 1 if rel < config.outer_tol else 0
        if quiet >= config.patience:
            if not config.kkt_tol or L * math.sqrt(float(d @ d)) <= config.kkt_tol * kkt_scale:
                converged = True
                break

    Xb = X @ beta
    grad = X.T @ (Xb - y)
    mapped = prox_step(beta, grad, L)
    gap = float(np.linalg.norm(L * (beta - mapped)))
    if not converged:
        logger.warning("solver hit the iteration cap (%d) at lambda=%g", config.max_outer_iters, lam)
    r = Xb - y
    F = 0.5 * float(r @ r) + lam * problem.penalty(beta)
    return Solution(beta, float(lam), F, gap, it, converged, prox_exact, 1.0 / L)


def _penalty_change(problem: Problem, old: np.ndarray, new: np.ndarray) -> float:
    ptr, idx = problem.groups.csr
    n_old = np.sqrt(_kernels.group_sq_norms(old, ptr, idx, np.empty(len(ptr) - 1)))
    n_new = np.sqrt(_kernels.group_sq_norms(new, ptr, idx, np.empty(len(ptr) - 1)))
    cross = np.add.reduceat((new[idx] - old[idx]) * (new[idx] + old[idx]), ptr[:-1])
    denom = n_old + n_new
    safe = denom > 0
    return float(problem.weights[safe] @ (cross[safe] / denom[safe]))


def dual_point(problem: Problem, solution: Solution) -> DualPoint:
    """Scaled residual ``(y - X beta) / lam``."""
    lam = solution.lam
    if solution.is_zero:
        return DualPoint.exact_zero(problem.y, lam)
    theta = (problem.y - problem.x.values @ solution.beta) / lam
    return DualPoint(theta, lam, DualSource.FROM_PRIMAL)


def dual_objective(problem: Problem, theta: np.ndarray, lam: float) -> float:
    y = problem.y
    diff = theta - y / lam
    return 0.5 * float(y @ y) - 0.5 * lam * lam * float(diff @ diff)
