"""Overlapping group lasso with safe screening (GDPP, OLS, SOLS)."""
from .model import (DesignMatrix, DualPoint, DualSource, Group, GroupSet, Kind, Problem, ProblemError,
                    Solution, build_problem, inclusive_groups, objective, sparse_augment)
from .path import (LambdaPath, PathResult, SafetyViolation, SolverFailure, find_lambda_prime, lambda_one,
                   reduce_problem, rejection_ratio, run_sequential)
from .screening import Rule, ScreenReport, screen, screen_gdpp, screen_ols, screen_sols, threshold, w_update
from .solver import SolverConfig, StepRule, dual_point, prox_overlap, solve

__version__ = "0.1.0"
