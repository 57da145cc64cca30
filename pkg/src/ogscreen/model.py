"""Problem, group and solution types for overlapping group lasso.

The penalized problem is

    min_b  1/2 ||y - X b||^2 + lam * sum_g w_g ||b_g||_2

with ``w_g = sqrt(n_g)`` for ordinary groups.  For the sparse variant every
feature additionally forms a singleton group carrying the l1 weight
``lambda1_ratio`` so that ``lam * lambda1_ratio * ||b||_1`` is added.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class Kind(str, enum.Enum):
    OVERLAPPING = "overlapping"
    SPARSE_OVERLAPPING = "sparse"


class DualSource(str, enum.Enum):
    EXACT0 = "exact0"
    FROM_PRIMAL = "from_primal"
    EXTERNAL = "external"


class ProblemError(ValueError):
    """Invalid data or group specification."""


DEFAULT_WINDOW = 50


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Dense design matrix stored column-major with cached column norms."""

    values: np.ndarray
    col_norms: np.ndarray = field(repr=False)

    @classmethod
    def from_array(cls, a) -> "DesignMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ProblemError(f"design matrix must be a non-empty 2-d array, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ProblemError("design matrix contains NaN or Inf")
        a = np.asfortranarray(a)
        a.setflags(write=False)
        norms = np.sqrt(np.einsum("ij,ij->j", a, a))
        norms.setflags(write=False)
        return cls(a, norms)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class Group:
    indices: tuple[int, ...]
    frob_norm: float = field(default=math.nan, compare=False)

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def weight(self) -> float:
        return math.sqrt(self.size)

    @property
    def first(self) -> int:
        return self.indices[0]

    def bind(self, x: DesignMatrix) -> "Group":
        sq = float(np.sum(x.col_norms[list(self.indices)] ** 2))
        return Group(self.indices, math.sqrt(sq))

    def issubset(self, other: "Group") -> bool:
        return set(self.indices).issubset(other.indices)


def sort_key(g: Group):
    # Smallest index first; on ties supersets come before subsets.
    return (g.indices[0], -len(g.indices), g.indices)


def _as_group(raw: Iterable[int]) -> Group:
    idx = [int(i) for i in raw]
    if not idx:
        raise ProblemError("empty group")
    if len(set(idx)) != len(idx):
        raise ProblemError(f"duplicate index in group {idx}")
    if min(idx) < 0:
        raise ProblemError(f"negative index in group {idx}")
    return Group(tuple(sorted(idx)))


@dataclass(frozen=True, eq=False)
class GroupSet:
    """Groups sorted by :func:`sort_key`, plus the inclusive-search window."""

    groups: tuple[Group, ...]
    window: int = DEFAULT_WINDOW

    def __post_init__(self):
        if self.window < 0:
            raise ProblemError("window must be non-negative")
        keys = [sort_key(g) for g in self.groups]
        if any(a >= b for a, b in zip(keys, keys[1:])):
            raise ProblemError("groups must be strictly sorted and free of duplicates")

    @classmethod
    def from_lists(cls, raw: Iterable[Iterable[int]], window: int = DEFAULT_WINDOW) -> "GroupSet":
        """Validate, deduplicate and sort raw index lists."""
        unique = {}
        for r in raw:
            g = _as_group(r)
            unique.setdefault(g.indices, g)
        return cls(tuple(sorted(unique.values(), key=sort_key)), window)

    def __len__(self) -> int:
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    def __getitem__(self, i) -> Group:
        return self.groups[i]

    def as_lists(self) -> list[list[int]]:
        return [list(g.indices) for g in self.groups]

    def position(self, g: Group) -> int:
        return self._positions[g.indices]

    @cached_property
    def _positions(self) -> dict:
        return {g.indices: m for m, g in enumerate(self.groups)}

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.array([g.size for g in self.groups], dtype=np.int64)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """``(ptr, idx)`` such that group m holds ``idx[ptr[m]:ptr[m+1]]``."""
        ptr = np.zeros(len(self.groups) + 1, dtype=np.int64)
        ptr[1:] = np.cumsum(self.sizes)
        idx = np.fromiter((j for g in self.groups for j in g.indices), dtype=np.int64, count=ptr[-1])
        return ptr, idx

    @cached_property
    def max_index(self) -> int:
        return max((g.indices[-1] for g in self.groups), default=-1)

    def covered(self) -> set[int]:
        return {j for g in self.groups for j in g.indices}

    def with_window(self, window: int) -> "GroupSet":
        return GroupSet(self.groups, window)

    def bind(self, x: DesignMatrix) -> "GroupSet":
        return GroupSet(tuple(g.bind(x) for g in self.groups), self.window)

    def inclusive_table(self, window: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """CSR table of windowed inclusive-group positions for every group."""
        window = self.window if window is None else window
        cache = self.__dict__.setdefault("_incl_cache", {})
        if window not in cache:
            lists = [_inclusive_positions(self.groups, m, window) for m in range(len(self.groups))]
            ptr = np.zeros(len(lists) + 1, dtype=np.int64)
            ptr[1:] = np.cumsum([len(c) for c in lists])
            flat = np.fromiter((h for c in lists for h in c), dtype=np.int64, count=ptr[-1])
            cache[window] = (ptr, flat)
        return cache[window]


def _inclusive_positions(groups: Sequence[Group], m: int, window: int) -> list[int]:
    g = set(groups[m].indices)
    stop = min(len(groups), m + window + 1)
    return [k for k in range(m + 1, stop) if g.issuperset(groups[k].indices)]


def inclusive_groups(g: Group | int, groups: GroupSet, window: int | None = None) -> list[Group]:
    """Groups strictly contained in ``g`` among the next ``window`` sorted positions.

    Every proper subset of ``g`` has a smallest index no smaller than that of
    ``g``, so with the sort order used here all candidates follow ``g``; the
    window trades recall for cost.
    """
    m = g if isinstance(g, (int, np.integer)) else groups.position(g)
    window = groups.window if window is None else window
    return [groups[k] for k in _inclusive_positions(groups.groups, int(m), window)]


def sparse_augment(groups: GroupSet, n_features: int) -> GroupSet:
    raw = [g.indices for g in groups] + [(j,) for j in range(n_features)]
    return GroupSet.from_lists(raw, groups.window)


@dataclass(frozen=True, eq=False)
class Problem:
    x: DesignMatrix
    y: np.ndarray
    groups: GroupSet
    kind: Kind = Kind.OVERLAPPING
    lambda1_ratio: float = 1.0
    weights: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.weights is None:
            object.__setattr__(self, "weights", default_weights(self.groups, self.kind, self.lambda1_ratio))
        if len(self.weights) != len(self.groups):
            raise ProblemError("one weight per group required")

    @property
    def n_samples(self) -> int:
        return self.x.n_samples

    @property
    def n_features(self) -> int:
        return self.x.n_features

    @cached_property
    def y_norm(self) -> float:
        return float(np.linalg.norm(self.y))

    @cached_property
    def frob_norms(self) -> np.ndarray:
        return np.array([g.frob_norm for g in self.groups.groups])

    def penalty(self, beta: np.ndarray) -> float:
        ptr, idx = self.groups.csr
        sq = np.add.reduceat(beta[idx] ** 2, ptr[:-1]) if len(idx) else np.zeros(0)
        return float(np.dot(self.weights, np.sqrt(sq)))

    def group_norms(self, beta: np.ndarray) -> np.ndarray:
        ptr, idx = self.groups.csr
        return np.sqrt(np.add.reduceat(beta[idx] ** 2, ptr[:-1]))


def default_weights(groups: GroupSet, kind: Kind, lambda1_ratio: float) -> np.ndarray:
    w = np.sqrt(groups.sizes.astype(float))
    if kind is Kind.SPARSE_OVERLAPPING:
        w[groups.sizes == 1] = lambda1_ratio
    return w


@dataclass(frozen=True, eq=False)
class DualPoint:
    theta: np.ndarray
    lambda0: float
    source: DualSource = DualSource.EXTERNAL

    @classmethod
    def exact_zero(cls, y: np.ndarray, lambda0: float) -> "DualPoint":
        return cls(np.asarray(y, dtype=float) / lambda0, float(lambda0), DualSource.EXACT0)


@dataclass(frozen=True, eq=False)
class Solution:
    beta: np.ndarray
    lam: float
    objective: float
    gap_estimate: float
    iterations: int
    converged: bool = True
    prox_exact: bool = True
    step: float = math.nan

    @property
    def is_zero(self) -> bool:
        return not np.any(self.beta)


def build_problem(
    x,
    y,
    groups,
    kind: Kind | str = Kind.OVERLAPPING,
    lambda1_ratio: float = 1.0,
    window: int = DEFAULT_WINDOW,
) -> Problem:
    """Assemble a validated :class:`Problem`.

    Parameters
    ----------
    x : array-like or DesignMatrix, shape (n_samples, n_features)
    y : array-like, shape (n_samples,)
    groups : iterable of index lists or a GroupSet
        0-based feature indices.  Exact duplicate groups are merged.
    kind : Kind or str
        ``"sparse"`` adds one singleton group per feature (the l1 term).
    lambda1_ratio : float
        Ratio of the l1 weight to the group weight, in (0, 1].
    window : int
        How many following groups to scan for inclusive subgroups.
    """
    kind = Kind(kind)
    if not isinstance(x, DesignMatrix):
        x = DesignMatrix.from_array(x)
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != x.n_samples:
        raise ProblemError(f"y has length {y.shape[0]}, expected {x.n_samples}")
    if not np.all(np.isfinite(y)):
        raise ProblemError("y contains NaN or Inf")
    if not 0 < lambda1_ratio <= 1:
        raise ProblemError("lambda1_ratio must lie in (0, 1]")
    gs = groups.with_window(window) if isinstance(groups, GroupSet) else GroupSet.from_lists(groups, window)
    if gs.max_index >= x.n_features:
        raise ProblemError(f"group index {gs.max_index} out of range for {x.n_features} features")
    if kind is Kind.SPARSE_OVERLAPPING:
        gs = sparse_augment(gs, x.n_features)
    elif len(gs.covered()) != x.n_features:
        missing = sorted(set(range(x.n_features)) - gs.covered())
        raise ProblemError(f"features not covered by any group: {missing[:10]}")
    y.setflags(write=False)
    return Problem(x, y, gs.bind(x), kind, float(lambda1_ratio))


def objective(problem: Problem, beta, lam: float) -> float:
    beta = np.asarray(beta, dtype=float)
    r = problem.y - problem.x.values @ beta
    return 0.5 * float(r @ r) + float(lam) * float(problem.penalty(beta))
