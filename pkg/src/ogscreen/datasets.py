"""Group-structure generators, synthetic data and file loaders."""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

import numpy as np

from .model import DEFAULT_WINDOW, DesignMatrix, GroupSet, ProblemError


class Generator(str, enum.Enum):
    NONOVERLAP = "nonoverlap"
    TREE = "tree"
    OVERLAP = "overlap"
    FILE = "file"


TREE_SIZES = (20, 15, 10, 5)


@dataclass(frozen=True)
class GroupSpec:
    generator: Generator = Generator.OVERLAP
    size: int = 20
    overlap: int = 5
    tree_sizes: tuple[int, ...] = TREE_SIZES
    path: str | None = None
    window: int = DEFAULT_WINDOW

    def __post_init__(self):
        if self.size <= 0 or self.overlap < 0 or any(s <= 0 for s in self.tree_sizes):
            raise ValueError("group sizes must be positive")
        if self.generator is Generator.OVERLAP and self.overlap >= self.size:
            raise ValueError("overlap must be smaller than the group size")


def nonoverlap_groups(n_features: int, size: int = 20) -> list[list[int]]:
    return [list(range(s, min(s + size, n_features))) for s in range(0, n_features, size)]


def overlap_groups(n_features: int, size: int = 20, overlap: int = 5) -> list[list[int]]:
    """Blocks of ``size`` starting every ``size - overlap`` features.

    Blocks stop once one reaches the last feature, so the final block may be
    shorter than ``size``.
    """
    if overlap >= size:
        raise ValueError("overlap must be smaller than the group size")
    stride = size - overlap
    out = []
    start = 0
    while True:
        out.append(list(range(start, min(start + size, n_features))))
        if start + size >= n_features:
            return out
        start += stride


def tree_groups(n_features: int, sizes=TREE_SIZES) -> list[list[int]]:
    """Nested consecutive blocks, level by level; remainders form smaller blocks.

    Children are cut inside their parent only, so each group is a subset of
    its parent. Identical blocks at different levels are all emitted.
    """
    levels = [[(s, min(s + sizes[0], n_features)) for s in range(0, n_features, sizes[0])]]
    for size in sizes[1:]:
        levels.append([(s, min(s + size, hi)) for lo, hi in levels[-1] for s in range(lo, hi, size)])
    return [list(range(lo, hi)) for level in levels for lo, hi in level]


def generate_groups(spec: GroupSpec, n_features: int) -> GroupSet:
    gen = Generator(spec.generator)
    if gen is Generator.FILE:
        if spec.path is None:
            raise ValueError("group file path required")
        raw = read_group_file(spec.path)
    else:
        smallest = min(spec.tree_sizes) if gen is Generator.TREE else spec.size
        if n_features < smallest:
            raise ValueError("too few features for this group structure")
        if gen is Generator.NONOVERLAP:
            raw = nonoverlap_groups(n_features, spec.size)
        elif gen is Generator.OVERLAP:
            raw = overlap_groups(n_features, spec.size, spec.overlap)
        else:
            raw = tree_groups(n_features, spec.tree_sizes)
    return GroupSet.from_lists(raw, spec.window)


_RANGE = re.compile(r"^(\d+)-(\d+)$")


def parse_groups(text: str) -> list[list[int]]:
    """One group per line of whitespace-separated 0-based indices; ``a-b`` is an inclusive range."""
    groups = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        idx = []
        for tok in line.split():
            m = _RANGE.match(tok)
            if m:
                a, b = int(m.group(1)), int(m.group(2))
                if b < a:
                    raise ProblemError(f"line {lineno}: empty range {tok!r}")
                idx.extend(range(a, b + 1))
            elif tok.isdigit():
                idx.append(int(tok))
            else:
                raise ProblemError(f"line {lineno}: bad token {tok!r}")
        groups.append(idx)
    if not groups:
        raise ProblemError("group file defines no groups")
    return groups


def read_group_file(path) -> list[list[int]]:
    with open(path, encoding="utf-8") as fh:
        return parse_groups(fh.read())


def write_group_file(path, groups) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for g in groups:
            idx = g.indices if hasattr(g, "indices") else g
            fh.write(" ".join(str(j) for j in idx) + "\n")


def load_matrix(path, header: bool = False) -> np.ndarray:
    try:
        a = np.loadtxt(path, delimiter=",", skiprows=int(header), ndmin=2)
    except ValueError as exc:
        raise ProblemError(f"cannot parse {path}: {exc}") from None
    return a


def load_response(path, header: bool = False) -> np.ndarray:
    a = load_matrix(path, header)
    if a.shape[1] != 1:
        raise ProblemError(f"{path}: response must have a single column, got {a.shape[1]}")
    return a[:, 0]


def standardize(x: np.ndarray) -> np.ndarray:
    """Scale columns to unit Euclidean norm; all-zero columns are left alone."""
    norms = np.linalg.norm(x, axis=0)
    norms[norms == 0] = 1.0
    return x / norms


@dataclass(frozen=True, eq=False)
class SyntheticData:
    x: DesignMatrix
    y: np.ndarray
    beta: np.ndarray
    groups: list = field(repr=False, default=None)


def synth_data(n_samples: int, n_features: int, sparsity: float = 0.1, noise: float = 0.1,
               seed: int = 0, groups=None) -> SyntheticData:
    """Gaussian design with unit-norm columns and a group-sparse ground truth.

    ``sparsity`` is the fraction of groups (default: blocks of 20) that are
    active; within an active group every coefficient is drawn from N(0, 1).
    """
    if n_samples <= 0 or n_features <= 0 or noise < 0 or not 0 <= sparsity <= 1:
        raise ValueError("invalid synthetic data parameters")
    rng = np.random.default_rng(seed)
    x = standardize(rng.standard_normal((n_samples, n_features)))
    groups = nonoverlap_groups(n_features) if groups is None else [list(getattr(g, "indices", g)) for g in groups]
    beta = np.zeros(n_features)
    n_active = int(np.ceil(sparsity * len(groups))) if sparsity > 0 else 0
    for g in rng.choice(len(groups), size=n_active, replace=False):
        beta[groups[g]] = rng.standard_normal(len(groups[g]))
    y = x @ beta + noise * rng.standard_normal(n_samples)
    return SyntheticData(DesignMatrix.from_array(x), y, beta, groups)
