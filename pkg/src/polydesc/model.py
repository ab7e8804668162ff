"""Core domain types for polyhedral cluster descriptions.

A description assigns one polyhedron (an intersection of half-spaces
``{x : w.x <= b}`` with small integer ``w``) to each cluster.  A point is
correctly explained when it lies inside its own cluster's polyhedron and
outside every other cluster's polyhedron.  Membership is non-strict: points
exactly on a boundary belong to the half-space.

All types here are immutable after construction and safe to share across
threads; the operations are pure functions of their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CORRECT = "correct"
FALSE_NEGATIVE = "false_negative"
FALSE_POSITIVE = "false_positive"
BOTH = "both"


class PdpError(Exception):
    pass


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """An n-by-m matrix of finite reals with named features."""

    points: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise PdpError(f"points must be a non-empty 2-d matrix, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise PdpError("points contain non-finite entries")
        names = tuple(str(n) for n in self.feature_names)
        if len(names) != pts.shape[1]:
            raise PdpError(f"{len(names)} feature names for {pts.shape[1]} columns")
        if len(set(names)) != len(names):
            raise PdpError("feature names must be pairwise distinct")
        object.__setattr__(self, "points", _frozen_array(pts))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def m(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class ClusterAssignment:
    """A partition of point indices into clusters 0..K-1."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        if labels.ndim != 1:
            raise PdpError("labels must be one-dimensional")
        if self.k < 1:
            raise PdpError("need at least one cluster")
        if labels.min(initial=0) < 0 or labels.max(initial=-1) >= self.k:
            raise PdpError(f"labels outside 0..{self.k - 1}")
        counts = np.bincount(labels, minlength=self.k)
        if np.any(counts == 0):
            raise PdpError(f"empty clusters: {np.nonzero(counts == 0)[0].tolist()}")
        object.__setattr__(self, "labels", _frozen_array(labels, dtype=int))

    @property
    def n(self) -> int:
        return len(self.labels)

    def members(self, cluster: int) -> np.ndarray:
        return np.nonzero(self.labels == cluster)[0]

    @classmethod
    def from_labels(cls, labels) -> "ClusterAssignment":
        labels = np.asarray(labels, dtype=int)
        return cls(labels=labels, k=int(labels.max()) + 1)


@dataclass(frozen=True)
class HalfSpace:
    """The set {x : w.x <= b} for an integer coefficient vector w."""

    w: tuple[int, ...]
    b: float

    def __post_init__(self):
        w = tuple(int(v) for v in self.w)
        if not any(w):
            raise PdpError("half-space coefficient vector must be nonzero")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))

    @property
    def m(self) -> int:
        return len(self.w)

    def key(self) -> tuple:
        """Exact-identity key used for pool deduplication."""
        return (self.w, round(self.b, 9))

    def check_bounds(self, w_max: int, beta: int) -> None:
        if max(abs(v) for v in self.w) > w_max:
            raise PdpError(f"|w| exceeds W={w_max}: {self.w}")
        if sum(v != 0 for v in self.w) > beta:
            raise PdpError(f"||w||_0 exceeds beta={beta}: {self.w}")


def halfspace_contains_point(h: HalfSpace, x) -> bool:
    """Non-strict membership test w.x <= b."""
    x = np.asarray(x, dtype=float)
    if x.shape != (h.m,):
        raise PdpError(f"point of dimension {x.shape} vs half-space dimension {h.m}")
    return bool(float(np.dot(h.w, x)) <= h.b)


def halfspace_complexity(h: HalfSpace) -> int:
    """Number of nonzero coefficients plus one."""
    return sum(v != 0 for v in h.w) + 1


@dataclass(frozen=True)
class Polyhedron:
    """Intersection of one or more half-spaces."""

    halfspaces: tuple[HalfSpace, ...]

    def __post_init__(self):
        hs = tuple(self.halfspaces)
        if not hs:
            raise PdpError("a polyhedron needs at least one half-space")
        if len({h.m for h in hs}) != 1:
            raise PdpError("half-spaces of mixed dimension")
        object.__setattr__(self, "halfspaces", hs)

    def contains(self, x) -> bool:
        return all(halfspace_contains_point(h, x) for h in self.halfspaces)

    def contains_points(self, points: np.ndarray) -> np.ndarray:
        """Vectorized membership over the rows of `points`."""
        w = np.array([h.w for h in self.halfspaces], dtype=float)
        b = np.array([h.b for h in self.halfspaces])
        return np.all(points @ w.T <= b, axis=1)


@dataclass(frozen=True)
class DescriptionMetrics:
    accuracy: float
    sparsity: int
    complexity: int


@dataclass(frozen=True)
class PointClassification:
    statuses: tuple[str, ...]
    misexplained: frozenset[int]


@dataclass(frozen=True)
class DescriptionSolution:
    polyhedra: tuple[Polyhedron, ...]
    misexplained: frozenset[int]
    metrics: DescriptionMetrics
    # clusters whose empty selection was repaired with a trivial bounding
    # half-space (see master.extract_solution)
    patched_clusters: tuple[int, ...] = ()

    def selection(self) -> list[tuple[HalfSpace, int]]:
        return [(h, k) for k, poly in enumerate(self.polyhedra) for h in poly.halfspaces]


@dataclass(frozen=True)
class PdpConfig:
    """Solve-time settings; W and beta bound candidate half-spaces."""

    w_max: int = 1
    beta: int = 1
    theta1: float = 1.0
    theta2: float = 0.0
    alpha: float | None = None
    kappa: float = 0.05
    p: int = 10
    epsilon_strict: float = 1e-4
    colgen_time_limit_s: float = 300.0
    pricing_time_limit_s: float = 30.0

    def __post_init__(self):
        if int(self.w_max) < 1 or int(self.beta) < 1:
            raise PdpError("W and beta must be positive integers")
        if self.theta1 < 0 or self.theta2 < 0 or self.theta1 + self.theta2 <= 0:
            raise PdpError("need theta1, theta2 >= 0 with theta1 + theta2 > 0")
        if self.alpha is not None and self.alpha < 0:
            raise PdpError("alpha must be >= 0")
        if self.p < 1:
            raise PdpError("p must be >= 1")
        if self.epsilon_strict <= 0:
            raise PdpError("epsilon_strict must be positive")

    @classmethod
    def preset(cls, name: str, **overrides) -> "PdpConfig":
        """`lc` minimizes total half-space complexity, `sp` feature count.

        The sp preset keeps a tiny complexity weight as a tie-break so that
        sparsity-optimal solutions do not proliferate half-spaces.
        """
        name = name.lower()
        if name == "lc":
            params = dict(theta1=1.0, theta2=0.0)
        elif name == "sp":
            params = dict(theta1=1e-6, theta2=1.0)
        else:
            raise PdpError(f"unknown preset {name!r} (expected 'lc' or 'sp')")
        params.update(overrides)
        return cls(**params)


def _membership_matrix(polyhedra, data: Dataset) -> np.ndarray:
    """n-by-K boolean matrix: point i lies in polyhedron k."""
    cols = []
    for poly in polyhedra:
        if poly is None:  # no half-space selected: the whole space
            cols.append(np.ones(data.n, dtype=bool))
        else:
            cols.append(poly.contains_points(data.points))
    return np.column_stack(cols)


def classify_points(polyhedra, data: Dataset, ca: ClusterAssignment) -> PointClassification:
    """Per-point explanation status against one polyhedron per cluster."""
    if len(polyhedra) != ca.k:
        raise PdpError(f"{len(polyhedra)} polyhedra for {ca.k} clusters")
    inside = _membership_matrix(polyhedra, data)
    own = inside[np.arange(data.n), ca.labels]
    others = inside.copy()
    others[np.arange(data.n), ca.labels] = False
    foreign = others.any(axis=1)
    statuses = []
    for i in range(data.n):
        if own[i] and not foreign[i]:
            statuses.append(CORRECT)
        elif not own[i] and foreign[i]:
            statuses.append(BOTH)
        elif not own[i]:
            statuses.append(FALSE_NEGATIVE)
        else:
            statuses.append(FALSE_POSITIVE)
    mis = frozenset(np.nonzero(~(own & ~foreign))[0].tolist())
    return PointClassification(statuses=tuple(statuses), misexplained=mis)


def cost(polyhedra, data: Dataset, ca: ClusterAssignment) -> int:
    """Number of incorrectly explained data points."""
    return len(classify_points(polyhedra, data, ca).misexplained)


def grouped_cost(polyhedra, groups, data: Dataset, ca: ClusterAssignment) -> int:
    """Size-weighted count of groups with at least one misexplained member.

    Uses point-level membership of the group members, never bounding boxes,
    so this always over-estimates :func:`cost`.
    """
    seen = np.zeros(data.n, dtype=bool)
    for g in groups:
        members = np.asarray(g.members, dtype=int)
        if members.size == 0:
            raise PdpError("empty group")
        labels = ca.labels[members]
        if np.unique(labels).size != 1:
            raise PdpError(f"group {g} mixes points from several clusters")
        if int(labels[0]) != int(g.cluster):
            raise PdpError(f"group claims cluster {g.cluster} but members are in {labels[0]}")
        if seen[members].any():
            raise PdpError("groups overlap")
        seen[members] = True
    if not seen.all():
        raise PdpError("groups do not cover every point")
    mis = classify_points(polyhedra, data, ca).misexplained
    total = 0
    for g in groups:
        if any(int(i) in mis for i in g.members):
            total += len(g.members)
    return total


def description_metrics(selected, data: Dataset, ca: ClusterAssignment) -> DescriptionMetrics:
    """Accuracy, feature sparsity and total complexity of a selection.

    `selected` is a list of (half-space, cluster id) pairs; a half-space
    reused by several clusters contributes its complexity once per use.
    """
    if not selected:
        raise PdpError("empty selection")
    by_cluster: list[list[HalfSpace]] = [[] for _ in range(ca.k)]
    for h, k in selected:
        by_cluster[int(k)].append(h)
    polyhedra = [Polyhedron(tuple(hs)) if hs else None for hs in by_cluster]
    inside = _membership_matrix(polyhedra, data)
    own = inside[np.arange(data.n), ca.labels]
    others = inside.copy()
    others[np.arange(data.n), ca.labels] = False
    n_bad = int(np.sum(~(own & ~others.any(axis=1))))
    used = set()
    for h, _ in selected:
        used.update(d for d, v in enumerate(h.w) if v != 0)
    return DescriptionMetrics(
        accuracy=1.0 - n_bad / data.n,
        sparsity=len(used),
        complexity=sum(halfspace_complexity(h) for h, _ in selected),
    )
