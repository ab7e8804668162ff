"""Data ingestion, encoding/scaling, and the reference k-means clustering.

CSV files must be rectangular with a header row and no missing entries.
Columns whose every entry parses as a float are numeric and get min-max
scaled to [0, 1]; all other columns are categorical and one-hot encoded
into 0/1 columns named ``column=value``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .grouping import silhouette
from .model import ClusterAssignment, Dataset, PdpError

LLOYD_TOL = 1e-8
LLOYD_MAX_ITER = 300


@dataclass(frozen=True)
class RawTable:
    column_names: tuple[str, ...]
    columns: tuple[tuple, ...]    # parsed floats for numeric, raw strings otherwise
    numeric: tuple[bool, ...]

    @property
    def n_rows(self) -> int:
        return len(self.columns[0]) if self.columns else 0


def _parse_numeric(values):
    out = []
    for v in values:
        try:
            f = float(v)
        except ValueError:
            return None
        if not np.isfinite(f):
            return None
        out.append(f)
    return tuple(out)


def ingest(source, target_column=None) -> RawTable:
    """Read a CSV (path or file object), dropping the target column if named."""
    if hasattr(source, "read"):
        rows = list(csv.reader(source))
    else:
        with open(source, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    if not rows:
        raise PdpError("empty CSV")
    header = [name.strip() for name in rows[0]]
    body = rows[1:]
    if not body:
        raise PdpError("CSV has a header but no data rows")
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise PdpError(f"ragged row {i + 2}: {len(row)} fields, expected {len(header)}")
        if any(cell.strip() == "" for cell in row):
            raise PdpError(f"missing value in row {i + 2}")
    if target_column is not None:
        if target_column not in header:
            raise PdpError(f"target column {target_column!r} not in header")
        drop = header.index(target_column)
        header = header[:drop] + header[drop + 1:]
        body = [row[:drop] + row[drop + 1:] for row in body]
    if not header:
        raise PdpError("no feature columns remain")
    names, columns, numeric = [], [], []
    for j, name in enumerate(header):
        raw = tuple(row[j].strip() for row in body)
        parsed = _parse_numeric(raw)
        names.append(name)
        columns.append(parsed if parsed is not None else raw)
        numeric.append(parsed is not None)
    return RawTable(column_names=tuple(names), columns=tuple(columns),
                    numeric=tuple(numeric))


def encode_and_scale(table: RawTable, return_scaling=False):
    """Min-max scale numeric columns and one-hot encode categorical ones.

    Constant numeric columns map to all zeros.  One-hot columns are already
    0/1 and are not re-scaled.  With `return_scaling` also returns the
    per-feature {min, max} used, for portable descriptions.
    """
    names, cols = [], []
    scaling = {}
    for name, values, is_num in zip(table.column_names, table.columns, table.numeric):
        if is_num:
            arr = np.asarray(values, dtype=float)
            lo, hi = float(arr.min()), float(arr.max())
            scaled = (arr - lo) / (hi - lo) if hi > lo else np.zeros(len(arr))
            names.append(name)
            cols.append(scaled)
            scaling[name] = {"min": lo, "max": hi}
        else:
            for value in sorted(set(values)):
                col_name = f"{name}={value}"
                names.append(col_name)
                cols.append(np.array([1.0 if v == value else 0.0 for v in values]))
                scaling[col_name] = {"min": 0.0, "max": 1.0}
    if not names:
        raise PdpError("no features after encoding")
    data = Dataset(points=np.column_stack(cols), feature_names=tuple(names))
    return (data, scaling) if return_scaling else data


def encode_with_scaling(table: RawTable, scaling: dict, feature_names) -> Dataset:
    """Re-encode a table against a stored feature list and scaler.

    Used when evaluating a saved description against (possibly new) data;
    raises if a required feature cannot be built from the table.
    """
    available = dict(zip(table.column_names, zip(table.columns, table.numeric)))
    cols = []
    for feat in feature_names:
        if feat in available and available[feat][1]:
            arr = np.asarray(available[feat][0], dtype=float)
            lo, hi = scaling[feat]["min"], scaling[feat]["max"]
            cols.append((arr - lo) / (hi - lo) if hi > lo else np.zeros(len(arr)))
        elif "=" in feat:
            col, _, value = feat.partition("=")
            if col not in available or available[col][1]:
                raise PdpError(f"feature {feat!r} not constructible from the data")
            cols.append(np.array([1.0 if v == value else 0.0 for v in available[col][0]]))
        else:
            raise PdpError(f"feature {feat!r} missing from the data")
    return Dataset(points=np.column_stack(cols), feature_names=tuple(feature_names))


@dataclass(frozen=True)
class KmeansResult:
    centers: np.ndarray
    labels: np.ndarray
    inertia: float
    restarts: int
    seed: int


def _kmeanspp_init(points, k, rng):
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = points[rng.integers(n)]
        else:
            centers[j] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


def _lloyd(points, centers):
    k = len(centers)
    labels = None
    for _ in range(LLOYD_MAX_ITER):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        # repair empty clusters with the point farthest from its center
        counts = np.bincount(labels, minlength=k)
        for empty in np.nonzero(counts == 0)[0]:
            worst = int(np.argmax(d2[np.arange(len(points)), labels]))
            centers[empty] = points[worst]
            labels[worst] = empty
            d2[:, empty] = ((points - centers[empty]) ** 2).sum(axis=1)
            counts = np.bincount(labels, minlength=k)
        new_centers = np.array([points[labels == j].mean(axis=0) for j in range(k)])
        shift = np.abs(new_centers - centers).max()
        centers = new_centers
        if shift < LLOYD_TOL:
            break
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    counts = np.bincount(labels, minlength=k)
    for empty in np.nonzero(counts == 0)[0]:
        worst = int(np.argmax(d2[np.arange(len(points)), labels]))
        centers[empty] = points[worst]
        labels[worst] = empty
        d2[:, empty] = ((points - centers[empty]) ** 2).sum(axis=1)
    inertia = float(d2[np.arange(len(points)), labels].sum())
    return centers, labels, inertia


def kmeans(data, k, restarts=100, seed=0) -> KmeansResult:
    """Best of `restarts` k-means++ initializations, Lloyd-refined."""
    points = data.points if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    n = len(points)
    if not 2 <= k <= n:
        raise PdpError(f"k={k} outside 2..{n}")
    if len(np.unique(points, axis=0)) < k:
        raise PdpError(f"k={k} exceeds the number of distinct points")
    child_seeds = np.random.SeedSequence(seed).spawn(restarts)
    best = None
    for r in range(restarts):
        rng = np.random.default_rng(child_seeds[r])
        centers, labels, inertia = _lloyd(points, _kmeanspp_init(points, k, rng))
        if best is None or inertia < best[0]:
            best = (inertia, centers, labels)
    inertia, centers, labels = best
    return KmeansResult(centers=centers, labels=labels, inertia=inertia,
                        restarts=restarts, seed=seed)


def select_k(data: Dataset, k_range=range(2, 11), restarts=100, seed=0):
    """Pick k by the best silhouette score (ties go to the smaller k)."""
    if data.n <= 10:
        raise PdpError("select_k needs more than 10 points")
    best_k, best_score, best_labels = None, -np.inf, None
    for k in k_range:
        result = kmeans(data, k, restarts=restarts, seed=seed)
        score = silhouette(data.points, result.labels)
        if score > best_score:
            best_k, best_score, best_labels = k, score, result.labels
    return best_k, ClusterAssignment(labels=best_labels, k=best_k)
