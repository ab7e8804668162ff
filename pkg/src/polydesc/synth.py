"""Synthetic Gaussian mixtures and the grouping-versus-subsampling study.

Instances draw cluster centers uniformly from [-1, 1]^m and add isotropic
Gaussian noise with standard deviation sigma.  The study compares two ways
of shrinking the description IP to a target number of units: complete-
linkage groups (summarized by bounding boxes) versus a uniform subsample of
the same size.  Both are solved with the same candidate pool of univariate
splits and evaluated by the fraction of the FULL dataset their solution
fails to explain.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import time
from dataclasses import dataclass

import numpy as np

from .grouping import Group, merge_sequence
from .master import MIN_ALPHA, build_master, compute_membership_sets, solve_master_ip
from .model import ClusterAssignment, Dataset, HalfSpace, PdpConfig, PdpError, classify_points

LOGGER = logging.getLogger("polydesc.synth")


@dataclass(frozen=True)
class SynthConfig:
    k: int
    m: int
    n_per_cluster: int | tuple[int, ...]
    sigma: float
    seed: int

    def __post_init__(self):
        sizes = self.cluster_sizes()
        if self.k < 1 or self.m < 1 or any(s < 1 for s in sizes) or self.sigma < 0:
            raise PdpError("all synthetic-instance parameters must be positive")

    def cluster_sizes(self) -> tuple[int, ...]:
        if np.isscalar(self.n_per_cluster):
            return (int(self.n_per_cluster),) * self.k
        sizes = tuple(int(v) for v in self.n_per_cluster)
        if len(sizes) != self.k:
            raise PdpError(f"{len(sizes)} cluster sizes for k={self.k}")
        return sizes


def generate(cfg: SynthConfig):
    """Sample a seeded Gaussian-mixture instance."""
    rng = np.random.default_rng(cfg.seed)
    centers = rng.uniform(-1.0, 1.0, size=(cfg.k, cfg.m))
    sizes = cfg.cluster_sizes()
    chunks, labels = [], []
    for k, size in enumerate(sizes):
        chunks.append(centers[k] + cfg.sigma * rng.standard_normal((size, cfg.m)))
        labels.extend([k] * size)
    data = Dataset(points=np.vstack(chunks),
                   feature_names=tuple(f"f{d}" for d in range(cfg.m)))
    return data, ClusterAssignment(labels=np.array(labels), k=cfg.k)


@dataclass(frozen=True)
class ExperimentRow:
    sigma: float
    sample_size: int
    method: str            # grouped | subsampled
    mean_error: float
    std_error: float


@dataclass
class ExperimentResult:
    rows: list[ExperimentRow]
    trial_seeds: list[int]


def write_rows_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sigma", "sample_size", "method", "mean_error", "std_error"])
        for r in rows:
            writer.writerow([r.sigma, r.sample_size, r.method,
                             f"{r.mean_error:.6f}", f"{r.std_error:.6f}"])


def _minmax(points):
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (points - lo) / span


def _midpoint_thresholds(points, cap=None):
    """Per feature: thresholds at midpoints of consecutive distinct values."""
    out = []
    for d in range(points.shape[1]):
        vals = np.unique(points[:, d])
        mids = (vals[:-1] + vals[1:]) / 2.0
        if cap is not None and len(mids) > cap:
            pick = np.linspace(0, len(mids) - 1, cap).round().astype(int)
            mids = mids[np.unique(pick)]
        out.append(mids)
    return out


def _dominant_pairs(thresholds_by_feature, groups, m, k_count):
    """Per-cluster candidate (half-space, cluster) pairs after pruning.

    For the error-minimizing master the only thing a column buys a cluster
    is the set of foreign units it fully excludes, and that set changes only
    at the foreign box corners along the feature.  Among all pool thresholds
    that exclude the same foreign units the one closest to those corners
    cuts off the fewest own units, so it dominates the rest; only these
    representatives are kept (one chain per feature, orientation, cluster).
    """
    lows = np.array([g.box_low for g in groups])
    highs = np.array([g.box_high for g in groups])
    clusters = np.array([g.cluster for g in groups])
    halfspaces: list[HalfSpace] = []
    index: dict = {}
    pairs = []
    for d in range(m):
        mids = np.asarray(thresholds_by_feature[d])
        if len(mids) == 0:
            continue
        e_d = tuple(1 if j == d else 0 for j in range(m))
        neg_e_d = tuple(-v for v in e_d)
        for k in range(k_count):
            foreign = clusters != k
            # {x_d <= b} fully excludes boxes with low_d > b: one threshold
            # just below each distinct foreign low
            ix = np.unique(np.searchsorted(mids, np.unique(lows[foreign, d]), side="left") - 1)
            for t in mids[ix[ix >= 0]]:
                h = HalfSpace(w=e_d, b=float(t))
                pairs.append((index.setdefault(h.key(), len(halfspaces)), k))
                if index[h.key()] == len(halfspaces):
                    halfspaces.append(h)
            # {x_d >= v} fully excludes boxes with high_d < v: one threshold
            # just above each distinct foreign high
            ix = np.unique(np.searchsorted(mids, np.unique(highs[foreign, d]), side="right"))
            for t in mids[ix[ix < len(mids)]]:
                h = HalfSpace(w=neg_e_d, b=float(-t))
                pairs.append((index.setdefault(h.key(), len(halfspaces)), k))
                if index[h.key()] == len(halfspaces):
                    halfspaces.append(h)
    return halfspaces, pairs


_SYNTH_CFG = PdpConfig(w_max=1, beta=1, theta1=1.0, theta2=0.0)


def _solve_min_alpha_ip(data, ca, groups, thresholds_by_feature,
                        time_limit_s, backend):
    """Solve the error-minimizing master IP over grouped units."""
    halfspaces, pairs = _dominant_pairs(thresholds_by_feature, groups, data.m, ca.k)
    pool = compute_membership_sets(halfspaces, data, ca, groups=groups)
    mp = build_master(pool, _SYNTH_CFG, mode="ip", objective=MIN_ALPHA, pairs=pairs)
    res = solve_master_ip(mp, time_limit_s=time_limit_s, backend=backend)
    if res.xi is None:
        raise PdpError(f"synthetic master IP returned no incumbent ({res.status})")
    return [(pool.halfspaces[h], k) for h, k, _ in res.selected]


def _full_data_error(selection, data, ca) -> float:
    """Fraction of all points the selected description misexplains."""
    from .model import Polyhedron
    by_cluster = [[] for _ in range(ca.k)]
    for h, k in selection:
        by_cluster[k].append(h)
    polyhedra = [Polyhedron(tuple(hs)) if hs else None for hs in by_cluster]
    return len(classify_points(polyhedra, data, ca).misexplained) / data.n


def _cut_to_size(merges, n_total, target):
    """Per-cluster merge counts so that the total group count hits `target`."""
    order = sorted(
        (dist, k, i) for k, (dists, _) in enumerate(merges) for i, dist in enumerate(dists)
    )
    needed = n_total - target
    if needed < 0 or needed > len(order):
        raise PdpError(f"group count {target} not reachable (n={n_total})")
    counts = [0] * len(merges)
    for dist, k, _ in order[:needed]:
        counts[k] += 1
    return counts


def _groups_from_cut(data, ca, merges, counts):
    groups = []
    for k, (dists, partitions) in enumerate(merges):
        members = ca.members(k)
        for local in partitions[counts[k]]:
            idx = members[np.asarray(local, dtype=int)]
            pts = data.points[idx]
            groups.append(Group(members=tuple(int(i) for i in idx), cluster=k,
                                box_low=pts.min(axis=0), box_high=pts.max(axis=0)))
    return groups


def _singleton_groups(data, ca, indices):
    return [
        Group(members=(int(i),), cluster=int(ca.labels[i]),
              box_low=data.points[i], box_high=data.points[i])
        for i in indices
    ]


def group_vs_subsample_experiment(cfg: SynthConfig, sample_sizes=None, epsilons=None,
                                  trials=10, subsample_draws=5,
                                  solver_time_limit_s=120.0, backend=None,
                                  threshold_cap=None) -> ExperimentResult:
    """Compare grouped against subsampled description error at matched sizes.

    Exactly one of `sample_sizes` (group-count targets, matched exactly by
    cutting the dendrogram) or `epsilons` (linkage thresholds; the resulting
    group counts become the sample sizes) must be given.  Every error is
    measured on the full dataset; rows aggregate over trials and, for the
    subsampled method, `subsample_draws` random draws per trial.
    """
    if (sample_sizes is None) == (epsilons is None):
        raise PdpError("pass exactly one of sample_sizes / epsilons")
    rng = np.random.default_rng(cfg.seed)
    trial_seeds = [int(s) for s in rng.integers(0, 2 ** 62, size=trials)]
    errors: dict[tuple[int, str], list[float]] = {}
    size_keys: list[int] = []

    for t in range(trials):
        data_raw, ca = generate(dataclasses.replace(cfg, seed=trial_seeds[t]))
        data = Dataset(points=_minmax(data_raw.points),
                       feature_names=data_raw.feature_names)
        thresholds = _midpoint_thresholds(data.points, cap=threshold_cap)
        merges = [merge_sequence(data.points[ca.members(k)]) for k in range(ca.k)]

        if sample_sizes is not None:
            cuts = [(s, _cut_to_size(merges, data.n, s)) for s in sample_sizes]
        else:
            cuts = []
            for eps in epsilons:
                counts = [int(np.searchsorted(d, eps, side="right")) for d, _ in merges]
                cuts.append((data.n - sum(counts), counts))

        for size_key, counts in cuts:
            if size_key not in size_keys:
                size_keys.append(size_key)
            groups = _groups_from_cut(data, ca, merges, counts)
            started = time.monotonic()
            selection = _solve_min_alpha_ip(data, ca, groups, thresholds,
                                            solver_time_limit_s, backend)
            err = _full_data_error(selection, data, ca)
            errors.setdefault((size_key, "grouped"), []).append(err)
            LOGGER.info("trial=%d size=%d grouped error=%.4f seconds=%.1f",
                        t, size_key, err, time.monotonic() - started)
            for _ in range(subsample_draws):
                idx = rng.choice(data.n, size=len(groups), replace=False)
                sub = _singleton_groups(data, ca, idx)
                selection = _solve_min_alpha_ip(data, ca, sub, thresholds,
                                                solver_time_limit_s, backend)
                err = _full_data_error(selection, data, ca)
                errors.setdefault((size_key, "subsampled"), []).append(err)
            LOGGER.info("trial=%d size=%d subsampled mean=%.4f", t, size_key,
                        float(np.mean(errors[(size_key, "subsampled")][-subsample_draws:])))

    rows = []
    for size_key in size_keys:
        for method in ("grouped", "subsampled"):
            vals = np.asarray(errors[(size_key, method)])
            rows.append(ExperimentRow(
                sigma=cfg.sigma, sample_size=int(size_key), method=method,
                mean_error=float(vals.mean()), std_error=float(vals.std()),
            ))
    return ExperimentResult(rows=rows, trial_seeds=trial_seeds)
