"""Within-cluster grouping of points into hyper-rectangle summaries.

Each cluster is partitioned by agglomerative clustering with complete
linkage and Euclidean distance; merging stops once the smallest inter-group
complete-linkage distance exceeds a threshold ``epsilon``, which caps the
diameter of every group.  A group is summarized by the componentwise
bounding box of its members.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .model import ClusterAssignment, Dataset, PdpError, _frozen_array


@dataclass(frozen=True)
class Group:
    """A batch of same-cluster points with its bounding box."""

    members: tuple[int, ...]
    cluster: int
    box_low: np.ndarray
    box_high: np.ndarray

    def __post_init__(self):
        if not self.members:
            raise PdpError("group must have at least one member")
        lo = np.asarray(self.box_low, dtype=float)
        hi = np.asarray(self.box_high, dtype=float)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise PdpError("invalid bounding box")
        object.__setattr__(self, "members", tuple(int(i) for i in self.members))
        object.__setattr__(self, "box_low", _frozen_array(lo))
        object.__setattr__(self, "box_high", _frozen_array(hi))

    def __len__(self) -> int:
        return len(self.members)


def bounding_box(members, data: Dataset):
    """Componentwise (min, max) over the member points."""
    members = np.asarray(members, dtype=int)
    if members.size == 0:
        raise PdpError("bounding box of no points")
    pts = data.points[members]
    return pts.min(axis=0), pts.max(axis=0)


def merge_sequence(points: np.ndarray):
    """Full complete-linkage agglomeration of `points`.

    Returns (merge distances in merge order, partitions), where
    ``partitions[t]`` is the list of member-index groups (local indices)
    after the first ``t`` merges; ``partitions[0]`` is all singletons.
    Ties are broken by the smallest member index in the merged pair.
    """
    n = len(points)
    groups = [[i] for i in range(n)]
    partitions = [[list(g) for g in groups]]
    if n == 1:
        return np.empty(0), partitions
    dist = cdist(points, points)
    np.fill_diagonal(dist, np.inf)
    active = np.ones(n, dtype=bool)
    mins = [min(g) for g in groups]
    distances = []
    for _ in range(n - 1):
        masked = np.where(np.outer(active, active), dist, np.inf)
        best = masked.min()
        ia, ja = np.nonzero(masked <= best + 0.0)
        # deterministic tie-break: smallest member index, then its partner's
        pairs = sorted(
            {(min(mins[i], mins[j]), max(mins[i], mins[j]), i, j)
             for i, j in zip(ia, ja) if i < j}
        )
        _, _, i, j = pairs[0]
        dist[i, :] = np.maximum(dist[i, :], dist[j, :])
        dist[:, i] = dist[i, :]
        dist[i, i] = np.inf
        active[j] = False
        groups[i] = groups[i] + groups[j]
        groups[j] = []
        mins[i] = min(mins[i], mins[j])
        distances.append(float(best))
        partitions.append([sorted(g) for g in groups if g])
    return np.asarray(distances), partitions


def group_cluster(data: Dataset, ca: ClusterAssignment, cluster: int,
                  epsilon: float) -> list[Group]:
    """Partition one cluster into groups of complete-linkage diameter <= epsilon."""
    if epsilon < 0:
        raise PdpError("epsilon must be >= 0")
    members = ca.members(cluster)
    distances, partitions = merge_sequence(data.points[members])
    n_merges = int(np.searchsorted(distances, epsilon, side="right"))
    groups = []
    for local in partitions[n_merges]:
        idx = members[np.asarray(local, dtype=int)]
        lo, hi = bounding_box(idx, data)
        groups.append(Group(members=tuple(idx.tolist()), cluster=cluster,
                            box_low=lo, box_high=hi))
    groups.sort(key=lambda g: g.members[0])
    return groups


def build_groups(data: Dataset, ca: ClusterAssignment, epsilon: float) -> list[Group]:
    """Group every cluster independently at the same epsilon."""
    groups = []
    for k in range(ca.k):
        groups.extend(group_cluster(data, ca, k, epsilon))
    return groups


def silhouette(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette score of a labelled point set (Euclidean distance).

    Per point: r is the mean distance to the other members of its cluster,
    q the smallest mean distance to any other cluster, and the score is
    (q - r) / max(q, r).  Points in singleton clusters score 0.
    """
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels, dtype=int)
    ids = np.unique(labels)
    if len(ids) < 2:
        raise PdpError("silhouette needs at least two clusters")
    dist = cdist(points, points)
    n = len(points)
    scores = np.zeros(n)
    member_lists = {k: np.nonzero(labels == k)[0] for k in ids}
    for i in range(n):
        own = member_lists[labels[i]]
        if len(own) == 1:
            continue
        r = dist[i, own].sum() / (len(own) - 1)
        q = min(dist[i, member_lists[k]].mean() for k in ids if k != labels[i])
        denom = max(q, r)
        scores[i] = 0.0 if denom == 0 else (q - r) / denom
    return float(scores.mean())


def groups_to_json(groups) -> str:
    """Serialize groups (cluster, members, box corners) for caching."""
    payload = [
        {
            "cluster": g.cluster,
            "members": list(g.members),
            "box_low": [float(v) for v in g.box_low],
            "box_high": [float(v) for v in g.box_high],
        }
        for g in groups
    ]
    return json.dumps(payload)


def groups_from_json(text: str) -> list[Group]:
    return [
        Group(members=tuple(item["members"]), cluster=int(item["cluster"]),
              box_low=np.asarray(item["box_low"]), box_high=np.asarray(item["box_high"]))
        for item in json.loads(text)
    ]
