"""Brute-force reference implementations the real code is checked against.

Everything here is deliberately independent of the library's solve paths:
LPs by vertex enumeration, MILPs by exhaustive assignment, pricing by
threshold enumeration, and 1-d description problems by enumerating interval
pairs.
"""

import itertools

import numpy as np

from polydesc import milp


def lp_by_vertex_enumeration(c, a_ub, b_ub):
    """min c.x s.t. A x <= b (bounds must be included as rows).

    Enumerates all vertices (intersections of n active rows), keeps the
    feasible ones, and returns (objective, x).  Assumes a bounded feasible
    polytope.
    """
    c = np.asarray(c, dtype=float)
    a = np.asarray(a_ub, dtype=float)
    b = np.asarray(b_ub, dtype=float)
    n = len(c)
    best_obj, best_x = np.inf, None
    for rows in itertools.combinations(range(len(b)), n):
        sub_a = a[list(rows)]
        sub_b = b[list(rows)]
        if abs(np.linalg.det(sub_a)) < 1e-10:
            continue
        x = np.linalg.solve(sub_a, sub_b)
        if np.all(a @ x <= b + 1e-8):
            obj = float(c @ x)
            if obj < best_obj - 1e-12:
                best_obj, best_x = obj, x
    return best_obj, best_x


def milp_by_enumeration(model: milp.LinearModel):
    """Exhaustive optimum of a model whose integer variables are binary and
    whose continuous variables do not exist.  Returns (objective, x) with
    objective = inf when infeasible."""
    c, a, senses, b, lb, ub, integrality = model.arrays()
    assert integrality.all(), "enumeration oracle expects a pure binary model"
    assert np.all(lb == 0) and np.all(ub == 1)
    n = model.num_vars
    best_obj, best_x = np.inf, None
    for bits in itertools.product((0.0, 1.0), repeat=n):
        x = np.asarray(bits)
        lhs = a @ x
        ok = True
        for i, sense in enumerate(senses):
            if sense == milp.LESS_EQUAL and lhs[i] > b[i] + 1e-9:
                ok = False
            elif sense == milp.GREATER_EQUAL and lhs[i] < b[i] - 1e-9:
                ok = False
            elif sense == milp.EQUAL and abs(lhs[i] - b[i]) > 1e-9:
                ok = False
            if not ok:
                break
        if ok:
            obj = float(c @ x) + model.objective_constant
            if obj < best_obj - 1e-12:
                best_obj, best_x = obj, x
    return best_obj, best_x


def univariate_thresholds(points, margin=1.0):
    """All distinguishable univariate split positions per feature: midpoints
    of consecutive distinct values plus one position beyond each extreme."""
    out = []
    for d in range(points.shape[1]):
        vals = np.unique(points[:, d])
        mids = (vals[:-1] + vals[1:]) / 2.0
        out.append(np.concatenate([[vals[0] - margin], mids, [vals[-1] + margin]]))
    return out


def pricing_minimum_by_enumeration(k, duals, data, ca, theta1=1.0, groups=None):
    """Minimum reduced cost over every univariate W=beta=1 half-space."""
    from polydesc.model import HalfSpace, PdpConfig
    from polydesc.pricing import reduced_cost

    cfg = PdpConfig(w_max=1, beta=1, theta1=max(theta1, 1e-12), theta2=0.0)
    if groups is None:
        base = data.points
    else:
        base = np.vstack([[g.box_low, g.box_high] for g in groups])
    best = np.inf
    best_h = None
    for d in range(data.m):
        e_d = tuple(1 if j == d else 0 for j in range(data.m))
        neg = tuple(-v for v in e_d)
        for t in univariate_thresholds(base)[d]:
            for h in (HalfSpace(w=e_d, b=float(t)), HalfSpace(w=neg, b=float(-t))):
                rho = reduced_cost(h, k, duals, cfg, data, ca, groups=groups,
                                   theta1=theta1)
                if rho < best - 1e-15:
                    best, best_h = rho, h
    return best, best_h


def interval_polyhedra_1d(points):
    """All 1-d 'polyhedra' buildable from univariate splits: intervals
    [lo, hi] with lo/hi drawn from the threshold grid (or unbounded)."""
    grid = univariate_thresholds(points.reshape(-1, 1))[0]
    intervals = []
    for lo in np.concatenate([[-np.inf], grid]):
        for hi in np.concatenate([grid, [np.inf]]):
            if lo < hi:
                intervals.append((lo, hi))
    return intervals


def best_description_1d(points, labels, groups=None, weights_by_group=True):
    """Brute-force optimal 1-d two-cluster description costs.

    Returns (min true cost, min grouped cost, true costs of every grouped
    optimizer).  `groups` is a list of (member index tuple, cluster) pairs;
    when omitted only the true cost is searched.
    """
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels, dtype=int)
    intervals = interval_polyhedra_1d(points)
    n = len(points)

    def misexplained(p0, p1):
        in0 = (points >= p0[0]) & (points <= p0[1])
        in1 = (points >= p1[0]) & (points <= p1[1])
        own = np.where(labels == 0, in0, in1)
        other = np.where(labels == 0, in1, in0)
        return ~own | other

    best_cost = np.inf
    best_grouped = np.inf
    grouped_true_costs = []
    for p0 in intervals:
        for p1 in intervals:
            bad = misexplained(p0, p1)
            c = int(bad.sum())
            best_cost = min(best_cost, c)
            if groups is not None:
                gc = sum(len(members) for members, _ in groups
                         if bad[list(members)].any())
                if gc < best_grouped - 1e-9:
                    best_grouped = gc
                    grouped_true_costs = [c]
                elif gc == best_grouped:
                    grouped_true_costs.append(c)
    return int(best_cost), (int(best_grouped) if groups is not None else None), grouped_true_costs


def master_optimum_by_enumeration(pool_halfspaces, data, ca, theta1, theta2,
                                  alpha, groups=None):
    """Brute-force master optimum over all selections of (h, k) pairs.

    Feasibility and cost follow the unit-level semantics of the master:
    a unit is charged when it is not fully inside every selected own
    half-space or not fully outside at least one selected half-space of
    every other cluster.  Returns (objective, min alpha).
    """
    from polydesc.master import compute_membership_sets

    pool = compute_membership_sets(pool_halfspaces, data, ca, groups=groups)
    p, k_count = pool.size, int(pool.unit_clusters.max()) + 1
    pairs = [(h, k) for k in range(k_count) for h in range(p)]
    best_obj = np.inf
    best_alpha = np.inf
    for bits in itertools.product((0, 1), repeat=len(pairs)):
        chosen = [pairs[i] for i, v in enumerate(bits) if v]
        by_k = [[h for h, kk in chosen if kk == k] for k in range(k_count)]
        bad_weight = 0.0
        for u in range(pool.num_units):
            own = int(pool.unit_clusters[u])
            ok = not any(pool.violated[u, h] for h in by_k[own])
            for k in range(k_count):
                if k != own and ok:
                    ok = any(pool.excluded[u, h] for h in by_k[k])
            if not ok:
                bad_weight += pool.unit_weights[u]
        best_alpha = min(best_alpha, bad_weight)
        if alpha is not None and bad_weight > alpha + 1e-9:
            continue
        used = set()
        for h, _ in chosen:
            used.update(np.nonzero(pool.feature_use[h])[0].tolist())
        obj = theta1 * sum(pool.complexities[h] for h, _ in chosen) + theta2 * len(used)
        best_obj = min(best_obj, obj)
    return best_obj, best_alpha
