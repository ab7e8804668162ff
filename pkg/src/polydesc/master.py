"""The master problem: pick half-spaces per cluster within an error budget.

Units are either points or groups.  For a unit ``u`` and candidate
half-space ``h`` the pool stores two indicator matrices:

``excluded[u, h]``
    the unit lies fully outside ``h`` (point: ``w.x > b``; group: the
    bounding-box corner test ``w+.lo - w-.hi > b``), and

``violated[u, h]``
    the unit is not fully inside ``h`` (point: same test; group:
    ``w+.hi - w-.lo > b``).

The master model then minimizes either the interpretability objective
(theta1 * total complexity + theta2 * features used) subject to a budget on
the weighted number of misexplained units, or the budget itself.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import milp
from .model import (
    ClusterAssignment, Dataset, DescriptionMetrics, DescriptionSolution,
    HalfSpace, PdpConfig, PdpError, Polyhedron, classify_points, cost,
    description_metrics, grouped_cost,
)
from .pricing import DualBundle

INTERPRETABILITY = "interpretability"
MIN_ALPHA = "min_alpha"


@dataclass(frozen=True)
class CandidatePool:
    """Candidate half-spaces with their per-unit membership indicators."""

    halfspaces: tuple[HalfSpace, ...]
    complexities: np.ndarray           # per half-space, ||w||_0 + 1
    feature_use: np.ndarray            # pool x m bool
    unit_clusters: np.ndarray          # per unit
    unit_weights: np.ndarray           # 1 for points, |G| for groups
    excluded: np.ndarray               # units x pool bool
    violated: np.ndarray               # units x pool bool
    groups: tuple | None               # None in point mode

    @property
    def size(self) -> int:
        return len(self.halfspaces)

    @property
    def num_units(self) -> int:
        return len(self.unit_clusters)

    def keys(self) -> set:
        return {h.key() for h in self.halfspaces}


def compute_membership_sets(halfspaces, data: Dataset, ca: ClusterAssignment,
                            groups=None) -> CandidatePool:
    """Evaluate all point or box membership tests for a half-space list."""
    halfspaces = tuple(halfspaces)
    if not halfspaces:
        raise PdpError("empty candidate pool")
    w = np.array([h.w for h in halfspaces], dtype=float)   # pool x m
    b = np.array([h.b for h in halfspaces])
    complexities = np.count_nonzero(w, axis=1) + 1
    feature_use = w != 0.0

    if groups is None:
        scores = data.points @ w.T
        out = scores > b
        excluded = violated = out
        unit_clusters = np.asarray(ca.labels, dtype=int)
        unit_weights = np.ones(data.n)
    else:
        groups = tuple(groups)
        wp = np.maximum(w, 0.0)
        wm = np.maximum(-w, 0.0)
        lows = np.array([g.box_low for g in groups])
        highs = np.array([g.box_high for g in groups])
        excluded = lows @ wp.T - highs @ wm.T > b
        violated = highs @ wp.T - lows @ wm.T > b
        unit_clusters = np.array([g.cluster for g in groups], dtype=int)
        unit_weights = np.array([len(g) for g in groups], dtype=float)

    return CandidatePool(
        halfspaces=halfspaces,
        complexities=complexities,
        feature_use=feature_use,
        unit_clusters=unit_clusters,
        unit_weights=unit_weights,
        excluded=excluded,
        violated=violated,
        groups=groups,
    )


@dataclass
class MasterProblem:
    """A built master model plus index maps for solutions and duals."""

    model: milp.LinearModel
    pool: CandidatePool
    cfg: PdpConfig
    mode: str                      # lp | ip
    objective_kind: str
    k: int
    pair_h: list[np.ndarray]       # per cluster: pool indices with a column
    pair_var: list[np.ndarray]     # per cluster: their variable indices
    xi_var: np.ndarray
    y_var: np.ndarray | None
    alpha_var: int | None
    mu_row: np.ndarray             # units x K, -1 where absent
    gamma_row: np.ndarray          # units, -1 where absent
    phi_row: np.ndarray | None
    alpha_budget: float | None


@dataclass(frozen=True)
class MasterSolveResult:
    status: str
    mode: str
    objective_kind: str
    objective: float = np.nan
    selected: tuple = ()           # (pool index, cluster, value)
    xi: np.ndarray | None = None
    y: np.ndarray | None = None
    alpha_value: float | None = None
    duals: DualBundle | None = None
    alpha_budget: float | None = None
    bound: float = np.nan


def build_master(pool: CandidatePool, cfg: PdpConfig, mode="ip",
                 objective=INTERPRETABILITY, pairs=None) -> MasterProblem:
    """Assemble the master LP/IP over the given pool.

    `pairs` optionally restricts which (half-space, cluster) columns exist;
    by default every half-space is available to every cluster.
    """
    if mode not in ("lp", "ip"):
        raise PdpError(f"bad mode {mode!r}")
    if objective not in (INTERPRETABILITY, MIN_ALPHA):
        raise PdpError(f"bad objective {objective!r}")
    if objective == INTERPRETABILITY and cfg.alpha is None:
        raise PdpError("interpretability objective needs cfg.alpha")
    n_units = pool.num_units
    k_count = int(pool.unit_clusters.max()) + 1
    model = milp.LinearModel(name=f"master_{objective}_{mode}")
    integer = mode == "ip"
    include_y = objective == INTERPRETABILITY and cfg.theta2 > 0

    if pairs is None:
        pairs = [(h, k) for k in range(k_count) for h in range(pool.size)]
    pair_h = [[] for _ in range(k_count)]
    for h, k in pairs:
        pair_h[k].append(h)
    pair_h = [np.asarray(sorted(hs), dtype=int) for hs in pair_h]
    pair_var = []
    objective_coeffs = {}
    for k in range(k_count):
        vs = np.array([
            model.add_var(f"z_{h}_{k}", 0, 1, integer=integer) for h in pair_h[k]
        ], dtype=int)
        pair_var.append(vs)
        if objective == INTERPRETABILITY and cfg.theta1 > 0:
            for v, h in zip(vs, pair_h[k]):
                objective_coeffs[int(v)] = cfg.theta1 * float(pool.complexities[h])

    xi_var = np.array([model.add_var(f"xi_{u}", 0, 1, integer=integer)
                       for u in range(n_units)], dtype=int)
    y_var = None
    if include_y:
        y_var = np.array([model.add_var(f"y_{d}", 0, 1, integer=integer)
                          for d in range(pool.feature_use.shape[1])], dtype=int)
        for d, v in enumerate(y_var):
            objective_coeffs[int(v)] = objective_coeffs.get(int(v), 0.0) + cfg.theta2

    total_weight = float(pool.unit_weights.sum())
    alpha_var = None
    if objective == MIN_ALPHA:
        alpha_var = model.add_var("alpha", 0, total_weight)
        objective_coeffs[alpha_var] = 1.0

    mu_row = np.full((n_units, k_count), -1, dtype=int)
    gamma_row = np.full(n_units, -1, dtype=int)
    for u in range(n_units):
        own = int(pool.unit_clusters[u])
        for k in range(k_count):
            if k == own:
                continue
            cols = pair_var[k][pool.excluded[u, pair_h[k]]]
            idx = np.concatenate([cols, [xi_var[u]]])
            coef = np.ones(len(idx))
            mu_row[u, k] = model.add_constr((idx, coef), milp.GREATER_EQUAL, 1.0)
        cols = pair_var[own][pool.violated[u, pair_h[own]]]
        if len(cols):
            idx = np.concatenate([cols, [xi_var[u]]])
            coef = np.concatenate([-np.ones(len(cols)), [float(len(cols))]])
            gamma_row[u] = model.add_constr((idx, coef), milp.GREATER_EQUAL, 0.0)

    phi_row = None
    if include_y:
        n_pairs = sum(len(v) for v in pair_var)
        phi_row = np.full(pool.feature_use.shape[1], -1, dtype=int)
        for d in range(pool.feature_use.shape[1]):
            cols = np.concatenate([
                pair_var[k][pool.feature_use[pair_h[k], d]] for k in range(k_count)
            ])
            if len(cols):
                idx = np.concatenate([cols, [y_var[d]]])
                coef = np.concatenate([np.ones(len(cols)), [-float(n_pairs)]])
                phi_row[d] = model.add_constr((idx, coef), milp.LESS_EQUAL, 0.0)

    alpha_budget = None
    if objective == MIN_ALPHA:
        idx = np.concatenate([xi_var, [alpha_var]])
        coef = np.concatenate([pool.unit_weights, [-1.0]])
        model.add_constr((idx, coef), milp.LESS_EQUAL, 0.0, name="budget")
    else:
        alpha_budget = float(cfg.alpha)
        model.add_constr((xi_var, pool.unit_weights.astype(float)),
                         milp.LESS_EQUAL, alpha_budget, name="budget")

    model.set_objective(objective_coeffs)
    return MasterProblem(
        model=model, pool=pool, cfg=cfg, mode=mode, objective_kind=objective,
        k=k_count, pair_h=pair_h, pair_var=pair_var, xi_var=xi_var, y_var=y_var,
        alpha_var=alpha_var, mu_row=mu_row, gamma_row=gamma_row, phi_row=phi_row,
        alpha_budget=alpha_budget,
    )


def _selection_from_x(mp: MasterProblem, x: np.ndarray, tol=1e-6):
    selected = []
    for k in range(mp.k):
        vals = x[mp.pair_var[k]] if len(mp.pair_var[k]) else np.empty(0)
        for h, v in zip(mp.pair_h[k], vals):
            if v > tol:
                selected.append((int(h), k, float(v)))
    return tuple(selected)


def solve_master_lp(mp: MasterProblem, backend=None) -> MasterSolveResult:
    """Solve the LP relaxation and return duals (mu, gamma, phi)."""
    sol = milp.solve_lp(mp.model, backend=backend)
    if sol.status != "optimal":
        return MasterSolveResult(status=sol.status, mode="lp",
                                 objective_kind=mp.objective_kind)
    n_units, k_count = mp.mu_row.shape
    mu = np.zeros((n_units, k_count))
    rows = mp.mu_row >= 0
    mu[rows] = sol.duals[mp.mu_row[rows]]
    gamma = np.zeros(n_units)
    has_gamma = mp.gamma_row >= 0
    gamma[has_gamma] = sol.duals[mp.gamma_row[has_gamma]]
    m = mp.pool.feature_use.shape[1]
    phi = np.zeros(m)
    if mp.phi_row is not None:
        has_phi = mp.phi_row >= 0
        phi[has_phi] = sol.duals[mp.phi_row[has_phi]]
    duals = DualBundle(mu=mu, gamma=gamma, phi=phi)
    return MasterSolveResult(
        status="optimal", mode="lp", objective_kind=mp.objective_kind,
        objective=sol.objective, selected=_selection_from_x(mp, sol.x),
        xi=sol.x[mp.xi_var].copy(),
        y=sol.x[mp.y_var].copy() if mp.y_var is not None else None,
        alpha_value=float(sol.x[mp.alpha_var]) if mp.alpha_var is not None else None,
        duals=duals, alpha_budget=mp.alpha_budget,
    )


def solve_master_ip(mp: MasterProblem, time_limit_s=None, backend=None) -> MasterSolveResult:
    """Solve the master IP; decomposes into per-cluster covers when possible.

    With theta2 = 0 and a zero error budget the xi variables are forced to
    zero, the model splits into one independent covering problem per cluster
    and is solved block by block.  A shared positive budget couples the
    clusters, so everything else goes through the full model.
    """
    if (mp.objective_kind == INTERPRETABILITY and mp.cfg.theta2 == 0
            and mp.alpha_budget == 0):
        return _solve_ip_blocks(mp, time_limit_s, backend)
    sol = milp.solve_milp(mp.model, time_limit_s=time_limit_s, backend=backend)
    if sol.x is None:
        return MasterSolveResult(status=sol.status, mode="ip",
                                 objective_kind=mp.objective_kind)
    return MasterSolveResult(
        status=sol.status, mode="ip", objective_kind=mp.objective_kind,
        objective=sol.objective, selected=_selection_from_x(mp, sol.x, tol=0.5),
        xi=np.round(sol.x[mp.xi_var]),
        y=np.round(sol.x[mp.y_var]) if mp.y_var is not None else None,
        alpha_value=float(sol.x[mp.alpha_var]) if mp.alpha_var is not None else None,
        alpha_budget=mp.alpha_budget, bound=sol.bound,
    )


def _solve_ip_blocks(mp: MasterProblem, time_limit_s, backend) -> MasterSolveResult:
    pool, cfg = mp.pool, mp.cfg
    deadline = None if time_limit_s is None else time.monotonic() + time_limit_s
    selected = []
    total = 0.0
    worst_status = "optimal"
    for k in range(mp.k):
        own_units = pool.unit_clusters == k
        hs = mp.pair_h[k]
        # a zero budget forbids half-spaces that cut off any own unit
        allowed = hs[~pool.violated[own_units][:, hs].any(axis=0)]
        block = milp.LinearModel(name=f"master_block_{k}")
        z = {int(h): block.add_var(f"z_{h}", 0, 1, integer=True) for h in allowed}
        excl = pool.excluded[:, allowed] if len(allowed) else np.zeros((pool.num_units, 0), bool)
        for u in np.nonzero(~own_units)[0]:
            cover = np.nonzero(excl[u])[0]
            if cover.size == 0:
                return MasterSolveResult(status="infeasible", mode="ip",
                                         objective_kind=mp.objective_kind)
            block.add_constr((np.array([z[int(allowed[c])] for c in cover]),
                              np.ones(cover.size)), milp.GREATER_EQUAL, 1.0)
        block.set_objective({z[int(h)]: cfg.theta1 * float(pool.complexities[h])
                             for h in allowed})
        remaining = None if deadline is None else max(deadline - time.monotonic(), 1.0)
        sol = milp.solve_milp(block, time_limit_s=remaining, backend=backend)
        if sol.x is None:
            return MasterSolveResult(status=sol.status, mode="ip",
                                     objective_kind=mp.objective_kind)
        if sol.status != "optimal":
            worst_status = sol.status
        total += sol.objective
        for h in allowed:
            if sol.x[z[int(h)]] > 0.5:
                selected.append((int(h), k, 1.0))
    return MasterSolveResult(
        status=worst_status, mode="ip", objective_kind=mp.objective_kind,
        objective=total, selected=tuple(selected),
        xi=np.zeros(pool.num_units),
        y=None, alpha_value=None, alpha_budget=mp.alpha_budget, bound=total,
    )


def _bounding_halfspace(data: Dataset, ca: ClusterAssignment, k: int) -> HalfSpace:
    members = ca.members(k)
    w = tuple(1 if d == 0 else 0 for d in range(data.m))
    return HalfSpace(w=w, b=float(data.points[members, 0].max()))


def extract_solution(res: MasterSolveResult, pool: CandidatePool, data: Dataset,
                     ca: ClusterAssignment, patch_empty=False) -> DescriptionSolution:
    """Turn an IP-mode master result into a description.

    Misexplanation is recounted from the raw points; the solver's xi values
    are never trusted.  A cluster the IP left without any half-space either
    raises or, with `patch_empty`, receives the trivial bounding half-space
    of its points and is flagged.
    """
    if res.mode != "ip":
        raise PdpError("extract_solution needs an IP-mode result")
    if res.status not in ("optimal", "feasible", "time_limit"):
        raise PdpError(f"cannot extract from status {res.status!r}")
    by_cluster: list[list[HalfSpace]] = [[] for _ in range(ca.k)]
    for h, k, _ in res.selected:
        by_cluster[k].append(pool.halfspaces[h])
    patched = []
    for k in range(ca.k):
        if not by_cluster[k]:
            if not patch_empty:
                raise PdpError(f"empty polyhedron: cluster {k} received no half-space")
            by_cluster[k].append(_bounding_halfspace(data, ca, k))
            patched.append(k)
    polyhedra = tuple(Polyhedron(tuple(hs)) for hs in by_cluster)
    classification = classify_points(polyhedra, data, ca)
    selection = [(h, k) for k in range(ca.k) for h in by_cluster[k]]
    metrics = description_metrics(selection, data, ca)
    if res.alpha_budget is not None:
        if pool.groups is not None:
            realized = grouped_cost(polyhedra, pool.groups, data, ca)
        else:
            realized = cost(polyhedra, data, ca)
        if realized > res.alpha_budget + 1e-6:
            raise PdpError(
                f"solution exceeds the error budget: {realized} > {res.alpha_budget}")
    return DescriptionSolution(
        polyhedra=polyhedra,
        misexplained=classification.misexplained,
        metrics=metrics,
        patched_clusters=tuple(patched),
    )
