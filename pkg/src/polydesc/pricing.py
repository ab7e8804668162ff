"""Reduced costs and the per-cluster pricing problem.

Given optimal duals of the restricted master LP, the pricing problem for a
cluster searches over all admissible half-spaces (integer coefficients
bounded by W, at most beta nonzeros) for one whose master column has
negative reduced cost:

    rho(h, k) = theta1 * c_h
                - sum_{units outside cluster k} mu * [unit excluded by h]
                + sum_{units in cluster k}      gamma * [unit violates h]
                - sum_d phi_d * [w_d != 0]

In point mode "excluded" and "violates" both mean ``w.x > b``.  In grouped
mode they are the bounding-box corner tests: a box is excluded only when it
lies fully outside the half-space, and violates it when it is not fully
inside.  Units whose duals are all zero contribute nothing to the objective
and are left out of the pricing model entirely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import milp
from .model import HalfSpace, PdpConfig, PdpError

RHO_TOL = 1e-6
_SIGN_SLACK = 1e-6


@dataclass(frozen=True)
class DualBundle:
    """Master LP duals: mu (units x clusters), gamma (units), phi (features)."""

    mu: np.ndarray
    gamma: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        gamma = np.array(self.gamma, dtype=float)
        phi = np.array(self.phi, dtype=float)
        if mu.min(initial=0.0) < -_SIGN_SLACK or gamma.min(initial=0.0) < -_SIGN_SLACK:
            raise PdpError("mu/gamma duals must be nonnegative")
        if phi.max(initial=0.0) > _SIGN_SLACK:
            raise PdpError("phi duals must be nonpositive")
        mu = np.maximum(mu, 0.0)
        gamma = np.maximum(gamma, 0.0)
        phi = np.minimum(phi, 0.0)
        for arr in (mu, gamma, phi):
            arr.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "phi", phi)


@dataclass(frozen=True)
class PricingOutcome:
    """Half-spaces found by one pricing solve, with their reduced costs."""

    cluster: int
    candidates: tuple[tuple[HalfSpace, float], ...]
    status: str            # optimal | feasible | time_limit
    best_objective: float  # optimum (or best bound-side estimate) of the pricing IP


def _unit_indicators(h: HalfSpace, data, groups=None):
    """(excluded, violated) boolean vectors over units for half-space h."""
    w = np.asarray(h.w, dtype=float)
    if groups is None:
        out = data.points @ w > h.b
        return out, out
    wp = np.maximum(w, 0.0)
    wm = np.maximum(-w, 0.0)
    lows = np.array([g.box_low for g in groups])
    highs = np.array([g.box_high for g in groups])
    excluded = lows @ wp - highs @ wm > h.b
    violated = highs @ wp - lows @ wm > h.b
    return excluded, violated


def reduced_cost(h: HalfSpace, k: int, duals: DualBundle, cfg: PdpConfig,
                 data, ca, groups=None, theta1=None) -> float:
    """Reduced cost of the master column (h, k) under the given duals.

    `theta1` overrides cfg.theta1; the accuracy stage prices columns with a
    zero cost coefficient and passes 0.
    """
    theta1 = cfg.theta1 if theta1 is None else float(theta1)
    excluded, violated = _unit_indicators(h, data, groups)
    unit_clusters = (np.array([g.cluster for g in groups])
                     if groups is not None else ca.labels)
    foreign = unit_clusters != k
    own = ~foreign
    c_h = sum(v != 0 for v in h.w) + 1
    used = np.array([v != 0 for v in h.w])
    return float(
        theta1 * c_h
        - duals.mu[foreign, k] @ excluded[foreign]
        + duals.gamma[own] @ violated[own]
        - duals.phi @ used
    )


@dataclass
class PricingProblem:
    """A built pricing model plus the metadata needed to decode solutions."""

    model: milp.LinearModel
    cluster: int
    wp: np.ndarray   # variable indices of positive coefficient parts
    wm: np.ndarray
    yp: np.ndarray
    ym: np.ndarray
    b_var: int
    epsilon: float


def build_pricing(k: int, duals: DualBundle, cfg: PdpConfig, data, ca,
                  groups=None, theta1=None) -> PricingProblem:
    """Formulate the pricing IP for cluster `k`."""
    theta1 = cfg.theta1 if theta1 is None else float(theta1)
    m = data.m
    w_max, beta, eps = cfg.w_max, cfg.beta, cfg.epsilon_strict
    if beta > m:
        raise PdpError(f"beta={beta} exceeds the number of features {m}")
    x_max = float(np.abs(data.points).max())
    b_bound = w_max * beta * max(x_max, 1e-9)
    big_m = 2.0 * w_max * beta * x_max + b_bound + eps

    model = milp.LinearModel(name=f"pricing_k{k}")
    wp = np.array([model.add_var(f"w+_{d}", 0, w_max, integer=True) for d in range(m)])
    wm = np.array([model.add_var(f"w-_{d}", 0, w_max, integer=True) for d in range(m)])
    yp = np.array([model.add_var(f"y+_{d}", 0, 1, integer=True) for d in range(m)])
    ym = np.array([model.add_var(f"y-_{d}", 0, 1, integer=True) for d in range(m)])
    b_var = model.add_var("b", -b_bound, b_bound)

    if groups is None:
        unit_clusters = ca.labels
        own_hi = own_lo = data.points
        foreign_lo = foreign_hi = data.points
    else:
        unit_clusters = np.array([g.cluster for g in groups])
        lows = np.array([g.box_low for g in groups])
        highs = np.array([g.box_high for g in groups])
        own_hi, own_lo = highs, lows
        foreign_lo, foreign_hi = lows, highs

    objective = {b_var: 0.0}
    for d in range(m):
        objective[yp[d]] = theta1 - duals.phi[d]
        objective[ym[d]] = theta1 - duals.phi[d]
    constant = theta1

    # inclusion tracking for own-cluster units with positive dual:
    #   w+ . hi - w- . lo - b <= M * delta
    for u in np.nonzero((unit_clusters == k) & (duals.gamma > 0))[0]:
        delta = model.add_var(f"delta_{u}", 0, 1, integer=True)
        objective[delta] = float(duals.gamma[u])
        idx = np.concatenate([wp, wm, [b_var, delta]])
        coef = np.concatenate([own_hi[u], -own_lo[u], [-1.0, -big_m]])
        model.add_constr((idx, coef), milp.LESS_EQUAL, 0.0, name=f"inc_{u}")

    # exclusion tracking for units outside the cluster with positive dual:
    #   w+ . lo - w- . hi - b >= eps - M * delta
    for u in np.nonzero((unit_clusters != k) & (duals.mu[:, k] > 0))[0]:
        delta = model.add_var(f"delta_{u}", 0, 1, integer=True)
        objective[delta] = float(duals.mu[u, k])
        constant -= float(duals.mu[u, k])
        idx = np.concatenate([wp, wm, [b_var, delta]])
        coef = np.concatenate([foreign_lo[u], -foreign_hi[u], [-1.0, big_m]])
        model.add_constr((idx, coef), milp.GREATER_EQUAL, eps, name=f"exc_{u}")

    for d in range(m):
        model.add_constr({int(wp[d]): 1.0, int(yp[d]): -1.0}, milp.GREATER_EQUAL, 0.0)
        model.add_constr({int(wp[d]): 1.0, int(yp[d]): -float(w_max)}, milp.LESS_EQUAL, 0.0)
        model.add_constr({int(wm[d]): 1.0, int(ym[d]): -1.0}, milp.GREATER_EQUAL, 0.0)
        model.add_constr({int(wm[d]): 1.0, int(ym[d]): -float(w_max)}, milp.LESS_EQUAL, 0.0)
        model.add_constr({int(yp[d]): 1.0, int(ym[d]): 1.0}, milp.LESS_EQUAL, 1.0)
    model.add_constr((np.concatenate([yp, ym]), np.ones(2 * m)), milp.LESS_EQUAL, float(beta))
    model.add_constr((np.concatenate([wp, wm]), np.ones(2 * m)), milp.GREATER_EQUAL, 1.0)

    model.set_objective(objective, constant=constant)
    return PricingProblem(model=model, cluster=k, wp=wp, wm=wm, yp=yp, ym=ym,
                          b_var=b_var, epsilon=eps)


def _decode(problem: PricingProblem, x: np.ndarray) -> HalfSpace | None:
    w = np.round(x[problem.wp] - x[problem.wm]).astype(int)
    if not w.any():
        return None
    return HalfSpace(w=tuple(int(v) for v in w), b=float(x[problem.b_var]))


def solve_pricing(problem: PricingProblem, time_limit_s=None,
                  existing_keys=frozenset(), backend=None,
                  max_support_cuts=3) -> PricingOutcome:
    """Solve a pricing problem and collect negative-reduced-cost half-spaces.

    Every incumbent the branch-and-bound reports with objective below
    -RHO_TOL is decoded.  With the highs backend (no incumbent stream) a few
    extra solutions are generated by cutting off the optimal feature-sign
    support and re-solving.  Candidates already in `existing_keys` (exact
    (w, b) match) are dropped.
    """
    backend = backend or milp.default_backend()
    incumbents: list[tuple[np.ndarray, float]] = []
    res = milp.solve_milp(problem.model, time_limit_s=time_limit_s, backend=backend,
                          on_incumbent=lambda x, obj: incumbents.append((x.copy(), obj)))
    status = {"optimal": "optimal", "feasible": "feasible",
              "time_limit": "time_limit"}.get(res.status)
    if res.status == "infeasible":
        raise PdpError("pricing model unexpectedly infeasible")
    best = res.objective if res.x is not None else np.inf

    if (backend == "highs" and res.status == "optimal"
            and res.objective < -RHO_TOL and max_support_cuts > 0):
        cut_model = problem.model
        support_vars = np.concatenate([problem.yp, problem.ym])
        for _ in range(max_support_cuts):
            prev_x = incumbents[-1][0]
            chosen = prev_x[support_vars] > 0.5
            # exclude this exact support: sum_out y + sum_in (1 - y) >= 1
            coef = np.where(chosen, -1.0, 1.0)
            rhs = 1.0 - float(chosen.sum())
            cut_model = _copy_model_with_cut(cut_model, support_vars, coef, rhs)
            extra = milp.solve_milp(cut_model, time_limit_s=time_limit_s, backend=backend)
            if extra.status not in ("optimal", "feasible", "time_limit") or extra.x is None:
                break
            if extra.objective >= -RHO_TOL:
                break
            incumbents.append((extra.x.copy(), extra.objective))
            if extra.status != "optimal":
                break

    seen = set(existing_keys)
    candidates = []
    for x, obj in incumbents:
        if obj >= -RHO_TOL:
            continue
        h = _decode(problem, x)
        if h is None:
            continue
        key = h.key()
        if key in seen:
            continue
        seen.add(key)
        candidates.append((h, float(obj)))
    candidates.sort(key=lambda item: item[1])
    return PricingOutcome(cluster=problem.cluster, candidates=tuple(candidates),
                          status=status or "time_limit", best_objective=float(best))


def _copy_model_with_cut(model: milp.LinearModel, idx, coef, rhs) -> milp.LinearModel:
    clone = milp.LinearModel(name=model.name)
    clone.variables = list(model.variables)
    clone.rows = list(model.rows)
    clone.row_names = list(model.row_names)
    clone.objective = dict(model.objective)
    clone.objective_constant = model.objective_constant
    clone.add_constr((np.asarray(idx), np.asarray(coef)), milp.GREATER_EQUAL, rhs)
    return clone
