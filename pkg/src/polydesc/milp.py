"""Linear and mixed-integer linear programming at desk scale.

Models are built with :class:`LinearModel` (minimization only) and solved by
either of two interchangeable backends:

``dense``
    A self-contained two-phase tableau simplex (with dual values) and a
    best-first branch-and-bound on top of it.  Pivoting uses the
    largest-coefficient rule with a Bland's-rule fallback once a degeneracy
    streak is detected, so termination is guaranteed.

``highs``
    Delegation to ``scipy.optimize.linprog`` / ``scipy.optimize.milp``
    (HiGHS).  Same contracts, much faster on larger instances.

The active backend is chosen per call, or globally via the
``POLYDESC_MILP_BACKEND`` environment variable (default ``highs``).

Dual convention: the dual value of a constraint is the sensitivity of the
optimal objective to its right-hand side (``d obj / d rhs``).  For a
minimization this makes duals of ``>=`` rows nonnegative and duals of ``<=``
rows nonpositive.
"""

from __future__ import annotations

import heapq
import itertools
import os
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
from scipy import optimize

FEASIBILITY_TOL = 1e-7
INTEGRALITY_TOL = 1e-6
REDUCED_COST_TOL = 1e-7

LESS_EQUAL = "<="
GREATER_EQUAL = ">="
EQUAL = "=="
_SENSES = (LESS_EQUAL, GREATER_EQUAL, EQUAL)


class MilpError(Exception):
    """Raised for malformed models or numerically failed solves."""


def default_backend() -> str:
    return os.environ.get("POLYDESC_MILP_BACKEND", "highs")


@dataclass
class _Var:
    name: str
    lb: float
    ub: float
    integer: bool


class LinearModel:
    """A minimization LP/MILP: variables, linear constraints, objective."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[_Var] = []
        # per row: (index array, coefficient array, sense, rhs)
        self.rows: list[tuple[np.ndarray, np.ndarray, str, float]] = []
        self.row_names: list[str | None] = []
        self.objective: dict[int, float] = {}
        self.objective_constant = 0.0

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def add_var(self, name, lb=0.0, ub=np.inf, integer=False) -> int:
        if not np.isfinite(lb) and lb != -np.inf:
            raise MilpError(f"variable {name}: bad lower bound {lb}")
        if lb > ub:
            raise MilpError(f"variable {name}: lb {lb} > ub {ub}")
        if integer and not (np.isfinite(lb) and np.isfinite(ub)):
            raise MilpError(f"integer variable {name} needs finite bounds")
        self.variables.append(_Var(str(name), float(lb), float(ub), bool(integer)))
        return len(self.variables) - 1

    def add_constr(self, coeffs, sense, rhs, name=None) -> int:
        if sense not in _SENSES:
            raise MilpError(f"unknown constraint sense {sense!r}")
        if isinstance(coeffs, dict):
            idx = np.fromiter(coeffs.keys(), dtype=np.int64, count=len(coeffs))
            val = np.fromiter(coeffs.values(), dtype=float, count=len(coeffs))
        elif isinstance(coeffs, tuple) and len(coeffs) == 2 and not np.isscalar(coeffs[0]):
            idx = np.asarray(coeffs[0], dtype=np.int64)
            val = np.asarray(coeffs[1], dtype=float)
        else:
            items = list(coeffs)
            idx = np.array([j for j, _ in items], dtype=np.int64)
            val = np.array([v for _, v in items], dtype=float)
        if idx.size and (idx.min() < 0 or idx.max() >= len(self.variables)):
            raise MilpError("constraint references an undeclared variable")
        keep = val != 0.0
        self.rows.append((idx[keep], val[keep], sense, float(rhs)))
        self.row_names.append(name)
        return len(self.rows) - 1

    def set_objective(self, coeffs, constant=0.0):
        if isinstance(coeffs, dict):
            items = coeffs.items()
        elif isinstance(coeffs, tuple) and len(coeffs) == 2 and not np.isscalar(coeffs[0]):
            items = zip(coeffs[0], coeffs[1])
        else:
            items = coeffs
        self.objective = {}
        for j, c in items:
            if not 0 <= j < len(self.variables):
                raise MilpError(f"objective references undeclared variable {j}")
            if c != 0.0:
                self.objective[int(j)] = float(c)
        self.objective_constant = float(constant)

    def _bounds(self):
        lb = np.array([v.lb for v in self.variables])
        ub = np.array([v.ub for v in self.variables])
        integrality = np.array([v.integer for v in self.variables])
        return lb, ub, integrality

    def _cost(self):
        c = np.zeros(self.num_vars)
        for j, v in self.objective.items():
            c[j] = v
        return c

    def arrays(self):
        """Dense (c, A, senses, b, lb, ub, integrality) view of the model."""
        n, r = self.num_vars, self.num_rows
        a = np.zeros((r, n))
        b = np.zeros(r)
        senses = []
        for i, (idx, val, sense, rhs) in enumerate(self.rows):
            np.add.at(a[i], idx, val)
            senses.append(sense)
            b[i] = rhs
        lb, ub, integrality = self._bounds()
        return self._cost(), a, senses, b, lb, ub, integrality

    def sparse_arrays(self):
        """Like :meth:`arrays` but with A as CSR (used by the highs backend)."""
        n, r = self.num_vars, self.num_rows
        b = np.zeros(r)
        senses = []
        col_parts, val_parts, row_parts = [], [], []
        for i, (idx, val, sense, rhs) in enumerate(self.rows):
            col_parts.append(idx)
            val_parts.append(val)
            row_parts.append(np.full(idx.shape, i, dtype=np.int64))
            senses.append(sense)
            b[i] = rhs
        if r:
            a = scipy.sparse.csr_matrix(
                (np.concatenate(val_parts),
                 (np.concatenate(row_parts), np.concatenate(col_parts))),
                shape=(r, n),
            )
            a.sum_duplicates()
        else:
            a = scipy.sparse.csr_matrix((0, n))
        lb, ub, integrality = self._bounds()
        return self._cost(), a, senses, b, lb, ub, integrality


@dataclass
class LpSolution:
    status: str                      # optimal | infeasible | unbounded
    x: np.ndarray | None = None
    duals: np.ndarray | None = None  # one value per constraint, d obj / d rhs
    objective: float = np.nan

    def __post_init__(self):
        if self.status not in ("optimal", "infeasible", "unbounded"):
            raise MilpError(f"bad LP status {self.status!r}")


@dataclass
class MilpSolution:
    status: str                      # optimal | feasible | infeasible | time_limit
    x: np.ndarray | None = None
    objective: float = np.nan
    bound: float = np.nan
    gap: float = np.nan

    def __post_init__(self):
        if self.status not in ("optimal", "feasible", "infeasible", "time_limit"):
            raise MilpError(f"bad MILP status {self.status!r}")


# ---------------------------------------------------------------------------
# dense backend: two-phase tableau simplex
# ---------------------------------------------------------------------------

def _dense_lp(model: LinearModel, var_lb=None, var_ub=None) -> LpSolution:
    c, a, senses, b, lb, ub, _ = model.arrays()
    if var_lb is not None:
        lb = np.maximum(lb, var_lb)
    if var_ub is not None:
        ub = np.minimum(ub, var_ub)
    if np.any(lb > ub + 1e-12):
        return LpSolution(status="infeasible")
    if not np.all(np.isfinite(lb)):
        raise MilpError("dense backend requires finite lower bounds")

    n = len(lb)
    # shift variables to start at zero
    b = b - a @ lb
    shift_const = float(c @ lb)
    span = ub - lb

    # finite upper bounds become explicit rows
    ub_rows = [j for j in range(n) if np.isfinite(span[j])]
    rows = a.tolist()
    senses = list(senses)
    rhs = b.tolist()
    for j in ub_rows:
        row = [0.0] * n
        row[j] = 1.0
        rows.append(row)
        senses.append(LESS_EQUAL)
        rhs.append(span[j])

    a_full = np.asarray(rows, dtype=float) if rows else np.zeros((0, n))
    b_full = np.asarray(rhs, dtype=float)
    r = len(b_full)
    n_orig_rows = model.num_rows

    # normalize rhs >= 0, remember row orientation for dual signs
    row_sign = np.ones(r)
    neg = b_full < 0
    row_sign[neg] = -1.0
    a_full[neg] *= -1.0
    b_full[neg] *= -1.0
    senses = [
        {LESS_EQUAL: GREATER_EQUAL, GREATER_EQUAL: LESS_EQUAL, EQUAL: EQUAL}[s]
        if flip else s
        for s, flip in zip(senses, neg)
    ]

    # equality form: <= gets a slack, >= a surplus plus artificial, == an artificial
    slack_col = {}
    art_col = {}
    cols = [a_full]
    col_count = n
    for i, s in enumerate(senses):
        if s == LESS_EQUAL:
            e = np.zeros((r, 1))
            e[i, 0] = 1.0
            cols.append(e)
            slack_col[i] = col_count
            col_count += 1
        elif s == GREATER_EQUAL:
            e = np.zeros((r, 1))
            e[i, 0] = -1.0
            cols.append(e)
            slack_col[i] = col_count
            col_count += 1
    art_rows = [i for i, s in enumerate(senses) if s != LESS_EQUAL]
    for i in art_rows:
        e = np.zeros((r, 1))
        e[i, 0] = 1.0
        cols.append(e)
        art_col[i] = col_count
        col_count += 1

    tab = np.zeros((r, col_count + 1))
    if r:
        tab[:, :n + len(slack_col) + len(art_col)] = np.hstack(cols)[:, :col_count]
        tab[:, -1] = b_full
    basis = np.empty(r, dtype=int)
    for i, s in enumerate(senses):
        basis[i] = art_col[i] if s != LESS_EQUAL else slack_col[i]

    is_artificial = np.zeros(col_count, dtype=bool)
    for i in art_rows:
        is_artificial[art_col[i]] = True

    def run_phase(cost, allowed):
        """Pivot to optimality of `cost` over allowed entering columns."""
        obj_row = cost.copy()
        for i in range(r):
            cj = cost[basis[i]]
            if cj != 0.0:
                obj_row -= cj * tab[i, :-1]
        obj_val = sum(cost[basis[i]] * tab[i, -1] for i in range(r))
        degenerate_streak = 0
        use_bland = False
        while True:
            red = np.where(allowed, obj_row, np.inf)
            if use_bland:
                entering_candidates = np.nonzero(red < -REDUCED_COST_TOL)[0]
                if entering_candidates.size == 0:
                    return "optimal", obj_row, obj_val
                j = int(entering_candidates[0])
            else:
                j = int(np.argmin(red))
                if red[j] >= -REDUCED_COST_TOL:
                    return "optimal", obj_row, obj_val
            col = tab[:, j]
            pos = col > FEASIBILITY_TOL
            if not pos.any():
                return "unbounded", obj_row, obj_val
            ratios = np.where(pos, tab[:, -1] / np.where(pos, col, 1.0), np.inf)
            best = ratios.min()
            ties = np.nonzero(ratios <= best + 1e-12)[0]
            i = int(ties[np.argmin(basis[ties])])
            step = best * obj_row[j]
            pivot = tab[i, j]
            tab[i, :] /= pivot
            factors = tab[:, j].copy()
            factors[i] = 0.0
            tab[:, :] -= np.outer(factors, tab[i, :])
            obj_row -= obj_row[j] * tab[i, :-1]
            obj_val += step
            basis[i] = j
            if abs(step) <= 1e-12:
                degenerate_streak += 1
                if degenerate_streak > 50 + 2 * r:
                    use_bland = True
            else:
                degenerate_streak = 0

    # phase 1
    if art_rows:
        cost1 = np.zeros(col_count)
        cost1[is_artificial] = 1.0
        status, _, phase1_val = run_phase(cost1, np.ones(col_count, dtype=bool))
        if status == "unbounded":  # cannot happen: phase-1 objective >= 0
            raise MilpError("phase-1 simplex reported unbounded")
        if phase1_val > FEASIBILITY_TOL * max(1.0, float(np.abs(b_full).max(initial=0.0))):
            return LpSolution(status="infeasible")
        # drive artificials out of the basis where possible
        for i in range(r):
            if is_artificial[basis[i]]:
                nonzero = np.nonzero(np.abs(tab[i, :-1]) > 1e-9)[0]
                nonzero = [j for j in nonzero if not is_artificial[j]]
                if nonzero:
                    j = int(nonzero[0])
                    pivot = tab[i, j]
                    tab[i, :] /= pivot
                    factors = tab[:, j].copy()
                    factors[i] = 0.0
                    tab[:, :] -= np.outer(factors, tab[i, :])
                    basis[i] = j
                # else: redundant row, artificial stays basic at zero

    # phase 2
    cost2 = np.zeros(col_count)
    cost2[:n] = c
    allowed = ~is_artificial
    status, obj_row, obj_val = run_phase(cost2, allowed)
    if status == "unbounded":
        return LpSolution(status="unbounded")

    x_shift = np.zeros(col_count)
    x_shift[basis] = tab[:, -1]
    x = x_shift[:n] + lb

    duals = np.zeros(r)
    for i in range(r):
        if senses[i] == LESS_EQUAL:
            duals[i] = -obj_row[slack_col[i]]
        elif senses[i] == GREATER_EQUAL:
            duals[i] = obj_row[slack_col[i]]
        else:
            duals[i] = -obj_row[art_col[i]]
    duals *= row_sign
    if not np.all(np.isfinite(tab)):
        raise MilpError("numerically singular basis in simplex tableau")
    return LpSolution(
        status="optimal",
        x=x,
        duals=duals[:n_orig_rows],
        objective=float(obj_val) + shift_const + model.objective_constant,
    )


# ---------------------------------------------------------------------------
# highs backend
# ---------------------------------------------------------------------------

def _highs_lp(model: LinearModel, var_lb=None, var_ub=None) -> LpSolution:
    c, a, senses, b, lb, ub, _ = model.sparse_arrays()
    if var_lb is not None:
        lb = np.maximum(lb, var_lb)
    if var_ub is not None:
        ub = np.minimum(ub, var_ub)
    if np.any(lb > ub + 1e-12):
        return LpSolution(status="infeasible")

    senses = np.array([{LESS_EQUAL: 0, GREATER_EQUAL: 1, EQUAL: 2}[s] for s in senses])
    ub_rows = senses != 2
    eq_rows = senses == 2
    sign = np.where(senses == 1, -1.0, 1.0)
    a_ub = scipy.sparse.diags(sign[ub_rows]) @ a[ub_rows] if ub_rows.any() else None
    b_ub = (sign * b)[ub_rows] if ub_rows.any() else None
    a_eq = a[eq_rows] if eq_rows.any() else None
    b_eq = b[eq_rows] if eq_rows.any() else None

    res = optimize.linprog(
        c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
        bounds=np.column_stack([lb, ub]), method="highs",
    )
    if res.status == 2:
        return LpSolution(status="infeasible")
    if res.status == 3:
        return LpSolution(status="unbounded")
    if res.status != 0:
        raise MilpError(f"linprog failed: {res.message}")

    duals = np.zeros(len(b))
    if ub_rows.any():
        duals[ub_rows] = sign[ub_rows] * res.ineqlin.marginals
    if eq_rows.any():
        duals[eq_rows] = res.eqlin.marginals
    return LpSolution(
        status="optimal",
        x=np.asarray(res.x),
        duals=duals,
        objective=float(res.fun) + model.objective_constant,
    )


def _highs_milp(model: LinearModel, time_limit_s=None, gap_tol=1e-6) -> MilpSolution:
    c, a, senses, b, lb, ub, integrality = model.sparse_arrays()
    lo = np.where([s == LESS_EQUAL for s in senses], -np.inf, b)
    hi = np.where([s == GREATER_EQUAL for s in senses], np.inf, b)
    constraints = [optimize.LinearConstraint(a, lo, hi)] if model.num_rows else []
    options = {"mip_rel_gap": 0.0}
    if time_limit_s is not None:
        options["time_limit"] = float(time_limit_s)
    res = optimize.milp(
        c, constraints=constraints,
        integrality=integrality.astype(int),
        bounds=optimize.Bounds(lb, ub),
        options=options,
    )
    if res.status == 2:
        return MilpSolution(status="infeasible")
    if res.status == 1:
        if res.x is None:
            return MilpSolution(status="time_limit", bound=-np.inf)
        obj = float(res.fun) + model.objective_constant
        bound = res.mip_dual_bound
        bound = obj if bound is None else float(bound) + model.objective_constant
        return MilpSolution(status="time_limit", x=np.asarray(res.x),
                            objective=obj, bound=min(bound, obj), gap=obj - min(bound, obj))
    if res.status != 0 or res.x is None:
        raise MilpError(f"milp failed: status {res.status}, {res.message}")
    obj = float(res.fun) + model.objective_constant
    bound = res.mip_dual_bound
    bound = obj if bound is None else float(bound) + model.objective_constant
    bound = min(bound, obj)
    return MilpSolution(status="optimal", x=np.asarray(res.x),
                        objective=obj, bound=bound, gap=obj - bound)


# ---------------------------------------------------------------------------
# dense branch and bound
# ---------------------------------------------------------------------------

def _dense_milp(model, time_limit_s=None, gap_tol=1e-6, on_incumbent=None,
                max_nodes=200_000) -> MilpSolution:
    started = time.monotonic()
    int_ix = np.nonzero([v.integer for v in model.variables])[0]
    base_lb = np.array([v.lb for v in model.variables])
    base_ub = np.array([v.ub for v in model.variables])

    root = _dense_lp(model)
    if root.status == "infeasible":
        return MilpSolution(status="infeasible")
    if root.status == "unbounded":
        raise MilpError("LP relaxation is unbounded")

    incumbent = None
    incumbent_obj = np.inf
    counter = itertools.count()
    # heap entries: (parent bound, -depth, tiebreak, lb overrides, ub overrides)
    heap = [(root.objective, 0, next(counter), base_lb, base_ub)]
    best_open = root.objective
    nodes = 0
    timed_out = False
    node_capped = False

    while heap:
        bound, negdepth, _, nlb, nub = heapq.heappop(heap)
        best_open = bound
        if bound >= incumbent_obj - gap_tol:
            best_open = incumbent_obj
            break
        if time_limit_s is not None and time.monotonic() - started > time_limit_s:
            timed_out = True
            break
        nodes += 1
        if nodes > max_nodes:
            node_capped = True
            break
        sol = _dense_lp(model, var_lb=nlb, var_ub=nub)
        if sol.status != "optimal":
            continue
        if sol.objective >= incumbent_obj - gap_tol:
            continue
        frac = np.abs(sol.x[int_ix] - np.round(sol.x[int_ix])) if int_ix.size else np.empty(0)
        if frac.size == 0 or frac.max() <= INTEGRALITY_TOL:
            x = sol.x.copy()
            x[int_ix] = np.round(x[int_ix])
            incumbent = x
            incumbent_obj = sol.objective
            if on_incumbent is not None:
                on_incumbent(x, sol.objective)
            continue
        # most fractional variable, smallest index on ties
        j = int(int_ix[np.argmax(np.minimum(frac, 1.0 - frac))])
        v = sol.x[j]
        down_ub = nub.copy()
        down_ub[j] = np.floor(v)
        up_lb = nlb.copy()
        up_lb[j] = np.ceil(v)
        depth = -negdepth + 1
        heapq.heappush(heap, (sol.objective, -depth, next(counter), nlb, down_ub))
        heapq.heappush(heap, (sol.objective, -depth, next(counter), up_lb, nub))

    if incumbent is None:
        if timed_out or node_capped:
            return MilpSolution(status="time_limit", bound=best_open)
        return MilpSolution(status="infeasible")
    open_bounds = [e[0] for e in heap]
    bound = min([best_open] + open_bounds) if (timed_out or node_capped) else incumbent_obj
    bound = min(bound, incumbent_obj)
    if timed_out:
        status = "time_limit"
    elif node_capped:
        status = "feasible"
    else:
        status = "optimal"
    return MilpSolution(status=status, x=incumbent, objective=incumbent_obj,
                        bound=bound, gap=incumbent_obj - bound)


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------

def solve_lp(model: LinearModel, backend: str | None = None) -> LpSolution:
    """Solve the LP relaxation of `model` (integrality flags are ignored)."""
    backend = backend or default_backend()
    if backend == "dense":
        return _dense_lp(model)
    if backend == "highs":
        return _highs_lp(model)
    raise MilpError(f"unknown backend {backend!r}")


def solve_milp(model: LinearModel, time_limit_s=None, gap_tol=1e-6,
               backend: str | None = None, on_incumbent=None) -> MilpSolution:
    """Solve `model` as a MILP.

    `on_incumbent(x, objective)` is invoked for incumbents discovered during
    the search; the dense backend reports every improving incumbent, the
    highs backend reports the final one.
    """
    backend = backend or default_backend()
    if backend == "dense":
        return _dense_milp(model, time_limit_s=time_limit_s, gap_tol=gap_tol,
                           on_incumbent=on_incumbent)
    if backend == "highs":
        sol = _highs_milp(model, time_limit_s=time_limit_s, gap_tol=gap_tol)
        if on_incumbent is not None and sol.x is not None:
            on_incumbent(sol.x, sol.objective)
        return sol
    raise MilpError(f"unknown backend {backend!r}")
