"""Column generation: initial pool, pricing loop, and the two-stage solve.

The loop alternates solving the restricted master LP with per-cluster
pricing problems fed by its duals; every half-space priced below -1e-6 is
added to the pool.  It stops with a certificate (`priced_out`) when every
pricing problem is solved to optimality and finds nothing negative, or on
the time budget.  A final master IP over the whole generated pool produces
the description.

When no error budget is supplied, a two-stage procedure first minimizes the
budget itself (stage 1), then re-optimizes interpretability subject to
(1 + kappa) times the stage-1 optimum (stage 2), reusing the stage-1 pool.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import milp
from .master import (
    INTERPRETABILITY, MIN_ALPHA, CandidatePool, MasterSolveResult,
    build_master, compute_membership_sets, extract_solution, solve_master_ip,
    solve_master_lp,
)
from .model import (
    ClusterAssignment, Dataset, DescriptionSolution, HalfSpace, PdpConfig,
    PdpError,
)
from .pricing import RHO_TOL, build_pricing, solve_pricing

LOGGER = logging.getLogger("polydesc.colgen")

MAX_ITERATIONS = 500
_FINAL_IP_FLOOR_S = 5.0


class AlphaInfeasibleError(PdpError):
    """The master is infeasible under the given error budget.

    Leave `alpha` unset to let the two-stage procedure find a feasible one.
    """


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    rmlp_objective: float
    columns_added: tuple[int, ...]
    min_reduced_cost: float
    seconds: float


@dataclass
class ColgenTrace:
    records: list[IterationRecord] = dataclasses.field(default_factory=list)
    termination: str = "time_limit"   # priced_out | time_limit
    seconds: float = 0.0


@dataclass
class ColgenResult:
    halfspaces: list[HalfSpace]
    pool: CandidatePool
    rmlp: MasterSolveResult
    trace: ColgenTrace


def initial_pool(data: Dataset, ca: ClusterAssignment, cfg: PdpConfig) -> list[HalfSpace]:
    """Univariate splits at the p largest and smallest values per cluster.

    For each cluster and feature d with values spanning [lo, hi] this yields
    {x_d <= v} for the p largest distinct values v and {x_d >= v} for the p
    smallest, deduplicated across clusters.
    """
    seen = set()
    pool = []
    for k in range(ca.k):
        members = ca.members(k)
        for d in range(data.m):
            values = np.unique(data.points[members, d])
            e_d = tuple(1 if j == d else 0 for j in range(data.m))
            neg_e_d = tuple(-v for v in e_d)
            for v in values[-cfg.p:]:
                h = HalfSpace(w=e_d, b=float(v))
                if h.key() not in seen:
                    seen.add(h.key())
                    pool.append(h)
            for v in values[: cfg.p]:
                h = HalfSpace(w=neg_e_d, b=-float(v))
                if h.key() not in seen:
                    seen.add(h.key())
                    pool.append(h)
    return pool


def run_colgen(data: Dataset, ca: ClusterAssignment, cfg: PdpConfig, groups=None,
               objective=INTERPRETABILITY, initial_halfspaces=None,
               backend=None, max_iterations=MAX_ITERATIONS) -> ColgenResult:
    """Generate columns until priced out or out of time.

    Returns the final pool, the last restricted master LP result and the
    iteration trace.
    """
    started = time.monotonic()
    deadline = started + cfg.colgen_time_limit_s
    halfspaces = list(initial_halfspaces) if initial_halfspaces is not None \
        else initial_pool(data, ca, cfg)
    keys = {h.key() for h in halfspaces}
    theta1_eff = 0.0 if objective == MIN_ALPHA else cfg.theta1
    trace = ColgenTrace()
    rmlp = None
    pool = None

    for iteration in range(1, max_iterations + 1):
        pool = compute_membership_sets(halfspaces, data, ca, groups)
        mp = build_master(pool, cfg, mode="lp", objective=objective)
        rmlp = solve_master_lp(mp, backend=backend)
        if rmlp.status == "infeasible":
            raise AlphaInfeasibleError(
                f"restricted master LP infeasible at alpha={cfg.alpha}; "
                "use the two-stage procedure to pick a feasible budget")
        if rmlp.status != "optimal":
            raise PdpError(f"restricted master LP ended with status {rmlp.status}")

        remaining = deadline - time.monotonic()
        if remaining <= 0:
            trace.termination = "time_limit"
            break

        def price(k):
            problem = build_pricing(k, rmlp.duals, cfg, data, ca, groups,
                                    theta1=theta1_eff)
            limit = min(cfg.pricing_time_limit_s, max(remaining, 0.1))
            return solve_pricing(problem, time_limit_s=limit,
                                 existing_keys=keys, backend=backend)

        with ThreadPoolExecutor(max_workers=ca.k) as pool_exec:
            outcomes = list(pool_exec.map(price, range(ca.k)))

        added = [0] * ca.k
        min_rho = min(o.best_objective for o in outcomes)
        for outcome in sorted(outcomes, key=lambda o: o.cluster):
            for h, rho in outcome.candidates:
                if h.key() not in keys:
                    keys.add(h.key())
                    halfspaces.append(h)
                    added[outcome.cluster] += 1
        elapsed = time.monotonic() - started
        trace.records.append(IterationRecord(
            iteration=iteration, rmlp_objective=rmlp.objective,
            columns_added=tuple(added), min_reduced_cost=min_rho,
            seconds=elapsed))
        LOGGER.info("iteration=%d objective=%.6f columns_added=%s min_rho=%.3e seconds=%.2f",
                    iteration, rmlp.objective, added, min_rho, elapsed)

        if sum(added) == 0:
            all_proved = all(o.status == "optimal" for o in outcomes)
            trace.termination = "priced_out" if all_proved else "time_limit"
            break
        if time.monotonic() > deadline:
            trace.termination = "time_limit"
            break
    trace.seconds = time.monotonic() - started

    # make the returned pool reflect any columns added in the last iteration
    pool = compute_membership_sets(halfspaces, data, ca, groups)
    return ColgenResult(halfspaces=halfspaces, pool=pool, rmlp=rmlp, trace=trace)


@dataclass
class StageOutcome:
    pool: CandidatePool
    ip: MasterSolveResult
    trace: ColgenTrace
    seconds: float


@dataclass
class SolveReport:
    stage1_alpha: float | None
    budget: float | None
    final_objective: float
    final_status: str
    stages: list[StageOutcome]
    seconds: float


def _run_stage(data, ca, cfg, groups, objective, backend,
               initial_halfspaces=None) -> StageOutcome:
    started = time.monotonic()
    cg = run_colgen(data, ca, cfg, groups=groups, objective=objective,
                    initial_halfspaces=initial_halfspaces, backend=backend)
    remaining = cfg.colgen_time_limit_s - (time.monotonic() - started)
    mp = build_master(cg.pool, cfg, mode="ip", objective=objective)
    ip = solve_master_ip(mp, time_limit_s=max(remaining, _FINAL_IP_FLOOR_S),
                         backend=backend)
    if ip.status == "infeasible":
        raise AlphaInfeasibleError(f"master IP infeasible at alpha={cfg.alpha}")
    if ip.status not in ("optimal", "feasible", "time_limit") or not len(ip.selected) and ip.xi is None:
        raise PdpError(f"master IP ended with status {ip.status}")
    return StageOutcome(pool=cg.pool, ip=ip, trace=cg.trace,
                        seconds=time.monotonic() - started)


def two_stage_solve(data: Dataset, ca: ClusterAssignment, cfg: PdpConfig,
                    groups=None, backend=None):
    """Full solve: (optionally) find the smallest error budget, then optimize
    interpretability within (1 + kappa) times it.

    With cfg.alpha set by the user a single interpretability stage runs.
    Returns (DescriptionSolution, SolveReport).
    """
    started = time.monotonic()
    stages: list[StageOutcome] = []
    if cfg.alpha is not None:
        stage1_alpha = None
        budget = float(cfg.alpha)
        final_cfg = cfg
        stage = _run_stage(data, ca, cfg, groups, INTERPRETABILITY, backend)
        stages.append(stage)
    else:
        stage1 = _run_stage(data, ca, cfg, groups, MIN_ALPHA, backend)
        stages.append(stage1)
        if stage1.ip.xi is None:
            raise PdpError("stage 1 produced no incumbent within its time limit")
        stage1_alpha = float(stage1.ip.alpha_value)
        budget = (1.0 + cfg.kappa) * stage1_alpha
        final_cfg = dataclasses.replace(cfg, alpha=budget)
        LOGGER.info("stage1 alpha=%.6f budget=%.6f", stage1_alpha, budget)
        stage = _run_stage(data, ca, final_cfg, groups, INTERPRETABILITY, backend,
                           initial_halfspaces=stages[0].pool.halfspaces)
        stages.append(stage)

    solution = extract_solution(stage.ip, stage.pool, data, ca, patch_empty=True)
    report = SolveReport(
        stage1_alpha=stage1_alpha,
        budget=budget,
        final_objective=stage.ip.objective,
        final_status=stage.ip.status,
        stages=stages,
        seconds=time.monotonic() - started,
    )
    return solution, report
