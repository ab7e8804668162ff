"""polydesc: explain a given clustering with one sparse polyhedron per cluster.

The description problem is solved as an integer program over candidate
half-spaces, generated on demand by column generation; large datasets can be
summarized into bounding-box groups first.
"""

from .colgen import (
    AlphaInfeasibleError, ColgenTrace, SolveReport, initial_pool, run_colgen,
    two_stage_solve,
)
from .grouping import Group, bounding_box, build_groups, group_cluster, silhouette
from .master import (
    CandidatePool, MasterSolveResult, build_master, compute_membership_sets,
    extract_solution, solve_master_ip, solve_master_lp,
)
from .milp import LinearModel, LpSolution, MilpSolution, solve_lp, solve_milp
from .model import (
    ClusterAssignment, Dataset, DescriptionMetrics, DescriptionSolution,
    HalfSpace, PdpConfig, PdpError, Polyhedron, classify_points, cost,
    description_metrics, grouped_cost, halfspace_complexity,
    halfspace_contains_point,
)
from .prep import KmeansResult, RawTable, encode_and_scale, ingest, kmeans, select_k
from .pricing import DualBundle, PricingOutcome, build_pricing, reduced_cost, solve_pricing
from .synth import SynthConfig, generate, group_vs_subsample_experiment

__version__ = "0.1.0"
