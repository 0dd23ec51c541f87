"""Order-sensitive sequential interventions on ideal lattices.

Prerequisite-constrained action sequences are paths in the ideal lattice of a
finite poset.  This package builds truncated ideal lattices, rewrites
same-endpoint paths through elementary diamond swaps, computes diamond
curvature and endpoint potentials with their Moebius parameterization,
checks cube consistency and reconstructs edge fields under a reference-tree
gauge, estimates reference-path scores and local order effects from event
logs (with a finite-state simulator and g-formula evaluators as oracles), and
plans exactly by dynamic programming on the truncated lattice.
"""

from .errors import CapExceeded, InputError, LatseqError, PreconditionError, UnsupportedPathError
from .poset import Poset, make_poset, parse_poset
from .lattice import (
    Diamond,
    LatticeSlice,
    Path,
    RewriteSequence,
    RewriteStep,
    apply_swap,
    build_lattice,
    enumerate_diamonds,
    enumerate_paths,
    min_swap_distance,
    reference_path,
    rewrite_sequence,
    validate_path,
)
from .valuation import (
    Decomposition,
    DiamondField,
    EdgeField,
    IndependenceVerdict,
    Potential,
    ThetaSystem,
    check_path_independence,
    constant_edge_field,
    curvature,
    curvature_field,
    decompose,
    endpoint_potential,
    make_edge_field,
    mobius_forward,
    mobius_function,
    mobius_invert,
    path_value,
    reference_score,
)
from .integrability import (
    CubeVerdict,
    GaugeSystem,
    ReferenceTree,
    ThreeCube,
    cube_defect,
    enumerate_cubes,
    gauge_of,
    gradient_shift,
    is_cube_consistent,
    reconstruct_with_gauge,
    reference_tree,
    tree_integrate,
    zero_gauge_reconstruct,
)
from .events import (
    Case,
    Episode,
    Estimate,
    EstimationReport,
    EventLog,
    FamilySpec,
    detect_families,
    estimate_family,
    extract_episodes,
    ingest_log,
    log_support_report,
    write_log,
)
from .causal import (
    CausalModel,
    SimCase,
    diamond_two_sided_supported,
    episodes_from_cases,
    g_formula_value,
    log_from_cases,
    model_support_report,
    nonid_witness,
    observational_summary,
    observationally_equal,
    path_supported,
    sample_cases,
    sample_forced_rewards,
    simulate_log,
    support_separation_report,
    true_local_order_effect,
    true_path_value,
    true_pooled_family_values,
)
from .planner import (
    OrderBoundReport,
    PlanResult,
    PolicyTable,
    dp_plan,
    exhaustive_plan,
    family_edge_field,
    family_lattice,
    family_plan,
    order_bound_check,
    policy_compare,
    split_by_case,
)

__version__ = "0.1.0"
