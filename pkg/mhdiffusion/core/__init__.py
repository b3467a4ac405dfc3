"""
Core diffusion modules.

This package contains the analysis and planning components:
- topology: directed networks and neighborhood indexes
- datamodel: node profiles, sample generation and block matrices
- weights: balancing combination weights and the LMI solve for beta
- msdtheory: transient and steady-state MSD, bounds, convergence metrics
- milp / lp_solver / optimizer: neighbor-selection planning
"""

from mhdiffusion.core.topology import (
    Network,
    NeighborhoodIndex,
    build_index,
    is_simple_topology,
    path_indicator,
    h_hop_neighbors,
)
from mhdiffusion.core.datamodel import (
    NodeProfile,
    GlobalModel,
    BlockMatrices,
    generate_sample,
    composite_variance,
    composite_variances,
    build_blocks,
    synth_profiles,
)
from mhdiffusion.core.weights import (
    WeightMatrix,
    BalanceCoefficient,
    solve_beta,
    balancing_weights,
    adaptive_weights,
)
from mhdiffusion.core.msdtheory import (
    ErrorDynamics,
    MsdBounds,
    MsdTrace,
    build_dynamics,
    transient_msd,
    steady_state_msd,
    msd_bounds,
    stability_check,
    convergence_rate,
)
from mhdiffusion.core.milp import Budgets, MilpModel, build_p2, build_p3, build_model
from mhdiffusion.core.lp_solver import LpResult, LpStatus, solve_lp
from mhdiffusion.core.optimizer import (
    NeighborSelection,
    FeasibilityReport,
    solve_milp,
    round_algorithm1,
    verify_feasible,
    selection_objective,
)

__all__ = [
    "Network",
    "NeighborhoodIndex",
    "build_index",
    "is_simple_topology",
    "path_indicator",
    "h_hop_neighbors",
    "NodeProfile",
    "GlobalModel",
    "BlockMatrices",
    "generate_sample",
    "composite_variance",
    "composite_variances",
    "build_blocks",
    "synth_profiles",
    "WeightMatrix",
    "BalanceCoefficient",
    "solve_beta",
    "balancing_weights",
    "adaptive_weights",
    "ErrorDynamics",
    "MsdBounds",
    "MsdTrace",
    "build_dynamics",
    "transient_msd",
    "steady_state_msd",
    "msd_bounds",
    "stability_check",
    "convergence_rate",
    "Budgets",
    "MilpModel",
    "build_p2",
    "build_p3",
    "build_model",
    "LpResult",
    "LpStatus",
    "solve_lp",
    "NeighborSelection",
    "FeasibilityReport",
    "solve_milp",
    "round_algorithm1",
    "verify_feasible",
    "selection_objective",
]
