"""Finite-population Moran processes for 2x2 games and their continuum limits."""

from .expansion import (
    KernelExpansion,
    classify_balance,
    drift_divergence_limit,
    drift_limit,
    expand_kernel,
    richardson,
    selection_limits,
)
from .experiments import ExperimentConfig, RunReport, convergence_study, run_experiment
from .forward import (
    DensityField,
    FixationProfile,
    GridOperator,
    StrongSelection,
    evolve_complete,
    fixation_probability,
    psi_profile,
    rescale_strong_selection,
    spectral_gap,
    step_complete,
)
from .kimura import (
    BackwardOperator,
    KimuraSolution,
    adjointness_residual,
    duality_defect,
    duality_map,
    solve_kimura,
    step_kimura,
    weighted_norm,
)
from .mixed import MixedGame, dominates, dominates_by_fixation, mixed_fixation, reduce_payoffs, reduce_scaled
from .moran import (
    ChainState,
    FixationVector,
    PayoffMatrix,
    ScaledGame,
    TransitionKernel,
    absorb,
    absorb_by_iteration,
    build_transition_kernel,
    evolve,
    fixation_vector,
    limit_matrix,
    transition_probabilities,
)
from .replicator import (
    HyperbolicSnapshot,
    HyperbolicSolution,
    ReplicatorFlow,
    flow,
    lagrangian_density,
    logistic_flow,
    lyapunov_moment,
    lyapunov_weight,
    solve_nodiffusion,
    upwind_nodiffusion,
)

__version__ = "0.1.0"
