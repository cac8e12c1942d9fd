"""Beam-pattern design and shift scheduling for stacked movable metasurfaces.

A fixed metasurface carries a smaller movable one; sliding the movable layer
in whole-element steps synthesizes distinct beam patterns from static
phases.  This package models the layout, evaluates user SNRs under a
line-of-sight channel, and jointly optimizes both phase profiles and the
per-user pattern schedule for the worst-case SNR with an annealed Riemannian
conjugate-gradient solver, plus sweep drivers and brute-force/finite-
difference ground truth.
"""

__version__ = "0.1.0"

from .channel import (
    ArrayAngles,
    CascadedChannel,
    Scenario,
    cascaded_channel,
    snr,
    snr_full_path,
    upa_steering,
)
from .experiments import (
    ArcScenarioSpec,
    CaseStudyResult,
    SweepResult,
    build_arc_scenario,
    case_study,
    sms_baseline,
    sweep_allocation,
    sweep_ms2_sizes,
    sweep_users_1d2d,
)
from .geometry import (
    MisGeometry,
    SelectionOperator,
    ShiftPosition,
    all_selections,
    all_shift_positions,
    build_selection,
    equivalent_phase,
    pattern_grid,
    shift_from_flat,
    shift_position,
)
from .manifolds import (
    RetractionError,
    TangentTriple,
    grad_norm,
    project_circle_tangent,
    project_multinomial_tangent,
    project_simplex,
    retract_circle,
    retract_multinomial,
    transport,
)
from .objective import (
    EvalContext,
    ProductPoint,
    SmoothingState,
    egrad,
    evaluate,
    lse_objective,
    scheduled_snr,
    softmin_weights,
    user_snrs,
)
from .oracle import BruteForceConfig, BruteForceResult, brute_force_solve, fd_directional
from .solver import (
    SolveReport,
    SolverConfig,
    conjugate_direction,
    inner_solve,
    line_search,
    pr_beta,
    solve,
    threshold_schedule,
)
