"""Finite mean-field games: flows, exploitability, imitation-error proxies and bounds."""

from .attractor import (
    AttractorParams,
    ClosedFormProfile,
    alpha_family,
    alpha_policy,
    build_attractor,
    closed_form_profile,
)
from .core import (
    AttractorKernel,
    CongestionReward,
    FiniteMfg,
    FlowSequence,
    LinearCouplingKernel,
    NonStationaryReward,
    PolicySequence,
    TabularKernel,
    TrajectoryBatch,
    batch_exploitability,
    batch_population_flow,
    batch_single_agent_flow,
    batch_value,
    best_response,
    exploitability,
    population_flow,
    sample_trajectories,
    single_agent_flow,
    value,
)
from .errors import InvalidInputError, MfgError, PreconditionError, UnsupportedSettingError
from .gamespec import dump_game, game_from_dict, game_to_dict, load_game
from .ipm import (
    IpmResult,
    MinMaxTrace,
    TraceRecord,
    deterministic_family,
    family_minimax_gap,
    ipm_witness,
    solve_mfc_adversarial,
    solve_vanilla_adversarial,
)
from .metrics import (
    BoundReport,
    ErrorProfile,
    LipschitzConstants,
    ProxyKind,
    ValueDiffCheck,
    adv_error,
    batch_error_profiles,
    bc_error,
    bc_fit_from_samples,
    bound_value,
    lipschitz_constants,
    mfc_adv_error,
    theorem_bounds,
    vanilla_adv_error,
    value_diff_decomposition_check,
)

__version__ = "0.1.0"
