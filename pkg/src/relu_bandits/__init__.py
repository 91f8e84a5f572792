"""Stochastic bandits with sums-of-ReLU rewards.

The library splits into: the reward model and its lifted feature maps
(relu_model), neuron recovery by ERM plus the theory bound evaluators
(estimation), a self-contained linear UCB engine (linear_ucb), the bandit
policies built on top (agents), the experiment harness (harness), artifact
writers (reporting) and a CLI (cli).
"""

from .agents import (
    AgentObservation,
    BatchGrid,
    OfulAgent,
    OfulConfig,
    OfuReluAgent,
    OfuReluConfig,
    OfuReluPlusAgent,
    OfuReluPlusConfig,
    RandomAgent,
    RandomConfig,
    build_batch_grid,
    make_agent,
)
from .errors import (
    BoundVacuousError,
    ConfigError,
    DimensionMismatchError,
    FitError,
    GenerationError,
    NumericError,
    ProtocolError,
    UnsupportedDimensionError,
)
from .estimation import (
    BoundParams,
    FitConfig,
    MatchResult,
    Sample,
    alpha_bound,
    empirical_sq_loss,
    fit_erm,
    h_bound,
    match_neurons,
    t0_schedule,
    zeta_bound,
)
from .harness import (
    AggregateResult,
    Instance,
    TrialTrace,
    aggregate,
    gen_instance,
    run_trial,
    sample_arms,
)
from .linear_ucb import LinearUcbState, UcbConfig, conf_radius, init_state, ridge_update, ucb_select
from .relu_model import (
    ArmSet,
    ReluNetwork,
    TransformedArm,
    eval_f,
    eval_f_batch,
    exact_argmax_2d,
    frozen_features,
    gap_of,
    margin_mask,
    restrict_arms,
    sign_corrected_parameter,
    sign_robust_features,
    sign_robust_features_batch,
    transform_arm,
)
from .reporting import emit_svg, export_csv, write_summary

__all__ = [
    "AgentObservation",
    "AggregateResult",
    "ArmSet",
    "BatchGrid",
    "BoundParams",
    "BoundVacuousError",
    "ConfigError",
    "DimensionMismatchError",
    "FitConfig",
    "FitError",
    "GenerationError",
    "Instance",
    "LinearUcbState",
    "MatchResult",
    "NumericError",
    "OfulAgent",
    "OfulConfig",
    "OfuReluAgent",
    "OfuReluConfig",
    "OfuReluPlusAgent",
    "OfuReluPlusConfig",
    "ProtocolError",
    "RandomAgent",
    "RandomConfig",
    "ReluNetwork",
    "Sample",
    "TransformedArm",
    "TrialTrace",
    "UcbConfig",
    "UnsupportedDimensionError",
    "aggregate",
    "alpha_bound",
    "build_batch_grid",
    "conf_radius",
    "emit_svg",
    "empirical_sq_loss",
    "eval_f",
    "eval_f_batch",
    "exact_argmax_2d",
    "export_csv",
    "fit_erm",
    "frozen_features",
    "gap_of",
    "gen_instance",
    "h_bound",
    "init_state",
    "margin_mask",
    "match_neurons",
    "make_agent",
    "restrict_arms",
    "ridge_update",
    "run_trial",
    "sample_arms",
    "sign_corrected_parameter",
    "sign_robust_features",
    "sign_robust_features_batch",
    "t0_schedule",
    "transform_arm",
    "ucb_select",
    "write_summary",
    "zeta_bound",
]

__version__ = "0.1.0"
