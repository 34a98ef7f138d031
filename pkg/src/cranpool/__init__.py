"""Two-tenant C-RAN uplink optimizer with spectrum pooling and
privacy-constrained backhaul cooperation."""

from .model import (
    ChannelSet,
    Placement,
    Scenario,
    ScenarioError,
    channel_set_from_links,
    export_channels,
    generate_channels,
    generate_scenario_geometry,
    import_channels,
    select_backhaul_subset,
    snr_db_to_p_max,
)
from .metrics import (
    BandAllocation,
    ConstraintReport,
    DesignPoint,
    InvalidDesignError,
    constraint_report,
    mi_sampling_oracle,
    privacy_leakage,
    quantization_rate_private,
    quantization_rate_shared,
    rate_private,
    rate_shared,
    secrecy_sum_rate,
)
from .fp import AuxState, SurrogateSystem, build_surrogates, update_aux
from .subsolver import ClarabelBackend, ConvexSubproblem, CvxpyBackend, solve
from .optimizer import (
    SCHEMES,
    InfeasibleScenarioError,
    IterationTrace,
    OptimizerConfig,
    initialize,
    optimize,
)
from .estimator import SpectrumPoolingOptimizer, check_channel_set
from .harness import ExperimentSpec, RunRecord, load_experiment, run_experiment, validate

__version__ = "0.1.0"

__all__ = [
    "AuxState", "BandAllocation", "ChannelSet", "ClarabelBackend",
    "ConstraintReport", "ConvexSubproblem", "CvxpyBackend", "DesignPoint",
    "ExperimentSpec", "InfeasibleScenarioError", "InvalidDesignError",
    "IterationTrace", "OptimizerConfig", "Placement", "RunRecord", "SCHEMES",
    "Scenario", "ScenarioError", "SpectrumPoolingOptimizer", "SurrogateSystem",
    "build_surrogates", "channel_set_from_links", "check_channel_set",
    "constraint_report", "export_channels", "generate_channels",
    "generate_scenario_geometry", "import_channels", "initialize",
    "load_experiment", "mi_sampling_oracle", "optimize", "privacy_leakage",
    "quantization_rate_private", "quantization_rate_shared", "rate_private",
    "rate_shared", "run_experiment", "secrecy_sum_rate",
    "select_backhaul_subset", "snr_db_to_p_max", "solve", "update_aux",
    "validate",
]
