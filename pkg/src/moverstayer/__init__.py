"""Dynamic mover-stayer modeling for discrete-time panel data.

Subjects start either at risk of an event or as stayers who will never
experience it, and at-risk subjects can still drift into the stayer
state over time with covariate-dependent probability. The package
simulates such panels, fits the model by direct maximum likelihood or
EM, quantifies uncertainty (Hessian, bootstrap, warp-speed coverage
studies), predicts cumulative mover/stayer probabilities, and benchmarks
against the static mixture and a no-stayer hazard model.
"""

from .errors import (
    DataValidationError,
    DimensionError,
    EmptyDatasetError,
    EnumerationBoundError,
    FitFailureError,
    HessianError,
    HistoryError,
    MoverStayerError,
    MStepError,
    UsageError,
)
from .model import (
    ModelParams,
    PanelDataset,
    Subject,
    TransitionProbs,
    cumulative_prob_curves,
    cumulative_state_probs,
    initial_risk_prob,
    transition_probs,
)
from .likelihood import (
    ENUMERATION_MAX_Y,
    LatentPath,
    enumerate_latent_paths,
    gradient,
    latent_path_weights,
    loglik_and_gradient,
    subject_log_likelihood,
    total_log_likelihood,
)
from .estimate import (
    CoverageTable,
    ExtendedRecords,
    FitConfig,
    FitResult,
    InferenceMethod,
    InferenceReport,
    bootstrap_se,
    build_extended_records,
    e_step,
    expected_complete_loglik,
    fit_direct,
    fit_em,
    hessian_se,
    m_step,
    scaled_gradient_maxnorm,
    warp_speed_coverage,
)
from .simulate import (
    Bernoulli,
    IntegerWalk,
    LatentTrajectory,
    NormalWalk,
    OccupancyTable,
    SimulationConfig,
    StandardNormal,
    builtin_setting,
    occupancy_table,
    simulate_dataset,
)
from .compare import (
    NoStayerParams,
    StaticParams,
    append_time_covariates,
    append_time_powers,
    fit_no_stayer,
    fit_static,
    no_stayer_log_likelihood,
    no_stayer_prob_curves,
    static_cumulative_probs,
    static_log_likelihood,
    static_prob_curves,
)
from .metrics import (
    ProbCurves,
    State,
    StudyReport,
    mad,
    run_replication_study,
)
from .cli import ingest_panel_csv, main, write_panel_csv

__version__ = "0.1.0"

__all__ = [
    "Bernoulli",
    "CoverageTable",
    "DataValidationError",
    "DimensionError",
    "EmptyDatasetError",
    "ENUMERATION_MAX_Y",
    "EnumerationBoundError",
    "ExtendedRecords",
    "FitConfig",
    "FitFailureError",
    "FitResult",
    "HessianError",
    "HistoryError",
    "InferenceMethod",
    "InferenceReport",
    "IntegerWalk",
    "LatentPath",
    "LatentTrajectory",
    "ModelParams",
    "MoverStayerError",
    "MStepError",
    "NormalWalk",
    "NoStayerParams",
    "OccupancyTable",
    "PanelDataset",
    "ProbCurves",
    "SimulationConfig",
    "StandardNormal",
    "State",
    "StaticParams",
    "StudyReport",
    "Subject",
    "TransitionProbs",
    "UsageError",
    "append_time_covariates",
    "append_time_powers",
    "bootstrap_se",
    "build_extended_records",
    "builtin_setting",
    "cumulative_prob_curves",
    "cumulative_state_probs",
    "e_step",
    "enumerate_latent_paths",
    "expected_complete_loglik",
    "fit_direct",
    "fit_em",
    "fit_no_stayer",
    "fit_static",
    "gradient",
    "hessian_se",
    "ingest_panel_csv",
    "initial_risk_prob",
    "latent_path_weights",
    "loglik_and_gradient",
    "m_step",
    "mad",
    "main",
    "no_stayer_log_likelihood",
    "no_stayer_prob_curves",
    "occupancy_table",
    "run_replication_study",
    "scaled_gradient_maxnorm",
    "simulate_dataset",
    "static_cumulative_probs",
    "static_log_likelihood",
    "static_prob_curves",
    "subject_log_likelihood",
    "total_log_likelihood",
    "transition_probs",
    "warp_speed_coverage",
]
