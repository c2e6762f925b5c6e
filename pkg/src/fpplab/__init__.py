"""fpplab: a laboratory for planar first-passage percolation.

Builds monotone quantile couplings for absolutely continuous edge-weight
laws, perturbs lattice environments on dyadic annulus scales, computes exact
restricted passage times, and estimates how concentrated the passage time
can be in any unit window.
"""

__version__ = "0.1.0"

from .coupling import (
    Delta0Calibration,
    DeltaSetQuery,
    MwReport,
    QuantileCoupling,
    estimate_delta0,
    gaussian_coupling,
    mw_gaussian_closed_form,
    mw_inequality_check,
    pushforward_check,
)
from .distributions import (
    Exponential,
    Gamma,
    GaussianKernel,
    LogNormal,
    PiecewiseLinearCdf,
    StandardNormal,
    Uniform,
    WeightLaw,
    law_from_config,
    law_to_config,
)
from .estimators import (
    ConcentrationEstimate,
    SampleSet,
    binomial_lower_tail,
    concentration_function,
    fluctuation_probability,
    increment_event_frequency,
    lebesgue_window_measure,
    omega_diagnostic,
    variance_estimate,
)
from .experiments import (
    ExperimentConfig,
    MwBatteryRecord,
    ResultRecord,
    emit_outputs,
    run_experiment,
    run_mw_battery,
    run_profile_study,
)
from .fpp_core import (
    Environment,
    PassageResult,
    PerturbationSchedule,
    exhaustive_passage_time,
    passage_time,
    passage_time_profile,
    perturb_environment,
    sample_environment,
    tau_schedule,
)
from .lattice import (
    AnnulusIndex,
    GridBox,
    annulus_contains,
    annulus_edges,
    annulus_size,
    enumerate_paths_pk,
    path_count_bound,
    scales,
)
from .rng import RngStream

__all__ = [
    "__version__",
    "RngStream",
    "WeightLaw", "Exponential", "Uniform", "Gamma", "LogNormal",
    "PiecewiseLinearCdf", "StandardNormal", "GaussianKernel",
    "law_from_config", "law_to_config",
    "QuantileCoupling", "DeltaSetQuery", "Delta0Calibration", "MwReport",
    "estimate_delta0", "mw_inequality_check", "mw_gaussian_closed_form",
    "pushforward_check", "gaussian_coupling",
    "GridBox", "AnnulusIndex", "annulus_contains", "annulus_edges",
    "annulus_size", "scales", "enumerate_paths_pk", "path_count_bound",
    "Environment", "PerturbationSchedule", "PassageResult",
    "sample_environment", "tau_schedule", "perturb_environment",
    "passage_time", "passage_time_profile", "exhaustive_passage_time",
    "SampleSet", "ConcentrationEstimate", "concentration_function",
    "variance_estimate", "fluctuation_probability", "binomial_lower_tail",
    "lebesgue_window_measure", "omega_diagnostic", "increment_event_frequency",
    "ExperimentConfig", "ResultRecord", "MwBatteryRecord",
    "run_experiment", "run_mw_battery", "run_profile_study", "emit_outputs",
]
