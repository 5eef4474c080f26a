"""Experiment driver, oracles, configuration, CLI and CSV persistence."""

from .config import RunConfig, config_from_dict, load_config
from .experiments import Experiment, build_experiment
from .oracles import GridToy, power_posterior_oracle, prop1_check
from .runner import (
    MetricsRecord,
    TrialResult,
    compare,
    compute_metrics,
    data_error,
    extrapolation_error,
    run_baseline,
    run_experiment,
    run_kr_abc,
    select_hyperparameters,
)

__all__ = [
    "Experiment",
    "GridToy",
    "MetricsRecord",
    "RunConfig",
    "TrialResult",
    "build_experiment",
    "compare",
    "compute_metrics",
    "config_from_dict",
    "data_error",
    "extrapolation_error",
    "load_config",
    "power_posterior_oracle",
    "prop1_check",
    "run_baseline",
    "run_experiment",
    "run_kr_abc",
    "select_hyperparameters",
]
