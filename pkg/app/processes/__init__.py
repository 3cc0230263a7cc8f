"""Dispersion, global and fixed-rate population processes."""
from .runners import (
    CONFIG_TYPES,
    ConfigError,
    DispersionConfig,
    FixedConfig,
    GlobalConfig,
    ProcessConfig,
    Trajectory,
    run_dispersion_trial,
    run_fixed_trial,
    run_global_trial,
    run_trajectory,
    run_trial,
)

__all__ = [
    "CONFIG_TYPES",
    "ConfigError",
    "DispersionConfig",
    "FixedConfig",
    "GlobalConfig",
    "ProcessConfig",
    "Trajectory",
    "run_dispersion_trial",
    "run_fixed_trial",
    "run_global_trial",
    "run_trajectory",
    "run_trial",
]
