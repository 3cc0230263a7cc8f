"""Random environment laws: birth-rate law μ, collapse-clock law ν and their coupling."""
from .laws import (
    ClockLaw,
    Coupling,
    Deterministic,
    DiscreteClock,
    DiscreteRate,
    EnvironmentLaw,
    Exponential,
    LawValidationError,
    PointMass,
    RateLaw,
    SWEEPABLE_PARAMETERS,
    TwoPoint,
    UniformInterval,
    canonical_parameter,
    format_clock_law,
    format_number,
    format_rate_law,
    mean_abs_rate_deviation,
    mean_clock,
    mean_rate,
    parse_clock_law,
    parse_coupling,
    parse_rate_law,
    sample_env,
    sample_env_batch,
    with_parameter,
)

__all__ = [
    "ClockLaw",
    "Coupling",
    "Deterministic",
    "DiscreteClock",
    "DiscreteRate",
    "EnvironmentLaw",
    "Exponential",
    "LawValidationError",
    "PointMass",
    "RateLaw",
    "SWEEPABLE_PARAMETERS",
    "TwoPoint",
    "UniformInterval",
    "canonical_parameter",
    "format_clock_law",
    "format_number",
    "format_rate_law",
    "mean_abs_rate_deviation",
    "mean_clock",
    "mean_rate",
    "parse_clock_law",
    "parse_coupling",
    "parse_rate_law",
    "sample_env",
    "sample_env_batch",
    "with_parameter",
]
