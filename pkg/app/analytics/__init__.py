"""Survival criteria for the dispersion and global models."""
from .criteria import (
    METHODS,
    CriterionMethodError,
    ExtinctionEstimate,
    IntegrabilityCheck,
    MValue,
    TwoPointRegime,
    build_report,
    classify_global,
    criterion_m,
    critical_a,
    gw_extinction_prob,
    jensen_lower_bound,
    m_diverges,
    smith_wilkinson_check,
    two_point_regime,
)

__all__ = [
    "METHODS",
    "CriterionMethodError",
    "ExtinctionEstimate",
    "IntegrabilityCheck",
    "MValue",
    "TwoPointRegime",
    "build_report",
    "classify_global",
    "criterion_m",
    "critical_a",
    "gw_extinction_prob",
    "jensen_lower_bound",
    "m_diverges",
    "smith_wilkinson_check",
    "two_point_regime",
]
