"""
Shared record types
===================

Enums and frozen dataclasses passed between the simulation, analytics and
CLI layers:
- ModelKind, TrialVerdict, Verdict
- TrialOutcome (one simulated lineage)
- SurvivalEstimate, SweepRow, ComparisonRow (Monte Carlo results)
- CriterionReport (analytic criteria)
"""

from .types import (
    ComparisonRow,
    CriterionReport,
    ModelKind,
    SurvivalEstimate,
    SweepRow,
    TrialOutcome,
    TrialVerdict,
    Verdict,
)

__all__ = [
    "ComparisonRow",
    "CriterionReport",
    "ModelKind",
    "SurvivalEstimate",
    "SweepRow",
    "TrialOutcome",
    "TrialVerdict",
    "Verdict",
]
