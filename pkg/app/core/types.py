"""
Dispersal Survival Lab Core Types
=================================

Shared dataclasses and enums passed between the simulators, the analytic
criteria, the Monte Carlo harness and the CLI.

This module defines the contract between components: the process runners
produce TrialOutcome, the harness turns them into SurvivalEstimate and
SweepRow, the analytics produce CriterionReport, and the CLI serializes all
of them through their to_dict() methods.
"""

import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Dict, Optional


# =============================================================================
# ENUMS
# =============================================================================

class ModelKind(Enum):
    """
    The three population processes.

    DISPERSION: every survivor of a collapsed colony founds a new colony
        with its own freshly drawn environment
    GLOBAL: one population, birth rate redrawn for everyone at renewal times
    FIXED: classical birth-death chain with a constant birth rate
    """
    DISPERSION = "dispersion"
    GLOBAL = "global"
    FIXED = "fixed"


class TrialVerdict(Enum):
    """Outcome of one simulated lineage."""
    EXTINCT = "Extinct"
    SURVIVED_TO_CAP = "SurvivedToCap"


class Verdict(Enum):
    """
    Predicted fate of a process.

    INCONCLUSIVE is only produced by Monte Carlo estimates of m that sit
    within a few standard errors of 1.
    """
    SURVIVES = "Survives"
    DIES = "Dies"
    NOT_APPLICABLE = "NotApplicable"
    INCONCLUSIVE = "Inconclusive"


# =============================================================================
# TRIAL OUTCOMES
# =============================================================================

@dataclass(frozen=True)
class TrialOutcome:
    """
    Verdict of one simulated lineage.

    stop_step is the generation (dispersion) or epoch (global) at which the
    trial stopped; fixed-model trials report 0 there and set stop_time.
    """
    verdict: TrialVerdict
    stop_step: int
    stop_population: int
    peak_population: int
    stop_time: Optional[float] = None

    def __post_init__(self) -> None:
        if self.verdict is TrialVerdict.EXTINCT and self.stop_population != 0:
            raise ValueError("Extinct outcome must stop at population 0")
        if self.verdict is TrialVerdict.SURVIVED_TO_CAP and self.stop_population < 1:
            raise ValueError("SurvivedToCap outcome needs a living population")

    @property
    def survived(self) -> bool:
        return self.verdict is TrialVerdict.SURVIVED_TO_CAP

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "stop_generation_or_epoch": self.stop_step,
            "stop_population": self.stop_population,
            "peak_population": self.peak_population,
            "stop_time": self.stop_time,
        }


# =============================================================================
# ESTIMATES
# =============================================================================

@dataclass(frozen=True)
class SurvivalEstimate:
    """
    Monte Carlo survival frequency with a 95% Wilson interval.

    Carries its provenance (seed and caps) so any row can be reproduced.
    step_limit is max_generations or max_epochs; it is None for the fixed
    model, which is bounded by horizon instead.
    """
    model: ModelKind
    n_trials: int
    n_survived: int
    point: float
    ci_low: float
    ci_high: float
    master_seed: int
    population_cap: int
    step_limit: Optional[int] = None
    horizon: Optional[float] = None

    def __post_init__(self) -> None:
        if self.n_trials < 1:
            raise ValueError("n_trials must be positive")
        if not 0 <= self.n_survived <= self.n_trials:
            raise ValueError("n_survived must lie in [0, n_trials]")
        if not 0.0 <= self.ci_low <= self.point <= self.ci_high <= 1.0:
            raise ValueError("interval must bracket the point estimate inside [0, 1]")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["model"] = self.model.value
        return data


@dataclass(frozen=True)
class SweepRow:
    """
    One point of a parameter sweep.

    Rows for grid values that violate a law invariant keep their place in
    the output with predicted = "Invalid", no estimate and a diagnostic.
    """
    param: str
    value: float
    m: Optional[float]
    predicted: str
    estimate: Optional[SurvivalEstimate] = None
    diagnostic: Optional[str] = None

    @property
    def is_valid(self) -> bool:
        return self.estimate is not None


@dataclass(frozen=True)
class ComparisonRow:
    """One model's line in the dispersion / global / fixed comparison."""
    model: ModelKind
    predicted: Verdict
    estimate: Optional[SurvivalEstimate] = None
    rate: Optional[float] = None
    diagnostic: Optional[str] = None


# =============================================================================
# CRITERIA
# =============================================================================

@dataclass(frozen=True)
class CriterionReport:
    """
    Analytic survival criteria for one environment law.

    m may be +inf. jensen_lower_bound is only defined for independent
    couplings; a_critical only for the two-point / exponential example
    with E(Λ) < 1.
    """
    m: float
    mean_rate: float
    mean_clock: float
    jensen_lower_bound: Optional[float]
    a_critical: Optional[float]
    dispersion_verdict: Verdict
    global_verdict: Verdict
    global_reason: Optional[str] = None
    m_method: str = "closed_form"
    m_std_error: Optional[float] = None
    regime: Optional[str] = None

    @property
    def m_is_infinite(self) -> bool:
        return math.isinf(self.m)

    def to_dict(self) -> Dict[str, Any]:
        """Flat record; field names follow the dataclass."""
        return {
            "m": self.m,
            "mean_rate": self.mean_rate,
            "mean_clock": self.mean_clock,
            "jensen_lower_bound": self.jensen_lower_bound,
            "a_critical": self.a_critical,
            "dispersion_verdict": self.dispersion_verdict.value,
            "global_verdict": self.global_verdict.value,
            "global_reason": self.global_reason,
            "m_method": self.m_method,
            "m_std_error": self.m_std_error,
            "regime": self.regime,
        }
