"""Linear birth-death chain: exact transient law and event simulation."""
from .birth_death import (
    OFFSPRING_CEILING,
    SERIES_SWITCHOVER,
    CapReached,
    EventKind,
    GillespieResult,
    OffspringLaw,
    TrajectoryEvent,
    geometric_form,
    gillespie_until,
    sample_offspring,
    sample_offspring_batch,
    sample_population_at,
    survival_probability,
    transient_law,
)

__all__ = [
    "OFFSPRING_CEILING",
    "SERIES_SWITCHOVER",
    "CapReached",
    "EventKind",
    "GillespieResult",
    "OffspringLaw",
    "TrajectoryEvent",
    "geometric_form",
    "gillespie_until",
    "sample_offspring",
    "sample_offspring_batch",
    "sample_population_at",
    "survival_probability",
    "transient_law",
]
