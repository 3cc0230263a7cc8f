"""Dispersal Survival Lab: birth-death chains in random environments."""
from .analytics.criteria import build_report, criterion_m
from .environment.laws import EnvironmentLaw
from .montecarlo.harness import compare_models, estimate_survival, sweep

__all__ = [
    "EnvironmentLaw",
    "build_report",
    "compare_models",
    "criterion_m",
    "estimate_survival",
    "sweep",
]
