"""Survival estimates, deterministic seeding and parameter sweeps."""
from .harness import (
    GOLDEN_GAMMA,
    Z_95,
    compare_models,
    derive_seed,
    derive_seeds,
    estimate_survival,
    parse_grid_range,
    random_master_seed,
    sweep,
    wilson_interval,
)

__all__ = [
    "GOLDEN_GAMMA",
    "Z_95",
    "compare_models",
    "derive_seed",
    "derive_seeds",
    "estimate_survival",
    "parse_grid_range",
    "random_master_seed",
    "sweep",
    "wilson_interval",
]
