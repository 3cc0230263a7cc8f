"""
Configuration for the survival toolkit.

Defaults are sized so every acceptance experiment runs at desk scale on one
core. Environment variables (or a .env file) override them; CLI flags and
YAML run files override both.
"""
import os
from pydantic import BaseModel, Field
from dotenv import load_dotenv

load_dotenv()


class Settings(BaseModel):
    """Toolkit settings with reproducible defaults"""

    # ==========================================================================
    # MONTE CARLO HARNESS
    # ==========================================================================
    default_trials: int = Field(
        default_factory=lambda: int(os.getenv("SURVIVAL_TRIALS", "10000"))
    )
    max_generations: int = Field(
        default_factory=lambda: int(os.getenv("SURVIVAL_MAX_GENERATIONS", "100"))
    )
    population_cap: int = Field(
        default_factory=lambda: int(os.getenv("SURVIVAL_POPULATION_CAP", "100000"))
    )
    # Fixed documented constant; entropy only via `--seed random`
    master_seed: int = Field(
        default_factory=lambda: int(os.getenv("SURVIVAL_SEED", "20240611"))
    )
    # Time horizon of the fixed-rate baseline
    fixed_horizon: float = Field(
        default_factory=lambda: float(os.getenv("SURVIVAL_FIXED_HORIZON", "200.0"))
    )
    # Process pool size; results do not depend on it
    workers: int = Field(
        default_factory=lambda: int(os.getenv("SURVIVAL_WORKERS", "1"))
    )

    # ==========================================================================
    # ANALYTICS
    # ==========================================================================
    quad_abs_tol: float = 1e-10
    mc_samples: int = Field(
        default_factory=lambda: int(os.getenv("SURVIVAL_MC_SAMPLES", "1000000"))
    )
    # Monte Carlo m within this many standard errors of 1 gets no verdict
    inconclusive_sigma: float = 3.0

    # Extinction probability (empirical pgf)
    gw_samples: int = 100_000
    gw_tolerance: float = 1e-12
    gw_max_iterations: int = 1_000_000
    bootstrap_replicates: int = 200

    # ==========================================================================
    # LOGGING
    # ==========================================================================
    log_level: str = Field(default_factory=lambda: os.getenv("LOG_LEVEL", "INFO"))


settings = Settings()
