"""
Monte Carlo Harness
===================

Repeated independent trials turned into survival-frequency estimates.

Seeding contract (fixed across versions):
    derive_seed(master, i) = splitmix64(master + γ·(i + 1) mod 2^64),
    γ = 0x9E3779B97F4A7C15, and derive_seed(master, i, j) folds left:
    derive_seed(derive_seed(master, i), j).

Trial i of an estimate uses np.random.default_rng(derive_seed(master, i)).
Sweep point k uses derive_seed(master, k) as its own master seed, so adding
a grid point never perturbs the trials of the other points. Trials are split
into index blocks that may run on a process pool; the counts, and therefore
every estimate, are identical for any number of workers.
"""

import concurrent.futures as cf
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from app.analytics.criteria import classify_global, criterion_m
from app.core.types import ComparisonRow, ModelKind, SurvivalEstimate, SweepRow, Verdict
from app.environment.laws import (
    EnvironmentLaw,
    LawValidationError,
    canonical_parameter,
    mean_rate,
    with_parameter,
)
from app.processes.runners import (
    ConfigError,
    DispersionConfig,
    FixedConfig,
    GlobalConfig,
    ProcessConfig,
    run_trial,
)

logger = logging.getLogger(__name__)

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1

# 97.5% standard normal quantile
Z_95 = float(stats.norm.ppf(0.975))

# Trials per pool task
_BLOCK = 1000


# =============================================================================
# SEEDING
# =============================================================================

def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, *indices: int) -> int:
    """Derive a 64-bit stream seed from a master seed and one or more indices."""
    seed = master_seed & _MASK64
    for index in indices:
        seed = _mix64((seed + GOLDEN_GAMMA * (index + 1)) & _MASK64)
    return seed


def derive_seeds(master_seed: int, indices: np.ndarray) -> np.ndarray:
    """Vectorised derive_seed(master_seed, i) for an array of indices; bit-identical."""
    idx = np.asarray(indices, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(master_seed & _MASK64) + np.uint64(GOLDEN_GAMMA) * (idx + np.uint64(1))
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def random_master_seed() -> int:
    """A fresh 64-bit master seed from OS entropy."""
    return int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0])


# =============================================================================
# INTERVALS
# =============================================================================

def wilson_interval(successes: int, trials: int, z: float = Z_95) -> Tuple[float, float]:
    """
    Wilson score interval for a binomial proportion.

    Behaves at 0 and n successes, unlike the normal approximation. The
    bounds are clamped to bracket the point estimate inside [0, 1].
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if not 0 <= successes <= trials:
        raise ValueError(f"successes must lie in [0, {trials}], got {successes}")

    p_hat = successes / trials
    z2 = z * z
    denominator = 1.0 + z2 / trials
    centre = (p_hat + z2 / (2.0 * trials)) / denominator
    half_width = z * math.sqrt(p_hat * (1.0 - p_hat) / trials + z2 / (4.0 * trials * trials)) / denominator

    low = min(max(0.0, centre - half_width), p_hat)
    high = max(min(1.0, centre + half_width), p_hat)
    return low, high


# =============================================================================
# ESTIMATION
# =============================================================================

def _count_survivors(model: ModelKind, cfg: ProcessConfig, master_seed: int, start: int, stop: int) -> int:
    """Run trials [start, stop) and return how many reached the survival proxy."""
    survived = 0
    for seed in derive_seeds(master_seed, np.arange(start, stop, dtype=np.uint64)):
        if run_trial(model, cfg, np.random.default_rng(int(seed))).survived:
            survived += 1
    return survived


def _blocks(n_trials: int, size: int = _BLOCK) -> List[Tuple[int, int]]:
    return [(lo, min(lo + size, n_trials)) for lo in range(0, n_trials, size)]


def estimate_survival(
    model: ModelKind,
    config: ProcessConfig,
    n_trials: Optional[int] = None,
    master_seed: Optional[int] = None,
    workers: Optional[int] = None,
) -> SurvivalEstimate:
    """
    Estimate P(survival) for one model and configuration.

    Args:
        model: Model selector
        config: Matching DispersionConfig / GlobalConfig / FixedConfig
        n_trials: Independent trials (default from settings)
        master_seed: Seed of the trial streams (default from settings)
        workers: Process pool size; 1 runs in-process

    Returns:
        SurvivalEstimate with a 95% Wilson interval
    """
    from config import settings

    n = settings.default_trials if n_trials is None else int(n_trials)
    seed = settings.master_seed if master_seed is None else int(master_seed)
    pool = settings.workers if workers is None else int(workers)
    if n < 1:
        raise ValueError(f"n_trials must be >= 1, got {n}")

    logger.info(f"🧪 Running {n} {model.value} trials (seed={seed}, workers={pool})")
    blocks = _blocks(n)

    if pool > 1 and len(blocks) > 1:
        with cf.ProcessPoolExecutor(max_workers=pool) as executor:
            futures = [
                executor.submit(_count_survivors, model, config, seed, lo, hi)
                for lo, hi in blocks
            ]
            survived = sum(f.result() for f in futures)
    else:
        survived = sum(_count_survivors(model, config, seed, lo, hi) for lo, hi in blocks)

    low, high = wilson_interval(survived, n)
    estimate = SurvivalEstimate(
        model=model,
        n_trials=n,
        n_survived=survived,
        point=survived / n,
        ci_low=low,
        ci_high=high,
        master_seed=seed,
        population_cap=config.population_cap,
        step_limit=config.step_limit,
        horizon=config.horizon if isinstance(config, FixedConfig) else None,
    )
    logger.info(f"📊 {model.value}: {survived}/{n} survived, 95% CI [{low:.4f}, {high:.4f}]")
    return estimate


# =============================================================================
# SWEEPS
# =============================================================================

def parse_grid_range(text: str) -> List[float]:
    """
    Expand "start:stop:step" into grid values, stop included.

    Values are rounded to 12 decimals so 0.3:1.2:0.1 gives 0.3, 0.4, ... 1.2.

    Raises:
        ValueError: malformed text, non-positive step or empty range
    """
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"range must be start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(part) for part in parts)
    except ValueError:
        raise ValueError(f"range values must be numbers, got {text!r}") from None
    if not all(math.isfinite(v) for v in (start, stop, step)):
        raise ValueError(f"range values must be finite, got {text!r}")
    if step <= 0:
        raise ValueError(f"range step must be > 0, got {text!r}")
    if stop < start:
        raise ValueError(f"empty range {text!r}: stop is below start")
    count = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + i * step, 12) for i in range(count + 1)]


def _process_config(
    model: ModelKind,
    env: EnvironmentLaw,
    step_limit: int,
    population_cap: int,
) -> ProcessConfig:
    if model is ModelKind.DISPERSION:
        return DispersionConfig(env, max_generations=step_limit, population_cap=population_cap)
    return GlobalConfig(env, max_epochs=step_limit, population_cap=population_cap)


def sweep(
    model: ModelKind,
    base_env: EnvironmentLaw,
    parameter: str,
    grid: Sequence[float],
    n_trials: Optional[int] = None,
    master_seed: Optional[int] = None,
    step_limit: Optional[int] = None,
    population_cap: Optional[int] = None,
    workers: Optional[int] = None,
) -> List[SweepRow]:
    """
    Trace survival across one environment parameter.

    Each row carries m and the predicted verdict of the swept model from the
    analytics, plus a survival estimate. Grid values that break a law
    invariant become "Invalid" rows with a diagnostic, in grid order.

    Raises:
        ValueError: fixed model, empty grid or unknown parameter name
    """
    from config import settings

    if model is ModelKind.FIXED:
        raise ValueError("only the dispersion and global models can be swept")
    if not grid:
        raise ValueError("sweep grid is empty")
    name = canonical_parameter(parameter)
    seed = settings.master_seed if master_seed is None else int(master_seed)
    limit = settings.max_generations if step_limit is None else int(step_limit)
    cap = settings.population_cap if population_cap is None else int(population_cap)

    rows: List[SweepRow] = []
    for k, value in enumerate(grid):
        point_seed = derive_seed(seed, k)
        try:
            env = with_parameter(base_env, name, value)
        except LawValidationError as exc:
            logger.warning(f"⚠️ grid value {name}={value} rejected: {exc}")
            rows.append(SweepRow(param=name, value=value, m=None, predicted="Invalid", diagnostic=str(exc)))
            continue

        m = criterion_m(env, rng=np.random.default_rng(point_seed))
        if model is ModelKind.DISPERSION:
            predicted = m.verdict
        else:
            predicted, reason = classify_global(env)
            if predicted is Verdict.NOT_APPLICABLE:
                rows.append(SweepRow(param=name, value=value, m=m.value, predicted=predicted.value, diagnostic=reason))
                continue

        try:
            cfg = _process_config(model, env, limit, cap)
        except ConfigError as exc:
            rows.append(SweepRow(param=name, value=value, m=m.value, predicted="Invalid", diagnostic=str(exc)))
            continue

        estimate = estimate_survival(model, cfg, n_trials, point_seed, workers)
        rows.append(SweepRow(param=name, value=value, m=m.value, predicted=predicted.value, estimate=estimate))

    return rows


# =============================================================================
# MODEL COMPARISON
# =============================================================================

def compare_models(
    env: EnvironmentLaw,
    n_trials: Optional[int] = None,
    master_seed: Optional[int] = None,
    fixed_rate: Optional[float] = None,
    max_generations: Optional[int] = None,
    population_cap: Optional[int] = None,
    horizon: Optional[float] = None,
    workers: Optional[int] = None,
) -> List[ComparisonRow]:
    """
    Dispersion, global and fixed-rate models on the same environment.

    The fixed model runs at rate E(Λ) unless fixed_rate is given. Model k
    (in that order) uses derive_seed(master_seed, k).
    """
    from config import settings

    seed = settings.master_seed if master_seed is None else int(master_seed)
    limit = settings.max_generations if max_generations is None else int(max_generations)
    cap = settings.population_cap if population_cap is None else int(population_cap)
    span = settings.fixed_horizon if horizon is None else float(horizon)
    rows: List[ComparisonRow] = []

    dispersion_seed = derive_seed(seed, 0)
    m = criterion_m(env, rng=np.random.default_rng(dispersion_seed))
    cfg = DispersionConfig(env, max_generations=limit, population_cap=cap)
    rows.append(ComparisonRow(
        model=ModelKind.DISPERSION,
        predicted=m.verdict,
        estimate=estimate_survival(ModelKind.DISPERSION, cfg, n_trials, dispersion_seed, workers),
    ))

    verdict, reason = classify_global(env)
    if verdict is Verdict.NOT_APPLICABLE:
        rows.append(ComparisonRow(model=ModelKind.GLOBAL, predicted=verdict, diagnostic=reason))
    else:
        cfg = GlobalConfig(env, max_epochs=limit, population_cap=cap)
        rows.append(ComparisonRow(
            model=ModelKind.GLOBAL,
            predicted=verdict,
            estimate=estimate_survival(ModelKind.GLOBAL, cfg, n_trials, derive_seed(seed, 1), workers),
        ))

    rate = mean_rate(env.rate_law) if fixed_rate is None else float(fixed_rate)
    cfg = FixedConfig(rate, horizon=span, population_cap=cap)
    rows.append(ComparisonRow(
        model=ModelKind.FIXED,
        predicted=Verdict.SURVIVES if rate > 1.0 else Verdict.DIES,
        estimate=estimate_survival(ModelKind.FIXED, cfg, n_trials, derive_seed(seed, 2), workers),
        rate=rate,
    ))
    return rows
