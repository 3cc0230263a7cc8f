"""
Population Process Runners
==========================

The three processes whose survival the toolkit compares:

1. Dispersion: simulated generation by generation as the embedded
   Galton-Watson process V_n. Each individual of generation n founds a
   colony with its own (λ, τ); the colony's population at its collapse time
   is that individual's offspring count.
2. Global: simulated epoch by epoch as Z_k = X_{T_k}. One (λ, τ) pair per
   epoch is shared by the whole population.
3. Fixed: the classical chain with a constant birth rate, by event
   simulation up to a time horizon.

Survival proxy: a trial counts as SurvivedToCap when the population reaches
population_cap, or is still alive after max_generations / max_epochs (or at
the horizon for the fixed model). Every trial terminates.

Clock laws are general here (any ClockLaw), although the construction of the
dispersion process is often written with exponential clocks.
"""

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from app.chain.birth_death import (
    CapReached,
    EventKind,
    TrajectoryEvent,
    gillespie_until,
    sample_offspring_batch,
    sample_population_at,
)
from app.core.types import ModelKind, TrialOutcome, TrialVerdict
from app.environment.laws import EnvironmentLaw, sample_env, sample_env_batch

logger = logging.getLogger(__name__)

# Global-model populations at or above this are carried on the log scale
LOG_SCALE_THRESHOLD = 10 ** 12

# Largest population_cap the global model accepts (float range)
MAX_GLOBAL_CAP = 10 ** 300

_LOG_THRESHOLD = math.log(LOG_SCALE_THRESHOLD)
_LOG_INT_CEILING = math.log(2 ** 62)

# Environment pairs drawn per block by the global trial
_FIRST_ENV_BLOCK = 16
_MAX_ENV_BLOCK = 4096


# =============================================================================
# EXCEPTIONS
# =============================================================================

class ConfigError(ValueError):
    """Raised when a process configuration violates its invariants."""
    pass


# =============================================================================
# CONFIGURATION
# =============================================================================

@dataclass(frozen=True)
class DispersionConfig:
    """Dispersion model: per-colony environments."""
    env: EnvironmentLaw
    max_generations: int = 100
    population_cap: int = 100_000

    def __post_init__(self) -> None:
        if self.max_generations < 1 or self.population_cap < 1:
            raise ConfigError("max_generations and population_cap must be >= 1")

    @property
    def step_limit(self) -> int:
        return self.max_generations


@dataclass(frozen=True)
class GlobalConfig:
    """Global model: one environment per epoch for the whole population."""
    env: EnvironmentLaw
    max_epochs: int = 100
    population_cap: int = 100_000

    def __post_init__(self) -> None:
        if not self.env.is_independent:
            raise ConfigError(
                "global model requires independent birth rates and clocks "
                f"(got coupling={self.env.coupling.value})"
            )
        if self.max_epochs < 1 or self.population_cap < 1:
            raise ConfigError("max_epochs and population_cap must be >= 1")
        if self.population_cap > MAX_GLOBAL_CAP:
            raise ConfigError("population_cap must be <= 1e300")

    @property
    def step_limit(self) -> int:
        return self.max_epochs


@dataclass(frozen=True)
class FixedConfig:
    """Classical chain with constant birth rate, run up to `horizon`."""
    rate: float
    horizon: float = 200.0
    population_cap: int = 100_000

    def __post_init__(self) -> None:
        if not (self.rate >= 0 and math.isfinite(self.rate)):
            raise ConfigError(f"rate must be a finite number >= 0, got {self.rate}")
        if not self.horizon > 0:
            raise ConfigError(f"horizon must be > 0, got {self.horizon}")
        if self.population_cap < 1:
            raise ConfigError("population_cap must be >= 1")

    @property
    def step_limit(self) -> None:
        return None


ProcessConfig = Union[DispersionConfig, GlobalConfig, FixedConfig]

CONFIG_TYPES = {
    ModelKind.DISPERSION: DispersionConfig,
    ModelKind.GLOBAL: GlobalConfig,
    ModelKind.FIXED: FixedConfig,
}


def _extinct(step: int, peak: int, time: float = None) -> TrialOutcome:
    return TrialOutcome(
        verdict=TrialVerdict.EXTINCT, stop_step=step, stop_population=0,
        peak_population=peak, stop_time=time,
    )


def _survived(step: int, population: int, peak: int, time: float = None) -> TrialOutcome:
    return TrialOutcome(
        verdict=TrialVerdict.SURVIVED_TO_CAP, stop_step=step, stop_population=population,
        peak_population=peak, stop_time=time,
    )


# =============================================================================
# TRIALS
# =============================================================================

def run_dispersion_trial(cfg: DispersionConfig, rng: np.random.Generator) -> TrialOutcome:
    """
    One lineage of the dispersion model, by generations.

    V_0 = 1. Given V_n = j, each of the j founders draws its own (λ, t) and
    an offspring count from the transient law; V_{n+1} is the sum. Single
    counts are clipped at the cap before summing (any such count already
    ends the trial).
    """
    population = 1
    peak = 1
    if population >= cfg.population_cap:
        return _survived(0, population, peak)

    for generation in range(1, cfg.max_generations + 1):
        rates, clocks = sample_env_batch(cfg.env, rng, population)
        counts = sample_offspring_batch(rates, clocks, rng)
        population = int(np.minimum(counts, cfg.population_cap).sum())
        peak = max(peak, population)
        if population == 0:
            return _extinct(generation, peak)
        if population >= cfg.population_cap:
            return _survived(generation, population, peak)

    return _survived(cfg.max_generations, population, peak)


def _environment_stream(env: EnvironmentLaw, rng: np.random.Generator) -> Iterator[Tuple[float, float]]:
    """Endless (λ, τ) pairs, drawn in doubling blocks."""
    block = _FIRST_ENV_BLOCK
    while True:
        rates, clocks = sample_env_batch(env, rng, block)
        yield from zip(rates.tolist(), clocks.tolist())
        block = min(block * 2, _MAX_ENV_BLOCK)


def _from_log(log_size: float) -> int:
    return int(math.exp(log_size))


def run_global_trial(cfg: GlobalConfig, rng: np.random.Generator) -> TrialOutcome:
    """
    One lineage of the global model, by epochs.

    Z_0 = 1. For each epoch one shared (λ_k, τ_{k+1}) is drawn and
    Z_{k+1} is the population at τ_{k+1} of a chain started from Z_k.

    From LOG_SCALE_THRESHOLD individuals on, Z is carried as ln Z and moves
    by exactly (λ - 1)τ per epoch, as long as the result stays at or above
    the threshold (relative fluctuations there are below 1e-6). An epoch
    that would end under the threshold is sampled exactly, from at most
    2^62 individuals. Only caps above the threshold reach this path.
    """
    population = 1
    peak = 1
    if population >= cfg.population_cap:
        return _survived(0, population, peak)

    log_cap = math.log(cfg.population_cap)
    log_size: Optional[float] = None
    environments = _environment_stream(cfg.env, rng)

    for epoch in range(1, cfg.max_epochs + 1):
        rate, clock = next(environments)
        if log_size is not None:
            moved = log_size + (rate - 1.0) * clock
            if moved >= _LOG_THRESHOLD:
                log_size = moved
                if log_size >= log_cap:
                    population = max(_from_log(log_size), cfg.population_cap)
                    return _survived(epoch, population, max(peak, population))
                peak = max(peak, _from_log(log_size))
                continue
            population = _from_log(min(log_size, _LOG_INT_CEILING))
            log_size = None

        population = sample_population_at(rate, clock, population, rng)
        peak = max(peak, population)
        if population == 0:
            return _extinct(epoch, peak)
        if population >= cfg.population_cap:
            return _survived(epoch, population, peak)
        if population >= LOG_SCALE_THRESHOLD:
            log_size = math.log(population)

    if log_size is not None:
        population = _from_log(log_size)
    return _survived(cfg.max_epochs, population, peak)


def run_fixed_trial(cfg: FixedConfig, rng: np.random.Generator) -> TrialOutcome:
    """Classical chain from one individual: survives iff capped or alive at the horizon."""
    if cfg.population_cap <= 1:
        return _survived(0, 1, 1, time=0.0)
    try:
        result = gillespie_until(cfg.rate, cfg.horizon, 1, cfg.population_cap, rng)
    except CapReached as cap:
        return _survived(0, cap.population, cap.population, time=cap.time)
    if result.population == 0:
        return _extinct(0, result.peak, time=result.time)
    return _survived(0, result.population, result.peak, time=result.time)


_TRIAL_RUNNERS = {
    ModelKind.DISPERSION: run_dispersion_trial,
    ModelKind.GLOBAL: run_global_trial,
    ModelKind.FIXED: run_fixed_trial,
}


def run_trial(model: ModelKind, cfg: ProcessConfig, rng: np.random.Generator) -> TrialOutcome:
    """Dispatch one trial by model selector."""
    expected = CONFIG_TYPES[model]
    if not isinstance(cfg, expected):
        raise ConfigError(f"{model.value} model needs {expected.__name__}, got {type(cfg).__name__}")
    return _TRIAL_RUNNERS[model](cfg, rng)


# =============================================================================
# TRAJECTORIES
# =============================================================================

@dataclass
class Trajectory:
    """
    A sample path in absolute time.

    events excludes the initial record (time 0, population
    initial_population). terminated_by is one of "extinct", "cap",
    "horizon" or "step_limit". generation_sizes holds V_0, V_1, ... for the
    dispersion model and Z_0, Z_1, ... for the global model.
    """
    model: ModelKind
    initial_population: int = 1
    events: List[TrajectoryEvent] = field(default_factory=list)
    terminated_by: str = "step_limit"
    generation_sizes: List[int] = field(default_factory=lambda: [1])

    @property
    def final_population(self) -> int:
        return self.events[-1].population_after if self.events else self.initial_population


def _fixed_trajectory(cfg: FixedConfig, rng: np.random.Generator, horizon: float) -> Trajectory:
    trace = Trajectory(model=ModelKind.FIXED)
    span = min(cfg.horizon, horizon)
    try:
        result = gillespie_until(cfg.rate, span, 1, max(cfg.population_cap, 1), rng, record=True)
    except CapReached as cap:
        trace.events = cap.events
        trace.terminated_by = "cap"
        return trace
    trace.events = result.events or []
    trace.terminated_by = result.reason
    return trace


def _global_trajectory(cfg: GlobalConfig, rng: np.random.Generator, horizon: float) -> Trajectory:
    trace = Trajectory(model=ModelKind.GLOBAL)
    population = 1
    clock_time = 0.0

    for _ in range(cfg.max_epochs):
        if clock_time >= horizon:
            trace.terminated_by = "horizon"
            return trace
        rate, tau = sample_env(cfg.env, rng)
        span = min(tau, horizon - clock_time)
        try:
            result = gillespie_until(
                rate, span, population, max(cfg.population_cap, population), rng,
                record=True, start_time=clock_time,
            )
        except CapReached as cap:
            trace.events.extend(cap.events)
            trace.terminated_by = "cap"
            return trace

        trace.events.extend(result.events or [])
        population = result.population
        if population == 0:
            trace.terminated_by = "extinct"
            return trace
        clock_time += span
        if span < tau:
            trace.terminated_by = "horizon"
            return trace
        trace.events.append(TrajectoryEvent(clock_time, 0, population, EventKind.SWITCH))
        trace.generation_sizes.append(population)

    trace.terminated_by = "step_limit"
    return trace


def _dispersion_trajectory(cfg: DispersionConfig, rng: np.random.Generator, horizon: float) -> Trajectory:
    """
    Colony-by-colony event simulation in absolute time.

    Each colony runs from its founding time for its own τ; its survivors
    found new colonies at that collapse time. Colonies are simulated in
    order of founding time, so every record before the next founding time
    is final. The running total over final records is the population, and
    the trace stops at the first record that brings it to population_cap.
    generation_sizes[n] counts the founders of generation n.
    """
    trace = Trajectory(model=ModelKind.DISPERSION)
    cap = cfg.population_cap
    order = itertools.count()
    colonies: List[Tuple[float, int, int]] = [(0.0, next(order), 0)]  # (start, seq, generation)
    pending: List[Tuple[float, int, TrajectoryEvent]] = []
    sizes: Dict[int, int] = {0: 1}
    population = trace.initial_population
    capped_at = math.inf
    alive_at_horizon = False
    step_limited = False

    def push(events: List[TrajectoryEvent]) -> None:
        for event in events:
            heapq.heappush(pending, (event.time, next(order), event))

    def settle(until: float) -> bool:
        """Append final records before `until`; True once the cap is reached."""
        nonlocal population
        while pending and pending[0][0] < until:
            _, _, event = heapq.heappop(pending)
            population += event.delta
            trace.events.append(TrajectoryEvent(event.time, event.delta, population, event.kind))
            if population >= cap:
                return True
        return False

    def finish(reason: str) -> Trajectory:
        trace.terminated_by = reason
        trace.generation_sizes = [sizes.get(n, 0) for n in range(max(sizes) + 1)]
        return trace

    if population >= cap:
        return finish("cap")

    while colonies:
        start, _, generation = heapq.heappop(colonies)
        if settle(start):
            return finish("cap")
        if start >= capped_at:
            break
        if start >= horizon:
            alive_at_horizon = True
            continue
        if generation >= cfg.max_generations:
            step_limited = True
            continue

        rate, tau = sample_env(cfg.env, rng)
        span = min(tau, horizon - start)
        try:
            result = gillespie_until(rate, span, 1, cap, rng, record=True, start_time=start)
        except CapReached as hit:
            # the running total reaches the cap no later than this colony does
            push(hit.events)
            capped_at = min(capped_at, start + hit.time)
            continue

        push(result.events or [])
        if span < tau:
            alive_at_horizon = alive_at_horizon or result.population > 0
            continue
        push([TrajectoryEvent(start + tau, 0, 0, EventKind.COLLAPSE)])
        if result.population:
            sizes[generation + 1] = sizes.get(generation + 1, 0) + result.population
            for _ in range(result.population):
                heapq.heappush(colonies, (start + tau, next(order), generation + 1))

    if settle(math.inf):
        return finish("cap")
    if step_limited:
        return finish("step_limit")
    return finish("horizon" if alive_at_horizon else "extinct")


def run_trajectory(
    model: ModelKind,
    cfg: ProcessConfig,
    rng: np.random.Generator,
    horizon: float = math.inf,
) -> Trajectory:
    """
    Full event-driven sample path of one process.

    Births and deaths are interleaved by absolute time with environment
    switch records (global) or collapse records (dispersion). Reaching the
    population cap ends the trace cleanly with terminated_by = "cap".
    """
    if horizon < 0:
        raise ConfigError(f"horizon must be >= 0, got {horizon}")
    expected = CONFIG_TYPES[model]
    if not isinstance(cfg, expected):
        raise ConfigError(f"{model.value} model needs {expected.__name__}, got {type(cfg).__name__}")

    if horizon == 0:
        return Trajectory(model=model, terminated_by="horizon")
    if model is ModelKind.FIXED:
        trace = _fixed_trajectory(cfg, rng, horizon)
    elif model is ModelKind.GLOBAL:
        trace = _global_trajectory(cfg, rng, horizon)
    else:
        trace = _dispersion_trajectory(cfg, rng, horizon)

    logger.debug(
        f"📈 {model.value} trajectory: {len(trace.events)} records, "
        f"terminated_by={trace.terminated_by}"
    )
    return trace
