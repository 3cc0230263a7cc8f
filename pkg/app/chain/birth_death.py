"""
Linear Birth-Death Chain
========================

Exact machinery for the chain in which every individual gives birth at
rate λ and dies at rate 1.

Two independent routes to the same law:

1. Geometric form (fast path). Started from one individual, the population
   at time t is 0 with probability α and otherwise 1 + Geometric, i.e.
   P(n) = (1 - α)(1 - β) β^(n-1) for n >= 1, with mean e^((λ-1)t).
2. Event simulation (oracle and trajectory path). Exact Gillespie
   simulation of births and deaths.

Numerical policy for the geometric form, with r = λ - 1 and x = r t:

    x > 0:          A = -expm1(-x)   α = A / (r + A)         1-β = r e^(-x) / (r + A)
    x < 0:          B = -expm1(x)    α = B / (B + |r| e^x)   1-β = |r| / (B + |r| e^x)
    |x| < 1e-6:     g = 1 + x/2 + x²/6 (= expm1(x)/x)
                    α = t g / (t g + e^x)                    1-β = 1 / (t g + e^x)

Every branch is a ratio of positive terms, so nothing cancels and nothing
overflows for |x| up to 700. β = λα throughout; 1 - β is carried separately
because it underflows relative to 1 once x is large.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

# Switchover to the series form of expm1(x)/x near λ = 1
SERIES_SWITCHOVER = 1e-6

# Single offspring draws saturate here; only reachable when the mean is
# astronomically larger than any population cap
OFFSPRING_CEILING = 2 ** 40

# Largest β strictly below 1
_BETA_MAX = float(np.nextafter(1.0, 0.0))
_TINY = float(np.finfo(float).tiny)

# Gillespie block sizes (events drawn per vectorised step)
_FIRST_BLOCK = 16
_MAX_BLOCK = 1 << 16


# =============================================================================
# EXCEPTIONS
# =============================================================================

class CapReached(Exception):
    """
    Raised when event simulation reaches the population cap.

    Hitting the cap is never a silent truncation: callers decide whether it
    means survival (trials) or a clean end of trace (trajectories). time is
    elapsed since the start of the run.
    """

    def __init__(
        self,
        population: int,
        time: float,
        events: Optional[List["TrajectoryEvent"]] = None,
    ):
        super().__init__(f"population cap reached: {population} individuals at t={time:.6g}")
        self.population = population
        self.time = time
        self.events = events or []


# =============================================================================
# TYPES
# =============================================================================

class EventKind(Enum):
    """What happened at a trajectory record."""
    BIRTH = "birth"
    DEATH = "death"
    COLLAPSE = "collapse"  # dispersion: colonies of one generation collapsed
    SWITCH = "switch"      # global: environment redrawn for everyone


@dataclass(frozen=True)
class TrajectoryEvent:
    """One record of a sample path; delta is +1, -1, or 0 for markers."""
    time: float
    delta: int
    population_after: int
    kind: EventKind


@dataclass(frozen=True)
class OffspringLaw:
    """
    Population at time t of a chain started from one individual.

    P(0) = alpha; P(n) = (1 - alpha)(1 - beta) beta^(n-1) for n >= 1.
    """
    rate: float
    time: float
    alpha: float
    beta: float
    beta_complement: float
    mean: float

    @property
    def survival_probability(self) -> float:
        """P(population > 0 at time t)."""
        return 1.0 - self.alpha

    def pmf(self, n: int) -> float:
        if n < 0:
            return 0.0
        if n == 0:
            return self.alpha
        if self.beta == 0.0:
            return (1.0 - self.alpha) if n == 1 else 0.0
        return (1.0 - self.alpha) * self.beta_complement * self.beta ** (n - 1)

    def pgf(self, s: float) -> float:
        """E[s^N] = α + (1 - α)(1 - β)s / (1 - βs)."""
        return self.alpha + (1.0 - self.alpha) * self.beta_complement * s / (1.0 - self.beta * s)


@dataclass(frozen=True)
class GillespieResult:
    """
    Normal termination of an event simulation (horizon or extinction).

    time is elapsed since the start of the run; peak is the largest
    population seen.
    """
    population: int
    time: float
    reason: str  # "horizon" | "extinct"
    peak: int
    events: Optional[List[TrajectoryEvent]] = None


# =============================================================================
# GEOMETRIC FORM
# =============================================================================

def geometric_form(
    rates: Union[float, np.ndarray], times: Union[float, np.ndarray]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Vectorised (α, β, 1 - β, mean) for arrays of rates and elapsed times.
    """
    lam, t = np.broadcast_arrays(
        np.asarray(rates, dtype=float), np.asarray(times, dtype=float)
    )
    r = lam - 1.0
    x = r * t

    with np.errstate(all="ignore"):
        growth = np.exp(x)

        a_pos = -np.expm1(-x)
        alpha_pos = a_pos / (r + a_pos)
        comp_pos = r * np.exp(-x) / (r + a_pos)

        b_neg = -np.expm1(x)
        denom_neg = b_neg + np.abs(r) * growth
        alpha_neg = b_neg / denom_neg
        comp_neg = np.abs(r) / denom_neg

        g = 1.0 + x / 2.0 + x * x / 6.0
        denom_small = t * g + growth
        alpha_small = t * g / denom_small
        comp_small = 1.0 / denom_small

    small = np.abs(x) < SERIES_SWITCHOVER
    alpha = np.where(small, alpha_small, np.where(x > 0, alpha_pos, alpha_neg))
    comp = np.where(small, comp_small, np.where(x > 0, comp_pos, comp_neg))

    alpha = np.clip(alpha, 0.0, 1.0)
    beta = np.clip(lam * alpha, 0.0, _BETA_MAX)
    comp = np.clip(comp, _TINY, 1.0)
    comp = np.where(beta == 0.0, 1.0, comp)
    return alpha, beta, comp, growth


def transient_law(rate: float, time: float) -> OffspringLaw:
    """Exact law of the population at `time` started from one individual."""
    if rate < 0 or time < 0:
        raise ValueError(f"rate and time must be >= 0, got rate={rate}, time={time}")
    alpha, beta, comp, growth = geometric_form(rate, time)
    return OffspringLaw(
        rate=float(rate),
        time=float(time),
        alpha=float(alpha),
        beta=float(beta),
        beta_complement=float(comp),
        mean=float(growth),
    )


def survival_probability(rate: float, time: float) -> float:
    """P(a colony founded by one individual is alive at `time`) = 1 - α."""
    return transient_law(rate, time).survival_probability


# =============================================================================
# SAMPLING
# =============================================================================

def _geometric_tail(comp: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """1 + Geometric(comp) on {1, 2, ...} by inverse transform, saturating."""
    u = 1.0 - rng.random(comp.shape)  # (0, 1]
    with np.errstate(all="ignore"):
        extra = np.floor(np.log(u) / np.log1p(-comp))
    extra = np.nan_to_num(extra, nan=0.0, posinf=float(OFFSPRING_CEILING))
    return np.minimum(1.0 + extra, float(OFFSPRING_CEILING)).astype(np.int64)


def sample_offspring_batch(
    rates: np.ndarray, times: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """One offspring count per (rate, time) pair."""
    alpha, _, comp, _ = geometric_form(rates, times)
    alpha = np.atleast_1d(alpha)
    comp = np.atleast_1d(comp)
    counts = np.zeros(alpha.shape, dtype=np.int64)
    alive = np.flatnonzero(rng.random(alpha.shape) >= alpha)
    if alive.size:
        counts[alive] = _geometric_tail(comp[alive], rng)
    return counts


def sample_offspring(
    law: OffspringLaw, rng: np.random.Generator, size: Optional[int] = None
) -> Union[int, np.ndarray]:
    """
    Draw from an OffspringLaw: 0 with probability α, else 1 + Geometric(1 - β).

    Returns an int, or an int64 array when `size` is given.
    """
    n = 1 if size is None else size
    counts = np.zeros(n, dtype=np.int64)
    alive = np.flatnonzero(rng.random(n) >= law.alpha)
    if alive.size:
        counts[alive] = _geometric_tail(np.full(alive.size, law.beta_complement), rng)
    return int(counts[0]) if size is None else counts


def sample_population_at(
    rate: float, time: float, n0: int, rng: np.random.Generator
) -> int:
    """
    Population at `time` started from n0 individuals.

    By the branching property this is the sum of n0 independent offspring
    draws: S ~ Binomial(n0, 1 - α) founders survive, and S geometric tails
    sum to S + NegativeBinomial(S, 1 - β).
    """
    if n0 < 1:
        raise ValueError(f"n0 must be >= 1, got {n0}")
    if time == 0:
        return n0
    law = transient_law(rate, time)
    survivors = int(rng.binomial(n0, law.survival_probability))
    if survivors == 0 or law.beta == 0.0:
        return survivors

    expected_extra = survivors * law.beta / law.beta_complement
    if expected_extra > 1e15:
        # negative_binomial's Poisson stage cannot take means this large
        extra = rng.gamma(survivors, law.beta / law.beta_complement)
        return int(min(survivors + extra, 2.0 ** 62))
    return survivors + int(rng.negative_binomial(survivors, law.beta_complement))


# =============================================================================
# EVENT SIMULATION (GILLESPIE)
# =============================================================================

def _build_events(
    times: List[np.ndarray], deltas: List[np.ndarray], pops: List[np.ndarray]
) -> List[TrajectoryEvent]:
    if not times:
        return []
    all_times = np.concatenate(times)
    all_deltas = np.concatenate(deltas)
    all_pops = np.concatenate(pops)
    return [
        TrajectoryEvent(
            time=float(tm),
            delta=int(d),
            population_after=int(p),
            kind=EventKind.BIRTH if d > 0 else EventKind.DEATH,
        )
        for tm, d, p in zip(all_times, all_deltas, all_pops)
    ]


def gillespie_until(
    rate: float,
    horizon: float,
    n0: int,
    cap: int,
    rng: np.random.Generator,
    record: bool = False,
    start_time: float = 0.0,
) -> GillespieResult:
    """
    Exact event simulation until `horizon`, extinction, or the cap.

    The jump chain of the linear chain is an i.i.d. ±1 walk (birth with
    probability λ/(λ+1)) and the wait before each jump is Exp(1)/(n(λ+1))
    for the population n before it, so events are drawn in vectorised
    blocks; this is the same process event-for-event.

    Args:
        rate: birth rate λ (death rate is 1)
        horizon: duration to simulate (may be math.inf)
        n0: initial population
        cap: population at which CapReached is raised
        rng: private random stream
        record: collect TrajectoryEvent records
        start_time: absolute time of the start, added to recorded times

    Returns:
        GillespieResult with reason "horizon" or "extinct"

    Raises:
        CapReached: population reached `cap`
    """
    if n0 < 1:
        raise ValueError(f"n0 must be >= 1, got {n0}")
    if cap < n0:
        raise ValueError(f"cap ({cap}) must be >= n0 ({n0})")
    if rate < 0 or horizon < 0:
        raise ValueError(f"rate and horizon must be >= 0, got rate={rate}, horizon={horizon}")

    rec_times: List[np.ndarray] = []
    rec_deltas: List[np.ndarray] = []
    rec_pops: List[np.ndarray] = []
    peak = n0

    def keep(count: int, times: np.ndarray, steps: np.ndarray, after: np.ndarray) -> None:
        nonlocal peak
        if count == 0:
            return
        peak = max(peak, int(after[:count].max()))
        if record:
            rec_times.append(start_time + times[:count])
            rec_deltas.append(steps[:count])
            rec_pops.append(after[:count])

    def events() -> Optional[List[TrajectoryEvent]]:
        return _build_events(rec_times, rec_deltas, rec_pops) if record else None

    if horizon == 0:
        return GillespieResult(population=n0, time=0.0, reason="horizon", peak=n0, events=events())
    if n0 >= cap:
        raise CapReached(n0, 0.0, events())

    p_birth = rate / (rate + 1.0)
    per_capita = rate + 1.0
    n = n0
    t = 0.0
    block = _FIRST_BLOCK

    while True:
        steps = np.where(rng.random(block) < p_birth, 1, -1).astype(np.int64)
        after = n + np.cumsum(steps)
        before = np.empty(block, dtype=np.int64)
        before[0] = n
        before[1:] = after[:-1]
        waits = rng.standard_exponential(block) / (np.maximum(before, 1) * per_capita)
        times = t + np.cumsum(waits)

        over = np.flatnonzero(times > horizon)
        first_over = int(over[0]) if over.size else block
        hits = np.flatnonzero((after <= 0) | (after >= cap))
        first_hit = int(hits[0]) if hits.size else block

        if first_over < block and first_over <= first_hit:
            keep(first_over, times, steps, after)
            final = int(after[first_over - 1]) if first_over > 0 else n
            return GillespieResult(
                population=final, time=float(horizon), reason="horizon", peak=peak, events=events()
            )

        if first_hit < block:
            keep(first_hit + 1, times, steps, after)
            final = int(after[first_hit])
            stop = float(times[first_hit])
            if final <= 0:
                return GillespieResult(
                    population=0, time=stop, reason="extinct", peak=peak, events=events()
                )
            raise CapReached(final, stop, events())

        keep(block, times, steps, after)
        n = int(after[-1])
        t = float(times[-1])
        block = min(block * 2, _MAX_BLOCK)
