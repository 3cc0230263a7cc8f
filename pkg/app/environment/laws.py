"""
Environment Laws
================

The random environment of a colony (or of a global epoch) is the pair
(λ, τ): a birth rate drawn from the rate law μ and a collapse clock drawn
from the clock law ν.

Rate law variants:   PointMass, TwoPoint, DiscreteRate, UniformInterval
Clock law variants:  Exponential, Deterministic, DiscreteClock

Every variant is an immutable dataclass validated on construction, exposes
its exact mean and an inverse CDF (quantile), and can sample itself from a
numpy Generator. Dependent pairs are built only through the comonotone and
antimonotone inverse-transform couplings.

Textual forms (config files and CLI flags):
    point:2   two_point:0.5,1.5,0.8   discrete:0:0.5,2:0.5   uniform:0,2
    exp:1.5   det:0.6931              discrete:1:0.25,3:0.75
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

# Probabilities must sum to one within this tolerance
PROBABILITY_TOLERANCE = 1e-12


# =============================================================================
# EXCEPTIONS
# =============================================================================

class LawValidationError(ValueError):
    """
    Raised when a law violates its invariants or its text form is malformed.

    The offending text (or parameter description) is kept for diagnostics.
    """

    def __init__(self, message: str, text: str = ""):
        super().__init__(message)
        self.text = text


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise LawValidationError(message)


def _finite(value: float, name: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise LawValidationError(f"{name} must be a number, got {value!r}")
    _require(math.isfinite(value), f"{name} must be finite, got {value}")
    return value


def _canonical_atoms(atoms: Iterable[Tuple[float, float]], kind: str) -> Tuple[Tuple[float, float], ...]:
    """Sort atoms by value and merge duplicates; check the probabilities."""
    merged: dict = {}
    for value, prob in atoms:
        value = _finite(value, f"{kind} value")
        prob = _finite(prob, f"{kind} probability")
        _require(0.0 <= prob <= 1.0, f"{kind} probability {prob} outside [0, 1]")
        merged[value] = merged.get(value, 0.0) + prob
    _require(bool(merged), f"{kind} law needs at least one atom")
    total = math.fsum(merged.values())
    _require(
        abs(total - 1.0) <= PROBABILITY_TOLERANCE,
        f"{kind} probabilities sum to {total!r}, expected 1",
    )
    return tuple(sorted(merged.items()))


class _DiscreteMixin:
    """Shared inverse-CDF machinery for laws given as a list of atoms."""

    def atoms(self) -> Tuple[Tuple[float, float], ...]:
        raise NotImplementedError

    def _charged(self) -> Tuple[Tuple[float, float], ...]:
        return tuple((v, p) for v, p in self.atoms() if p > 0.0)

    def mean(self) -> float:
        return math.fsum(v * p for v, p in self.atoms())

    def quantile(self, u: np.ndarray) -> np.ndarray:
        charged = self._charged()
        values = np.array([v for v, _ in charged], dtype=float)
        cumulative = np.cumsum([p for _, p in charged])
        index = np.searchsorted(cumulative, np.asarray(u, dtype=float), side="left")
        return values[np.minimum(index, len(values) - 1)]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.quantile(rng.random(size))

    def support_min(self) -> float:
        return self._charged()[0][0]

    def support_max(self) -> float:
        return self._charged()[-1][0]

    @property
    def is_degenerate(self) -> bool:
        return len(self._charged()) == 1


# =============================================================================
# RATE LAWS (μ)
# =============================================================================

@dataclass(frozen=True)
class PointMass(_DiscreteMixin):
    """Constant birth rate λ0."""
    rate: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "rate", _finite(self.rate, "rate"))
        _require(self.rate >= 0.0, f"rate must be >= 0, got {self.rate}")

    def atoms(self) -> Tuple[Tuple[float, float], ...]:
        return ((self.rate, 1.0),)


@dataclass(frozen=True)
class TwoPoint(_DiscreteMixin):
    """
    λ1 with probability p, λ2 with probability 1 - p.

    Canonical ordering λ1 <= λ2 is enforced on construction by swapping the
    atoms and replacing p with 1 - p (rounded to 15 decimals so that
    two_point:2,0.5,0.8 reads back as two_point:0.5,2,0.2).
    """
    low: float
    high: float
    p: float

    def __post_init__(self) -> None:
        low = _finite(self.low, "λ1")
        high = _finite(self.high, "λ2")
        p = _finite(self.p, "p")
        _require(low >= 0.0 and high >= 0.0, f"rates must be >= 0, got {low}, {high}")
        _require(0.0 <= p <= 1.0, f"p must lie in [0, 1], got {p}")
        if low > high:
            low, high, p = high, low, round(1.0 - p, 15)
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)
        object.__setattr__(self, "p", p)

    def atoms(self) -> Tuple[Tuple[float, float], ...]:
        if self.low == self.high:
            return ((self.low, 1.0),)
        return ((self.low, self.p), (self.high, round(1.0 - self.p, 15)))

    def mean(self) -> float:
        return self.p * self.low + (1.0 - self.p) * self.high


@dataclass(frozen=True)
class DiscreteRate(_DiscreteMixin):
    """Finitely many rates λ_i with probabilities p_i."""
    points: Tuple[Tuple[float, float], ...]

    def __post_init__(self) -> None:
        points = _canonical_atoms(self.points, "rate")
        _require(all(v >= 0.0 for v, _ in points), "rates must be >= 0")
        object.__setattr__(self, "points", points)

    def atoms(self) -> Tuple[Tuple[float, float], ...]:
        return self.points


@dataclass(frozen=True)
class UniformInterval:
    """Birth rate uniform on [lo, hi]."""
    lo: float
    hi: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", _finite(self.lo, "lo"))
        object.__setattr__(self, "hi", _finite(self.hi, "hi"))
        _require(self.lo >= 0.0, f"lo must be >= 0, got {self.lo}")
        _require(self.lo <= self.hi, f"lo must not exceed hi, got [{self.lo}, {self.hi}]")

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def quantile(self, u: np.ndarray) -> np.ndarray:
        return self.lo + np.asarray(u, dtype=float) * (self.hi - self.lo)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.quantile(rng.random(size))

    def support_min(self) -> float:
        return self.lo

    def support_max(self) -> float:
        return self.hi

    @property
    def is_degenerate(self) -> bool:
        return self.lo == self.hi


RateLaw = Union[PointMass, TwoPoint, DiscreteRate, UniformInterval]


# =============================================================================
# CLOCK LAWS (ν)
# =============================================================================

@dataclass(frozen=True)
class Exponential:
    """Collapse clock with rate a (mean 1/a)."""
    a: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", _finite(self.a, "a"))
        _require(self.a > 0.0, f"clock rate a must be > 0, got {self.a}")

    def mean(self) -> float:
        return 1.0 / self.a

    def quantile(self, u: np.ndarray) -> np.ndarray:
        return -np.log1p(-np.asarray(u, dtype=float)) / self.a

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.exponential(1.0 / self.a, size)

    def support_min(self) -> float:
        return 0.0

    def support_max(self) -> float:
        return math.inf

    @property
    def is_degenerate(self) -> bool:
        return False


@dataclass(frozen=True)
class Deterministic:
    """Collapse after exactly t0."""
    t0: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "t0", _finite(self.t0, "t0"))
        _require(self.t0 > 0.0, f"t0 must be > 0, got {self.t0}")

    def mean(self) -> float:
        return self.t0

    def quantile(self, u: np.ndarray) -> np.ndarray:
        return np.full(np.shape(u), self.t0, dtype=float)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, self.t0, dtype=float)

    def support_min(self) -> float:
        return self.t0

    def support_max(self) -> float:
        return self.t0

    @property
    def is_degenerate(self) -> bool:
        return True


@dataclass(frozen=True)
class DiscreteClock(_DiscreteMixin):
    """Finitely many collapse times t_i with probabilities q_i."""
    points: Tuple[Tuple[float, float], ...]

    def __post_init__(self) -> None:
        points = _canonical_atoms(self.points, "clock")
        _require(all(v > 0.0 for v, _ in points), "clock times must be > 0")
        object.__setattr__(self, "points", points)

    def atoms(self) -> Tuple[Tuple[float, float], ...]:
        return self.points


ClockLaw = Union[Exponential, Deterministic, DiscreteClock]

RATE_LAW_TYPES = (PointMass, TwoPoint, DiscreteRate, UniformInterval)
CLOCK_LAW_TYPES = (Exponential, Deterministic, DiscreteClock)


# =============================================================================
# ENVIRONMENT
# =============================================================================

class Coupling(Enum):
    """Joint structure of (λ, τ)."""
    INDEPENDENT = "independent"
    COMONOTONE = "comonotone"
    ANTIMONOTONE = "antimonotone"


@dataclass(frozen=True)
class EnvironmentLaw:
    """
    The joint law of (Λ, τ).

    Immutable, so one instance can be shared by any number of concurrent
    trial workers; each worker brings its own random stream.
    """
    rate_law: RateLaw
    clock_law: ClockLaw
    coupling: Coupling = Coupling.INDEPENDENT

    def __post_init__(self) -> None:
        _require(isinstance(self.rate_law, RATE_LAW_TYPES), f"not a rate law: {self.rate_law!r}")
        _require(isinstance(self.clock_law, CLOCK_LAW_TYPES), f"not a clock law: {self.clock_law!r}")
        _require(isinstance(self.coupling, Coupling), f"not a coupling: {self.coupling!r}")

    @property
    def is_independent(self) -> bool:
        return self.coupling is Coupling.INDEPENDENT

    def describe(self) -> str:
        return (
            f"mu={format_rate_law(self.rate_law)} nu={format_clock_law(self.clock_law)} "
            f"coupling={self.coupling.value}"
        )


def sample_env_batch(
    law: EnvironmentLaw, rng: np.random.Generator, size: int
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw `size` environment pairs.

    Independent: rates and clocks come from two child streams spawned off
    `rng`, so the draws of one law never depend on the other law.
    Comonotone: one shared uniform through both quantiles. Antimonotone: the
    clock takes u and the rate takes 1 - u, which keeps the exponential
    quantile away from u = 1.
    """
    if law.coupling is Coupling.INDEPENDENT:
        rate_rng, clock_rng = rng.spawn(2)
        rates = law.rate_law.sample(rate_rng, size)
        clocks = law.clock_law.sample(clock_rng, size)
        return np.asarray(rates, dtype=float), np.asarray(clocks, dtype=float)

    u = rng.random(size)
    clocks = law.clock_law.quantile(u)
    if law.coupling is Coupling.COMONOTONE:
        rates = law.rate_law.quantile(u)
    else:
        rates = law.rate_law.quantile(1.0 - u)
    return np.asarray(rates, dtype=float), np.asarray(clocks, dtype=float)


def sample_env(law: EnvironmentLaw, rng: np.random.Generator) -> Tuple[float, float]:
    """One draw of (λ, t)."""
    rates, clocks = sample_env_batch(law, rng, 1)
    return float(rates[0]), float(clocks[0])


def mean_rate(law: RateLaw) -> float:
    """Exact E(Λ)."""
    return float(law.mean())


def mean_clock(law: ClockLaw) -> float:
    """Exact E(τ); finite for every variant."""
    return float(law.mean())


def mean_abs_rate_deviation(law: RateLaw) -> float:
    """Exact E|Λ - 1|."""
    if isinstance(law, UniformInterval):
        lo, hi = law.lo, law.hi
        if lo == hi:
            return abs(lo - 1.0)
        # ∫|x-1|dx over [lo, hi] split at 1
        below = max(0.0, min(hi, 1.0) - lo)
        above = max(0.0, hi - max(lo, 1.0))
        integral = 0.0
        if below > 0:
            integral += below * (1.0 - 0.5 * (lo + min(hi, 1.0)))
        if above > 0:
            integral += above * (0.5 * (max(lo, 1.0) + hi) - 1.0)
        return integral / (hi - lo)
    return math.fsum(abs(v - 1.0) * p for v, p in law.atoms())


# =============================================================================
# TEXT FORMS
# =============================================================================

def format_number(value: float) -> str:
    """Shortest round-trip form, without a trailing '.0'."""
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") else text


def _numbers(body: str, text: str, count: int) -> Sequence[float]:
    parts = [part.strip() for part in body.split(",")]
    if len(parts) != count or any(not part for part in parts):
        raise LawValidationError(
            f"'{text}': expected {count} comma-separated number(s)", text
        )
    try:
        return [float(part) for part in parts]
    except ValueError:
        raise LawValidationError(f"'{text}': non-numeric value", text)


def _atom_list(body: str, text: str) -> Tuple[Tuple[float, float], ...]:
    atoms = []
    for item in body.split(","):
        pieces = item.strip().split(":")
        if len(pieces) != 2:
            raise LawValidationError(f"'{text}': atoms must look like value:prob", text)
        try:
            atoms.append((float(pieces[0]), float(pieces[1])))
        except ValueError:
            raise LawValidationError(f"'{text}': non-numeric atom '{item.strip()}'", text)
    return tuple(atoms)


def _split(text: str) -> Tuple[str, str]:
    if ":" not in text:
        raise LawValidationError(f"'{text}': expected kind:parameters", text)
    kind, body = text.strip().split(":", 1)
    return kind.strip().lower(), body


def parse_rate_law(text: str) -> RateLaw:
    """Parse point:, two_point:, discrete: or uniform: into a RateLaw."""
    kind, body = _split(text)
    try:
        if kind == "point":
            return PointMass(*_numbers(body, text, 1))
        if kind in ("two_point", "twopoint"):
            return TwoPoint(*_numbers(body, text, 3))
        if kind == "discrete":
            return DiscreteRate(_atom_list(body, text))
        if kind == "uniform":
            return UniformInterval(*_numbers(body, text, 2))
    except LawValidationError as e:
        raise LawValidationError(f"invalid rate law '{text}': {e}", text) from e
    raise LawValidationError(
        f"unknown rate law '{kind}' in '{text}' (use point, two_point, discrete, uniform)", text
    )


def parse_clock_law(text: str) -> ClockLaw:
    """Parse exp:, det: or discrete: into a ClockLaw."""
    kind, body = _split(text)
    try:
        if kind in ("exp", "exponential"):
            return Exponential(*_numbers(body, text, 1))
        if kind in ("det", "deterministic"):
            return Deterministic(*_numbers(body, text, 1))
        if kind == "discrete":
            return DiscreteClock(_atom_list(body, text))
    except LawValidationError as e:
        raise LawValidationError(f"invalid clock law '{text}': {e}", text) from e
    raise LawValidationError(
        f"unknown clock law '{kind}' in '{text}' (use exp, det, discrete)", text
    )


def parse_coupling(text: str) -> Coupling:
    try:
        return Coupling(text.strip().lower())
    except ValueError:
        choices = ", ".join(c.value for c in Coupling)
        raise LawValidationError(f"unknown coupling '{text}' (use {choices})", text)


def format_rate_law(law: RateLaw) -> str:
    if isinstance(law, PointMass):
        return f"point:{format_number(law.rate)}"
    if isinstance(law, TwoPoint):
        return f"two_point:{format_number(law.low)},{format_number(law.high)},{format_number(law.p)}"
    if isinstance(law, DiscreteRate):
        return "discrete:" + ",".join(f"{format_number(v)}:{format_number(p)}" for v, p in law.points)
    return f"uniform:{format_number(law.lo)},{format_number(law.hi)}"


def format_clock_law(law: ClockLaw) -> str:
    if isinstance(law, Exponential):
        return f"exp:{format_number(law.a)}"
    if isinstance(law, Deterministic):
        return f"det:{format_number(law.t0)}"
    return "discrete:" + ",".join(f"{format_number(v)}:{format_number(q)}" for v, q in law.points)


# =============================================================================
# PARAMETER SUBSTITUTION (sweeps)
# =============================================================================

SWEEPABLE_PARAMETERS = ("a", "p", "l1", "l2", "t0")

_PARAMETER_ALIASES = {"λ1": "l1", "lambda1": "l1", "λ2": "l2", "lambda2": "l2"}


def canonical_parameter(name: str) -> str:
    key = _PARAMETER_ALIASES.get(name.strip(), name.strip().lower())
    if key not in SWEEPABLE_PARAMETERS:
        raise LawValidationError(
            f"cannot sweep '{name}' (use one of {', '.join(SWEEPABLE_PARAMETERS)})", name
        )
    return key


def with_parameter(env: EnvironmentLaw, name: str, value: float) -> EnvironmentLaw:
    """
    Return env with one named parameter replaced.

    a needs an exponential clock, t0 a deterministic clock; p, l1 and l2
    need a two-point rate law. Raises LawValidationError otherwise, or when
    the new value breaks a law invariant.
    """
    key = canonical_parameter(name)
    rate, clock = env.rate_law, env.clock_law

    if key == "a":
        _require(isinstance(clock, Exponential), "parameter 'a' needs an exponential clock (exp:a)")
        return replace(env, clock_law=Exponential(value))
    if key == "t0":
        _require(isinstance(clock, Deterministic), "parameter 't0' needs a deterministic clock (det:t0)")
        return replace(env, clock_law=Deterministic(value))

    _require(isinstance(rate, TwoPoint), f"parameter '{key}' needs a two-point rate law")
    if key == "p":
        return replace(env, rate_law=TwoPoint(rate.low, rate.high, value))
    if key == "l1":
        return replace(env, rate_law=TwoPoint(value, rate.high, rate.p))
    return replace(env, rate_law=TwoPoint(rate.low, value, rate.p))
