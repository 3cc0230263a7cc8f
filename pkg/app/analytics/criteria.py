"""
Survival Criteria
=================

Analytic side of the toolkit. For an environment law (μ, ν, coupling):

- Dispersion model survives iff m = E[exp((Λ-1)τ)] > 1 (m = 1 dies).
- Global model survives iff E(Λ) > 1, under independent (Λ, τ).
- Jensen: m >= exp(E(Λ-1)E(τ)) for independent laws, with strict inequality
  unless (Λ-1)τ is constant. So at E(Λ) = 1 a truly random environment
  separates the two models.

m is computed by closed form, by adaptive quadrature or by Monte Carlo.
Divergence (m = +inf) is always decided from the support of the laws before
any numerics run.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import integrate

from app.chain.birth_death import sample_offspring_batch
from app.core.types import CriterionReport, Verdict
from app.environment.laws import (
    Coupling,
    Deterministic,
    EnvironmentLaw,
    Exponential,
    TwoPoint,
    UniformInterval,
    mean_abs_rate_deviation,
    mean_clock,
    mean_rate,
    sample_env_batch,
)

logger = logging.getLogger(__name__)

METHODS = ("auto", "closed_form", "quadrature", "monte_carlo")

# Largest x with exp(x) representable as a double
_LOG_MAX = math.log(np.finfo(float).max)

_MC_CHUNK = 1 << 20

CRITICAL_TOLERANCE = 1e-12


# =============================================================================
# EXCEPTIONS
# =============================================================================

class CriterionMethodError(ValueError):
    """Raised when a computation method does not apply to the environment."""

    def __init__(self, method: str, reason: str):
        super().__init__(f"method {method!r} not applicable: {reason}")
        self.method = method
        self.reason = reason


# =============================================================================
# TYPES
# =============================================================================

@dataclass(frozen=True)
class MValue:
    """Offspring mean m with the method that produced it."""
    value: float
    method: str
    std_error: Optional[float] = None
    inconclusive_sigma: float = 3.0

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)

    @property
    def verdict(self) -> Verdict:
        """Survives iff m > 1. Monte Carlo refuses a verdict within k standard errors of 1."""
        if (
            self.method == "monte_carlo"
            and not self.is_infinite
            and self.std_error is not None
            and abs(self.value - 1.0) < self.inconclusive_sigma * self.std_error
        ):
            return Verdict.INCONCLUSIVE
        return Verdict.SURVIVES if self.value > 1.0 else Verdict.DIES


@dataclass(frozen=True)
class ExtinctionEstimate:
    """Extinction probability of the embedded Galton-Watson process."""
    q: float
    std_error: float
    iterations: int
    empirical_mean: float

    @property
    def survival(self) -> float:
        return 1.0 - self.q


@dataclass(frozen=True)
class IntegrabilityCheck:
    """
    Quantities behind the global-model criterion.

    The conditional offspring mean over one epoch is b = exp((Λ-1)τ), so
    E ln b = E(Λ-1)E(τ). The survival chance of one epoch is 1-α with
    -ln(1-α) <= τ, bounding E|ln(1-α)| by E(τ).
    """
    log_mean: float
    abs_log_mean: float
    log_survival_bound: float

    @property
    def integrable(self) -> bool:
        return all(
            math.isfinite(v) for v in (self.log_mean, self.abs_log_mean, self.log_survival_bound)
        )


class TwoPointRegime(str, Enum):
    """Case analysis of μ = TwoPoint(λ1, λ2, p) with ν = Exponential(a)."""
    SUBCRITICAL_BOTH = "subcritical_both"
    SUPERCRITICAL_BOTH = "supercritical_both"
    INFINITE_MEAN = "infinite_mean"
    MIXED_SUPERCRITICAL_MEAN = "mixed_supercritical_mean"
    MIXED_CRITICAL_MEAN = "mixed_critical_mean"
    MIXED_SUBCRITICAL_MEAN = "mixed_subcritical_mean"


# =============================================================================
# HELPERS
# =============================================================================

def _exp(x: float) -> float:
    """exp that reports values beyond the double range as inf."""
    return math.inf if x > _LOG_MAX else math.exp(x)


def _uniform_det_mean(lo: float, hi: float, t: float) -> float:
    """(e^{(hi-1)t} - e^{(lo-1)t}) / ((hi-lo)t), evaluated in log space."""
    w = (hi - lo) * t
    if w == 0.0:
        return _exp((lo - 1.0) * t)
    # log(expm1(w)/w) = w + log(-expm1(-w)) - log(w)
    return _exp((lo - 1.0) * t + w + math.log(-math.expm1(-w)) - math.log(w))


def _require_independent(env: EnvironmentLaw, method: str) -> None:
    if not env.is_independent:
        raise CriterionMethodError(
            method, f"needs independent rates and clocks (coupling={env.coupling.value})"
        )


def m_diverges(env: EnvironmentLaw) -> bool:
    """
    True iff m = +inf.

    Only an exponential clock can make m infinite: the integrand behaves
    like (1-u)^{-(λ-1)/a} in the clock's upper tail, where λ is the rate
    paired with that tail (the top of μ's support, or the bottom under an
    antimonotone coupling).
    """
    clock = env.clock_law
    if not isinstance(clock, Exponential):
        return False
    if env.coupling is Coupling.ANTIMONOTONE:
        paired = env.rate_law.support_min()
    else:
        paired = env.rate_law.support_max()
    return paired >= clock.a + 1.0


def _rate_atoms(env: EnvironmentLaw):
    rate = env.rate_law
    if isinstance(rate, UniformInterval):
        return None
    return [(v, p) for v, p in rate.atoms() if p > 0.0]


# =============================================================================
# CRITERION m
# =============================================================================

def _clock_mean_given_rate(clock, lam: float) -> float:
    """E_ν[exp((λ-1)τ)] for a fixed rate λ; finite divergence already excluded."""
    if isinstance(clock, Exponential):
        return clock.a / (clock.a + 1.0 - lam)
    if isinstance(clock, Deterministic):
        return _exp((lam - 1.0) * clock.t0)
    return math.fsum(q * _exp((lam - 1.0) * t) for t, q in clock.atoms() if q > 0.0)


def _closed_form(env: EnvironmentLaw) -> float:
    clock = env.clock_law
    rate = env.rate_law
    if isinstance(rate, UniformInterval) and not rate.is_degenerate:
        lo, hi = rate.lo, rate.hi
        if isinstance(clock, Exponential):
            a = clock.a
            return a / (hi - lo) * math.log((a + 1.0 - lo) / (a + 1.0 - hi))
        if isinstance(clock, Deterministic):
            return _uniform_det_mean(lo, hi, clock.t0)
        return math.fsum(q * _uniform_det_mean(lo, hi, t) for t, q in clock.atoms() if q > 0.0)
    if isinstance(rate, UniformInterval):
        return _clock_mean_given_rate(clock, rate.lo)
    return math.fsum(p * _clock_mean_given_rate(clock, lam) for lam, p in _rate_atoms(env))


def _quad(func: Callable[[float], float], lo: float, hi: float, abs_tol: float) -> float:
    value, _ = integrate.quad(func, lo, hi, epsabs=abs_tol, epsrel=1e-12, limit=200)
    return value


def _quadrature_given_rate(clock, lam: float, abs_tol: float) -> float:
    if isinstance(clock, Exponential):
        a = clock.a
        return _quad(lambda t: a * math.exp((lam - 1.0 - a) * t), 0.0, math.inf, abs_tol)
    # Point-mass clocks carry no density to integrate.
    return _clock_mean_given_rate(clock, lam)


def _quadrature(env: EnvironmentLaw, abs_tol: float) -> float:
    clock = env.clock_law
    rate = env.rate_law
    if isinstance(rate, UniformInterval) and not rate.is_degenerate:
        width = rate.hi - rate.lo
        return _quad(
            lambda lam: _quadrature_given_rate(clock, lam, abs_tol) / width,
            rate.lo, rate.hi, abs_tol,
        )
    if isinstance(rate, UniformInterval):
        return _quadrature_given_rate(clock, rate.lo, abs_tol)
    return math.fsum(p * _quadrature_given_rate(clock, lam, abs_tol) for lam, p in _rate_atoms(env))


def _monte_carlo(env: EnvironmentLaw, n_samples: int, rng: np.random.Generator) -> Tuple[float, float]:
    """Sample mean and standard error of exp((λ-1)t), merged chunk by chunk."""
    count = 0
    mean = 0.0
    m2 = 0.0
    remaining = n_samples
    with np.errstate(over="ignore"):
        while remaining > 0:
            size = min(remaining, _MC_CHUNK)
            rates, clocks = sample_env_batch(env, rng, size)
            values = np.exp((rates - 1.0) * clocks)
            chunk_mean = float(values.mean())
            chunk_m2 = float(((values - chunk_mean) ** 2).sum())
            total = count + size
            delta = chunk_mean - mean
            mean += delta * size / total
            m2 += chunk_m2 + delta * delta * count * size / total
            count = total
            remaining -= size
    if count < 2:
        return mean, math.inf
    return mean, math.sqrt(m2 / (count - 1) / count)


def criterion_m(
    env: EnvironmentLaw,
    method: str = "auto",
    n_samples: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    abs_tol: Optional[float] = None,
) -> MValue:
    """
    Compute m = E[exp((Λ-1)τ)].

    Args:
        env: Environment law
        method: auto | closed_form | quadrature | monte_carlo
        n_samples: Monte Carlo draws (default from settings)
        rng: Monte Carlo stream (default seeded from settings)
        abs_tol: quadrature absolute tolerance (default from settings)

    Returns:
        MValue; value is +inf when m diverges

    Raises:
        CriterionMethodError: closed_form or quadrature on a dependent coupling
    """
    from config import settings

    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose one of {', '.join(METHODS)}")
    if method == "auto":
        method = "closed_form" if env.is_independent else "monte_carlo"
    if method in ("closed_form", "quadrature"):
        _require_independent(env, method)

    if m_diverges(env):
        logger.debug(f"♾️ m diverges for {env.describe()}")
        return MValue(math.inf, method, 0.0 if method == "monte_carlo" else None)

    if method == "closed_form":
        return MValue(_closed_form(env), method)
    if method == "quadrature":
        tol = settings.quad_abs_tol if abs_tol is None else abs_tol
        return MValue(_quadrature(env, tol), method)

    n = settings.mc_samples if n_samples is None else int(n_samples)
    if n < 1:
        raise ValueError(f"n_samples must be >= 1, got {n}")
    if rng is None:
        rng = np.random.default_rng(settings.master_seed)
    value, std_error = _monte_carlo(env, n, rng)
    logger.debug(f"🎲 Monte Carlo m = {value} ± {std_error} over {n} draws")
    return MValue(value, method, std_error, settings.inconclusive_sigma)


# =============================================================================
# CRITICAL CLOCK RATE AND REGIMES
# =============================================================================

def critical_a(lambda1: float, lambda2: float, p: float) -> Optional[float]:
    """
    Critical exponential clock rate for μ = TwoPoint(λ1, λ2, p).

    With E(Λ) < 1 the dispersion model survives iff a < a_c where
    a_c = (1-λ1)(1-λ2)/(E(Λ)-1). Returns None when E(Λ) >= 1, in which case
    it survives for every a > 0.

    Raises:
        ValueError: unless 0 <= λ1 <= 1 < λ2 and 0 < p < 1
    """
    if not (0.0 <= lambda1 <= 1.0 < lambda2):
        raise ValueError(f"critical_a needs 0 <= λ1 <= 1 < λ2, got λ1={lambda1}, λ2={lambda2}")
    if not (0.0 < p < 1.0):
        raise ValueError(f"critical_a needs 0 < p < 1, got p={p}")
    expected = p * lambda1 + (1.0 - p) * lambda2
    if expected >= 1.0:
        return None
    return (1.0 - lambda1) * (1.0 - lambda2) / (expected - 1.0)


def two_point_regime(lambda1: float, lambda2: float, p: float, a: float) -> TwoPointRegime:
    """Which branch of the two-point / exponential-clock case analysis applies."""
    low, high = min(lambda1, lambda2), max(lambda1, lambda2)
    if lambda1 > lambda2:
        p = 1.0 - p
    if high <= 1.0:
        return TwoPointRegime.SUBCRITICAL_BOTH
    if low > 1.0:
        return TwoPointRegime.SUPERCRITICAL_BOTH
    if high >= a + 1.0:
        return TwoPointRegime.INFINITE_MEAN
    expected = p * low + (1.0 - p) * high
    if abs(expected - 1.0) <= CRITICAL_TOLERANCE:
        return TwoPointRegime.MIXED_CRITICAL_MEAN
    if expected > 1.0:
        return TwoPointRegime.MIXED_SUPERCRITICAL_MEAN
    return TwoPointRegime.MIXED_SUBCRITICAL_MEAN


# =============================================================================
# GLOBAL MODEL
# =============================================================================

def smith_wilkinson_check(env: EnvironmentLaw) -> IntegrabilityCheck:
    """Integrability quantities for the global model (independent laws only)."""
    _require_independent(env, "smith_wilkinson_check")
    e_tau = mean_clock(env.clock_law)
    return IntegrabilityCheck(
        log_mean=(mean_rate(env.rate_law) - 1.0) * e_tau,
        abs_log_mean=mean_abs_rate_deviation(env.rate_law) * e_tau,
        log_survival_bound=e_tau,
    )


def classify_global(env: EnvironmentLaw) -> Tuple[Verdict, Optional[str]]:
    """
    Verdict for the global model: Survives iff E(Λ) > 1.

    Returns:
        (verdict, reason); reason is set only for NotApplicable
    """
    if not env.is_independent:
        return Verdict.NOT_APPLICABLE, f"requires independent coupling, got {env.coupling.value}"
    check = smith_wilkinson_check(env)
    if not check.integrable:
        return Verdict.NOT_APPLICABLE, "integrability conditions fail"
    return (Verdict.SURVIVES if mean_rate(env.rate_law) > 1.0 else Verdict.DIES), None


def jensen_lower_bound(env: EnvironmentLaw) -> float:
    """exp(E(Λ-1)E(τ)), a lower bound on m for independent laws."""
    _require_independent(env, "jensen_lower_bound")
    return _exp(smith_wilkinson_check(env).log_mean)


# =============================================================================
# EXTINCTION PROBABILITY
# =============================================================================

def _pgf_fixed_point(
    values: np.ndarray, probs: np.ndarray, tolerance: float, max_iterations: int
) -> Tuple[float, int]:
    """Smallest fixed point of f(s) = Σ p_k s^k on [0, 1], iterating from 0."""
    q = 0.0
    for iteration in range(1, max_iterations + 1):
        nxt = float(np.dot(probs, np.power(q, values)))
        if abs(nxt - q) < tolerance:
            return nxt, iteration
        q = nxt
    logger.warning(f"⚠️ pgf iteration hit the cap of {max_iterations} at q={q}")
    return q, max_iterations


def gw_extinction_prob(
    env: EnvironmentLaw,
    n_samples: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    tolerance: Optional[float] = None,
    max_iterations: Optional[int] = None,
    bootstrap_replicates: Optional[int] = None,
) -> ExtinctionEstimate:
    """
    Extinction probability of the dispersion model's generation process.

    Draws offspring counts of V_1 (each with its own environment), builds
    the empirical pgf and iterates q <- f(q) from 0. The standard error comes
    from a multinomial bootstrap of the empirical offspring law.

    q = 1 whenever m <= 1. For independent laws that is decided from the
    analytic m; for dependent couplings the empirical mean must clear 1 by
    inconclusive_sigma standard errors before a root below 1 is reported.

    Raises:
        ValueError: n_samples below 10^4
    """
    from config import settings

    n = settings.gw_samples if n_samples is None else int(n_samples)
    if n < 10_000:
        raise ValueError(f"n_samples must be >= 10000, got {n}")
    tol = settings.gw_tolerance if tolerance is None else tolerance
    cap = settings.gw_max_iterations if max_iterations is None else int(max_iterations)
    replicates = settings.bootstrap_replicates if bootstrap_replicates is None else int(bootstrap_replicates)
    if rng is None:
        rng = np.random.default_rng(settings.master_seed)

    rates, clocks = sample_env_batch(env, rng, n)
    counts = sample_offspring_batch(rates, clocks, rng)
    values, freq = np.unique(counts, return_counts=True)
    values = values.astype(float)
    probs = freq / n
    empirical_mean = float(np.dot(values, probs))
    certain = ExtinctionEstimate(q=1.0, std_error=0.0, iterations=0, empirical_mean=empirical_mean)

    if env.is_independent:
        m = criterion_m(env).value
        if m <= 1.0:
            logger.info(f"💀 m = {m:.6g} <= 1, q = 1")
            return certain
    else:
        mean_se = float(counts.std(ddof=1)) / math.sqrt(n)
        if empirical_mean <= 1.0 + settings.inconclusive_sigma * mean_se:
            logger.info(
                f"💀 empirical offspring mean {empirical_mean:.6g} ± {mean_se:.2g} "
                f"not clear of 1, q = 1"
            )
            return certain
    if empirical_mean <= 1.0:
        logger.info(f"💀 empirical offspring mean {empirical_mean:.6g} <= 1, q = 1")
        return certain

    q, iterations = _pgf_fixed_point(values, probs, tol, cap)

    boot = []
    for _ in range(replicates):
        resampled = rng.multinomial(n, probs) / n
        if float(np.dot(values, resampled)) <= 1.0:
            boot.append(1.0)
        else:
            boot.append(_pgf_fixed_point(values, resampled, tol, cap)[0])
    std_error = float(np.std(boot, ddof=1)) if len(boot) > 1 else 0.0

    logger.info(f"🧬 extinction probability q = {q:.6f} ± {std_error:.6f} ({iterations} iterations)")
    return ExtinctionEstimate(q=q, std_error=std_error, iterations=iterations, empirical_mean=empirical_mean)


# =============================================================================
# REPORT
# =============================================================================

def build_report(
    env: EnvironmentLaw,
    method: str = "auto",
    rng: Optional[np.random.Generator] = None,
    n_samples: Optional[int] = None,
) -> CriterionReport:
    """Assemble every analytic criterion for one environment."""
    m = criterion_m(env, method=method, n_samples=n_samples, rng=rng)
    global_verdict, global_reason = classify_global(env)

    a_critical = None
    regime = None
    rate, clock = env.rate_law, env.clock_law
    if isinstance(rate, TwoPoint) and isinstance(clock, Exponential):
        regime = two_point_regime(rate.low, rate.high, rate.p, clock.a).value
        if 0.0 <= rate.low <= 1.0 < rate.high and 0.0 < rate.p < 1.0:
            a_critical = critical_a(rate.low, rate.high, rate.p)

    report = CriterionReport(
        m=m.value,
        mean_rate=mean_rate(rate),
        mean_clock=mean_clock(clock),
        jensen_lower_bound=jensen_lower_bound(env) if env.is_independent else None,
        a_critical=a_critical,
        dispersion_verdict=m.verdict,
        global_verdict=global_verdict,
        global_reason=global_reason,
        m_method=m.method,
        m_std_error=m.std_error,
        regime=regime,
    )
    logger.info(
        f"📐 m = {report.m} ({report.m_method}): dispersion {report.dispersion_verdict.value}, "
        f"global {report.global_verdict.value}"
    )
    return report
