"""
Tests for the population process runners
========================================

Tests cover:
1. Configuration invariants
2. Trial termination and verdicts for each model
3. Determinism per seed
4. Trajectories: ordering, running totals, markers, cap handling
5. Log-scale continuation of large global populations
6. First-generation law and wavefront means of the dispersion model
"""

import math

import numpy as np
import pytest
from scipy import stats

from app.chain.birth_death import EventKind, transient_law
from app.core.types import ModelKind, TrialVerdict
from app.environment.laws import (
    Coupling,
    Deterministic,
    EnvironmentLaw,
    Exponential,
    PointMass,
    TwoPoint,
)
from app.processes.runners import (
    ConfigError,
    DispersionConfig,
    FixedConfig,
    GlobalConfig,
    LOG_SCALE_THRESHOLD,
    run_dispersion_trial,
    run_fixed_trial,
    run_global_trial,
    run_trajectory,
    run_trial,
)

CRITICAL_ENV = EnvironmentLaw(TwoPoint(0.0, 2.0, 0.5), Exponential(1.5))


def _survival_rate(runner, cfg, n: int, seed: int) -> float:
    survived = sum(runner(cfg, np.random.default_rng(seed + i)).survived for i in range(n))
    return survived / n


# =============================================================================
# CONFIGURATION
# =============================================================================

class TestConfigs:
    """Tests for process configuration invariants."""

    def test_global_requires_independent_coupling(self):
        """Test dependent couplings are refused by the global model."""
        env = EnvironmentLaw(TwoPoint(0.0, 2.0, 0.5), Exponential(1.5), Coupling.COMONOTONE)

        with pytest.raises(ConfigError):
            GlobalConfig(env)

    @pytest.mark.parametrize("factory", [
        lambda: DispersionConfig(CRITICAL_ENV, max_generations=0),
        lambda: GlobalConfig(CRITICAL_ENV, population_cap=0),
        lambda: GlobalConfig(CRITICAL_ENV, population_cap=10 ** 301),
        lambda: FixedConfig(-1.0),
        lambda: FixedConfig(1.0, horizon=0.0),
    ])
    def test_invalid_caps_rejected(self, factory):
        """Test non-positive caps, rates or horizons raise ConfigError."""
        with pytest.raises(ConfigError):
            factory()

    def test_run_trial_checks_config_type(self):
        """Test dispatch refuses a config of the wrong model."""
        with pytest.raises(ConfigError):
            run_trial(ModelKind.GLOBAL, DispersionConfig(CRITICAL_ENV), np.random.default_rng(0))


# =============================================================================
# TRIALS
# =============================================================================

class TestDispersionTrials:
    """Tests for generation-by-generation dispersion trials."""

    def test_pure_death_goes_extinct_in_first_generation(self):
        """Test λ = 0 with a long clock dies with high probability at generation 1."""
        cfg = DispersionConfig(EnvironmentLaw(PointMass(0.0), Deterministic(30.0)))
        outcome = run_dispersion_trial(cfg, np.random.default_rng(1))

        assert outcome.verdict is TrialVerdict.EXTINCT
        assert outcome.stop_step == 1
        assert outcome.stop_population == 0

    def test_supercritical_reaches_cap(self):
        """Test a strongly supercritical environment hits the cap."""
        cfg = DispersionConfig(
            EnvironmentLaw(PointMass(3.0), Deterministic(2.0)), max_generations=50, population_cap=1000,
        )
        outcomes = [run_dispersion_trial(cfg, np.random.default_rng(s)) for s in range(50)]
        survivors = [o for o in outcomes if o.survived]

        assert survivors
        for outcome in survivors:
            assert outcome.stop_population >= 1000
            assert outcome.stop_step < 50
            assert outcome.peak_population >= outcome.stop_population

    def test_generation_cap_counts_as_survival(self):
        """Test a lineage alive at max_generations is SurvivedToCap."""
        cfg = DispersionConfig(
            EnvironmentLaw(PointMass(1.0), Deterministic(1e-9)), max_generations=5, population_cap=10,
        )
        outcome = run_dispersion_trial(cfg, np.random.default_rng(2))

        assert outcome.verdict is TrialVerdict.SURVIVED_TO_CAP
        assert outcome.stop_step == 5

    def test_critical_environment_survives_sometimes(self):
        """Test m = 1.8 at E(Λ) = 1 gives visible survival."""
        cfg = DispersionConfig(CRITICAL_ENV, population_cap=1000)

        assert _survival_rate(run_dispersion_trial, cfg, 400, 100) > 0.05

    def test_deterministic_per_seed(self):
        """Test identical streams give identical outcomes."""
        cfg = DispersionConfig(CRITICAL_ENV, population_cap=1000)

        assert run_dispersion_trial(cfg, np.random.default_rng(9)) == run_dispersion_trial(cfg, np.random.default_rng(9))

    def test_first_generation_matches_mixture_law(self):
        """Test V_1 follows the mixture of transient laws over the environment."""
        env = EnvironmentLaw(TwoPoint(0.0, 2.0, 0.5), Deterministic(1.0))
        cfg = DispersionConfig(env, max_generations=1, population_cap=10 ** 6)
        n = 20_000
        counts = np.array([
            run_dispersion_trial(cfg, np.random.default_rng(seed)).stop_population for seed in range(n)
        ])
        laws = (transient_law(0.0, 1.0), transient_law(2.0, 1.0))
        pmf = np.array([0.5 * (laws[0].pmf(k) + laws[1].pmf(k)) for k in range(10)])
        expected = np.append(pmf, 1.0 - pmf.sum()) * n
        observed = np.bincount(np.minimum(counts, 10), minlength=11)

        assert stats.chisquare(observed, expected).pvalue > 0.001


class TestGlobalTrials:
    """Tests for epoch-by-epoch global trials."""

    def test_subcritical_mean_dies(self):
        """Test E(Λ) = 0.7 gives no survival in the global model."""
        cfg = GlobalConfig(EnvironmentLaw(TwoPoint(0.5, 1.5, 0.8), Exponential(1.0)), population_cap=1000)

        assert _survival_rate(run_global_trial, cfg, 400, 200) < 0.01

    def test_supercritical_mean_survives(self):
        """Test E(Λ) = 2 survives with positive frequency."""
        cfg = GlobalConfig(EnvironmentLaw(PointMass(2.0), Exponential(1.0)), population_cap=1000)

        assert _survival_rate(run_global_trial, cfg, 200, 300) > 0.3

    def test_outcome_fields(self):
        """Test stop_step counts epochs and stop_time stays unset."""
        cfg = GlobalConfig(EnvironmentLaw(PointMass(0.0), Deterministic(50.0)))
        outcome = run_global_trial(cfg, np.random.default_rng(4))

        assert outcome.verdict is TrialVerdict.EXTINCT
        assert outcome.stop_step == 1
        assert outcome.stop_time is None

    def test_cap_beyond_int64_reached_on_log_scale(self):
        """Test caps far above 2^63 are reached on the log scale."""
        cfg = GlobalConfig(EnvironmentLaw(PointMass(3.0), Deterministic(5.0)), population_cap=10 ** 40)
        outcomes = [run_global_trial(cfg, np.random.default_rng(s)) for s in range(10)]
        survivors = [o for o in outcomes if o.survived]

        assert survivors
        for outcome in survivors:
            assert outcome.stop_population >= 10 ** 40
            assert outcome.stop_step < 100
            assert outcome.peak_population >= outcome.stop_population

    def test_log_scale_keeps_dying_walks_extinct(self):
        """Test subcritical lineages that pass the log-scale threshold still die."""
        env = EnvironmentLaw(TwoPoint(0.0, 2.0, 0.7), Deterministic(15.0))
        cfg = GlobalConfig(env, max_epochs=400, population_cap=10 ** 100)
        outcomes = [run_global_trial(cfg, np.random.default_rng(s)) for s in range(200)]

        assert any(o.peak_population >= LOG_SCALE_THRESHOLD for o in outcomes)
        assert all(o.verdict is TrialVerdict.EXTINCT for o in outcomes)


class TestFixedTrials:
    """Tests for the fixed-rate baseline."""

    def test_zero_rate_never_survives(self):
        """Test λ = 0 always goes extinct."""
        cfg = FixedConfig(0.0, horizon=50.0, population_cap=100)

        assert _survival_rate(run_fixed_trial, cfg, 200, 0) == 0.0

    def test_rate_two_survives_about_half(self):
        """Test λ = 2 survives with probability close to 1/2."""
        cfg = FixedConfig(2.0, horizon=200.0, population_cap=1000)

        assert _survival_rate(run_fixed_trial, cfg, 1000, 500) == pytest.approx(0.5, abs=0.06)

    def test_stop_time_recorded(self):
        """Test fixed-model outcomes carry the stop time."""
        outcome = run_fixed_trial(FixedConfig(0.5, horizon=10.0, population_cap=100), np.random.default_rng(5))

        assert outcome.stop_time is not None
        assert outcome.stop_step == 0
        if outcome.verdict is TrialVerdict.EXTINCT:
            assert 0 < outcome.stop_time <= 10.0
        else:
            assert outcome.stop_time == 10.0


# =============================================================================
# TRAJECTORIES
# =============================================================================

def _assert_running_total(trace):
    population = trace.initial_population
    previous = 0.0
    for event in trace.events:
        assert event.time >= previous
        previous = event.time
        population += event.delta
        assert event.population_after == population
        assert population >= 0


class TestTrajectories:
    """Tests for event-driven sample paths."""

    def test_zero_horizon_is_empty(self):
        """Test horizon 0 produces no records."""
        trace = run_trajectory(ModelKind.DISPERSION, DispersionConfig(CRITICAL_ENV), np.random.default_rng(0), 0.0)

        assert trace.events == []
        assert trace.final_population == 1
        assert trace.terminated_by == "horizon"

    def test_fixed_trajectory(self):
        """Test the fixed model trace ends at extinction, cap or horizon."""
        cfg = FixedConfig(1.5, horizon=5.0, population_cap=10**6)
        trace = run_trajectory(ModelKind.FIXED, cfg, np.random.default_rng(1))

        _assert_running_total(trace)
        assert trace.terminated_by in ("extinct", "horizon")
        assert all(e.time <= 5.0 for e in trace.events)

    def test_global_trajectory_has_switch_markers(self):
        """Test environment switches appear as zero-delta records."""
        cfg = GlobalConfig(EnvironmentLaw(PointMass(1.5), Deterministic(1.0)), population_cap=10**6)
        trace = run_trajectory(ModelKind.GLOBAL, cfg, np.random.default_rng(2), horizon=4.5)

        _assert_running_total(trace)
        switches = [e for e in trace.events if e.kind is EventKind.SWITCH]
        assert all(e.delta == 0 for e in switches)
        if trace.terminated_by == "horizon":
            assert [e.time for e in switches] == [1.0, 2.0, 3.0, 4.0]
            assert len(trace.generation_sizes) == 5

    def test_dispersion_trajectory_merges_colonies(self):
        """Test colony records merge into one consistent running total."""
        cfg = DispersionConfig(EnvironmentLaw(PointMass(2.0), Deterministic(1.0)), population_cap=10**5)
        trace = run_trajectory(ModelKind.DISPERSION, cfg, np.random.default_rng(3), horizon=3.5)

        _assert_running_total(trace)
        collapses = [e for e in trace.events if e.kind is EventKind.COLLAPSE]
        assert all(e.delta == 0 and e.time in (1.0, 2.0, 3.0) for e in collapses)
        assert trace.generation_sizes[0] == 1
        assert trace.terminated_by in ("extinct", "horizon")

    def test_cap_ends_trace_cleanly(self):
        """Test reaching the cap is a labelled termination, not an error."""
        cfg = FixedConfig(5.0, horizon=100.0, population_cap=30)
        traces = [run_trajectory(ModelKind.FIXED, cfg, np.random.default_rng(s)) for s in range(20)]
        capped = [t for t in traces if t.terminated_by == "cap"]

        assert capped
        for trace in capped:
            _assert_running_total(trace)
            assert trace.final_population == 30

    def test_dispersion_trace_stops_at_cap(self):
        """Test the merged running total never passes population_cap."""
        cfg = DispersionConfig(EnvironmentLaw(PointMass(3.0), Deterministic(3.0)), population_cap=1000)
        traces = [run_trajectory(ModelKind.DISPERSION, cfg, np.random.default_rng(s)) for s in range(10)]
        capped = [t for t in traces if t.terminated_by == "cap"]

        assert capped
        for trace in traces:
            _assert_running_total(trace)
            assert max((e.population_after for e in trace.events), default=1) <= 1000
        for trace in capped:
            assert trace.final_population == 1000

    def test_dispersion_wavefront_mean_doubles(self):
        """Test founders of generation k average 2^k for λ = 2, τ = ln 2."""
        cfg = DispersionConfig(
            EnvironmentLaw(PointMass(2.0), Deterministic(math.log(2.0))),
            max_generations=3, population_cap=10 ** 6,
        )
        runs = 1500
        sizes = np.zeros((runs, 4))
        for seed in range(runs):
            trace = run_trajectory(ModelKind.DISPERSION, cfg, np.random.default_rng(seed))
            assert trace.terminated_by in ("extinct", "step_limit")
            generations = trace.generation_sizes[:4]
            sizes[seed, :len(generations)] = generations

        assert np.all(sizes[:, 0] == 1)
        for k in (1, 2, 3):
            se = sizes[:, k].std(ddof=1) / math.sqrt(runs)
            assert abs(sizes[:, k].mean() - 2 ** k) < 4 * se

    def test_negative_horizon_rejected(self):
        """Test a negative horizon is a configuration error."""
        with pytest.raises(ConfigError):
            run_trajectory(ModelKind.FIXED, FixedConfig(1.0), np.random.default_rng(0), -1.0)

    def test_deterministic_per_seed(self):
        """Test identical streams give identical traces."""
        cfg = DispersionConfig(CRITICAL_ENV, population_cap=500)
        first = run_trajectory(ModelKind.DISPERSION, cfg, np.random.default_rng(4), horizon=5.0)
        second = run_trajectory(ModelKind.DISPERSION, cfg, np.random.default_rng(4), horizon=5.0)

        assert first == second
        assert math.isfinite(first.events[-1].time) if first.events else True
