"""
Tests for the Monte Carlo harness
=================================

Tests cover:
1. Seed derivation
2. Wilson intervals and their coverage
3. Survival estimates: determinism, worker independence, survival regimes
4. Parameter sweeps, monotonicity and model comparison
"""

import math

import numpy as np
import pytest

from app.core.types import ModelKind, Verdict
from app.environment.laws import (
    Coupling,
    Deterministic,
    EnvironmentLaw,
    Exponential,
    PointMass,
    TwoPoint,
)
from app.montecarlo.harness import (
    compare_models,
    derive_seed,
    derive_seeds,
    estimate_survival,
    parse_grid_range,
    random_master_seed,
    sweep,
    wilson_interval,
)
from app.processes.runners import DispersionConfig, FixedConfig, GlobalConfig

CRITICAL_ENV = EnvironmentLaw(TwoPoint(0.0, 2.0, 0.5), Exponential(1.5))
PHASE_ENV = EnvironmentLaw(TwoPoint(0.5, 1.5, 0.8), Exponential(1.0))


# =============================================================================
# SEEDING
# =============================================================================

class TestSeeding:
    """Tests for per-trial seed derivation."""

    def test_scalar_and_vector_forms_agree(self):
        """Test derive_seeds is bit-identical to derive_seed."""
        master = 20240611
        vector = derive_seeds(master, np.arange(1000, dtype=np.uint64))

        assert [int(s) for s in vector] == [derive_seed(master, i) for i in range(1000)]

    def test_no_collisions(self):
        """Test 10^6 derived seeds are pairwise distinct."""
        seeds = derive_seeds(7, np.arange(1_000_000, dtype=np.uint64))

        assert np.unique(seeds).size == seeds.size

    def test_indices_fold_left(self):
        """Test derive_seed(m, k, i) == derive_seed(derive_seed(m, k), i)."""
        assert derive_seed(5, 3, 9) == derive_seed(derive_seed(5, 3), 9)

    def test_stable_values(self):
        """Test seeds are fixed functions of their inputs."""
        assert derive_seed(0, 0) == derive_seed(0, 0)
        assert derive_seed(0, 0) != derive_seed(0, 1)
        assert 0 <= derive_seed(2**64 - 1, 2**40) < 2**64

    def test_random_master_seed_is_64_bit(self):
        """Test fresh master seeds fit in 64 bits."""
        assert 0 <= random_master_seed() < 2**64


# =============================================================================
# INTERVALS
# =============================================================================

class TestWilsonInterval:
    """Tests for the Wilson score interval."""

    @pytest.mark.parametrize("successes, trials", [(0, 10), (10, 10), (3, 10), (500, 1000), (1, 10_000)])
    def test_brackets_point(self, successes, trials):
        """Test 0 <= low <= p̂ <= high <= 1."""
        low, high = wilson_interval(successes, trials)

        assert 0.0 <= low <= successes / trials <= high <= 1.0

    def test_zero_successes(self):
        """Test the lower bound is 0 and the upper bound positive at 0 successes."""
        low, high = wilson_interval(0, 100)

        assert low == 0.0
        assert 0.0 < high < 0.05

    def test_half(self):
        """Test the interval is symmetric around 1/2."""
        low, high = wilson_interval(50, 100)

        assert 0.5 - low == pytest.approx(high - 0.5)
        assert low == pytest.approx(0.4038, abs=1e-3)

    def test_invalid_counts(self):
        """Test zero trials and out-of-range successes raise."""
        with pytest.raises(ValueError):
            wilson_interval(0, 0)
        with pytest.raises(ValueError):
            wilson_interval(11, 10)

    @pytest.mark.slow
    def test_coverage_over_repeated_estimates(self):
        """Test 100 estimates at n = 1000 cover the true survival 1/2 at least 90 times."""
        # P(reach 100 before 0) at λ = 2 is 1/2 up to 2^-100
        cfg = FixedConfig(2.0, horizon=200.0, population_cap=100)
        covered = 0
        for rep in range(100):
            estimate = estimate_survival(ModelKind.FIXED, cfg, n_trials=1000, master_seed=rep)
            covered += estimate.ci_low <= 0.5 <= estimate.ci_high

        assert covered >= 90


# =============================================================================
# SURVIVAL ESTIMATES
# =============================================================================

class TestEstimateSurvival:
    """Tests for the survival estimator."""

    def test_zero_rate_never_survives(self):
        """Test the fixed model at λ = 0 has point estimate 0."""
        estimate = estimate_survival(
            ModelKind.FIXED, FixedConfig(0.0, horizon=50.0, population_cap=100), n_trials=500, master_seed=1,
        )

        assert estimate.n_survived == 0
        assert estimate.point == 0.0
        assert estimate.ci_low == 0.0
        assert estimate.horizon == 50.0
        assert estimate.step_limit is None

    def test_same_seed_same_estimate(self):
        """Test an estimate is a function of its seed."""
        cfg = DispersionConfig(CRITICAL_ENV, max_generations=50, population_cap=500)
        first = estimate_survival(ModelKind.DISPERSION, cfg, n_trials=300, master_seed=42, workers=1)
        second = estimate_survival(ModelKind.DISPERSION, cfg, n_trials=300, master_seed=42, workers=1)

        assert first == second
        assert first.step_limit == 50
        assert first.population_cap == 500

    @pytest.mark.slow
    def test_worker_count_does_not_change_results(self):
        """Test a process pool reproduces the in-process estimate."""
        cfg = GlobalConfig(EnvironmentLaw(PointMass(1.5), Exponential(1.0)), max_epochs=50, population_cap=500)
        serial = estimate_survival(ModelKind.GLOBAL, cfg, n_trials=2500, master_seed=3, workers=1)
        pooled = estimate_survival(ModelKind.GLOBAL, cfg, n_trials=2500, master_seed=3, workers=2)

        assert serial == pooled

    def test_rejects_zero_trials(self):
        """Test n_trials must be positive."""
        with pytest.raises(ValueError):
            estimate_survival(ModelKind.FIXED, FixedConfig(1.0), n_trials=0)

    @pytest.mark.slow
    def test_dispersion_survives_at_critical_mean(self):
        """Test the dispersion model survives visibly when E(Λ) = 1."""
        dispersion = estimate_survival(
            ModelKind.DISPERSION, DispersionConfig(CRITICAL_ENV, population_cap=1000), n_trials=2000, master_seed=11,
        )

        assert dispersion.ci_low > 0.05

    @pytest.mark.slow
    @pytest.mark.parametrize("a", [0.2, 1.0])
    def test_global_dies_below_unit_mean_rate(self, a):
        """Test E(Λ) = 0.7 keeps global survival below 0.005 whatever the clock rate."""
        env = EnvironmentLaw(TwoPoint(0.5, 1.5, 0.8), Exponential(a))
        cfg = GlobalConfig(env, max_epochs=100, population_cap=10 ** 15)
        estimate = estimate_survival(ModelKind.GLOBAL, cfg, n_trials=4000, master_seed=303)

        assert estimate.point < 0.005

    @pytest.mark.slow
    def test_only_dispersion_survives_at_unit_mean_rate(self):
        """Test E(Λ) = 1 separates dispersion survival from global and fixed extinction."""
        dispersion = estimate_survival(
            ModelKind.DISPERSION, DispersionConfig(CRITICAL_ENV, population_cap=1000),
            n_trials=4000, master_seed=derive_seed(7, 0),
        )
        global_ = estimate_survival(
            ModelKind.GLOBAL, GlobalConfig(CRITICAL_ENV, max_epochs=20_000, population_cap=10 ** 200),
            n_trials=4000, master_seed=derive_seed(7, 1),
        )
        fixed = estimate_survival(ModelKind.FIXED, FixedConfig(1.0), n_trials=4000, master_seed=derive_seed(7, 2))

        assert dispersion.ci_low > 0.01
        assert global_.point < 0.01
        assert fixed.point < 0.01


# =============================================================================
# SWEEPS
# =============================================================================

class TestGridRange:
    """Tests for start:stop:step grids."""

    def test_inclusive_and_rounded(self):
        """Test 0.3:1.2:0.1 gives ten clean values."""
        assert parse_grid_range("0.3:1.2:0.1") == [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2]

    def test_single_point(self):
        """Test start == stop gives one value."""
        assert parse_grid_range("2:2:0.5") == [2.0]

    @pytest.mark.parametrize("text", ["1:2", "a:b:c", "1:2:0", "2:1:0.1", "0:inf:1"])
    def test_malformed(self, text):
        """Test malformed ranges raise."""
        with pytest.raises(ValueError):
            parse_grid_range(text)


class TestSweep:
    """Tests for parameter sweeps."""

    def test_phase_boundary_predictions(self):
        """Test predicted verdicts across a_c = 5/6."""
        rows = sweep(
            ModelKind.DISPERSION, PHASE_ENV, "a", [0.3, 0.6, 0.7, 1.0, 1.2],
            n_trials=50, master_seed=1, step_limit=30, population_cap=200,
        )

        assert [r.predicted for r in rows] == ["Survives", "Survives", "Survives", "Dies", "Dies"]
        assert math.isinf(rows[0].m)
        assert rows[1].m == pytest.approx(0.8 * 0.6 / 1.1 + 0.2 * 0.6 / 0.1)
        assert all(r.param == "a" and r.is_valid for r in rows)

    def test_invalid_values_keep_their_place(self):
        """Test rows that break a law invariant are marked Invalid in grid order."""
        rows = sweep(
            ModelKind.DISPERSION, PHASE_ENV, "p", [0.5, 1.5, 0.9],
            n_trials=20, master_seed=2, step_limit=20, population_cap=100,
        )

        assert [r.predicted for r in rows][1] == "Invalid"
        assert rows[1].estimate is None and rows[1].m is None
        assert rows[1].diagnostic
        assert [r.value for r in rows] == [0.5, 1.5, 0.9]

    def test_global_sweep_uses_mean_rate(self):
        """Test the global model predicts from E(Λ), not m."""
        rows = sweep(
            ModelKind.GLOBAL, CRITICAL_ENV, "l2", [1.5, 3.0],
            n_trials=20, master_seed=3, step_limit=20, population_cap=100,
        )

        assert [r.predicted for r in rows] == ["Dies", "Survives"]

    def test_global_sweep_dependent_not_applicable(self):
        """Test dependent couplings give NotApplicable rows without estimates."""
        env = EnvironmentLaw(TwoPoint(0.5, 1.5, 0.8), Exponential(3.0), Coupling.COMONOTONE)
        rows = sweep(ModelKind.GLOBAL, env, "a", [3.0], n_trials=10, master_seed=4)

        assert rows[0].predicted == Verdict.NOT_APPLICABLE.value
        assert rows[0].estimate is None

    def test_point_seeds_are_derived(self):
        """Test each point's estimate carries derive_seed(master, k)."""
        rows = sweep(
            ModelKind.DISPERSION, PHASE_ENV, "a", [1.0, 1.2],
            n_trials=10, master_seed=9, step_limit=10, population_cap=50,
        )

        assert [r.estimate.master_seed for r in rows] == [derive_seed(9, 0), derive_seed(9, 1)]

    def test_fixed_model_and_empty_grid_rejected(self):
        """Test only dispersion and global sweeps over non-empty grids are allowed."""
        with pytest.raises(ValueError):
            sweep(ModelKind.FIXED, PHASE_ENV, "a", [1.0])
        with pytest.raises(ValueError):
            sweep(ModelKind.DISPERSION, PHASE_ENV, "a", [])

    @pytest.mark.slow
    def test_dispersion_survival_non_increasing_in_clock_rate(self):
        """Test survival falls with a, up to twice the CI half-widths."""
        rows = sweep(
            ModelKind.DISPERSION, PHASE_ENV, "a", [0.4, 0.5, 0.6, 0.7, 0.8],
            n_trials=2000, master_seed=12, population_cap=1000,
        )

        for slower, faster in zip(rows, rows[1:]):
            half_width = max(
                (r.estimate.ci_high - r.estimate.ci_low) / 2 for r in (slower, faster)
            )
            assert faster.estimate.point <= slower.estimate.point + 2 * half_width


# =============================================================================
# MODEL COMPARISON
# =============================================================================

class TestCompareModels:
    """Tests for the three-model comparison."""

    def test_rows_in_model_order(self):
        """Test dispersion, global and fixed rows with their predictions."""
        rows = compare_models(CRITICAL_ENV, n_trials=50, master_seed=5, max_generations=20, population_cap=200, horizon=20.0)

        assert [r.model for r in rows] == [ModelKind.DISPERSION, ModelKind.GLOBAL, ModelKind.FIXED]
        assert [r.predicted for r in rows] == [Verdict.SURVIVES, Verdict.DIES, Verdict.DIES]
        assert rows[2].rate == 1.0
        assert [r.estimate.master_seed for r in rows] == [derive_seed(5, k) for k in range(3)]

    def test_fixed_rate_override(self):
        """Test the baseline rate can be set explicitly."""
        rows = compare_models(
            CRITICAL_ENV, n_trials=20, master_seed=6, fixed_rate=2.0,
            max_generations=10, population_cap=100, horizon=10.0,
        )

        assert rows[2].rate == 2.0
        assert rows[2].predicted is Verdict.SURVIVES

    def test_dependent_coupling_skips_global(self):
        """Test the global row is NotApplicable with a diagnostic."""
        env = EnvironmentLaw(PointMass(1.2), Deterministic(1.0), Coupling.ANTIMONOTONE)
        rows = compare_models(env, n_trials=10, master_seed=7, max_generations=10, population_cap=50, horizon=5.0)

        assert rows[1].predicted is Verdict.NOT_APPLICABLE
        assert rows[1].estimate is None
        assert rows[1].diagnostic

    @pytest.mark.slow
    def test_point_mass_global_matches_fixed(self):
        """Test a point-mass environment gives global and fixed CIs that overlap."""
        rows = compare_models(
            EnvironmentLaw(PointMass(2.0), Exponential(1.0)), n_trials=4000, master_seed=8,
            max_generations=100, population_cap=1000, horizon=200.0,
        )
        global_, fixed = rows[1].estimate, rows[2].estimate

        assert global_.ci_low <= fixed.ci_high
        assert fixed.ci_low <= global_.ci_high
        assert global_.point == pytest.approx(0.5, abs=0.05)
