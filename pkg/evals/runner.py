"""
Dispersal Survival Lab - Acceptance Runner
Runs the acceptance experiments and writes a pass/fail report
"""
import os
import sys
import time
import yaml
import logging
import argparse
import tempfile
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple
from dataclasses import dataclass, asdict

import numpy as np
from scipy import optimize

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.analytics.criteria import (
    critical_a,
    criterion_m,
    gw_extinction_prob,
    jensen_lower_bound,
)
from app.chain.birth_death import CapReached, gillespie_until, sample_offspring, transient_law
from app.core.types import ModelKind
from app.environment.laws import EnvironmentLaw, Exponential, mean_rate, parse_clock_law, parse_rate_law
from app.montecarlo.harness import derive_seed, estimate_survival, sweep
from app.processes.runners import DispersionConfig, FixedConfig, GlobalConfig
from app.cli.serialize import to_json

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

CheckOutcome = Tuple[bool, str, Dict[str, Any]]


@dataclass
class TestResult:
    """Result of a single acceptance experiment"""
    test_id: str
    test_name: str
    check: str
    passed: bool
    reason: str
    duration_seconds: float
    measured: Dict[str, Any]


@dataclass
class SetResult:
    """Result of a set of experiments"""
    set_name: str
    total_tests: int
    passed_tests: int
    failed_tests: int
    pass_rate: float
    results: List[TestResult]


@dataclass
class EvalReport:
    """Complete acceptance report"""
    timestamp: str
    total_tests: int
    passed_tests: int
    failed_tests: int
    overall_pass_rate: float
    set_results: List[SetResult]

    def to_dict(self) -> Dict:
        return {
            "timestamp": self.timestamp,
            "total_tests": self.total_tests,
            "passed_tests": self.passed_tests,
            "failed_tests": self.failed_tests,
            "overall_pass_rate": self.overall_pass_rate,
            "set_results": [
                {
                    **asdict(sr),
                    "results": [asdict(r) for r in sr.results]
                }
                for sr in self.set_results
            ]
        }


def _env(mu: str, nu: str) -> EnvironmentLaw:
    return EnvironmentLaw(parse_rate_law(mu), parse_clock_law(nu))


# =============================================================================
# CHECKS
# =============================================================================

def check_criterion_agreement(case: Dict) -> CheckOutcome:
    env = _env(case["mu"], case["nu"])
    closed = criterion_m(env, "closed_form").value
    quad = criterion_m(env, "quadrature").value
    mc = criterion_m(env, "monte_carlo", n_samples=case["mc_samples"], rng=np.random.default_rng(case["seed"]))
    measured = {"closed_form": closed, "quadrature": quad, "monte_carlo": mc.value, "mc_std_error": mc.std_error}
    ok = (
        abs(closed - case["expected"]) < 1e-9
        and abs(quad - closed) < 1e-9
        and abs(mc.value - closed) < 4 * mc.std_error
    )
    return ok, f"m = {closed}, quadrature {quad}, Monte Carlo {mc.value:.5f} ± {mc.std_error:.5f}", measured


def check_criterion_infinite(case: Dict) -> CheckOutcome:
    env = _env(case["mu"], case["nu"])
    values = {method: criterion_m(env, method, n_samples=10_000).value
              for method in ("closed_form", "quadrature", "monte_carlo")}
    ok = all(v == float("inf") for v in values.values())
    return ok, f"m by method: {values}", {k: str(v) for k, v in values.items()}


def check_critical_rate(case: Dict) -> CheckOutcome:
    l1, l2, p = case["l1"], case["l2"], case["p"]
    a_c = critical_a(l1, l2, p)

    def excess(a: float) -> float:
        return criterion_m(EnvironmentLaw(parse_rate_law(f"two_point:{l1},{l2},{p}"), Exponential(a))).value - 1.0

    # m is infinite for a <= λ2 - 1, so bracket just above it
    oracle = optimize.brentq(excess, l2 - 1.0 + 1e-6, 100.0, xtol=1e-14, rtol=1e-14)
    ok = abs(a_c - case["expected"]) < 1e-9 and abs(a_c - oracle) < 1e-9
    return ok, f"a_c = {a_c}, bisection {oracle}", {"a_critical": a_c, "bisection": oracle}


def check_sweep_concordance(case: Dict) -> CheckOutcome:
    rows = sweep(
        ModelKind.DISPERSION, _env(case["mu"], case["nu"]), case["param"], case["grid"],
        n_trials=case["trials"], master_seed=case["seed"],
    )
    problems = []
    for row in rows:
        est = row.estimate
        if row.value in case["expect_ci_positive"] and not est.ci_low > 0:
            problems.append(f"{row.param}={row.value}: ci_low {est.ci_low}")
        if row.value in case["expect_point_positive"] and not est.point > 0:
            problems.append(f"{row.param}={row.value}: point {est.point}")
        if row.predicted == "Dies" and not est.point < case["expect_dies_below"]:
            problems.append(f"{row.param}={row.value}: predicted Dies, point {est.point}")
    measured = {str(r.value): {"m": str(r.m), "predicted": r.predicted, "point": r.estimate.point} for r in rows}
    predicted = [r.predicted for r in rows]
    return not problems, "; ".join(problems) or f"predicted {predicted}", measured


def _global_config(env: EnvironmentLaw, case: Dict) -> GlobalConfig:
    """Global-model caps for a case; population_cap_log10 sizes the cap as a power of ten."""
    return GlobalConfig(
        env,
        max_epochs=case.get("max_epochs", 100),
        population_cap=10 ** case.get("population_cap_log10", 5),
    )


def check_global_extinction(case: Dict) -> CheckOutcome:
    measured = {}
    for i, a in enumerate(case["clock_rates"]):
        cfg = _global_config(EnvironmentLaw(parse_rate_law(case["mu"]), Exponential(a)), case)
        est = estimate_survival(ModelKind.GLOBAL, cfg, case["trials"], case["seed"] + i)
        measured[str(a)] = est.point
    ok = all(point < case["threshold"] for point in measured.values())
    return ok, f"global survival by a: {measured}", measured


def check_critical_separation(case: Dict) -> CheckOutcome:
    env = _env(case["mu"], case["nu"])
    trials, seed = case["trials"], case["seed"]
    estimates = {
        "dispersion": estimate_survival(ModelKind.DISPERSION, DispersionConfig(env), trials, derive_seed(seed, 0)),
        "global": estimate_survival(ModelKind.GLOBAL, _global_config(env, case), trials, derive_seed(seed, 1)),
        "fixed": estimate_survival(
            ModelKind.FIXED, FixedConfig(mean_rate(env.rate_law)), trials, derive_seed(seed, 2),
        ),
    }
    measured = {name: {"point": est.point, "ci_low": est.ci_low} for name, est in estimates.items()}
    ok = (
        estimates["dispersion"].ci_low > case["dispersion_ci_low"]
        and estimates["global"].point < case["others_below"]
        and estimates["fixed"].point < case["others_below"]
    )
    return ok, f"survival: {measured}", measured


def check_offspring_law(case: Dict) -> CheckOutcome:
    rate, t, n = case["rate"], case["time"], case["draws"]
    law = transient_law(rate, t)
    rng = np.random.default_rng(case["seed"])
    exact = sample_offspring(law, rng, size=n)
    events = np.empty(n, dtype=np.int64)
    for i in range(n):
        try:
            events[i] = gillespie_until(rate, t, 1, 10**9, rng).population
        except CapReached as cap:
            events[i] = cap.population
    bins = np.arange(21)
    hist_exact = np.bincount(np.minimum(exact, 20), minlength=21)[bins] / n
    hist_events = np.bincount(np.minimum(events, 20), minlength=21)[bins] / n
    tv = 0.5 * float(np.abs(hist_exact - hist_events).sum())
    se = float(exact.std(ddof=1) / np.sqrt(n))
    mean_ok = abs(float(exact.mean()) - law.mean) < 4 * se
    ok = abs(law.alpha - 1 / 3) < 1e-12 and abs(law.beta - 2 / 3) < 1e-12 and mean_ok and tv < case["tv_threshold"]
    measured = {"alpha": law.alpha, "beta": law.beta, "mean": float(exact.mean()), "tv": tv}
    return ok, f"α={law.alpha:.6f} β={law.beta:.6f} mean={exact.mean():.4f} TV={tv:.4f}", measured


def check_extinction_oracle(case: Dict) -> CheckOutcome:
    env = _env(case["mu"], case["nu"])
    q = gw_extinction_prob(env, case["samples"], np.random.default_rng(case["seed"]))
    est = estimate_survival(ModelKind.DISPERSION, DispersionConfig(env), case["trials"], case["seed"])
    tol = case["tolerance"]
    ok = abs(q.q - case["expected"]) < tol and abs(est.point - (1 - case["expected"])) < tol
    return ok, f"q = {q.q:.4f} ± {q.std_error:.4f}, survival {est.point:.4f}", {"q": q.q, "survival": est.point}


def check_jensen_grid(case: Dict) -> CheckOutcome:
    problems = []
    measured = {}
    for mu, nu in case["environments"]:
        env = _env(mu, nu)
        m = criterion_m(env).value
        bound = jensen_lower_bound(env)
        degenerate = env.rate_law.is_degenerate and env.clock_law.is_degenerate
        measured[f"{mu} {nu}"] = {"m": str(m), "bound": bound}
        if m < bound * (1 - 1e-12):
            problems.append(f"{mu} {nu}: m {m} < bound {bound}")
        if abs(m - bound) <= 1e-12 * bound and not degenerate:
            problems.append(f"{mu} {nu}: equality for a random environment")
    return not problems, "; ".join(problems) or f"{len(measured)} environments bounded", measured


def check_determinism(case: Dict) -> CheckOutcome:
    from main import main as cli_main

    problems = []
    with tempfile.TemporaryDirectory() as tmp:
        for i, command in enumerate(case["commands"]):
            outputs = []
            for attempt in range(2):
                path = os.path.join(tmp, f"run{i}_{attempt}.out")
                status = cli_main([str(c) for c in command] + ["--out", path])
                if status != 0:
                    problems.append(f"{command[0]} exited {status}")
                    break
                outputs.append(Path(path).read_bytes())
            if len(outputs) == 2 and outputs[0] != outputs[1]:
                problems.append(f"{command[0]} output differs between runs")
    return not problems, "; ".join(problems) or f"{len(case['commands'])} commands byte-identical", {}


CHECKS: Dict[str, Callable[[Dict], CheckOutcome]] = {
    "criterion_agreement": check_criterion_agreement,
    "criterion_infinite": check_criterion_infinite,
    "critical_rate": check_critical_rate,
    "sweep_concordance": check_sweep_concordance,
    "global_extinction": check_global_extinction,
    "critical_separation": check_critical_separation,
    "offspring_law": check_offspring_law,
    "extinction_oracle": check_extinction_oracle,
    "jensen_grid": check_jensen_grid,
    "determinism": check_determinism,
}


class AcceptanceRunner:
    """Main acceptance runner"""

    def __init__(self, cases_path: Optional[str] = None):
        self.cases_path = Path(cases_path) if cases_path else Path(__file__).parent / "acceptance_cases.yaml"
        self.test_cases = self._load_test_cases()

    def _load_test_cases(self) -> Dict:
        """Load acceptance cases from YAML"""
        with open(self.cases_path, 'r', encoding='utf-8') as f:
            return yaml.safe_load(f)

    def run_single_test(self, test: Dict) -> TestResult:
        """Run a single acceptance experiment"""
        start_time = time.time()
        check = test.get("check", "")
        try:
            passed, reason, measured = CHECKS[check](test)
        except KeyError:
            passed, reason, measured = False, f"unknown check '{check}'", {}
        except Exception as e:
            logger.exception(f"❌ {test.get('id')} raised")
            passed, reason, measured = False, f"{type(e).__name__}: {e}", {}

        return TestResult(
            test_id=test.get("id", "unknown"),
            test_name=test.get("name", "Unnamed"),
            check=check,
            passed=passed,
            reason=reason,
            duration_seconds=round(time.time() - start_time, 2),
            measured=measured,
        )

    def run_set(self, set_name: str) -> SetResult:
        """Run all experiments in a set"""
        target_set = None
        for s in self.test_cases.get("sets", []):
            if s.get("name", "").lower() == set_name.lower():
                target_set = s
                break

        if not target_set:
            raise ValueError(f"Set '{set_name}' not found")

        results = []
        for test in target_set.get("tests", []):
            logger.info(f"Running test: {test.get('id')} - {test.get('name')}")
            result = self.run_single_test(test)
            results.append(result)

            status = "✅ PASS" if result.passed else "❌ FAIL"
            logger.info(f"  {status} ({result.duration_seconds}s) - {result.reason[:80]}")

        passed = sum(1 for r in results if r.passed)
        total = len(results)
        return SetResult(
            set_name=target_set.get("name", set_name),
            total_tests=total,
            passed_tests=passed,
            failed_tests=total - passed,
            pass_rate=round(passed / total * 100, 1) if total > 0 else 0,
            results=results,
        )

    def run_all(self) -> EvalReport:
        """Run all sets"""
        set_results = []
        for s in self.test_cases.get("sets", []):
            set_name = s.get("name", "Unknown")
            logger.info(f"{'='*60}")
            logger.info(f"Running Set: {set_name}")
            set_result = self.run_set(set_name)
            set_results.append(set_result)
            logger.info(f"Set {set_name}: {set_result.passed_tests}/{set_result.total_tests} PASS")

        all_results = [r for sr in set_results for r in sr.results]
        total = len(all_results)
        passed = sum(1 for r in all_results if r.passed)
        return EvalReport(
            timestamp=datetime.now().isoformat(),
            total_tests=total,
            passed_tests=passed,
            failed_tests=total - passed,
            overall_pass_rate=round(passed / total * 100, 1) if total > 0 else 0,
            set_results=set_results,
        )

    def save_report(self, report: EvalReport, output_dir: Optional[str] = None) -> str:
        """Save the report to JSON"""
        output_dir = output_dir or str(Path(__file__).parent / "results")
        os.makedirs(output_dir, exist_ok=True)

        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        filepath = os.path.join(output_dir, f"acceptance_report_{timestamp}.json")
        with open(filepath, 'w', encoding='utf-8', newline='\n') as f:
            f.write(to_json(report.to_dict()))

        logger.info(f"Report saved: {filepath}")
        return filepath

    def print_summary(self, report: EvalReport):
        """Print the summary to the console"""
        print("\n" + "="*60)
        print("📊 ACCEPTANCE REPORT")
        print("="*60)
        print(f"Timestamp: {report.timestamp}")
        print(f"\n{'Set':<15} {'Pass':<8} {'Fail':<8} {'Rate'}")
        print("-"*60)
        for sr in report.set_results:
            print(f"{sr.set_name:<15} {sr.passed_tests:<8} {sr.failed_tests:<8} {sr.pass_rate}%")
        print("-"*60)
        print(f"{'TOTAL':<15} {report.passed_tests:<8} {report.failed_tests:<8} {report.overall_pass_rate}%")
        print("="*60)

        failed_tests = [r for sr in report.set_results for r in sr.results if not r.passed]
        if failed_tests:
            print(f"\n❌ FAILED TESTS ({len(failed_tests)}):")
            for ft in failed_tests:
                print(f"  • [{ft.test_id}] {ft.test_name}: {ft.reason[:80]}")


def main():
    """CLI entry point"""
    parser = argparse.ArgumentParser(description="Dispersal Survival Lab acceptance runner")
    parser.add_argument("--set", "-s", help="Run a specific set (Criterion, PhaseBoundary, NullModel, ...)")
    parser.add_argument("--test", "-t", help="Run a specific experiment by ID (e.g., C1, P2)")
    parser.add_argument("--cases", help="Alternative acceptance cases YAML")
    parser.add_argument("--output", "-o", help="Output directory for reports")
    parser.add_argument("--verbose", "-v", action="store_true", help="Verbose output")
    args = parser.parse_args()

    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    runner = AcceptanceRunner(args.cases)

    if args.test:
        for s in runner.test_cases.get("sets", []):
            for test in s.get("tests", []):
                if test.get("id") == args.test:
                    result = runner.run_single_test(test)
                    print(f"\nTest: {result.test_id} - {result.test_name}")
                    print(f"Passed: {'✅' if result.passed else '❌'}")
                    print(f"Reason: {result.reason}")
                    return 0 if result.passed else 1
        print(f"Test '{args.test}' not found")
        return 1

    if args.set:
        set_result = runner.run_set(args.set)
        print(f"\nSet: {set_result.set_name}")
        print(f"Pass Rate: {set_result.pass_rate}%")
        return 0 if set_result.failed_tests == 0 else 1

    report = runner.run_all()
    runner.print_summary(report)
    runner.save_report(report, args.output)
    return 0 if report.failed_tests == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
