"""
Subcommand dispatch
===================

run(spec) executes one RunSpec and writes its artifact:

    criterion   CriterionReport (one record)
    simulate    one TrialOutcome of the selected model (trial 0 of survival)
    survival    one SurvivalEstimate
    sweep       SweepRow table
    compare     dispersion / global / fixed table on the same laws
    trajectory  event table time,delta,population

Exit status: 0 when the computation completed (whatever the verdicts),
2 for invalid inputs, 1 for I/O failures.
"""

import logging
import sys
from typing import Callable, Dict, Optional, TextIO

import numpy as np

from app.analytics.criteria import CriterionMethodError, build_report
from app.cli.args import RunSpec
from app.cli.serialize import (
    SWEEP_COLUMNS,
    comparison_record,
    sweep_record,
    to_csv,
    to_json,
    trajectory_csv,
    trajectory_record,
    write_text,
)
from app.core.types import ModelKind
from app.environment.laws import (
    EnvironmentLaw,
    LawValidationError,
    mean_rate,
    parse_clock_law,
    parse_coupling,
    parse_rate_law,
)
from app.montecarlo.harness import compare_models, derive_seed, estimate_survival, sweep
from app.processes.runners import (
    ConfigError,
    DispersionConfig,
    FixedConfig,
    GlobalConfig,
    ProcessConfig,
    run_trajectory,
    run_trial,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2


def environment(spec: RunSpec) -> EnvironmentLaw:
    return EnvironmentLaw(
        parse_rate_law(spec.mu), parse_clock_law(spec.nu), parse_coupling(spec.coupling)
    )


def process_config(spec: RunSpec, env: EnvironmentLaw) -> ProcessConfig:
    """Process configuration for the RunSpec's model."""
    if spec.model is ModelKind.DISPERSION:
        return DispersionConfig(env, max_generations=spec.max_generations, population_cap=spec.population_cap)
    if spec.model is ModelKind.GLOBAL:
        return GlobalConfig(env, max_epochs=spec.max_generations, population_cap=spec.population_cap)
    rate = mean_rate(env.rate_law) if spec.fixed_rate is None else spec.fixed_rate
    return FixedConfig(rate, horizon=spec.horizon, population_cap=spec.population_cap)


def _render(spec: RunSpec, records, columns=None) -> str:
    if spec.output_format == "json":
        return to_json(records)
    return to_csv(records, columns)


# =============================================================================
# SUBCOMMANDS
# =============================================================================

def _criterion(spec: RunSpec, env: EnvironmentLaw) -> str:
    report = build_report(
        env, method=spec.method, rng=np.random.default_rng(spec.master_seed), n_samples=spec.mc_samples,
    )
    record = report.to_dict()
    return to_json(record) if spec.output_format == "json" else to_csv([record])


def _simulate(spec: RunSpec, env: EnvironmentLaw) -> str:
    cfg = process_config(spec, env)
    outcome = run_trial(spec.model, cfg, np.random.default_rng(derive_seed(spec.master_seed, 0)))
    record = {"model": spec.model.value, **outcome.to_dict()}
    return to_json(record) if spec.output_format == "json" else to_csv([record])


def _survival(spec: RunSpec, env: EnvironmentLaw) -> str:
    estimate = estimate_survival(
        spec.model, process_config(spec, env), spec.n_trials, spec.master_seed, spec.workers,
    )
    record = estimate.to_dict()
    return to_json(record) if spec.output_format == "json" else to_csv([record])


def _sweep(spec: RunSpec, env: EnvironmentLaw) -> str:
    rows = sweep(
        spec.model, env, spec.sweep_param, list(spec.sweep_values),
        n_trials=spec.n_trials, master_seed=spec.master_seed,
        step_limit=spec.max_generations, population_cap=spec.population_cap, workers=spec.workers,
    )
    if spec.output_format == "json":
        return to_json([{**sweep_record(r), "diagnostic": r.diagnostic} for r in rows])
    return to_csv([sweep_record(r) for r in rows], SWEEP_COLUMNS)


def _compare(spec: RunSpec, env: EnvironmentLaw) -> str:
    rows = compare_models(
        env, n_trials=spec.n_trials, master_seed=spec.master_seed, fixed_rate=spec.fixed_rate,
        max_generations=spec.max_generations, population_cap=spec.population_cap,
        horizon=spec.horizon, workers=spec.workers,
    )
    return _render(spec, [comparison_record(r) for r in rows])


def _trajectory(spec: RunSpec, env: EnvironmentLaw) -> str:
    cfg = process_config(spec, env)
    trace = run_trajectory(
        spec.model, cfg, np.random.default_rng(derive_seed(spec.master_seed, 0)), horizon=spec.horizon,
    )
    logger.info(f"📈 trajectory ended by {trace.terminated_by} after {len(trace.events)} records")
    if spec.output_format == "json":
        return to_json(trajectory_record(trace))
    return trajectory_csv(trace)


SUBCOMMAND_HANDLERS: Dict[str, Callable[[RunSpec, EnvironmentLaw], str]] = {
    "criterion": _criterion,
    "simulate": _simulate,
    "survival": _survival,
    "sweep": _sweep,
    "compare": _compare,
    "trajectory": _trajectory,
}


def run(spec: RunSpec, stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None) -> int:
    """Execute one RunSpec and emit its artifact. Returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        env = environment(spec)
        text = SUBCOMMAND_HANDLERS[spec.subcommand](spec, env)
    except (LawValidationError, ConfigError, CriterionMethodError, ValueError) as e:
        logger.error(f"❌ {spec.subcommand} failed: {e}")
        stderr.write(f"error: {e}\n")
        return EXIT_USAGE

    try:
        write_text(text, spec.out_path, stdout)
    except OSError as e:
        stderr.write(f"error: cannot write {spec.out_path}: {e.strerror or e}\n")
        return EXIT_IO
    if spec.out_path:
        logger.info(f"💾 wrote {spec.subcommand} output to {spec.out_path}")
    return EXIT_OK
