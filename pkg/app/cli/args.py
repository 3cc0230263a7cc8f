"""
Command-line arguments
======================

parse_args turns an argument list into a RunSpec; RunSpec.to_argv renders
it back so that parse_args(spec.to_argv()) == spec. Law strings are stored
in canonical form (two_point:2,0.5,0.8 becomes two_point:0.5,2,0.2).

An optional YAML run file (--config) supplies defaults for any flag, keyed
by the flag's long name without dashes (max-gen or max_gen); explicit flags
on the command line win.
"""

import argparse
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import yaml

from app.analytics.criteria import METHODS
from app.core.types import ModelKind
from app.environment.laws import (
    LawValidationError,
    canonical_parameter,
    format_clock_law,
    format_number,
    format_rate_law,
    parse_clock_law,
    parse_coupling,
    parse_rate_law,
)
from app.montecarlo.harness import parse_grid_range, random_master_seed

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("criterion", "simulate", "survival", "sweep", "compare", "trajectory")
FORMATS = ("csv", "json")

DEFAULT_MU = "two_point:0,2,0.5"
DEFAULT_NU = "exp:1.5"


# =============================================================================
# EXCEPTIONS
# =============================================================================

class RunSpecError(ValueError):
    """Invalid flag value or flag combination."""
    pass


# =============================================================================
# RUN SPEC
# =============================================================================

@dataclass(frozen=True)
class RunSpec:
    """Everything one CLI invocation needs; every field has a documented default."""
    subcommand: str
    model: ModelKind
    mu: str
    nu: str
    coupling: str
    n_trials: int
    master_seed: int
    max_generations: int
    population_cap: int
    horizon: float
    sweep_param: Optional[str] = None
    sweep_values: Optional[Tuple[float, ...]] = None
    method: str = "auto"
    mc_samples: int = 1_000_000
    fixed_rate: Optional[float] = None
    workers: int = 1
    output_format: str = "csv"
    out_path: Optional[str] = None
    verbose: bool = False

    def to_argv(self) -> List[str]:
        """Render back to an argument list."""
        argv = [
            self.subcommand,
            "--model", self.model.value,
            "--mu", self.mu,
            "--nu", self.nu,
            "--coupling", self.coupling,
            "--trials", str(self.n_trials),
            "--seed", str(self.master_seed),
            "--max-gen", str(self.max_generations),
            "--pop-cap", str(self.population_cap),
            "--horizon", format_number(self.horizon),
            "--method", self.method,
            "--mc-samples", str(self.mc_samples),
            "--workers", str(self.workers),
            "--format", self.output_format,
        ]
        if self.sweep_param is not None:
            values = ",".join(format_number(v) for v in self.sweep_values)
            argv += ["--grid", f"{self.sweep_param}={values}"]
        if self.fixed_rate is not None:
            argv += ["--fixed-rate", format_number(self.fixed_rate)]
        if self.out_path is not None:
            argv += ["--out", self.out_path]
        if self.verbose:
            argv.append("--verbose")
        return argv


# =============================================================================
# PARSER
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    """Argument parser; every option's help shows its default."""
    from config import settings

    parser = argparse.ArgumentParser(
        prog="survival",
        description="Survival of birth-death chains in random environments: "
                    "dispersion vs global environment vs fixed rate.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS, help="what to compute")
    parser.add_argument(
        "--model", choices=[m.value for m in ModelKind], default=ModelKind.DISPERSION.value,
        help="process for simulate, survival, sweep and trajectory",
    )
    parser.add_argument(
        "--mu", default=DEFAULT_MU,
        help="birth-rate law: point:l0 | two_point:l1,l2,p | discrete:l1:p1,... | uniform:lo,hi",
    )
    parser.add_argument(
        "--nu", default=DEFAULT_NU,
        help="clock law: exp:a | det:t0 | discrete:t1:q1,...",
    )
    parser.add_argument(
        "--coupling", default="independent",
        help="independent | comonotone | antimonotone",
    )
    parser.add_argument("--trials", type=int, default=settings.default_trials, help="trials per estimate")
    parser.add_argument(
        "--seed", default=str(settings.master_seed),
        help="64-bit master seed, or 'random' to draw one from OS entropy",
    )
    parser.add_argument("--max-gen", type=int, default=settings.max_generations, help="generation / epoch cap")
    parser.add_argument("--pop-cap", type=int, default=settings.population_cap, help="population cap")
    parser.add_argument(
        "--horizon", type=float, default=settings.fixed_horizon,
        help="time horizon of the fixed model and of trajectories",
    )
    parser.add_argument(
        "--sweep", default=None,
        help="sweep range param=start:stop:step (stop included), param in a, p, l1, l2, t0",
    )
    parser.add_argument("--grid", default=None, help="explicit sweep grid param=v1,v2,...")
    parser.add_argument("--method", choices=METHODS, default="auto", help="how criterion computes m")
    parser.add_argument("--mc-samples", type=int, default=settings.mc_samples, help="Monte Carlo draws for m")
    parser.add_argument(
        "--fixed-rate", type=float, default=None,
        help="rate of the fixed model (compare and fixed-model runs use E(Λ) when unset)",
    )
    parser.add_argument("--workers", type=int, default=settings.workers, help="process pool size")
    parser.add_argument("--format", choices=FORMATS, default="csv", help="output format")
    parser.add_argument("--out", default=None, help="output path (standard output when unset)")
    parser.add_argument("--config", default=None, help="YAML run file supplying flag values")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


def _load_run_file(parser: argparse.ArgumentParser, path: str) -> None:
    """Install a YAML run file's values as parser defaults."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except OSError as e:
        raise RunSpecError(f"cannot read run file {path}: {e.strerror}") from e
    except yaml.YAMLError as e:
        raise RunSpecError(f"run file {path} is not valid YAML: {e}") from e
    if not isinstance(data, dict):
        raise RunSpecError(f"run file {path} must hold a mapping of flag names to values")

    known = {action.dest for action in parser._actions}
    defaults = {}
    for key, value in data.items():
        dest = str(key).replace("-", "_")
        if dest not in known or dest in ("help", "config", "subcommand"):
            raise RunSpecError(f"run file {path}: unknown key {key!r}")
        defaults[dest] = value if value is None or dest == "verbose" else str(value)
    parser.set_defaults(**defaults)
    logger.debug(f"📄 loaded run file {path}: {sorted(defaults)}")


def _parse_sweep(sweep: Optional[str], grid: Optional[str]) -> Tuple[Optional[str], Optional[Tuple[float, ...]]]:
    if sweep and grid:
        raise RunSpecError("use either --sweep or --grid, not both")
    text = sweep or grid
    if not text:
        return None, None
    if "=" not in text:
        raise RunSpecError(f"sweep must look like param=values, got {text!r}")
    name, body = text.split("=", 1)
    try:
        param = canonical_parameter(name)
        if sweep:
            values = parse_grid_range(body)
        else:
            values = [float(v) for v in body.split(",") if v.strip()]
    except ValueError as e:
        raise RunSpecError(f"bad sweep {text!r}: {e}") from e
    if not values:
        raise RunSpecError(f"sweep {text!r} has no values")
    return param, tuple(float(v) for v in values)


def _seed(text: str) -> int:
    if str(text).strip().lower() == "random":
        seed = random_master_seed()
        logger.info(f"🎲 drew master seed {seed} from OS entropy")
        return seed
    try:
        seed = int(str(text), 0)
    except ValueError:
        raise RunSpecError(f"--seed must be an integer or 'random', got {text!r}") from None
    if not 0 <= seed < 2 ** 64:
        raise RunSpecError(f"--seed must fit in 64 bits, got {seed}")
    return seed


def _positive(name: str, value: int) -> int:
    if value < 1:
        raise RunSpecError(f"{name} must be >= 1, got {value}")
    return value


def parse_args(argv: Optional[Sequence[str]] = None) -> RunSpec:
    """
    Parse an argument list into a RunSpec.

    Raises:
        SystemExit: unknown flags or malformed numbers (argparse, status 2)
        RunSpecError: invalid law strings, sweeps or values
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        _load_run_file(parser, args.config)
        args = parser.parse_args(argv)

    try:
        mu = format_rate_law(parse_rate_law(args.mu))
        nu = format_clock_law(parse_clock_law(args.nu))
        coupling = parse_coupling(args.coupling).value
    except LawValidationError as e:
        raise RunSpecError(str(e)) from e

    sweep_param, sweep_values = _parse_sweep(args.sweep, args.grid)
    if args.subcommand == "sweep" and sweep_param is None:
        raise RunSpecError("sweep needs --sweep param=start:stop:step or --grid param=v1,v2,...")

    if args.horizon < 0:
        raise RunSpecError(f"--horizon must be >= 0, got {args.horizon}")
    if args.fixed_rate is not None and args.fixed_rate < 0:
        raise RunSpecError(f"--fixed-rate must be >= 0, got {args.fixed_rate}")

    return RunSpec(
        subcommand=args.subcommand,
        model=ModelKind(args.model),
        mu=mu,
        nu=nu,
        coupling=coupling,
        n_trials=_positive("--trials", int(args.trials)),
        master_seed=_seed(args.seed),
        max_generations=_positive("--max-gen", int(args.max_gen)),
        population_cap=_positive("--pop-cap", int(args.pop_cap)),
        horizon=float(args.horizon),
        sweep_param=sweep_param,
        sweep_values=sweep_values,
        method=args.method,
        mc_samples=_positive("--mc-samples", int(args.mc_samples)),
        fixed_rate=None if args.fixed_rate is None else float(args.fixed_rate),
        workers=_positive("--workers", int(args.workers)),
        output_format=args.format,
        out_path=args.out,
        verbose=bool(args.verbose),
    )

