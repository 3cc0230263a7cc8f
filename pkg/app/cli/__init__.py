"""Command-line surface: argument parsing, dispatch and file formats."""
from .args import RunSpec, RunSpecError, build_parser, parse_args
from .runner import run
from .serialize import read_json, read_records_csv, read_sweep_csv, read_trajectory_csv

__all__ = [
    "RunSpec",
    "RunSpecError",
    "build_parser",
    "parse_args",
    "read_json",
    "read_records_csv",
    "read_sweep_csv",
    "read_trajectory_csv",
    "run",
]
