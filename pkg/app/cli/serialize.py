"""
Output formats and their readers.

CSV: numbers with 17 significant digits (%.17g), +inf as `inf`, absent
values as empty cells, LF line endings. JSON: field names as in the record
types, shortest round-trip floats, non-finite numbers as the strings
"inf", "-inf" and "nan". Everything is UTF-8.
"""

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

from app.core.types import ComparisonRow, SweepRow
from app.processes.runners import Trajectory

SWEEP_COLUMNS = (
    "param", "value", "m", "predicted", "n_trials", "n_survived",
    "point", "ci_low", "ci_high", "seed",
)
TRAJECTORY_COLUMNS = ("time", "delta", "population")

_NON_FINITE = {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}

PathLike = Union[str, Path]


# =============================================================================
# CELLS
# =============================================================================

def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return "%.17g" % value
    return str(value)


def parse_cell(text: str) -> Any:
    """Inverse of format_cell: int, float, bool, None or the string itself."""
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return format_cell(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _restore(value: Any) -> Any:
    if isinstance(value, str) and value in _NON_FINITE:
        return _NON_FINITE[value]
    if isinstance(value, dict):
        return {k: _restore(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_restore(v) for v in value]
    return value


# =============================================================================
# RECORDS
# =============================================================================

def sweep_record(row: SweepRow) -> Dict[str, Any]:
    est = row.estimate
    return {
        "param": row.param,
        "value": row.value,
        "m": row.m,
        "predicted": row.predicted,
        "n_trials": est.n_trials if est else None,
        "n_survived": est.n_survived if est else None,
        "point": est.point if est else None,
        "ci_low": est.ci_low if est else None,
        "ci_high": est.ci_high if est else None,
        "seed": est.master_seed if est else None,
    }


def comparison_record(row: ComparisonRow) -> Dict[str, Any]:
    est = row.estimate
    return {
        "model": row.model.value,
        "predicted": row.predicted.value,
        "rate": row.rate,
        "n_trials": est.n_trials if est else None,
        "n_survived": est.n_survived if est else None,
        "point": est.point if est else None,
        "ci_low": est.ci_low if est else None,
        "ci_high": est.ci_high if est else None,
        "seed": est.master_seed if est else None,
        "diagnostic": row.diagnostic,
    }


def trajectory_rows(trace: Trajectory) -> List[Tuple[float, int, int]]:
    """(time, delta, population) rows, starting with the initial record."""
    rows = [(0.0, 0, trace.initial_population)]
    rows.extend((e.time, e.delta, e.population_after) for e in trace.events)
    return rows


def trajectory_record(trace: Trajectory) -> Dict[str, Any]:
    return {
        "model": trace.model.value,
        "initial_population": trace.initial_population,
        "terminated_by": trace.terminated_by,
        "generation_sizes": list(trace.generation_sizes),
        "events": [
            {"time": e.time, "delta": e.delta, "population": e.population_after, "kind": e.kind.value}
            for e in trace.events
        ],
    }


# =============================================================================
# WRITERS
# =============================================================================

def to_csv(records: Iterable[Dict[str, Any]], columns: Optional[Iterable[str]] = None) -> str:
    records = list(records)
    header = list(columns) if columns is not None else (list(records[0]) if records else [])
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for record in records:
        writer.writerow([format_cell(record.get(col)) for col in header])
    return buffer.getvalue()


def trajectory_csv(trace: Trajectory) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TRAJECTORY_COLUMNS)
    for time, delta, population in trajectory_rows(trace):
        writer.writerow([format_cell(float(time)), delta, population])
    return buffer.getvalue()


def to_json(payload: Any) -> str:
    return json.dumps(_jsonable(payload), ensure_ascii=False, indent=2) + "\n"


def write_text(text: str, path: Optional[PathLike], stream) -> None:
    """Write to `path`, or to `stream` when no path is given."""
    if path is None:
        stream.write(text)
        stream.flush()
        return
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


# =============================================================================
# READERS
# =============================================================================

def read_records_csv(path: PathLike) -> List[Dict[str, Any]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return [{k: parse_cell(v) for k, v in row.items()} for row in csv.DictReader(f)]


def read_sweep_csv(path: PathLike) -> List[Dict[str, Any]]:
    """Sweep rows; raises ValueError when the header is not the sweep contract."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        header = next(csv.reader(f), [])
    if tuple(header) != SWEEP_COLUMNS:
        raise ValueError(f"{path}: not a sweep file (header {header})")
    rows = read_records_csv(path)
    for row in rows:
        # Parameter names like "a" must not be read back as numbers
        row["param"] = str(row["param"])
        for key in ("value", "m", "point", "ci_low", "ci_high"):
            if row[key] is not None:
                row[key] = float(row[key])
    return rows


def read_trajectory_csv(path: PathLike) -> List[Tuple[float, int, int]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, [])
        if tuple(header) != TRAJECTORY_COLUMNS:
            raise ValueError(f"{path}: not a trajectory file (header {header})")
        return [(float(t), int(d), int(n)) for t, d, n in reader]


def read_json(path: PathLike) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return _restore(json.load(f))
