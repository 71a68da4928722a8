"""Newline-delimited persistence format for branch traces.

One JSON object per line, one line per accepted branch point, each line
self-contained:

    {"schema_version": 1, "P": ..., "a": ..., "mu": ..., "n_modes": ...,
     "cosine_coeffs": [...], "gap_crest": ..., "gap_trough": ...,
     "residual_norm": ..., "crest_exponent": ..., "s_arclength": ...}

Floats are serialized with full round-trip precision, so reading a file
back reproduces the in-memory states bit for bit.  Writers append and
flush line by line; a reader asked to tolerate a truncated tail drops a
final partial line, which is what makes interrupted traces resumable.
"""

from __future__ import annotations

import json
import math
from typing import IO

from .spectral import PeriodicGrid
from .equation import WaveState
from .continuation import BranchPoint

SCHEMA_VERSION = 1

REQUIRED_FIELDS = (
    "schema_version", "P", "a", "mu", "n_modes", "cosine_coeffs",
    "gap_crest", "gap_trough", "residual_norm", "crest_exponent", "s_arclength",
)


class SchemaError(ValueError):
    """A branch-file line does not conform to the record schema."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        prefix = f"line {line_number}: " if line_number is not None else ""
        super().__init__(prefix + message)


def _json_float(x: float):
    return None if (x is None or math.isnan(x)) else float(x)


def point_to_record(point: BranchPoint) -> dict:
    state = point.state
    return {
        "schema_version": SCHEMA_VERSION,
        "P": state.grid.period,
        "a": state.a,
        "mu": state.mu,
        "n_modes": state.grid.n_modes,
        "cosine_coeffs": [float(c) for c in state.coeffs],
        "gap_crest": point.gap_crest,
        "gap_trough": point.gap_trough,
        "residual_norm": state.residual_norm,
        "crest_exponent": _json_float(point.crest_exponent),
        "s_arclength": point.s_arclength,
    }


def validate_record(record: dict, line_number: int | None = None) -> dict:
    if not isinstance(record, dict):
        raise SchemaError("record is not an object", line_number)
    missing = [k for k in REQUIRED_FIELDS if k not in record]
    if missing:
        raise SchemaError(f"missing fields {missing}", line_number)
    if record["schema_version"] != SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported schema_version {record['schema_version']}", line_number)
    coeffs = record["cosine_coeffs"]
    if not isinstance(coeffs, list) or len(coeffs) != record["n_modes"]:
        raise SchemaError(
            f"cosine_coeffs length {len(coeffs) if isinstance(coeffs, list) else '?'} "
            f"does not match n_modes {record['n_modes']}", line_number)
    n_points = 2 * (record["n_modes"] - 1)
    if n_points < 8 or record["P"] <= 0:
        raise SchemaError(f"invalid grid (P={record['P']}, n_modes={record['n_modes']})",
                          line_number)
    return record


def record_to_state(record: dict) -> WaveState:
    grid = PeriodicGrid(record["P"], 2 * (record["n_modes"] - 1))
    return WaveState(grid, record["cosine_coeffs"], record["mu"], record["a"],
                     record["residual_norm"])


def record_to_point(record: dict) -> BranchPoint:
    """Rebuild a branch point; newton_iters is not persisted (-1)."""
    state = record_to_state(record)
    exponent = record["crest_exponent"]
    return BranchPoint(
        state=state,
        s_arclength=record["s_arclength"],
        gap_crest=record["gap_crest"],
        gap_trough=record["gap_trough"],
        newton_iters=-1,
        crest_exponent=float("nan") if exponent is None else float(exponent),
    )


def write_record(fh: IO[str], point: BranchPoint) -> None:
    fh.write(json.dumps(point_to_record(point)) + "\n")
    fh.flush()


def read_records(path, tolerate_truncated_tail: bool = False) -> list[dict]:
    """Parse and validate a branch file.

    Raises :class:`SchemaError` naming the offending line, except that a
    partial final line is silently dropped when
    ``tolerate_truncated_tail`` is set (the resume contract).
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    records = []
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            if tolerate_truncated_tail and i == len(lines):
                break
            raise SchemaError(f"invalid JSON ({exc.msg})", i) from exc
        records.append(validate_record(obj, i))
    return records


def read_branch_points(path, tolerate_truncated_tail: bool = False) -> list[BranchPoint]:
    return [record_to_point(r) for r in
            read_records(path, tolerate_truncated_tail=tolerate_truncated_tail)]
