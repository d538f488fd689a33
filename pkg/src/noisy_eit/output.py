"""CSV/JSON writers for sweep records and contour grids.

Every file embeds the resolved run configuration: CSV files as ``#``-prefixed
header lines, JSON files under a top-level ``"metadata"`` key.  Nothing
time-dependent is written, so identical configurations give identical bytes.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .sweep import CSV_COLUMNS, ContourGrid, SpectrumRecord


def fmt(x: float) -> str:
    return f"{x:.12g}"


def _json_number(x: float):
    return None if math.isnan(x) else float(f"{x:.12g}")


def _failures(records: list[SpectrumRecord]) -> list[dict]:
    return [{"index": i, "error": r.error} for i, r in enumerate(records) if r.error]


def records_to_csv(records: list[SpectrumRecord], metadata: dict) -> str:
    meta = dict(metadata, failures=_failures(records))
    lines = [f"# {json.dumps(meta, sort_keys=True)}", ",".join(CSV_COLUMNS)]
    for record in records:
        row = record.row()
        lines.append(",".join(fmt(row[c]) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def records_to_json(records: list[SpectrumRecord], metadata: dict) -> str:
    payload = {
        "metadata": dict(metadata, failures=_failures(records)),
        "records": [{k: _json_number(v) for k, v in r.row().items()} for r in records],
    }
    return json.dumps(payload, indent=1, sort_keys=True) + "\n"


def contour_to_csv(grid: ContourGrid, metadata: dict) -> str:
    meta = dict(metadata, delta=grid.delta, failures=list(grid.errors))
    lines = [f"# {json.dumps(meta, sort_keys=True)}",
             "omega_c\\f0sq," + ",".join(fmt(f) for f in grid.f0sq)]
    for wc, row in zip(grid.omega_c, grid.alpha):
        lines.append(fmt(wc) + "," + ",".join(fmt(a) for a in row))
    return "\n".join(lines) + "\n"


def contour_to_json(grid: ContourGrid, metadata: dict) -> str:
    payload = {
        "metadata": dict(metadata, delta=grid.delta, failures=list(grid.errors)),
        "omega_c": [_json_number(v) for v in grid.omega_c],
        "f0sq": [_json_number(v) for v in grid.f0sq],
        "alpha": [[_json_number(a) for a in row] for row in grid.alpha],
    }
    return json.dumps(payload, indent=1, sort_keys=True) + "\n"


def write_text(path: str | Path | None, text: str) -> None:
    if path is None or str(path) == "-":
        print(text, end="")
    else:
        Path(path).write_text(text)


def read_records_csv(path: str | Path) -> tuple[dict, list[dict]]:
    """Parse a records CSV back into (metadata, rows)."""
    lines = Path(path).read_text().splitlines()
    metadata = json.loads(lines[0][2:]) if lines and lines[0].startswith("# ") else {}
    body = [ln for ln in lines if not ln.startswith("#")]
    header = body[0].split(",")
    rows = [dict(zip(header, map(float, ln.split(",")))) for ln in body[1:]]
    return metadata, rows
