"""CSV and JSON output.

CSV files follow RFC 4180 (comma separated, CRLF line ends, quoting where
needed).  Floats are written with ``repr`` so reruns produce identical
bytes.  The JSON results file has the form::

    {"experiment": kind, "config": {...}, "passed": bool,
     "records": [{"experiment", "params", "estimate", "stderr", "oracle",
                  "statistic", "wall_time", "passed"}, ...]}

``wall_time`` is left out of the CSV files so that they replay exactly.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict
from pathlib import Path

from .config import ExperimentConfig, ResultRecord

__all__ = ["to_csv", "write_csv", "write_results", "RECORD_FIELDS"]

RECORD_FIELDS = ("experiment", "params", "estimate", "stderr", "oracle", "statistic", "passed")


def _cell(v) -> str:
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def to_csv(rows: list[dict], fields: tuple | None = None) -> str:
    fields = tuple(fields or (rows[0].keys() if rows else ()))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_cell(r.get(f)) for f in fields])
    return buf.getvalue()


def write_csv(path: Path, rows: list[dict], fields: tuple | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(to_csv(rows, fields).encode())
    return path


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def write_results(out: Path, cfg: ExperimentConfig, records: list[ResultRecord], tables: dict, passed: bool) -> list:
    """Write ``results.csv``, ``results.json`` and one CSV per table."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    files = [write_csv(out / "results.csv", [r.row() for r in records], RECORD_FIELDS)]
    doc = {"experiment": cfg.kind, "config": asdict(cfg), "passed": passed,
           "records": [asdict(r) for r in records]}
    p = out / "results.json"
    p.write_text(json.dumps(_json_safe(doc), indent=2, sort_keys=True))
    files.append(p)
    for name, rows in sorted(tables.items()):
        files.append(write_csv(out / f"{name}.csv", rows))
    return files
