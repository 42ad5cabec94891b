"""Report serialization.

JSON: one document with sorted keys. Exact rationals become "p/q" strings,
floats stay numbers, non-finite floats become null. The wall-clock block sits
under the top-level "timing" key so two runs can be compared without it.

CSV: one table per diagnostic (``NN_kind.csv``) plus ``summary.csv``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from .scenarios import RunReport


def to_jsonable(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return str(obj)


def report_document(report: RunReport, include_timing: bool = True) -> dict:
    doc = {
        "schema": report.schema,
        "version": report.version,
        "config": report.config,
        "results": report.results,
        "golden": report.golden,
    }
    if include_timing:
        doc["timing"] = report.timing
    return to_jsonable(doc)


def _cell(v) -> str:
    v = to_jsonable(v)
    if v is None:
        return ""
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True, separators=(",", ":"))
    return str(v)


def _table_csv(rows: list[dict]) -> bytes:
    header: list[str] = []
    for r in rows:
        for k in r:
            if k not in header:
                header.append(k)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([_cell(r.get(k)) for k in header])
    return buf.getvalue().encode()


def emit_report(report: RunReport, fmt: str = "json", include_timing: bool = True):
    """JSON bytes, or for ``csv`` a mapping file name -> bytes."""
    if fmt == "json":
        doc = report_document(report, include_timing)
        return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode()
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    files = {}
    summary = []
    for r in report.results:
        summary.append({"index": r["index"], "kind": r["kind"], "status": r["status"],
                        "verdict": r["verdict"], "error": r.get("error")})
        payload = r.get("payload") or {}
        stem = f"{r['index']:02d}_{r['kind']}"
        if payload.get("table"):
            files[f"{stem}.csv"] = _table_csv(payload["table"])
        if payload.get("curve"):
            files[f"{stem}_curve.csv"] = _table_csv(payload["curve"])
    files["summary.csv"] = _table_csv(summary)
    return files


def write_report(report: RunReport, fmt: str, out: Path | None) -> list[Path]:
    """Write to ``out`` (a file for json, a directory for csv); stdout if None."""
    data = emit_report(report, fmt)
    if out is None:
        import sys
        if fmt == "json":
            sys.stdout.write(data.decode())
        else:
            for name, blob in data.items():
                sys.stdout.write(f"# {name}\n{blob.decode()}\n")
        return []
    if fmt == "json":
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_bytes(data)
        return [out]
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, blob in data.items():
        p = out / name
        p.write_bytes(blob)
        paths.append(p)
    return paths
