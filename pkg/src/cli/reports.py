"""
CSV / JSON report writers.

Hard invariants
- Identical inputs give byte-identical files: fixed column order, "\\n" line
  endings, floats as shortest round-trip decimals (repr), JSON keys sorted.
- Reports carry no timings or host data.
- Non-finite floats are written as the strings "inf" / "-inf" / "nan" in JSON.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.pipeline.runner import RunResult
from src.timescale.scale import KernelTable
from src.volterra2.problems import SolveReport

SCHEMA_VERSION = 1


def fmt(x: float) -> str:
    return repr(float(x))


def _plain(value: Any) -> Any:
    """numpy scalars/arrays and non-finite floats -> JSON-safe Python values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        f = float(value)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return value


class _Doc(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ReportRow(_Doc):
    component: Optional[int] = None
    t: float
    phi: float
    residual: float
    extras: dict[str, float] = {}


class MethodSummary(_Doc):
    residual: Any
    terms_or_iterations: int
    bound_checks: dict[str, Any]
    metadata: dict[str, Any]
    warnings: list[str]


class SolveDocument(_Doc):
    schema_version: int = SCHEMA_VERSION
    kind: str
    method: str
    methods: dict[str, MethodSummary]
    agreement: dict[str, Any]
    residual: Any
    terms_or_iterations: int
    bound_checks: dict[str, Any]
    metadata: dict[str, Any]
    rows: list[ReportRow]


def _summary(report: SolveReport) -> MethodSummary:
    return MethodSummary(
        residual=_plain(report.residual),
        terms_or_iterations=report.terms_or_iterations,
        bound_checks=_plain(report.bound_checks),
        metadata=_plain(report.metadata),
        warnings=list(report.warnings),
    )


def report_rows(result: RunResult) -> list[ReportRow]:
    """Rows of the primary method; one block per component for systems."""
    report = result.primary
    comps = report.components
    multi = len(comps) > 1
    res = np.atleast_2d(report.residuals)
    rows: list[ReportRow] = []
    for c, gf in enumerate(comps):
        pts = gf.ts.points
        for i in range(gf.ts.size):
            extras = {name: float(y.values[i]) for name, y in result.extras.items()}
            rows.append(
                ReportRow(
                    component=c + 1 if multi else None,
                    t=float(pts[i]),
                    phi=float(gf.values[i]),
                    residual=float(res[c, i]),
                    extras=extras,
                )
            )
    return rows


def build_document(result: RunResult) -> SolveDocument:
    primary_name = next(iter(result.reports))
    primary = result.primary
    summary = _summary(primary)
    return SolveDocument(
        kind=result.kind,
        method=primary_name,
        methods={name: _summary(r) for name, r in result.reports.items()},
        agreement=_plain(result.agreement),
        residual=summary.residual,
        terms_or_iterations=summary.terms_or_iterations,
        bound_checks=summary.bound_checks,
        metadata=summary.metadata,
        rows=report_rows(result),
    )


def render_json(doc: SolveDocument) -> str:
    payload = _plain(doc.model_dump(exclude_none=True))
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def render_csv(rows: list[ReportRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    multi = bool(rows) and rows[0].component is not None
    extra_cols = sorted(rows[0].extras) if rows else []
    header = (["component"] if multi else []) + ["t", "phi", "residual"] + extra_cols
    writer.writerow(header)
    for r in rows:
        line = ([str(r.component)] if multi else []) + [fmt(r.t), fmt(r.phi), fmt(r.residual)]
        line += [fmt(r.extras[c]) for c in extra_cols]
        writer.writerow(line)
    return buf.getvalue()


def render_resolvent_csv(table: KernelTable) -> str:
    """Columns t, s, gamma for every pair i >= j."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "s", "gamma"])
    pts = table.ts.points
    entries = table.entries
    for i in range(table.ts.size):
        for j in range(i + 1):
            writer.writerow([fmt(pts[i]), fmt(pts[j]), fmt(entries[i, j])])
    return buf.getvalue()


def write_reports(result: RunResult, out_prefix: str | Path) -> tuple[Path, Path]:
    """Write `<prefix>.csv` and `<prefix>.json`; returns both paths."""
    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    doc = build_document(result)
    csv_path = prefix.with_name(prefix.name + ".csv")
    json_path = prefix.with_name(prefix.name + ".json")
    csv_path.write_text(render_csv(doc.rows), encoding="utf-8", newline="")
    json_path.write_text(render_json(doc), encoding="utf-8", newline="")
    return csv_path, json_path
