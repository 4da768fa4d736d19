"""Report emission: canonical JSON, markdown summaries and CSV rows.

The JSON document is the authoritative format (schema in
``docs/report_schema.json``); the CSV is a flat 40-column row per
repository, plot-ready for radar/heatmap tooling; markdown is the
human-readable summary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime

import hsbr
from hsbr.errors import ValidationError
from hsbr.model import (
    CQ_SUB_METRICS,
    Dimension,
    Histogram,
    HSBRReport,
    MetricId,
    TOP_LEVEL_METRICS,
)

REPORT_SCHEMA_VERSION = 1

REPORT_FORMATS = ("json", "markdown", "csv-row")

#: Flat per-repository row: identity and provenance, the aggregate
#: scores, then every normalized metric (16 top-level + 15 sub-metrics).
CSV_HEADER: tuple[str, ...] = (
    "repo_id", "schema_version", "calibration_id", "total", "risk_level",
    "dim_DI", "dim_PC", "dim_CQ", "dim_CI",
    *(m.value for m in TOP_LEVEL_METRICS),
    *(m.value for m in CQ_SUB_METRICS),
)


@dataclass(frozen=True)
class Provenance:
    """Run context stamped into every emitted report."""

    fetched_at: str
    calibration_id: str
    semantic_backend: str
    tool_version: str = hsbr.__version__


def _raw_payload(value) -> object:
    if isinstance(value, Histogram):
        return {str(k): v for k, v in value.bins}
    return value


def report_payload(report: HSBRReport, provenance: Provenance) -> dict:
    """JSON-ready structure with canonical (sorted) key order."""
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "repo_id": report.repo_id,
        "total": report.total,
        "risk_level": report.risk_level.value,
        "dimension_scores": {
            d.value: report.dimension_scores[d] for d in Dimension},
        "metrics": {
            m.value: report.vector.normalized[m]
            for m in MetricId if m in report.vector.normalized},
        "raw": {
            m.value: _raw_payload(v) for m, v in report.vector.raw.items()},
        "explanations": list(report.explanations),
        "notes": list(report.notes),
        "provenance": {
            "fetched_at": provenance.fetched_at,
            "calibration_id": provenance.calibration_id,
            "semantic_backend": provenance.semantic_backend,
            "tool_version": provenance.tool_version,
        },
    }


def _dump_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _markdown(report: HSBRReport, provenance: Provenance) -> str:
    lines = [
        f"# Risk report: {report.repo_id}",
        "",
        f"**Overall score:** {report.total:.4f} ({report.risk_level.value})",
        "",
        "| Dimension | Score |",
        "| --- | --- |",
    ]
    names = {
        Dimension.DI: "Dependency impact",
        Dimension.PC: "Payload concealment",
        Dimension.CQ: "Community quality",
        Dimension.CI: "Continuous integration",
    }
    for dimension in Dimension:
        lines.append(
            f"| {names[dimension]} | {report.dimension_scores[dimension]:.4f} |")
    lines.append("")
    if report.explanations:
        lines.append("## High-risk signals")
        lines.append("")
        for snippet in report.explanations:
            lines.append(f"- {snippet}")
        lines.append("")
    if report.notes:
        lines.append("## Notes")
        lines.append("")
        for note in report.notes:
            lines.append(f"- {note}")
        lines.append("")
    lines.append(
        f"_semantic: {provenance.semantic_backend} | calibration: "
        f"{provenance.calibration_id} | fetched: {provenance.fetched_at} | "
        f"tool: {provenance.tool_version}_")
    return "\n".join(lines) + "\n"


def csv_row(report: HSBRReport, provenance: Provenance) -> list[str]:
    cells = [
        report.repo_id,
        str(REPORT_SCHEMA_VERSION),
        provenance.calibration_id,
        repr(report.total),
        report.risk_level.value,
    ]
    cells.extend(repr(report.dimension_scores[d]) for d in Dimension)
    for metric in (*TOP_LEVEL_METRICS, *CQ_SUB_METRICS):
        cells.append(repr(report.vector.normalized[metric]))
    return cells


def emit_csv(reports: list[HSBRReport], provenances: list[Provenance]) -> str:
    """One header plus one flat row per repository."""
    lines = [",".join(CSV_HEADER)]
    for report, provenance in zip(reports, provenances):
        lines.append(",".join(csv_row(report, provenance)))
    return "\n".join(lines) + "\n"


def emit_report(report: HSBRReport, format: str, provenance: Provenance) -> bytes:
    """Render one report as json, markdown or a single csv-row."""
    if format == "json":
        return _dump_json(report_payload(report, provenance)).encode("utf-8")
    if format == "markdown":
        return _markdown(report, provenance).encode("utf-8")
    if format == "csv-row":
        header = ",".join(CSV_HEADER)
        row = ",".join(csv_row(report, provenance))
        return f"{header}\n{row}\n".encode("utf-8")
    raise ValidationError(
        f"unknown report format {format!r}; expected one of {REPORT_FORMATS}")


def corpus_summary_payload(
    reports: list[HSBRReport], calibration_id: str, semantic_backend: str
) -> dict:
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "calibration_id": calibration_id,
        "semantic_backend": semantic_backend,
        "tool_version": hsbr.__version__,
        "repositories": [
            {
                "repo_id": report.repo_id,
                "total": report.total,
                "risk_level": report.risk_level.value,
            }
            for report in sorted(reports, key=lambda r: r.repo_id)
        ],
    }


def dumps_canonical(payload: dict) -> str:
    return _dump_json(payload)
