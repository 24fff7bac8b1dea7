"""Report assembly and serialization (JSON and CSV).

A report echoes the resolved run configuration (enough to reproduce the run
bit-for-bit, including seed and worker count), carries per-query records and
aggregates, and stamps the tool version. Timing fields are measurements and
are the only fields excluded from determinism comparisons.
"""
from __future__ import annotations

import csv
import io
import json
from typing import Any

from . import __version__
from .certify import BatchAggregates, CertificationResult
from .engine import RobustnessVerdict

TIMING_FIELDS = ("wall_time_s", "total_wall_time_s", "mean_wall_time_s")

REPORT_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "poolcert run report",
    "type": "object",
    "required": ["tool_version", "command", "config", "queries", "total_wall_time_s"],
    "properties": {
        "tool_version": {"type": "string"},
        "command": {"type": "string"},
        "config": {"type": "object"},
        "queries": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["index", "label"],
                "properties": {
                    "index": {"type": "integer"},
                    "label": {"type": "integer"},
                    "certified_radius": {"type": "number"},
                    "verdict": {"type": "string", "enum": ["Certified", "Unknown"]},
                    "margin": {"type": "number"},
                    "misclassified": {"type": "boolean"},
                    "raw_eps_l": {"type": "number"},
                    "wall_time_s": {"type": "number"},
                    "error": {"type": ["string", "null"]},
                    "trace": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["eps", "certified"],
                            "properties": {
                                "eps": {"type": "number"},
                                "certified": {"type": "boolean"},
                                "margin": {"type": "number"},
                            },
                        },
                    },
                    "violations": {"type": "integer"},
                    "samples": {"type": "integer"},
                },
            },
        },
        "aggregates": {
            "type": "object",
            "properties": {
                "mean_certified_radius": {"type": "number"},
                "mean_wall_time_s": {"type": "number"},
                "queries_counted": {"type": "integer"},
                "queries_misclassified": {"type": "integer"},
            },
        },
        "total_wall_time_s": {"type": "number"},
    },
}


def search_query_record(index: int, label: int, result: CertificationResult) -> dict:
    return {
        "index": index,
        "label": label,
        "certified_radius": result.certified_radius,
        "raw_eps_l": result.raw_eps_l,
        "misclassified": result.misclassified,
        "error": result.error,
        "wall_time_s": result.wall_time,
        "trace": [{"eps": t.eps, "certified": t.certified, "margin": t.margin}
                  for t in result.trace],
    }


def verify_query_record(index: int, label: int, verdict: RobustnessVerdict) -> dict:
    return {
        "index": index,
        "label": label,
        "verdict": verdict.verdict,
        "margin": verdict.margin,
    }


def build_report(command: str, config: dict, queries: list[dict],
                 aggregates: BatchAggregates | None, total_wall_time: float) -> dict:
    report = {
        "tool_version": __version__,
        "command": command,
        "config": config,
        "queries": queries,
        "total_wall_time_s": total_wall_time,
    }
    if aggregates is not None:
        report["aggregates"] = {
            "mean_certified_radius": aggregates.mean_certified_radius,
            "mean_wall_time_s": aggregates.mean_wall_time,
            "queries_counted": aggregates.queries_counted,
            "queries_misclassified": aggregates.queries_misclassified,
        }
    return report


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


# fixed column order for the delimited output
CSV_COLUMNS = ("index", "label", "verdict", "certified_radius", "margin",
               "misclassified", "wall_time_s", "error")

VOLUME_CSV_COLUMNS = ("activation", "rule", "trials", "mean_volume", "seed")


def report_to_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for q in report["queries"]:
        writer.writerow([q.get(c, "") for c in CSV_COLUMNS])
    return buf.getvalue()


def volume_report_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(VOLUME_CSV_COLUMNS)
    for r in reports:
        writer.writerow([r.activation, r.rule.value, r.trials,
                         repr(r.mean_volume), r.seed])
    return buf.getvalue()


def strip_timing(report: dict) -> dict:
    """Copy of a report with every timing field removed, for determinism diffs."""
    def scrub(node):
        if isinstance(node, dict):
            return {k: scrub(v) for k, v in node.items() if k not in TIMING_FIELDS}
        if isinstance(node, list):
            return [scrub(v) for v in node]
        return node
    return scrub(report)
