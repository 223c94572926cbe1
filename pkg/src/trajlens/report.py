"""JSON and CSV serialisation of reports, and the published report schema."""

from __future__ import annotations

import csv
import io
import math
from fractions import Fraction

from . import __version__
from .trajectories import PReport, StateCheck, Witness

PREPORT_CSV_COLUMNS = ("horizon", "state", "t", "deviation", "epsilon", "verdict")

_NUM = {"type": "number"}
_NUM_OR_NULL = {"type": ["number", "null"]}

WITNESS_SCHEMA = {
    "type": "object",
    "required": ["key", "state", "play", "t", "t_exact", "deviation", "v_ref"],
    "properties": {
        "key": _NUM,
        "state": {"type": "string"},
        "play": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "t": _NUM,
        "t_exact": {"type": ["string", "null"]},
        "deviation": _NUM,
        "deviation_exact": {"type": ["string", "null"]},
        "v_ref": _NUM,
    },
}

PREPORT_SCHEMA = {
    "type": "object",
    "required": ["kind", "epsilon", "keys", "grid", "verdict", "threshold", "flags",
                 "worst_deviation", "witness", "checks"],
    "properties": {
        "kind": {"enum": ["P", "P'"]},
        "epsilon": _NUM,
        "keys": {"type": "array", "items": _NUM, "minItems": 1},
        "grid": {"type": "array", "items": _NUM},
        "verdict": {"enum": ["HOLDS", "VIOLATED"]},
        "threshold": _NUM_OR_NULL,
        "flags": {"type": "array", "items": {"type": "string"}},
        "worst_deviation": _NUM,
        "witness": {"oneOf": [{"type": "null"}, WITNESS_SCHEMA]},
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["key", "state", "plays", "limit_reached", "worst_upper",
                             "worst_lower", "violated", "v_ref", "grid_worst"],
                "properties": {
                    "key": _NUM,
                    "state": {"type": "string"},
                    "plays": {"type": "integer", "minimum": 0},
                    "limit_reached": {"type": "boolean"},
                    "worst_upper": _NUM,
                    "worst_lower": _NUM,
                    "violated": {"type": "boolean"},
                    "v_ref": _NUM,
                    "grid_worst": {"type": "array", "items": _NUM},
                },
            },
        },
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "trajlens report",
    "type": "object",
    "required": ["tool", "version", "command", "provenance", "result"],
    "properties": {
        "tool": {"const": "trajlens"},
        "version": {"type": "string"},
        "command": {"type": "string"},
        "provenance": {
            "type": "object",
            "required": ["model_sha256", "source", "parameters"],
            "properties": {
                "model_sha256": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
                "source": {"type": "object"},
                "parameters": {"type": "object"},
            },
        },
        "result": {"type": "object"},
    },
    "allOf": [
        {
            "if": {"properties": {"command": {"enum": ["check-p", "check-pprime"]}}},
            "then": {"properties": {"result": PREPORT_SCHEMA}},
        }
    ],
}


def _exact_str(x) -> str | None:
    return str(x) if isinstance(x, Fraction) else None


def envelope(command: str, provenance: dict, result: dict) -> dict:
    return {
        "tool": "trajlens",
        "version": __version__,
        "command": command,
        "provenance": provenance,
        "result": result,
    }


def witness_dict(w: Witness | None, ids) -> dict | None:
    if w is None:
        return None
    return {
        "key": float(w.key),
        "state": ids[w.state],
        "play": [ids[s] for s in w.play.sequence],
        "t": float(w.t),
        "t_exact": _exact_str(w.t),
        "deviation": float(w.deviation),
        "deviation_exact": _exact_str(w.deviation),
        "v_ref": float(w.v_ref),
    }


def _check_dict(c: StateCheck, ids) -> dict:
    return {
        "key": float(c.key) if not isinstance(c.key, int) else c.key,
        "state": ids[c.state],
        "plays": c.plays,
        "limit_reached": c.limit_reached,
        "worst_upper": float(c.worst_upper),
        "worst_lower": float(c.worst_lower),
        "violated": c.violated,
        "v_ref": float(c.v_ref),
        "grid_worst": [float(d) for d in c.grid_worst],
    }


def preport_dict(report: PReport, ids) -> dict:
    return {
        "kind": report.kind,
        "epsilon": report.epsilon,
        "keys": list(report.keys),
        "grid": [float(t) for t in report.grid],
        "verdict": report.verdict,
        "threshold": report.threshold,
        "flags": list(report.flags),
        "worst_deviation": report.worst_deviation,
        "witness": witness_dict(report.witness, ids),
        "checks": [_check_dict(c, ids) for c in report.checks],
    }


def preport_csv(report: PReport, ids) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PREPORT_CSV_COLUMNS)
    for c in report.checks:
        verdict = "VIOLATED" if c.violated else "HOLDS"
        for t, d in zip(report.grid, c.grid_worst):
            writer.writerow([c.key, ids[c.state], repr(float(t)), repr(float(d)), report.epsilon, verdict])
    return buf.getvalue()


def rows_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def jsonable(x):
    """Recursively convert Fractions and numpy scalars for ``json.dumps``."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, Fraction):
        return float(x)
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x
