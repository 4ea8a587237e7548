"""Human-readable and structured renderings of a verdict."""

import json

from .checker import Verdict
from .terms import Computation, print_term, Const

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "hytslcheck report",
    "type": "object",
    "required": ["formula", "outcome", "exit_code", "traces", "notes", "stages", "bounds"],
    "properties": {
        "formula": {"type": "string"},
        "outcome": {
            "enum": [
                "satisfied",
                "violated",
                "witness-found",
                "no-violation-found",
                "no-witness-found",
                "resource-exceeded",
            ]
        },
        "exit_code": {"type": "integer"},
        "traces": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["trace", "stem", "loop"],
                "properties": {
                    "trace": {"type": ["string", "null"]},
                    "stem": {"type": "array", "items": {"type": "string"}},
                    "loop": {"type": "array", "items": {"type": "string"}},
                    "computation": {
                        "type": "object",
                        "required": ["initial", "stem", "loop"],
                        "properties": {
                            "initial": {"type": "object"},
                            "stem": {"type": "array", "items": {"type": "object"}},
                            "loop": {"type": "array", "items": {"type": "object"}},
                        },
                    },
                },
            },
        },
        "partner": {"type": "string"},
        "notes": {"type": "array", "items": {"type": "string"}},
        "stages": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "states", "transitions"],
                "properties": {
                    "name": {"type": "string"},
                    "states": {"type": "integer"},
                    "transitions": {"type": "integer"},
                },
            },
        },
        "bounds": {"type": "object"},
    },
}


def _values(assignment) -> dict:
    return {str(ident): value for ident, value in assignment.items()}


def _computation(computation: Computation) -> dict:
    return {
        "initial": _values(computation.initial),
        "stem": [_values(a) for a in computation.stem],
        "loop": [_values(a) for a in computation.loop],
    }


def to_structured(verdict: Verdict) -> dict:
    """Plain-data form of a verdict, following REPORT_SCHEMA."""
    traces = []
    names = verdict.traces or (None,) * len(verdict.lassos)
    for index, (trace, lasso) in enumerate(zip(names, verdict.lassos)):
        entry = {
            "trace": trace,
            "stem": [str(s) for s in lasso.stem],
            "loop": [str(s) for s in lasso.loop],
        }
        if index < len(verdict.witnesses):
            entry["computation"] = _computation(verdict.witnesses[index])
        traces.append(entry)
    return {
        "formula": verdict.formula,
        "outcome": verdict.outcome,
        "exit_code": verdict.exit_code,
        "traces": traces,
        "partner": verdict.partner,
        "notes": list(verdict.notes),
        "stages": [{"name": n, "states": s, "transitions": t} for n, s, t in verdict.stats],
        "bounds": {key: value for key, value in verdict.bounds},
    }


def format_json(verdict: Verdict) -> str:
    return json.dumps(to_structured(verdict), indent=2, sort_keys=True) + "\n"


def _row(assignment) -> str:
    return ", ".join(f"{ident}={print_term(Const(value))}" for ident, value in assignment.items())


def format_text(verdict: Verdict) -> str:
    lines = [f"formula: {verdict.formula}", f"verdict: {verdict.outcome}"]
    if verdict.lassos:
        lines.append("witness:" if verdict.outcome == "witness-found" else "counterexample:")
        names = verdict.traces or ("trace",) * len(verdict.lassos)
        for index, (trace, lasso) in enumerate(zip(names, verdict.lassos)):
            lines.append(f"  {trace}: {lasso}")
            if index < len(verdict.witnesses):
                computation = verdict.witnesses[index]
                lines.append(f"    -1: {_row(computation.initial)}")
                for t, a in enumerate(computation.stem):
                    lines.append(f"    {t:>2}: {_row(a)}")
                if computation.loop:
                    lines.append("    loop:")
                    for t, a in enumerate(computation.loop, start=len(computation.stem)):
                        lines.append(f"    {t:>2}: {_row(a)}")
    if verdict.partner:
        lines.append(f"partner check (secondary): {verdict.partner}")
    if verdict.notes:
        lines.append("notes:")
        lines += [f"  - {note}" for note in verdict.notes]
    if verdict.stats:
        lines.append("stages:")
        lines += [f"  {name}: {states} states, {transitions} transitions" for name, states, transitions in verdict.stats]
    if verdict.bounds:
        lines.append("bounds: " + ", ".join(f"{key}={value}" for key, value in verdict.bounds))
    return "\n".join(lines) + "\n"
