"""Score files and report aggregation.

Score files are line-delimited JSON records:
(item_id, condition, criterion, score|"missing", judge_model, template_version).
The report is a plain-text table (conditions x the five criteria) plus a
machine-readable cell dict; per-column best and second-best cells are marked
with ``*`` and ``^``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import EmptyScores
from .judge import CRITERION_NAMES

MISSING = "missing"


@dataclass(frozen=True)
class ScoreRecord:
    item_id: str
    condition: str
    criterion: str
    score: float | None
    judge_model: str = ""
    template_version: str = ""


def write_score_file(path: str | Path, records: list[ScoreRecord]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for rec in records:
            handle.write(
                json.dumps(
                    {
                        "item_id": rec.item_id,
                        "condition": rec.condition,
                        "criterion": rec.criterion,
                        "score": MISSING if rec.score is None else rec.score,
                        "judge_model": rec.judge_model,
                        "template_version": rec.template_version,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_score_file(path: str | Path) -> list[ScoreRecord]:
    records = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            raw = json.loads(line)
            score = raw["score"]
            records.append(
                ScoreRecord(
                    item_id=raw["item_id"],
                    condition=raw["condition"],
                    criterion=raw["criterion"],
                    score=None if score == MISSING else float(score),
                    judge_model=raw.get("judge_model", ""),
                    template_version=raw.get("template_version", ""),
                )
            )
    return records


@dataclass(frozen=True)
class Cell:
    mean: float | None
    count: int
    missing: int


@dataclass
class EvalReport:
    conditions: list[str]
    criteria: list[str]
    cells: dict[tuple[str, str], Cell]
    judge_model: str = ""
    template_version: str = ""
    generated_at: str = ""


def aggregate(records: list[ScoreRecord], generated_at: str = "") -> EvalReport:
    """Arithmetic mean per (condition, criterion) over non-missing scores.

    Permutation-invariant over record order: scores are sorted before summing.
    """
    if not records:
        raise EmptyScores("no score records to aggregate")
    conditions: list[str] = []
    criteria: list[str] = []
    buckets: dict[tuple[str, str], list[float]] = {}
    missing: dict[tuple[str, str], int] = {}
    for rec in records:
        if rec.condition not in conditions:
            conditions.append(rec.condition)
        if rec.criterion not in criteria:
            criteria.append(rec.criterion)
        key = (rec.condition, rec.criterion)
        if rec.score is None:
            missing[key] = missing.get(key, 0) + 1
            buckets.setdefault(key, [])
        else:
            buckets.setdefault(key, []).append(rec.score)
    # canonical criterion order when the five standard names are used
    if set(criteria) <= set(CRITERION_NAMES):
        criteria = [c for c in CRITERION_NAMES if c in criteria]
    cells = {}
    for key, scores in buckets.items():
        ordered = sorted(scores)
        mean = sum(ordered) / len(ordered) if ordered else None
        cells[key] = Cell(mean=mean, count=len(ordered), missing=missing.get(key, 0))
    meta = records[0]
    return EvalReport(
        conditions=conditions,
        criteria=criteria,
        cells=cells,
        judge_model=meta.judge_model,
        template_version=meta.template_version,
        generated_at=generated_at,
    )


def format_mean(value: float | None) -> str:
    """Up to two decimals, trailing zeros trimmed, at least one decimal: 4.0, 4.3, 4.06."""
    if value is None:
        return "-"
    text = f"{value:.2f}".rstrip("0").rstrip(".")
    if "." not in text:
        text += ".0"
    return text


def _column_marks(report: EvalReport, criterion: str) -> dict[str, str]:
    """Best cell per column gets '*', second-best '^' (ties share the mark)."""
    means = {
        cond: report.cells[(cond, criterion)].mean
        for cond in report.conditions
        if (cond, criterion) in report.cells
        and report.cells[(cond, criterion)].mean is not None
    }
    distinct = sorted(set(means.values()), reverse=True)
    marks = {}
    for cond, mean in means.items():
        if distinct and mean == distinct[0]:
            marks[cond] = "*"
        elif len(distinct) > 1 and mean == distinct[1]:
            marks[cond] = "^"
        else:
            marks[cond] = ""
    return marks


def render_report(report: EvalReport) -> str:
    """Plain-text table; '*' marks the best cell per column, '^' the second-best."""
    marks = {crit: _column_marks(report, crit) for crit in report.criteria}
    rows = []
    for cond in report.conditions:
        row = [cond]
        for crit in report.criteria:
            cell = report.cells.get((cond, crit))
            if cell is None:
                row.append("-")
            else:
                row.append(format_mean(cell.mean) + marks[crit].get(cond, ""))
        rows.append(row)
    header = ["condition"] + list(report.criteria)
    widths = [
        max(len(header[i]), *(len(r[i]) for r in rows)) if rows else len(header[i])
        for i in range(len(header))
    ]

    def fmt_row(values: list[str]) -> str:
        return " | ".join(v.ljust(widths[i]) for i, v in enumerate(values)).rstrip()

    lines = []
    if report.judge_model or report.template_version or report.generated_at:
        lines.append(f"judge_model: {report.judge_model}")
        lines.append(f"template_version: {report.template_version}")
        lines.append(f"generated_at: {report.generated_at}")
        lines.append("")
    lines.append(fmt_row(header))
    lines.append("-+-".join("-" * w for w in widths))
    lines.extend(fmt_row(row) for row in rows)
    gaps = [
        (cond, crit, cell)
        for (cond, crit), cell in sorted(report.cells.items())
        if cell.missing
    ]
    if gaps:
        lines.append("")
        lines.append("cells with missing scores (scored/missing):")
        for cond, crit, cell in gaps:
            lines.append(f"  {cond} / {crit}: {cell.count}/{cell.missing}")
    lines.append("")
    lines.append("* best per column, ^ second-best")
    return "\n".join(lines) + "\n"


def report_cells(report: EvalReport) -> dict:
    """Machine-readable cells with full-precision means."""
    return {
        "judge_model": report.judge_model,
        "template_version": report.template_version,
        "generated_at": report.generated_at,
        "conditions": report.conditions,
        "criteria": report.criteria,
        "cells": [
            {
                "condition": cond,
                "criterion": crit,
                "mean": cell.mean,
                "count": cell.count,
                "missing": cell.missing,
            }
            for (cond, crit), cell in sorted(report.cells.items())
        ],
    }
