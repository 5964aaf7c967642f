import csv
import enum
import io
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional

from regretobserver.tools import ro_bench
from regretobserver.tools import ro_errors
from regretobserver.tools import ro_synthesis

logger = logging.getLogger("ro_report")

CSV_COLUMNS = ["pattern", "observer", "avg_cost", "relative_pct", "is_best"]

PATTERN_LABELS = {
    "gaussian": "N(0,1)",
    "uniform-half": "U[0.5,1]",
    "uniform-full": "U[0,1]",
    "const": "1",
    "sin": "sin",
    "sawtooth": "sawtooth",
    "step": "step",
    "stairs": "stairs",
    "worst": "worst",
}

OBSERVER_LABELS = {"H2": "H2", "Hinf": "H∞", "R": "R"}


class ReportFormat(str, enum.Enum):
    CSV = "csv"
    JSON = "json"
    MARKDOWN = "markdown"


def _num(x: Optional[float]) -> Optional[float]:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return None
    return float(x)


def table_to_dict(table: ro_bench.ResultTable) -> Dict[str, Any]:
    return {
        "system": table.system,
        "observers": list(table.observers),
        "rows": [
            {
                "pattern": row.pattern,
                "cells": [
                    {
                        "observer": c.observer,
                        "avg_cost": _num(c.avg_cost),
                        "relative_pct": _num(c.relative_pct),
                        "is_best": c.is_best,
                        "error": c.error,
                    }
                    for c in row.cells
                ],
            }
            for row in table.rows
        ],
    }


def table_from_dict(d: Dict[str, Any]) -> ro_bench.ResultTable:
    try:
        table = ro_bench.ResultTable(system=d["system"], observers=tuple(d["observers"]))
        for r in d["rows"]:
            cells = []
            for c in r["cells"]:
                cells.append(ro_bench.ResultCell(
                    pattern=r["pattern"],
                    observer=c["observer"],
                    avg_cost=math.nan if c["avg_cost"] is None else float(c["avg_cost"]),
                    relative_pct=math.nan if c["relative_pct"] is None else float(c["relative_pct"]),
                    is_best=bool(c["is_best"]),
                    error=c.get("error"),
                ))
            table.rows.append(ro_bench.ResultRow(pattern=r["pattern"], cells=cells))
        return table
    except (KeyError, TypeError, ValueError) as e:
        raise ro_errors.BadConfig("results file is malformed: %s" % e)


def render_csv(table: ro_bench.ResultTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in table.rows:
        for c in row.cells:
            w.writerow([row.pattern, c.observer, repr(float(c.avg_cost)), repr(float(c.relative_pct)),
                        "true" if c.is_best else "false"])
    return buf.getvalue()


def render_json(table: ro_bench.ResultTable) -> str:
    return json.dumps(table_to_dict(table), indent=2) + "\n"


def _md_cell(c: ro_bench.ResultCell) -> str:
    if c.error is not None:
        return "error"
    if c.is_best and c.relative_pct == 0.0:
        return "**1**"
    text = "%.2f%%" % c.relative_pct
    return "**%s**" % text if c.is_best else text


def render_markdown(table: ro_bench.ResultTable) -> str:
    lines = [
        "### %s" % table.system,
        "",
        "| v, w | " + " | ".join(OBSERVER_LABELS.get(o, o) for o in table.observers) + " |",
        "|---|" + "---|" * len(table.observers),
    ]
    for row in table.rows:
        cells = [_md_cell(row.cell(o)) for o in table.observers]
        lines.append("| %s | %s |" % (PATTERN_LABELS.get(row.pattern, row.pattern), " | ".join(cells)))
    return "\n".join(lines) + "\n"


RENDERERS = {
    ReportFormat.CSV: render_csv,
    ReportFormat.JSON: render_json,
    ReportFormat.MARKDOWN: render_markdown,
}


def export_results(table: ro_bench.ResultTable, fmt, path) -> Path:
    fmt = ReportFormat(fmt)
    text = RENDERERS[fmt](table)
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    logger.info("wrote %s results for %s to %s", fmt.value, table.system, path)
    return path


def load_results_json(path) -> ro_bench.ResultTable:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ro_errors.BadConfig("cannot load results from %s: %s" % (path, e))
    return table_from_dict(d)


def save_maps_json(result: ro_synthesis.SynthesisResult, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(result.to_dict()) + "\n", encoding="utf-8")
    logger.info("wrote %s maps to %s", result.method.value, path)
    return path


def load_maps_json(path) -> ro_synthesis.SynthesisResult:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ro_errors.BadConfig("cannot load maps from %s: %s" % (path, e))
    return ro_synthesis.SynthesisResult.from_dict(d)
