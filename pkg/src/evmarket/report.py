"""CSV serialization of run reports and re-derivation of their cumulative columns.

Cell CSV columns, in order: every :class:`~evmarket.sim.RoundRecord` field,
then ``cum_objective, cum_tasks, cum_payments, cum_reward,
avg_price_per_task, regret``. Booleans are written 0/1, floats with ``repr``,
and undefined values (MAE of a non-learning variant, regret outside static
mode, average price before any task) as an empty cell.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict
from pathlib import Path

from .sim import CUMULATIVE_COLUMNS, ROUND_COLUMNS, RunReport

COLUMNS = ROUND_COLUMNS + CUMULATIVE_COLUMNS


def _cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(float(v))
    if v is None:
        return ""
    return str(v)


def cumulative_columns(rows: list[dict], r_star: float | None) -> list[dict]:
    """Running totals from per-round values (floats, summed in round order)."""
    out = []
    obj = tasks = pay = rew = 0.0
    for n, r in enumerate(rows, start=1):
        obj += float(r["objective"])
        tasks += float(r["tasks_completed"])
        pay += float(r["payments_total"])
        rew += float(r["reward"])
        out.append({
            "cum_objective": obj,
            "cum_tasks": int(tasks),
            "cum_payments": pay,
            "cum_reward": rew,
            "avg_price_per_task": pay / tasks if tasks else math.nan,
            "regret": n * r_star - rew if r_star is not None else math.nan,
        })
    return out


def report_rows(report: RunReport) -> list[dict]:
    base = [asdict(r) for r in report.records]
    r_star = report.r_star if report.static_mode else None
    return [{**b, **c} for b, c in zip(base, cumulative_columns(base, r_star))]


def report_csv(report: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in report_rows(report):
        w.writerow([_cell(row[c]) for c in COLUMNS])
    return buf.getvalue()


def write_atomic(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cell_meta(report: RunReport, scenario) -> dict:
    s = asdict(scenario)
    s["preference_set"] = list(s["preference_set"])
    return {"variant": report.variant, "seed": report.seed, "static_mode": report.static_mode,
            "r_star": report.r_star, "scenario": s}


def write_cell(report: RunReport, scenario, path: Path) -> None:
    write_atomic(path, report_csv(report))
    write_atomic(Path(path).with_suffix(".meta.json"), json.dumps(cell_meta(report, scenario), indent=1,
                                                                  sort_keys=True) + "\n")


def validate_cell(path: Path) -> list[str]:
    """Re-derive cumulative columns of a cell CSV; returns a list of mismatches."""
    path = Path(path)
    meta_path = path.with_suffix(".meta.json")
    r_star = None
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        if meta.get("static_mode"):
            r_star = meta.get("r_star")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            return [f"{path}: unexpected header"]
        rows = list(reader)
    errors = []
    derived = cumulative_columns(rows, r_star)
    for n, (row, want) in enumerate(zip(rows, derived), start=2):
        for col in CUMULATIVE_COLUMNS:
            got = row[col]
            exp = _cell(want[col])
            if got != exp:
                errors.append(f"{path}, row {n}: {col} is {got!r}, re-derived {exp!r}")
    return errors
