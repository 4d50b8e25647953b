"""Command-line runner.

    evmarket run      --scenario FILE --out DIR --seeds 0-4 --variants PK-OPT,BG
    evmarket compare  --scenario FILE --out DIR --seeds 0-29 --variants all
    evmarket sweep    --scenario FILE --out DIR --seeds 0-29 --variants PK-OPT --K-values 1,3,5,10
    evmarket validate DIR_OR_CSV [...]

Scenario files hold ``key = value`` lines (``#`` starts a comment); keys are
the :class:`~evmarket.sim.Scenario` fields. Values given as flags win over
the file, which wins over the defaults.
"""

from __future__ import annotations

import argparse
import io
import math
import re
import sys
import typing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .report import report_rows, validate_cell, write_atomic, write_cell
from .sim import VARIANTS, RunReport, Scenario, SimulationError, run


class UsageError(Exception):
    pass


@dataclass
class CliConfig:
    command: str
    scenario_path: Path | None
    out: Path
    seeds: list[int]
    variants: list[str]
    overrides: dict = field(default_factory=dict)
    k_values: list[int] = field(default_factory=list)
    jobs: int = 1
    targets: list[Path] = field(default_factory=list)


# ------------------------------------------------------------------ parsing

_FIELD_TYPES = typing.get_type_hints(Scenario)


def _convert(key: str, text: str):
    kind = _FIELD_TYPES[key]
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            v = float(text)
            if not math.isfinite(v):
                raise ValueError(text)
            return v
        if kind is str:
            return text
        # tuple of floats
        return tuple(float(x) for x in text.replace(" ", "").split(",") if x)
    except ValueError:
        name = getattr(kind, "__name__", str(kind))
        raise UsageError(f"scenario key {key!r}: cannot read {text!r} as {name}") from None


def parse_scenario_text(text: str, source: str = "<scenario>") -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}, line {n}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise UsageError(f"{source}, line {n}: unknown scenario key {key!r}")
        out[key] = _convert(key, value)
    return out


def scenario_text(s: Scenario) -> str:
    lines = []
    for f in fields(Scenario):
        v = getattr(s, f.name)
        if isinstance(v, tuple):
            v = ",".join(repr(float(x)) if isinstance(x, float) else str(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def _int_list(text: str, what: str) -> list[int]:
    """``"0-3,7"`` -> ``[0, 1, 2, 3, 7]``."""
    out = []
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        m = re.fullmatch(r"(\d+)-(\d+)", part)
        try:
            out += list(range(int(m[1]), int(m[2]) + 1)) if m else [int(part)]
        except ValueError:
            raise UsageError(f"--{what}: cannot read {part!r}") from None
    if not out:
        raise UsageError(f"--{what}: empty list")
    return out


def _variant_list(text: str) -> list[str]:
    if text.strip().lower() == "all":
        return list(VARIANTS)
    out = [v.strip().upper() for v in text.split(",") if v.strip()]
    for v in out:
        if v not in VARIANTS:
            raise UsageError(f"--variants: unknown variant {v!r} (choose from {', '.join(VARIANTS)})")
    if not out:
        raise UsageError("--variants: need at least one variant")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="evmarket", description="EV task marketplace simulator")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "compare", "sweep"):
        c = sub.add_parser(name)
        c.add_argument("--scenario", type=Path, help="flat key = value scenario file")
        c.add_argument("--out", type=Path, default=Path("out"))
        c.add_argument("--seeds", default="0")
        c.add_argument("--variants", default="all" if name == "compare" else "PK-OPT")
        c.add_argument("--K", dest="K", type=int)
        c.add_argument("--lambda", dest="lambda_km", type=float)
        c.add_argument("--rounds", type=int)
        c.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any scenario key (repeatable)")
        c.add_argument("--jobs", type=int, default=1, help="cells run in parallel processes")
        if name == "sweep":
            c.add_argument("--K-values", dest="k_values", default="1,3,5,10")
    v = sub.add_parser("validate")
    v.add_argument("targets", nargs="+", type=Path)
    return p


def parse_config(argv: list[str] | None = None) -> tuple[CliConfig, Scenario]:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:  # --help
            raise
        raise UsageError("bad command line") from exc
    if args.command == "validate":
        for t in args.targets:
            if not t.exists():
                raise UsageError(f"no such file or directory: {t}")
        return CliConfig("validate", None, Path("."), [], [], targets=list(args.targets)), Scenario()
    values: dict = {}
    if args.scenario is not None:
        if not args.scenario.exists():
            raise UsageError(f"scenario file not found: {args.scenario}")
        values.update(parse_scenario_text(args.scenario.read_text(), str(args.scenario)))
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (x.strip() for x in item.split("=", 1))
        if key not in _FIELD_TYPES:
            raise UsageError(f"--set: unknown scenario key {key!r}")
        overrides[key] = _convert(key, value)
    for key in ("K", "lambda_km", "rounds"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    values.update(overrides)
    for key in ("workers_csv", "tasks_csv"):
        if values.get(key) and not Path(values[key]).exists():
            raise UsageError(f"scenario key {key!r}: file not found: {values[key]}")
    scenario = Scenario(**values)
    try:
        scenario.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    cfg = CliConfig(args.command, args.scenario, args.out, _int_list(args.seeds, "seeds"),
                    _variant_list(args.variants), overrides, jobs=args.jobs)
    if args.command == "sweep":
        cfg.k_values = _int_list(args.k_values, "K-values")
    return cfg, scenario


# ------------------------------------------------------------------ execution

def cell_name(variant: str, seed: int) -> str:
    return f"{variant}_seed{seed}"


def _run_cell(job: tuple[Scenario, Path]) -> RunReport:
    scenario, path = job
    try:
        report = run(scenario)
    except SimulationError as exc:
        raise SimulationError(f"cell {scenario.variant} seed {scenario.seed}: {exc}") from exc
    write_cell(report, scenario, path)
    return report


def run_grid(base: Scenario, variants, seeds, out: Path, jobs: int = 1) -> dict[tuple[str, int], RunReport]:
    """Run every (variant, seed) cell, writing one CSV per cell into ``out``."""
    cells = [(replace(base, variant=v, seed=s), out / f"{cell_name(v, s)}.csv") for v in variants for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run_cell, cells))
    else:
        reports = [_run_cell(c) for c in cells]
    return {(c.variant, c.seed): r for (c, _), r in zip(cells, reports)}


CURVES = ("cum_objective", "cum_tasks", "avg_price_per_task", "mae", "reward", "regret")


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(float(v))
    return str(v)


def curve_csv(reports: dict, variant: str, seeds, column: str) -> str:
    """One row per round, one column per seed; every cell copied from a cell report."""
    rows = {s: report_rows(reports[(variant, s)]) for s in seeds}
    n = max(len(r) for r in rows.values())
    buf = io.StringIO()
    buf.write("round," + ",".join(f"seed{s}" for s in seeds) + "\n")
    for k in range(n):
        vals = [_fmt(rows[s][k][column]) if k < len(rows[s]) else "" for s in seeds]
        buf.write(f"{k}," + ",".join(vals) + "\n")
    return buf.getvalue()


def _stat(values) -> str:
    a = np.array([v for v in values if not math.isnan(v)], dtype=float)
    if a.size == 0:
        return "n/a"
    return f"{a.mean():.3f} ± {a.std(ddof=1) if a.size > 1 else 0.0:.3f}"


def summary_table(reports: dict, variants, seeds) -> str:
    head = ("variant", "cum_objective", "cum_tasks", "avg_price_per_task", "objective_per_task",
            "final_mae", "cum_reward", "budget_misses")
    lines = [f"seeds: {len(seeds)} (mean ± std)", " | ".join(head)]
    for v in variants:
        rs = [reports[(v, s)] for s in seeds]
        cols = [
            _stat([float(r.cum_objective[-1]) for r in rs]),
            _stat([float(r.cum_tasks[-1]) for r in rs]),
            _stat([r.avg_price_per_task for r in rs]),
            _stat([r.objective_per_task for r in rs]),
            _stat([float(r.mae_curve[-1]) for r in rs]),
            _stat([float(r.cum_reward[-1]) for r in rs]),
            _stat([float(sum(not x.budget_met for x in r.records)) for r in rs]),
        ]
        lines.append(" | ".join([v] + cols))
    return "\n".join(lines) + "\n"


def cmd_run(cfg: CliConfig, base: Scenario) -> str:
    reports = run_grid(base, cfg.variants, cfg.seeds, cfg.out, cfg.jobs)
    write_atomic(cfg.out / "scenario.txt", scenario_text(base))
    return summary_table(reports, cfg.variants, cfg.seeds)


def cmd_compare(cfg: CliConfig, base: Scenario) -> str:
    reports = run_grid(base, cfg.variants, cfg.seeds, cfg.out / "cells", cfg.jobs)
    for v in cfg.variants:
        for col in CURVES:
            write_atomic(cfg.out / f"{col}_{v}.csv", curve_csv(reports, v, cfg.seeds, col))
    text = summary_table(reports, cfg.variants, cfg.seeds)
    write_atomic(cfg.out / "summary.txt", text)
    write_atomic(cfg.out / "scenario.txt", scenario_text(base))
    return text


def cmd_sweep(cfg: CliConfig, base: Scenario) -> str:
    rows = ["K,variant,seed,cum_objective,cum_tasks,objective_per_task"]
    table = ["K | variant | objective_per_task (mean ± std) | cum_tasks (mean ± std)"]
    for k in cfg.k_values:
        reports = run_grid(replace(base, K=k), cfg.variants, cfg.seeds, cfg.out / f"K{k}", cfg.jobs)
        for v in cfg.variants:
            per = []
            for s in cfg.seeds:
                r = reports[(v, s)]
                rows.append(f"{k},{v},{s},{_fmt(float(r.cum_objective[-1]))},{int(r.cum_tasks[-1])},"
                            f"{_fmt(r.objective_per_task)}")
                per.append(r)
            table.append(f"{k} | {v} | {_stat([r.objective_per_task for r in per])} | "
                         f"{_stat([float(r.cum_tasks[-1]) for r in per])}")
    write_atomic(cfg.out / "sweep.csv", "\n".join(rows) + "\n")
    text = "\n".join(table) + "\n"
    write_atomic(cfg.out / "sweep_summary.txt", text)
    write_atomic(cfg.out / "scenario.txt", scenario_text(base))
    return text


def cmd_validate(cfg: CliConfig) -> tuple[str, list[str]]:
    files: list[Path] = []
    for t in cfg.targets:
        files += sorted(p for p in t.rglob("*.csv") if "_seed" in p.name) if t.is_dir() else [t]
    if not files:
        raise UsageError("no cell CSV files found")
    errors = []
    for f in files:
        errors += validate_cell(f)
    return f"checked {len(files)} cell file(s), {len(errors)} mismatch(es)\n", errors


def main(argv: list[str] | None = None) -> int:
    try:
        cfg, scenario = parse_config(argv)
        if cfg.command == "validate":
            text, errors = cmd_validate(cfg)
            sys.stdout.write(text)
            for e in errors:
                sys.stderr.write(e + "\n")
            return 1 if errors else 0
        handler = {"run": cmd_run, "compare": cmd_compare, "sweep": cmd_sweep}[cfg.command]
        sys.stdout.write(handler(cfg, scenario))
        return 0
    except UsageError as exc:
        sys.stderr.write(f"evmarket: error: {exc}\n")
        return 2
    except (SimulationError, ValueError, OSError) as exc:
        sys.stderr.write(f"evmarket: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
