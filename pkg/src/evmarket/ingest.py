"""CSV loaders for replaying recorded workers and tasks.

Workers: ``id,x_km,y_km,energy_per_km,range_km,min_range_km``
Tasks:   ``id,type,origin_x,origin_y,dest_x,dest_y,deliverable_kwh,slot``

Coordinates may instead be given as latitude/longitude (``lat,lon`` for
workers, ``origin_lat,origin_lon,dest_lat,dest_lon`` for tasks); they are then
projected to km around the centroid of all points in the file.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

from .domain import Task, TaskType, Worker, project_latlon_points

WORKER_COLUMNS = ("id", "x_km", "y_km", "energy_per_km", "range_km", "min_range_km")
WORKER_LATLON_COLUMNS = ("id", "lat", "lon", "energy_per_km", "range_km", "min_range_km")
TASK_COLUMNS = ("id", "type", "origin_x", "origin_y", "dest_x", "dest_y", "deliverable_kwh", "slot")
TASK_LATLON_COLUMNS = ("id", "type", "origin_lat", "origin_lon", "dest_lat", "dest_lon", "deliverable_kwh", "slot")


class IngestError(ValueError):
    def __init__(self, path, row: int | None, message: str):
        where = f"{path}" if row is None else f"{path}, row {row}"
        super().__init__(f"{where}: {message}")
        self.row = row


def _read(path, layouts):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IngestError(path, None, "missing header")
        header = tuple(h.strip() for h in header)
        if header not in layouts:
            raise IngestError(path, 1, f"expected header {','.join(layouts[0])}, got {','.join(header)}")
        rows = []
        for n, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise IngestError(path, n, f"expected {len(header)} fields, got {len(rec)}")
            rows.append((n, dict(zip(header, (c.strip() for c in rec)))))
    return path, header, rows


def _num(path, n, rec, key, kind=float):
    try:
        v = kind(rec[key])
    except ValueError:
        raise IngestError(path, n, f"{key}={rec[key]!r} is not a valid {kind.__name__}") from None
    if kind is float and not math.isfinite(v):
        raise IngestError(path, n, f"{key} must be finite")
    return v


def _check_ids(path, ids):
    seen = {}
    for n, i in ids:
        if i in seen:
            raise IngestError(path, n, f"duplicate id {i} (first on row {seen[i]})")
        seen[i] = n


def ingest_workers(path) -> list[Worker]:
    path, header, rows = _read(path, (WORKER_COLUMNS, WORKER_LATLON_COLUMNS))
    latlon = header == WORKER_LATLON_COLUMNS
    keys = ("lat", "lon") if latlon else ("x_km", "y_km")
    locs = [(_num(path, n, r, keys[0]), _num(path, n, r, keys[1])) for n, r in rows]
    if latlon:
        locs = project_latlon_points(locs)
    _check_ids(path, [(n, _num(path, n, r, "id", int)) for n, r in rows])
    out = []
    for (n, r), loc in zip(rows, locs):
        e = _num(path, n, r, "energy_per_km")
        rng = _num(path, n, r, "range_km")
        rmin = _num(path, n, r, "min_range_km")
        if e <= 0:
            raise IngestError(path, n, f"energy_per_km must be > 0, got {e}")
        if rng < 0 or rmin < 0:
            raise IngestError(path, n, "range_km and min_range_km must be >= 0")
        try:
            out.append(Worker(_num(path, n, r, "id", int), loc, e, rng, rmin))
        except ValueError as exc:
            raise IngestError(path, n, str(exc)) from None
    return out


def ingest_tasks(path) -> list[Task]:
    path, header, rows = _read(path, (TASK_COLUMNS, TASK_LATLON_COLUMNS))
    latlon = header == TASK_LATLON_COLUMNS
    keys = (("origin_lat", "origin_lon", "dest_lat", "dest_lon") if latlon
            else ("origin_x", "origin_y", "dest_x", "dest_y"))
    pts = []
    for n, r in rows:
        pts.append((_num(path, n, r, keys[0]), _num(path, n, r, keys[1])))
        pts.append((_num(path, n, r, keys[2]), _num(path, n, r, keys[3])))
    if latlon:
        pts = project_latlon_points(pts)
    _check_ids(path, [(n, _num(path, n, r, "id", int)) for n, r in rows])
    out = []
    for k, (n, r) in enumerate(rows):
        z = _num(path, n, r, "type", int)
        if z not in (0, 1, 2):
            raise IngestError(path, n, f"type must be 0, 1 or 2, got {z}")
        slot = _num(path, n, r, "slot", int)
        if slot < 0:
            raise IngestError(path, n, f"slot must be >= 0, got {slot}")
        kwh = _num(path, n, r, "deliverable_kwh")
        try:
            out.append(Task(_num(path, n, r, "id", int), TaskType(z), pts[2 * k], pts[2 * k + 1], kwh, slot))
        except ValueError as exc:
            raise IngestError(path, n, str(exc)) from None
    return out
