"""Shared marketplace types: tasks, workers, bids, energy accounting.

Coordinates are planar kilometres. Energy is kWh, efficiency kWh/km.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Iterable, Sequence

Point = tuple[float, float]

ROUND_MINUTES = 15


class TaskType(IntEnum):
    RIDESHARE = 0
    BATTERY_SWAP = 1
    V2G = 2


NUM_TASK_TYPES = len(TaskType)


class WorkerStatus(Enum):
    AVAILABLE = "available"
    BUSY = "busy"
    CHARGING = "charging"


def distance(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def project_latlon(lat: float, lon: float, lat0: float, lon0: float) -> Point:
    """Equirectangular projection of (lat, lon) degrees to km around (lat0, lon0)."""
    r_earth = 6371.0088
    x = math.radians(lon - lon0) * math.cos(math.radians(lat0)) * r_earth
    y = math.radians(lat - lat0) * r_earth
    return (x, y)


def project_latlon_points(points: Sequence[tuple[float, float]]) -> list[Point]:
    """Project many (lat, lon) pairs, anchored at their centroid."""
    if not points:
        return []
    lat0 = sum(p[0] for p in points) / len(points)
    lon0 = sum(p[1] for p in points) / len(points)
    return [project_latlon(lat, lon, lat0, lon0) for lat, lon in points]


@dataclass(frozen=True)
class Task:
    id: int
    z: TaskType
    origin: Point
    destination: Point
    deliverable_energy: float = 0.0
    slot_created: int = 0

    def __post_init__(self):
        object.__setattr__(self, "z", TaskType(self.z))
        if self.deliverable_energy < 0 or not math.isfinite(self.deliverable_energy):
            raise ValueError(f"task {self.id}: deliverable_energy must be finite and >= 0")
        if self.z is TaskType.V2G:
            if self.deliverable_energy <= 0:
                raise ValueError(f"task {self.id}: V2G task needs deliverable_energy > 0")
            if tuple(self.origin) != tuple(self.destination):
                raise ValueError(f"task {self.id}: V2G task must start where it ends")
        elif self.deliverable_energy != 0:
            raise ValueError(f"task {self.id}: only V2G tasks deliver energy")

    @property
    def service_distance(self) -> float:
        return distance(self.origin, self.destination)


@dataclass(frozen=True)
class Worker:
    """An EV offering its time.

    ``range_km`` is the remaining range, ``capacity_km`` the full-battery
    range (defaults to ``range_km``). ``until_round`` is the first round the
    worker is free again when BUSY or CHARGING.
    """

    id: int
    location: Point
    energy_per_km: float
    range_km: float
    min_range_km: float
    status: WorkerStatus = WorkerStatus.AVAILABLE
    until_round: int | None = None
    capacity_km: float | None = None

    def __post_init__(self):
        if not (self.energy_per_km > 0 and math.isfinite(self.energy_per_km)):
            raise ValueError(f"worker {self.id}: energy_per_km must be > 0")
        if self.range_km < 0:
            raise ValueError(f"worker {self.id}: range_km must be >= 0")
        if self.capacity_km is None:
            object.__setattr__(self, "capacity_km", self.range_km)
        if not 0 <= self.min_range_km <= self.capacity_km:
            raise ValueError(f"worker {self.id}: need 0 <= min_range_km <= capacity")

    @property
    def energy_kwh(self) -> float:
        return self.range_km * self.energy_per_km

    @property
    def spare_energy_kwh(self) -> float:
        """Energy that can be spent while keeping the reserve range."""
        return (self.range_km - self.min_range_km) * self.energy_per_km


@dataclass(frozen=True)
class Bid:
    worker_id: int
    task_id: int
    amount: float

    def __post_init__(self):
        if not (self.amount > 0 and math.isfinite(self.amount)):
            raise ValueError(f"bid ({self.worker_id}, {self.task_id}): amount must be finite and > 0")


@dataclass(frozen=True)
class EnergyLedgerEntry:
    worker_id: int
    task_id: int
    travel_energy: float
    service_energy: float
    total_draw: float = field(init=False)

    def __post_init__(self):
        if self.travel_energy < 0 or self.service_energy < 0:
            raise ValueError("energy components must be >= 0")
        object.__setattr__(self, "total_draw", self.travel_energy + self.service_energy)


@dataclass(frozen=True)
class EnergyBudget:
    required_kwh: float = 0.0

    def __post_init__(self):
        if self.required_kwh < 0:
            raise ValueError("required_kwh must be >= 0")


def v2g_indicator(z: TaskType) -> int:
    return 1 if TaskType(z) is TaskType.V2G else 0


def energy_to_perform(w: Worker, s: Task) -> EnergyLedgerEntry:
    travel = w.energy_per_km * distance(w.location, s.origin)
    if s.z is TaskType.V2G:
        service = s.deliverable_energy
    else:
        service = w.energy_per_km * s.service_distance
    return EnergyLedgerEntry(w.id, s.id, travel, service)


def eligible(w: Worker, s: Task, lambda_km: float) -> bool:
    if w.status is not WorkerStatus.AVAILABLE:
        return False
    if distance(w.location, s.origin) > lambda_km:
        return False
    return energy_to_perform(w, s).total_draw <= w.spare_energy_kwh


def eligibility_matrix(workers: Sequence[Worker], tasks: Sequence[Task], lambda_km: float) -> list[list[bool]]:
    return [[eligible(w, s, lambda_km) for s in tasks] for w in workers]


def check_unique_ids(items: Iterable, what: str) -> None:
    seen = set()
    for it in items:
        if it.id in seen:
            raise ValueError(f"duplicate {what} id {it.id}")
        seen.add(it.id)
