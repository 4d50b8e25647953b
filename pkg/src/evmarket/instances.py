"""Seeded random instances for tests, benchmarks and experiment scripts."""

from __future__ import annotations

import numpy as np

from .domain import Bid, Task, TaskType, Worker


def random_tasks(rng: np.random.Generator, n: int, region_km: float = 10.0, v2g_share: float | None = None,
                 first_id: int = 1, max_kwh: float = 10.0) -> list[Task]:
    out = []
    for k in range(n):
        if v2g_share is None:
            z = TaskType(int(rng.integers(0, 3)))
        else:
            z = TaskType.V2G if rng.random() < v2g_share else TaskType(int(rng.integers(0, 2)))
        o = tuple(float(c) for c in rng.uniform(0, region_km, 2))
        if z is TaskType.V2G:
            out.append(Task(first_id + k, z, o, o, float(rng.uniform(1.0, max_kwh))))
        else:
            d = tuple(float(c) for c in rng.uniform(0, region_km, 2))
            out.append(Task(first_id + k, z, o, d))
    return out


def random_workers(rng: np.random.Generator, n: int, region_km: float = 10.0, first_id: int = 1) -> list[Worker]:
    out = []
    for k in range(n):
        loc = tuple(float(c) for c in rng.uniform(0, region_km, 2))
        cap = float(rng.uniform(150, 400))
        out.append(Worker(first_id + k, loc, float(rng.uniform(0.12, 0.22)), cap * float(rng.uniform(0.2, 1.0)),
                          0.1 * cap, capacity_km=cap))
    return out


def random_bids(rng: np.random.Generator, workers, tasks, density: float = 0.5, low: float = 1.0,
                high: float = 20.0, integer: bool = False) -> list[Bid]:
    """Each (worker, task) pair bids independently with probability ``density``."""
    out = []
    for w in workers:
        for t in tasks:
            if rng.random() < density:
                amt = float(rng.integers(int(low), int(high) + 1)) if integer else float(rng.uniform(low, high))
                out.append(Bid(w.id, t.id, amt))
    return out


def wibs_instance(rng: np.random.Generator, max_workers: int = 8, max_tasks: int = 8, density: float = 0.45):
    """Small mixed-type auction with a random energy requirement.

    The requirement is a random fraction of the V2G energy on offer, so some
    instances are infeasible.
    """
    nw = int(rng.integers(1, max_workers + 1))
    ns = int(rng.integers(1, max_tasks + 1))
    workers = random_workers(rng, nw)
    tasks = random_tasks(rng, ns)
    bids = random_bids(rng, workers, tasks, density, integer=bool(rng.random() < 0.3))
    bid_on = {b.task_id for b in bids}
    offer = sum(t.deliverable_energy for t in tasks if t.z is TaskType.V2G and t.id in bid_on)
    budget = float(rng.uniform(0, 1.1)) * offer if rng.random() < 0.85 else 0.0
    return workers, tasks, bids, budget


def potr_instance(rng: np.random.Generator, max_cells: int = 12):
    """Small recommender instance: at most ``max_cells`` worker-task pairs.

    Returns (weights, workers, tasks, K, lambda_km, overrides) where
    ``overrides`` optionally fixes psi and v2g_min. Weights sometimes contain
    +inf entries or ties.
    """
    nw = int(rng.integers(1, 5))
    ns = max(1, min(int(rng.integers(1, 7)), max_cells // nw))
    workers, tasks = random_workers(rng, nw, region_km=14), random_tasks(rng, ns, region_km=14)
    w = rng.uniform(0, 1, (nw, ns))
    if rng.random() < 0.3:
        w[rng.random((nw, ns)) < 0.2] = np.inf
    if rng.random() < 0.3:
        w = np.round(w, 1)
    kw = {}
    if rng.random() < 0.5:
        kw = dict(psi=int(rng.integers(0, 4)), v2g_min=int(rng.integers(0, 3)))
    return w, workers, tasks, int(rng.integers(1, 4)), float(rng.uniform(3, 15)), kw
