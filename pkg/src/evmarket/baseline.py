"""Baseline greedy comparator: top-K by known preference, cheapest bid per task."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cars import PreferenceModel
from .domain import Bid, EnergyBudget, Task, Worker, eligible
from .potr import RecommendationMatrix
from .wibs import Assignment, BidGraph, default_penalty, make_assignment


@dataclass
class BaselineOutcome:
    assignment: Assignment
    violated_budget: bool
    unmatched_tasks: list[int]


def pk_topk(prefs: PreferenceModel, workers: Sequence[Worker], tasks: Sequence[Task], K: int,
            lambda_km: float) -> RecommendationMatrix:
    x = np.zeros((len(workers), len(tasks)), dtype=bool)
    for i, w in enumerate(workers):
        row = prefs.alpha_true[prefs.row(w.id)]
        cands = [j for j, s in enumerate(tasks) if eligible(w, s, lambda_km)]
        cands.sort(key=lambda j: (-row[int(tasks[j].z)], tasks[j].id))
        x[i, cands[:K]] = True
    return RecommendationMatrix(x, tuple(w.id for w in workers), tuple(t.id for t in tasks), K, 0, 0)


def bg_assign(bids: Sequence[Bid], tasks: Sequence[Task], budget: EnergyBudget | float = 0.0) -> BaselineOutcome:
    """Walk tasks by ascending id, give each to its cheapest still-free bidder."""
    required = budget.required_kwh if isinstance(budget, EnergyBudget) else float(budget)
    bids = list(bids)
    graph = BidGraph.build(bids, tasks)
    by_task: dict[int, list[Bid]] = {}
    for b in bids:
        by_task.setdefault(b.task_id, []).append(b)
    busy: set[int] = set()
    pairs = []
    unmatched = []
    for s in sorted(t.id for t in tasks):
        offers = sorted(by_task.get(s, []), key=lambda b: (b.amount, b.worker_id))
        pick = next((b for b in offers if b.worker_id not in busy), None)
        if pick is None:
            unmatched.append(s)
            continue
        busy.add(pick.worker_id)
        pairs.append((pick.worker_id, s))
    a = make_assignment(pairs, graph, required, default_penalty(bids))
    return BaselineOutcome(a, not a.feasible, unmatched)
