"""Preference-aware task recommendation as an exact integer program.

Each worker gets a list of at most ``K`` eligible tasks, every task reaches
at least ``psi`` workers and every list holds at least ``v2g_min`` V2G tasks.
The constraint matrix is a network matrix, so the program is solved exactly
as a min-cost flow with lower bounds:

    source -> worker (cap K) -> [v2g hub (lower bound v2g_min)] -> task
           -> sink (lower bound psi)

Lower bounds are encoded as bonus arcs in a dominant cost tier, followed by
a tier counting ``+inf`` weights (unexplored arms), then the quantized
weight sum. Ties are settled deterministically by building the network in
(worker id, task id) order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .domain import Task, TaskType, Worker, eligibility_matrix
from .flow import MinCostFlow, quantize


class PotrInfeasible(Exception):
    def __init__(self, constraint: str, psi: int, v2g_min: int):
        self.constraint = constraint
        self.psi = psi
        self.v2g_min = v2g_min
        super().__init__(f"recommendation infeasible: {constraint} constraint cannot be met "
                         f"(psi={psi}, v2g_min={v2g_min})")


def derive_psi(num_workers: int, num_tasks: int, K: int) -> int:
    if num_tasks <= 0:
        raise ValueError("need at least one task to derive psi")
    return (num_workers * K) // num_tasks


def derive_v2g_min(num_v2g: int, num_tasks: int, K: int) -> int:
    if num_tasks <= 0:
        raise ValueError("need at least one task to derive v2g_min")
    return (num_v2g * K) // num_tasks


@dataclass
class RecommendationMatrix:
    entries: np.ndarray  # bool, workers x tasks
    worker_ids: tuple[int, ...]
    task_ids: tuple[int, ...]
    K: int
    psi: int
    v2g_min: int

    def pairs(self) -> list[tuple[int, int]]:
        """Selected (worker_id, task_id) pairs in lexicographic index order."""
        rows, cols = np.nonzero(self.entries)
        return [(self.worker_ids[i], self.task_ids[j]) for i, j in zip(rows, cols)]

    def lists(self) -> dict[int, list[int]]:
        return {w: [self.task_ids[j] for j in np.flatnonzero(self.entries[i])]
                for i, w in enumerate(self.worker_ids)}

    def violations(self, workers: Sequence[Worker], tasks: Sequence[Task], lambda_km: float) -> list[str]:
        """Every broken structural constraint, empty when the matrix is valid."""
        x = self.entries
        out = []
        if x.shape != (len(workers), len(tasks)):
            return ["shape mismatch"]
        if (x.sum(axis=1) > self.K).any():
            out.append("row sum exceeds K")
        if len(tasks) and (x.sum(axis=0) < self.psi).any():
            out.append("column sum below psi")
        is_v2g = np.array([t.z is TaskType.V2G for t in tasks], dtype=bool)
        if len(workers) and ((x & is_v2g).sum(axis=1) < self.v2g_min).any():
            out.append("v2g count below v2g_min")
        elig = np.array(eligibility_matrix(workers, tasks, lambda_km), dtype=bool).reshape(x.shape)
        if (x & ~elig).any():
            out.append("ineligible pair selected")
        return out


@dataclass
class PotrSolution:
    matrix: RecommendationMatrix
    objective: float
    relaxation_report: list[tuple[str, int, int]] = field(default_factory=list)
    num_sentinel: int = 0
    finite_objective: float = 0.0  # weight sum over selected finite entries


def _check_weights(weights: np.ndarray) -> None:
    if np.isnan(weights).any():
        raise ValueError("weights contain NaN")
    if (weights < 0).any():
        raise ValueError("weights must be nonnegative")
    if np.isneginf(weights).any():
        raise ValueError("weights must not be -inf")


class _PotrNetwork:
    """Flow network for one (weights, eligibility) instance; rebuilt per bound pair."""

    def __init__(self, weights: np.ndarray, elig: np.ndarray, is_v2g: np.ndarray, K: int):
        self.weights = weights
        self.elig = elig
        self.is_v2g = is_v2g
        self.K = K
        nw, ns = elig.shape
        pairs = [(i, j) for i in range(nw) for j in range(ns) if elig[i, j]]
        self.pairs = pairs
        # per-pair profit: sentinel tier over weight tier
        wq = []
        sent = []
        for i, j in pairs:
            w = weights[i, j]
            if math.isinf(w):
                sent.append(1)
                wq.append(0)
            else:
                sent.append(0)
                wq.append(quantize(float(w)))
        lower = sum(wq)
        sent_coef = lower + 1
        self.profit = [s * sent_coef + q for s, q in zip(sent, wq)]
        self.bonus = sum(sent) * sent_coef + lower + 1
        self.sent = sent

    def solve(self, psi: int, v2g_min: int, weighted: bool = True) -> tuple[bool, bool, np.ndarray]:
        """Returns (psi satisfied, v2g_min satisfied, selection).

        With ``weighted=False`` only the lower bounds are priced, which
        answers feasibility in a few cheap phases.
        """
        nw, ns = self.elig.shape
        K = self.K
        src = 0
        wnode = 1
        hub = 1 + nw
        tnode = 1 + 2 * nw
        sink = tnode + ns
        g = MinCostFlow(sink + 1)
        bonus = self.bonus if weighted else 1
        profit = self.profit if weighted else [0] * len(self.pairs)
        v2g_bonus_edges = []
        for i in range(nw):
            g.add_edge(src, wnode + i, K, 0)
            if v2g_min > 0:
                v2g_bonus_edges.append(g.add_edge(wnode + i, hub + i, min(v2g_min, K), -bonus))
            g.add_edge(wnode + i, hub + i, K, 0)
        pair_edges = []
        for (i, j), p in zip(self.pairs, profit):
            u = hub + i if self.is_v2g[j] else wnode + i
            pair_edges.append(g.add_edge(u, tnode + j, 1, -p))
        psi_bonus_edges = []
        for j in range(ns):
            if psi > 0:
                psi_bonus_edges.append(g.add_edge(tnode + j, sink, psi, -bonus))
            g.add_edge(tnode + j, sink, nw, 0)
        g.solve(src, sink, stop_on_nonnegative=True)
        psi_ok = all(g.flow_on(e) == psi for e in psi_bonus_edges)
        v2g_ok = all(g.flow_on(e) == min(v2g_min, K) for e in v2g_bonus_edges) and v2g_min <= K
        x = np.zeros((nw, ns), dtype=bool)
        for (i, j), e in zip(self.pairs, pair_edges):
            if g.flow_on(e):
                x[i, j] = True
        return psi_ok, v2g_ok, x


def _largest(pred, lo: int, hi: int) -> int:
    """Largest k in [lo, hi] with pred(k), for pred monotone decreasing and pred(lo) true."""
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if pred(mid):
            lo = mid
        else:
            hi = mid - 1
    return lo


def solve_potr(weights, workers: Sequence[Worker], tasks: Sequence[Task], K: int, lambda_km: float,
               allow_relaxation: bool = True, psi: int | None = None,
               v2g_min: int | None = None) -> PotrSolution:
    """Pick each worker's recommendation list maximizing the summed weights.

    ``weights[i, j]`` scores recommending ``tasks[j]`` to ``workers[i]``;
    ``+inf`` marks pairs that must be preferred over any finite weight.
    ``psi`` and ``v2g_min`` default to the values derived from raw counts.
    If the bounds cannot be met and ``allow_relaxation`` is set, psi is lowered
    first and v2g_min only if psi = 0 still fails; changes are reported.
    """
    weights = np.asarray(weights, dtype=float).reshape(len(workers), len(tasks))
    _check_weights(weights)
    worker_order = sorted(range(len(workers)), key=lambda i: workers[i].id)
    task_order = sorted(range(len(tasks)), key=lambda j: tasks[j].id)
    ws = [workers[i] for i in worker_order]
    ts = [tasks[j] for j in task_order]
    wts = weights[np.ix_(worker_order, task_order)] if ws and ts else weights
    is_v2g = np.array([t.z is TaskType.V2G for t in ts], dtype=bool)
    if ts:
        psi0 = derive_psi(len(ws), len(ts), K) if psi is None else psi
        v0 = derive_v2g_min(int(is_v2g.sum()), len(ts), K) if v2g_min is None else v2g_min
    else:
        psi0 = 0 if psi is None else psi
        v0 = 0 if v2g_min is None else v2g_min
    elig = np.array(eligibility_matrix(ws, ts, lambda_km), dtype=bool).reshape(len(ws), len(ts))
    net = _PotrNetwork(wts, elig, is_v2g, K)

    cache: dict[tuple[int, int], tuple[bool, bool]] = {}

    def attempt(p: int, v: int) -> tuple[bool, bool]:
        if (p, v) not in cache:
            cache[(p, v)] = net.solve(p, v, weighted=False)[:2]
        return cache[(p, v)]

    def ok(p: int, v: int) -> bool:
        a, b = attempt(p, v)
        return a and b

    psi_eff, v_eff = psi0, v0
    report: list[tuple[str, int, int]] = []
    if not ok(psi0, v0):
        if not allow_relaxation:
            if not attempt(0, v0)[1]:
                raise PotrInfeasible("v2g_min", psi0, v0)
            raise PotrInfeasible("psi", psi0, v0)
        if not ok(0, v0):
            v_eff = _largest(lambda v: ok(0, v), 0, v0 - 1)
        psi_eff = _largest(lambda p: ok(p, v_eff), 0, psi0 if v_eff != v0 else psi0 - 1)
        if psi_eff != psi0:
            report.append(("psi", psi0, psi_eff))
        if v_eff != v0:
            report.append(("v2g_min", v0, v_eff))
    x = net.solve(psi_eff, v_eff)[2]

    # back to caller's index order
    out = np.zeros((len(workers), len(tasks)), dtype=bool)
    if ws and ts:
        out[np.ix_(worker_order, task_order)] = x
    sel = weights[out]
    n_sent = int(np.isinf(sel).sum())
    finite = float(sel[np.isfinite(sel)].sum())
    objective = math.inf if n_sent else finite
    matrix = RecommendationMatrix(out, tuple(w.id for w in workers), tuple(t.id for t in tasks),
                                  K, psi_eff, v_eff)
    return PotrSolution(matrix, objective, report, n_sent, finite)


def feasible_actions(workers: Sequence[Worker], tasks: Sequence[Task], K: int, lambda_km: float,
                     psi: int | None = None, v2g_min: int | None = None):
    """Yield every feasible recommendation matrix (exponential; tiny instances only)."""
    nw, ns = len(workers), len(tasks)
    is_v2g = np.array([t.z is TaskType.V2G for t in tasks], dtype=bool)
    if psi is None:
        psi = derive_psi(nw, ns, K) if ns else 0
    if v2g_min is None:
        v2g_min = derive_v2g_min(int(is_v2g.sum()), ns, K) if ns else 0
    elig = np.array(eligibility_matrix(workers, tasks, lambda_km), dtype=bool).reshape(nw, ns)
    cells = [(i, j) for i in range(nw) for j in range(ns) if elig[i, j]]
    for mask in range(1 << len(cells)):
        x = np.zeros((nw, ns), dtype=bool)
        for b, (i, j) in enumerate(cells):
            if mask >> b & 1:
                x[i, j] = True
        if (x.sum(axis=1) > K).any():
            continue
        if ns and (x.sum(axis=0) < psi).any():
            continue
        if nw and ((x & is_v2g).sum(axis=1) < v2g_min).any():
            continue
        yield x
