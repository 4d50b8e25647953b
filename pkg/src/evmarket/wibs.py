"""Reverse-auction winner selection under a V2G energy requirement.

Two selectors share one contract: :func:`solve_wibs_exact` (branch and
bound, exact, exponential in the number of V2G tasks) and :func:`bmw`
(iterated minimum-weight bipartite matching, polynomial, may fail to meet
the requirement). Winners are paid by :func:`second_price_payments`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .domain import Bid, EnergyBudget, Task, TaskType
from .flow import MinCostFlow, quantize

ENERGY_TOL = 1e-9
# the exact search stops refining once its bound is this close (in cost quanta)
OPTIMALITY_GAP = quantize(1e-10)


class WibsInfeasible(Exception):
    pass


@dataclass
class BidGraph:
    """Bipartite bid graph; edges carry the bid amount."""

    edges: dict[tuple[int, int], float]
    v2g_energy: dict[int, float]  # V2G task id -> deliverable kWh
    mandatory: tuple[int, ...]  # non-V2G task ids

    @classmethod
    def build(cls, bids: Iterable[Bid], tasks: Sequence[Task]) -> "BidGraph":
        by_id = {t.id: t for t in tasks}
        edges: dict[tuple[int, int], float] = {}
        for b in bids:
            if b.task_id not in by_id:
                raise ValueError(f"bid references unknown task {b.task_id}")
            key = (b.worker_id, b.task_id)
            if key in edges:
                raise ValueError(f"duplicate bid for worker {b.worker_id} on task {b.task_id}")
            edges[key] = b.amount
        v2g = {t.id: t.deliverable_energy for t in tasks if t.z is TaskType.V2G}
        mandatory = tuple(sorted(t.id for t in tasks if t.z is not TaskType.V2G))
        return cls(edges, v2g, mandatory)

    @property
    def workers(self) -> list[int]:
        return sorted({w for w, _ in self.edges})


@dataclass
class Assignment:
    pairs: tuple[tuple[int, int], ...]
    costs: dict[tuple[int, int], float]
    total_cost: float
    delivered_v2g_kwh: float
    required_kwh: float
    unassigned_mandatory: tuple[int, ...] = ()
    penalty: float = 0.0
    iterations: int = 1

    @property
    def feasible(self) -> bool:
        return self.delivered_v2g_kwh >= self.required_kwh - ENERGY_TOL

    @property
    def objective(self) -> float:
        """Bid cost plus the penalty for each uncovered non-V2G task."""
        return self.total_cost + self.penalty * len(self.unassigned_mandatory)

    def invariant_errors(self, graph: BidGraph) -> list[str]:
        out = []
        ws = [w for w, _ in self.pairs]
        ts = [s for _, s in self.pairs]
        if len(set(ws)) != len(ws):
            out.append("worker assigned twice")
        if len(set(ts)) != len(ts):
            out.append("task assigned twice")
        for p in self.pairs:
            if p not in graph.edges:
                out.append(f"pair {p} has no bid")
            elif self.costs.get(p) != graph.edges[p]:
                out.append(f"pair {p} cost differs from bid")
        if not math.isclose(self.total_cost, sum(self.costs[p] for p in self.pairs), abs_tol=1e-9):
            out.append("total_cost mismatch")
        delivered = sum(graph.v2g_energy.get(s, 0.0) for s in ts)
        if not math.isclose(delivered, self.delivered_v2g_kwh, abs_tol=1e-9):
            out.append("delivered energy mismatch")
        missing = tuple(s for s in graph.mandatory if s not in set(ts))
        if missing != tuple(self.unassigned_mandatory):
            out.append("unassigned list mismatch")
        return out


@dataclass
class PaymentSchedule:
    payments: dict[int, float]
    flagged: tuple[int, ...] = field(default=())  # winners that were not the lowest bidder

    @property
    def total(self) -> float:
        return float(sum(self.payments.values()))


def default_penalty(bids: Iterable[Bid]) -> float:
    return 1.0 + sum(b.amount for b in bids)


def make_assignment(pairs: Iterable[tuple[int, int]], graph: BidGraph, budget: float, penalty: float,
                iterations: int = 1) -> Assignment:
    pairs = tuple(sorted(pairs))
    costs = {p: graph.edges[p] for p in pairs}
    assigned = {s for _, s in pairs}
    return Assignment(
        pairs=pairs,
        costs=costs,
        total_cost=float(sum(costs.values())),
        delivered_v2g_kwh=float(sum(graph.v2g_energy.get(s, 0.0) for s in assigned)),
        required_kwh=budget,
        unassigned_mandatory=tuple(s for s in graph.mandatory if s not in assigned),
        penalty=penalty,
        iterations=iterations,
    )


def _matching_network(edges: list[tuple[int, int, int]]):
    ws = sorted({w for w, _, _ in edges})
    ts = sorted({s for _, s, _ in edges})
    wi = {w: 1 + k for k, w in enumerate(ws)}
    ti = {s: 1 + len(ws) + k for k, s in enumerate(ts)}
    sink = 1 + len(ws) + len(ts)
    g = MinCostFlow(sink + 1)
    for w in ws:
        g.add_edge(0, wi[w], 1, 0)
    eids = [g.add_edge(wi[w], ti[s], 1, c) for w, s, c in edges]
    for s in ts:
        g.add_edge(ti[s], sink, 1, 0)
    return g, eids, sink


def min_weight_matching(edges: dict[tuple[int, int], float] | Iterable[tuple[int, int, float]]) -> set[tuple[int, int]]:
    """Maximum-cardinality matching of least total weight.

    ``edges`` maps (worker, task) to a weight, or is an iterable of
    (worker, task, weight) triples.
    """
    items = sorted(edges.items()) if isinstance(edges, dict) else sorted(((w, s), c) for w, s, c in edges)
    if not items:
        return set()
    triples = [(w, s, quantize(c)) for (w, s), c in items]
    g, eids, sink = _matching_network(triples)
    g.solve(0, sink)
    return {(w, s) for (w, s, _), e in zip(triples, eids) if g.flow_on(e)}


def max_deliverable_v2g(bids: Iterable[Bid], tasks: Sequence[Task]) -> float:
    """Most V2G energy any one-to-one assignment of the bids can deliver."""
    graph = BidGraph.build(bids, tasks)
    triples = [(w, s, -quantize(graph.v2g_energy[s])) for (w, s) in sorted(graph.edges) if s in graph.v2g_energy]
    if not triples:
        return 0.0
    g, eids, sink = _matching_network(triples)
    g.solve(0, sink, stop_on_nonnegative=True)
    return float(sum(graph.v2g_energy[s] for (w, s, _), e in zip(triples, eids) if g.flow_on(e)))


class _ExactSearch:
    """Branch and bound over which V2G tasks are served.

    Each node fixes a set of forced V2G tasks and a set of still-free ones.
    Bounds: a fractional knapsack cover of the missing energy, and a
    Lagrangian matching where every kWh delivered earns ``mu``.
    """

    def __init__(self, graph: BidGraph, budget: float, penalty: float):
        self.graph = graph
        self.budget = budget
        self.penalty = penalty
        self.qpen = quantize(penalty)
        self.mand_edges = [(w, s, quantize(c) - self.qpen) for (w, s), c in sorted(graph.edges.items())
                           if s not in graph.v2g_energy]
        self.v2g_edges: dict[int, list[tuple[int, int, int]]] = {}
        for (w, s), c in sorted(graph.edges.items()):
            if s in graph.v2g_energy:
                self.v2g_edges.setdefault(s, []).append((w, s, quantize(c)))
        self.force = 1 + sum(abs(c) for _, _, c in self.mand_edges) + sum(
            c for es in self.v2g_edges.values() for _, _, c in es)
        self.cheapest = {s: min(c for _, _, c in es) for s, es in self.v2g_edges.items()}
        # candidate V2G tasks in order of cost per kWh, ties by id
        self.order = sorted(self.v2g_edges, key=lambda s: (self.cheapest[s] / graph.v2g_energy[s], s))
        self.best_cost: float = math.inf
        self.best_pairs: list[tuple[int, int]] | None = None
        self.nodes = 0
        self.mu = 0.0

    @staticmethod
    def _match(edges) -> list[int]:
        if not edges:
            return []
        g, eids, sink = _matching_network(edges)
        g.solve(0, sink, stop_on_nonnegative=True)
        return [k for k, e in enumerate(eids) if g.flow_on(e)]

    def _offer(self, pairs: list[tuple[int, int]]):
        """Record ``pairs`` as incumbent if it meets the budget and is cheaper."""
        v = self.graph.v2g_energy
        if sum(v.get(s, 0.0) for _, s in pairs) < self.budget - ENERGY_TOL:
            return
        cost = sum(quantize(self.graph.edges[p]) - (0 if p[1] in v else self.qpen) for p in pairs)
        if cost < self.best_cost:
            self.best_cost, self.best_pairs = cost, sorted(pairs)

    def relax(self, forced: list[int]):
        """Cheapest matching covering mandatory tasks as possible plus all ``forced`` V2G tasks."""
        edges = list(self.mand_edges)
        for s in forced:
            edges += [(w, s, c - self.force) for w, s, c in self.v2g_edges[s]]
        picked = self._match(edges)
        got = {edges[k][1] for k in picked}
        if any(s not in got for s in forced):
            return None, None
        cost = sum(edges[k][2] for k in picked) + self.force * len(forced)
        return cost, [edges[k][:2] for k in picked]

    def lagrange(self, forced: list[int], free: list[int], mu: float):
        """Lower bound on every completion of this node, plus the matching behind it."""
        v = self.graph.v2g_energy
        edges = list(self.mand_edges)
        for s in forced:
            q = quantize(mu * v[s])
            edges += [(w, s, c - self.force - q) for w, s, c in self.v2g_edges[s]]
        for s in free:
            q = quantize(mu * v[s])
            edges += [(w, s, c - q) for w, s, c in self.v2g_edges[s] if c < q]
        picked = self._match(edges)
        pairs = [edges[k][:2] for k in picked]
        got = {s for _, s in pairs}
        if any(s not in got for s in forced):
            return math.inf, pairs
        # each mu * kWh term was rounded once; the slack keeps the bound valid
        slack = len(forced) + len(free) + 1
        lb = sum(edges[k][2] for k in picked) + self.force * len(forced) + quantize(mu * self.budget) - slack
        return lb, pairs

    def seed_incumbent(self):
        """Offer the cheapest among the most-energy assignments as a first incumbent."""
        v = self.graph.v2g_energy
        big = 1 + self.force
        edges = list(self.mand_edges)
        for s in self.order:
            q = quantize(v[s])
            edges += [(w, s, c - big * q) for w, s, c in self.v2g_edges[s]]
        self._offer([edges[k][:2] for k in self._match(edges)])

    def tune(self, iters: int = 14) -> bool:
        """Pick ``mu`` at the root by bisection on the delivered-energy subgradient.

        Returns True once the bound proves the incumbent optimal.
        """
        v = self.graph.v2g_energy
        if not self.order or self.budget <= ENERGY_TOL:
            return False
        # a kWh may be worth displacing a covered non-V2G task, so mu can exceed the penalty per kWh
        top = max(c for es in self.v2g_edges.values() for _, _, c in es) + self.qpen
        lo, hi = 0.0, 2 * top / (1 << 40) / min(v[s] for s in self.order)
        best_lb = -math.inf
        for k in range(iters):
            mu = hi if k == 0 else (lo + hi) / 2
            lb, pairs = self.lagrange([], self.order, mu)
            self._offer(pairs)
            if lb > best_lb:
                best_lb, self.mu = lb, mu
            if best_lb + OPTIMALITY_GAP >= self.best_cost:
                return True
            if k == 0:
                continue
            if sum(v.get(s, 0.0) for _, s in pairs) < self.budget:
                lo = mu
            else:
                hi = mu
        return False

    def energy_cap(self, tasks: list[int]) -> float:
        """Most energy a one-to-one assignment restricted to ``tasks`` can deliver."""
        v = self.graph.v2g_energy
        edges = [(w, s, -quantize(v[s])) for s in tasks for w, s, _ in self.v2g_edges[s]]
        return sum(v[edges[k][1]] for k in self._match(edges))

    def cover_bound(self, need: float, free: list[int]) -> float:
        """Fractional min-cost cover of ``need`` kWh by the free V2G tasks."""
        bound = 0.0
        for s in free:  # already sorted by cost per kWh
            e = self.graph.v2g_energy[s]
            if e >= need - ENERGY_TOL:
                return bound + self.cheapest[s] * need / e
            bound += self.cheapest[s]
            need -= e
        return math.inf

    def search(self, depth: int, forced: list[int]):
        self.nodes += 1
        need = self.budget - sum(self.graph.v2g_energy[s] for s in forced)
        if need <= ENERGY_TOL:
            base, chosen = self.relax(forced)
            if base is not None and base < self.best_cost:
                self.best_cost, self.best_pairs = base, sorted(chosen)
            return
        free = self.order[depth:]
        if self.cover_bound(need, free) == math.inf:
            return
        if self.energy_cap(forced + free) < self.budget - ENERGY_TOL:
            return
        lb, pairs = self.lagrange(forced, free, self.mu)
        if lb == math.inf:
            return
        self._offer(pairs)
        if lb + OPTIMALITY_GAP >= self.best_cost:
            return
        s = self.order[depth]
        self.search(depth + 1, forced + [s])
        self.search(depth + 1, forced)


def solve_wibs_exact(bids: Sequence[Bid], tasks: Sequence[Task], workers=None,
                     budget: EnergyBudget | float = 0.0, unassigned_penalty: float | None = None) -> Assignment:
    """Least-cost winner set meeting the V2G requirement.

    Minimizes bid cost plus ``unassigned_penalty`` per uncovered non-V2G
    task. The default penalty exceeds the sum of all bids, so coverage is
    maximized first. Raises :class:`WibsInfeasible` if no one-to-one
    assignment of the bids can deliver the required energy.
    """
    required = budget.required_kwh if isinstance(budget, EnergyBudget) else float(budget)
    bids = list(bids)
    if workers is not None:
        known = {w.id for w in workers}
        for b in bids:
            if b.worker_id not in known:
                raise ValueError(f"bid references unknown worker {b.worker_id}")
    graph = BidGraph.build(bids, tasks)
    penalty = default_penalty(bids) if unassigned_penalty is None else float(unassigned_penalty)
    reachable = sum(graph.v2g_energy[s] for s in {s for _, s in graph.edges} if s in graph.v2g_energy)
    if reachable < required - ENERGY_TOL:
        raise WibsInfeasible(f"V2G requirement {required} kWh exceeds the {reachable} kWh all bid-on V2G tasks hold")
    search = _ExactSearch(graph, required, penalty)
    search.seed_incumbent()
    if not search.tune():
        search.search(0, [])
    if search.best_pairs is None:
        raise WibsInfeasible(f"no one-to-one assignment delivers {required} kWh")
    return make_assignment(search.best_pairs, graph, required, penalty)


def _worker_v2g_potential(edges: dict[tuple[int, int], float], v2g: dict[int, float]) -> dict[int, float]:
    pot: dict[int, float] = {}
    for w, s in edges:
        if s in v2g:
            pot[w] = max(pot.get(w, 0.0), v2g[s])
    return pot


def bmw(workers, tasks: Sequence[Task], bids: Sequence[Bid], budget: EnergyBudget | float = 0.0,
        unassigned_penalty: float | None = None, trace: list | None = None) -> Assignment:
    """Iterated min-weight matching with removal of expensive non-V2G winners.

    After each matching short of the requirement, the matched non-V2G
    edges are taken heaviest first (ties by worker, task) until their
    workers' best single V2G task could cover the shortfall; those edges
    leave the graph and the matching is redone. Stops when the requirement
    is met or no such prefix exists; ``feasible`` reports which.
    """
    required = budget.required_kwh if isinstance(budget, EnergyBudget) else float(budget)
    bids = list(bids)
    graph = BidGraph.build(bids, tasks)
    penalty = default_penalty(bids) if unassigned_penalty is None else float(unassigned_penalty)
    edges = dict(graph.edges)
    iterations = 0
    while True:
        iterations += 1
        matched = min_weight_matching(edges)
        delivered = sum(graph.v2g_energy.get(s, 0.0) for _, s in matched)
        if trace is not None:
            trace.append(sorted(matched))
        if delivered >= required - ENERGY_TOL:
            break
        shortfall = required - delivered
        potential = _worker_v2g_potential(edges, graph.v2g_energy)
        cands = sorted((p for p in matched if p[1] not in graph.v2g_energy),
                       key=lambda p: (-edges[p], p))
        removal, acc = [], 0.0
        for p in cands:
            removal.append(p)
            acc += potential.get(p[0], 0.0)
            if acc >= shortfall - ENERGY_TOL:
                break
        else:
            removal = []
        if not removal:
            break
        for p in removal:
            del edges[p]
    return make_assignment(matched, graph, required, penalty, iterations)


def second_price_payments(assignment: Assignment, all_bids: Iterable[Bid]) -> PaymentSchedule:
    """Pay each winner the lowest other bid on its task (own bid if it was alone)."""
    on_task: dict[int, list[Bid]] = {}
    for b in all_bids:
        on_task.setdefault(b.task_id, []).append(b)
    pay: dict[int, float] = {}
    flagged = []
    for w, s in assignment.pairs:
        bids = on_task.get(s, [])
        own = [b.amount for b in bids if b.worker_id == w]
        if not own:
            raise ValueError(f"winner {w} has no bid on task {s}")
        others = [b.amount for b in bids if b.worker_id != w]
        pay[w] = min(others) if others else own[0]
        if others and min(others) < own[0]:
            flagged.append(w)
    return PaymentSchedule(pay, tuple(flagged))
