"""Min-cost flow by successive shortest paths with node potentials.

Costs are exact Python integers so that lexicographic objectives can be
packed into a single cost without rounding trouble. Callers quantize
real-valued weights with :func:`quantize`.
"""

from __future__ import annotations

import heapq
import math

QUANTUM_BITS = 40
_INF = math.inf


def quantize(x: float) -> int:
    """Fixed-point integer image of a finite real, resolution 2**-40."""
    return round(x * (1 << QUANTUM_BITS))


class MinCostFlow:
    """Directed network with integer capacities and integer costs.

    Node ids are ``0..n-1``. If costs are negative, number the nodes in a
    topological order of the initial graph; otherwise initial potentials fall
    back to Bellman-Ford.
    """

    def __init__(self, n: int):
        self.n = n
        self.adj: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[int] = []
        self.cost: list[int] = []

    def add_edge(self, u: int, v: int, cap: int, cost: int) -> int:
        eid = len(self.to)
        self.to += [v, u]
        self.cap += [cap, 0]
        self.cost += [cost, -cost]
        self.adj[u].append(eid)
        self.adj[v].append(eid + 1)
        return eid

    def flow_on(self, eid: int) -> int:
        return self.cap[eid ^ 1]

    def _initial_potentials(self, s: int) -> list:
        h = [_INF] * self.n
        h[s] = 0
        to, cap, cost, adj = self.to, self.cap, self.cost, self.adj
        # one pass in index order is exact when ids are topological
        for u in range(self.n):
            hu = h[u]
            if hu == _INF:
                continue
            for e in adj[u]:
                if cap[e] > 0:
                    v = to[e]
                    nd = hu + cost[e]
                    if nd < h[v]:
                        h[v] = nd
        for _ in range(self.n):
            changed = False
            for u in range(self.n):
                hu = h[u]
                if hu == _INF:
                    continue
                for e in adj[u]:
                    if cap[e] > 0 and hu + cost[e] < h[to[e]]:
                        h[to[e]] = hu + cost[e]
                        changed = True
            if not changed:
                break
        else:
            raise ValueError("negative cycle in flow network")
        return [0 if x == _INF else x for x in h]

    def solve(self, s: int, t: int, max_flow: int | None = None,
              stop_on_nonnegative: bool = False) -> tuple[int, int]:
        """Push flow from ``s`` to ``t`` along successively cheapest paths.

        With ``stop_on_nonnegative`` the flow value is free: augmentation
        stops once the cheapest path no longer lowers the cost, which yields
        the min-cost flow over all flow values. Returns ``(flow, cost)``.
        """
        to, cap, cost, adj = self.to, self.cap, self.cost, self.adj
        n = self.n
        h = self._initial_potentials(s)
        flow = 0
        total = 0
        limit = _INF if max_flow is None else max_flow
        push, pop = heapq.heappush, heapq.heappop
        while flow < limit:
            dist = [_INF] * n
            prev = [-1] * n
            done = [False] * n
            dist[s] = 0
            heap = [(0, s)]
            while heap:
                d, u = pop(heap)
                if done[u]:
                    continue
                done[u] = True
                if u == t:
                    break
                hu = h[u] + d
                for e in adj[u]:
                    if cap[e] > 0:
                        v = to[e]
                        if done[v]:
                            continue
                        nd = hu + cost[e] - h[v]
                        if nd < dist[v]:
                            dist[v] = nd
                            prev[v] = e
                            push(heap, (nd, v))
            dt = dist[t]
            if dt == _INF:
                break
            for v in range(n):
                dv = dist[v]
                h[v] += dv if dv < dt else dt
            path_cost = h[t] - h[s]
            if stop_on_nonnegative and path_cost >= 0:
                break
            pushed = self._augment_admissible(s, t, h, limit - flow)
            flow += pushed
            total += pushed * path_cost
        return flow, total

    def _augment_admissible(self, s: int, t: int, h: list, limit) -> int:
        """Push flow along zero-reduced-cost paths until none is left (one phase)."""
        to, cap, cost, adj = self.to, self.cap, self.cost, self.adj
        n = self.n
        dead = [False] * n
        on_path = [False] * n
        it = [0] * n
        pushed = 0
        while pushed < limit:
            path: list[int] = []
            on_path[s] = True
            u = s
            while u != t:
                edges = adj[u]
                m = len(edges)
                i = it[u]
                target = h[u]
                while i < m:
                    e = edges[i]
                    if cap[e] > 0:
                        v = to[e]
                        if not dead[v] and not on_path[v] and cost[e] + target == h[v]:
                            break
                    i += 1
                it[u] = i
                if i < m:
                    path.append(e)
                    on_path[v] = True
                    u = v
                    continue
                if u == s:
                    on_path[s] = False
                    return pushed
                dead[u] = True
                on_path[u] = False
                e = path.pop()
                u = to[e ^ 1]
                it[u] += 1
            aug = limit - pushed
            for e in path:
                if cap[e] < aug:
                    aug = cap[e]
            for e in path:
                cap[e] -= aug
                cap[e ^ 1] += aug
                on_path[to[e]] = False
            on_path[s] = False
            pushed += aug
        return pushed
