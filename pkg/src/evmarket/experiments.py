"""Experiment harnesses shared by the scripts and the acceptance suite."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import cars
from .domain import Bid, Task, TaskType
from .instances import random_tasks, random_workers
from .potr import feasible_actions, solve_potr
from .sim import Scenario, generate_tasks, generate_workers, run
from .wibs import bmw, second_price_payments, solve_wibs_exact


# ---------------------------------------------------------------- BMW scaling

def complete_instance(rng: np.random.Generator, n: int):
    """n workers, n mixed tasks, every worker bids on every task."""
    workers = random_workers(rng, n)
    tasks = random_tasks(rng, n)
    amounts = rng.uniform(1.0, 20.0, (n, n))
    bids = [Bid(w.id, t.id, float(amounts[i, j])) for i, w in enumerate(workers) for j, t in enumerate(tasks)]
    v2g = sum(t.deliverable_energy for t in tasks if t.z is TaskType.V2G)
    return workers, tasks, bids, float(rng.uniform(0.3, 0.9)) * v2g


def bmw_model(n: int) -> float:
    """Operation-count model |W|·|S|²·log|S| with |W| = |S| = n."""
    return n * n * n * math.log(n)


def bmw_scaling(sizes: Sequence[int] = (25, 50, 100, 200), instances: int = 20, seed: int = 0) -> dict[int, float]:
    """Median wall time of one bmw call per size."""
    out = {}
    for n in sizes:
        rng = np.random.default_rng([seed, n])
        times = []
        for _ in range(instances):
            ws, ts, bids, budget = complete_instance(rng, n)
            t0 = time.perf_counter()
            bmw(ws, ts, bids, budget)
            times.append(time.perf_counter() - t0)
        out[n] = float(np.median(times))
    return out


def doubling_ratios(medians: dict[int, float]) -> list[tuple[int, int, float, float]]:
    """(n, 2n, measured ratio, model ratio) for each consecutive pair of sizes."""
    ns = sorted(medians)
    return [(a, b, medians[b] / medians[a], bmw_model(b) / bmw_model(a)) for a, b in zip(ns, ns[1:])]


# ---------------------------------------------------------------- learning curves

def static_scenario(seed: int, rounds: int = 500, num_workers: int = 10, tasks_per_type=(8, 4, 8),
                    variant: str = "CARS-OPT", K: int = 5, update_mode: str = "bernoulli") -> Scenario:
    """Frozen population for learner evaluation (fixed task counts, no worker movement)."""
    r, b, v = tasks_per_type
    return Scenario(num_workers=num_workers, rounds=rounds, K=K, count_model="fixed", rate_rideshare=r,
                    rate_battery_swap=b, rate_v2g=v, static_mode=True, variant=variant, seed=seed,
                    update_mode=update_mode)


def mae_curves(seeds: Sequence[int], rounds: int = 500, **kw) -> np.ndarray:
    """MAE after each round, one row per seed."""
    return np.array([run(static_scenario(s, rounds, **kw)).mae_curve for s in seeds])


@dataclass
class RegretCheck:
    regret: np.ndarray
    bound: np.ndarray
    r_star: float
    delta_min: float
    delta_max: float
    num_actions: int

    @property
    def violations(self) -> int:
        return int((self.regret > self.bound).sum())


def regret_check(seed: int = 0, rounds: int = 1000, num_workers: int = 3, tasks_per_type=(2, 1, 1),
                 K: int = 1) -> RegretCheck:
    """Learner regret against the bound, with gaps taken from every feasible action."""
    s = static_scenario(seed, rounds, num_workers, tasks_per_type, K=K)
    workers, _ = generate_workers(s, np.random.default_rng([seed, 1]))
    tasks = generate_tasks(s, 0, np.random.default_rng([seed, 0, 0]))
    prefs = cars.PreferenceModel.sample([w.id for w in workers], s.preference_set, np.random.default_rng([seed, 2]))
    w = prefs.weights(workers, tasks)
    sol = solve_potr(w, workers, tasks, K, s.lambda_km)
    acts = list(feasible_actions(workers, tasks, K, s.lambda_km, sol.matrix.psi, sol.matrix.v2g_min))
    rewards = np.array([float(w[x].sum()) for x in acts])
    gaps = sol.objective - rewards
    pos = gaps[gaps > 1e-12]
    report = run(s)
    if not math.isclose(report.r_star, sol.objective, abs_tol=1e-12):
        raise AssertionError("simulator optimum differs from the enumerated instance")
    dmin = float(pos.min()) if pos.size else math.nan
    dmax = float(pos.max()) if pos.size else 0.0
    t = np.arange(1, rounds + 1)
    Q = len(workers) * 3
    bound = (np.array([cars.regret_bound(1.0, Q, dmin, dmax, float(k)) for k in t]) if pos.size
             else np.full(rounds, math.inf))
    return RegretCheck(report.regret, bound, sol.objective, dmin, dmax, len(acts))


# ---------------------------------------------------------------- variant grid

def variant_grid(base: Scenario, variants: Sequence[str], seeds: Sequence[int]) -> dict:
    """Per (variant, seed): (cum objective, cum tasks, objective per task, budget-miss rounds, V2G tasks)."""
    out = {}
    for v in variants:
        for s in seeds:
            r = run(replace(base, variant=v, seed=s))
            out[v, s] = (float(r.cum_objective[-1]), int(r.cum_tasks[-1]), r.objective_per_task,
                         sum(not x.budget_met for x in r.records), int(r.column("v2g_completed").sum()))
    return out


@dataclass
class ShadowTally:
    rounds: int = 0
    bmw_feasible: int = 0
    exact_worse: int = 0  # rounds where BMW met the target yet beat the exact objective
    exact_costlier_when_bmw_short: int = 0


def shadow_dominance(base: Scenario, variant: str, seeds: Sequence[int]) -> ShadowTally:
    """Re-solve every round of a BMW run exactly on the same bids and target."""
    tally = ShadowTally()

    def watch(r, avail, live, bids, target, heur):
        exact = solve_wibs_exact(bids, live, avail, target)
        tally.rounds += 1
        if heur.feasible:
            tally.bmw_feasible += 1
            tally.exact_worse += exact.objective > heur.objective + 1e-9
        else:
            tally.exact_costlier_when_bmw_short += exact.total_cost > heur.total_cost + 1e-9

    for s in seeds:
        run(replace(base, variant=variant, seed=s), observer=watch)
    return tally


# ---------------------------------------------------------------- truthfulness

def truthfulness_trials(n: int = 1000, seed: int = 0) -> tuple[int, int]:
    """Single-task auctions: count trials where a deviation beats truthful bidding.

    Returns (violations, trials). Each trial draws a true cost for bidder 1,
    one to four competitor bids, and one deviation (shading or inflating).
    """
    rng = np.random.default_rng(seed)
    task = [Task(1, TaskType.RIDESHARE, (0.0, 0.0), (1.0, 0.0))]

    def utility(my_bid, cost, others):
        bids = [Bid(1, 1, my_bid)] + [Bid(k + 2, 1, float(b)) for k, b in enumerate(others)]
        pay = second_price_payments(solve_wibs_exact(bids, task), bids).payments
        return pay[1] - cost if 1 in pay else 0.0

    bad = 0
    for _ in range(n):
        cost = float(rng.uniform(1.0, 20.0))
        others = rng.uniform(1.0, 20.0, int(rng.integers(1, 5)))
        dev = float(cost * rng.uniform(0.2, 2.0))
        if utility(dev, cost, others) > utility(cost, cost, others) + 1e-9:
            bad += 1
    return bad, n
