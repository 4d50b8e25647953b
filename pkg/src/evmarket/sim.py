"""Round-by-round marketplace simulation.

Every round (15 simulated minutes): collect tasks, recommend, simulate bids,
select winners, pay second prices, update the learner, move the workers.

Random streams are keyed by (seed, purpose, round) so that variants run on
the same seed see the same tasks, and a worker's response to a given task in
a given round is the same whichever variant recommended it.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from . import cars
from .baseline import bg_assign, pk_topk
from .domain import (ROUND_MINUTES, Bid, Task, TaskType, Worker, WorkerStatus, distance,
                     energy_to_perform)
from .ingest import ingest_tasks, ingest_workers
from .potr import RecommendationMatrix, solve_potr
from .wibs import (Assignment, PaymentSchedule, bmw, max_deliverable_v2g, second_price_payments,
                   solve_wibs_exact)

VARIANTS = ("PK-OPT", "CARS-OPT", "PK-BMW", "CARS-BMW", "BG")
TASK_ID_STRIDE = 10_000
PAPER_PREFERENCES = (0.1, 0.4, 0.5, 0.7, 0.9, 1.0)


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class BidModel:
    """Ask price: markup * (base + per_km * effective km) + noise, floored.

    Effective km is approach plus service distance; a V2G task counts the
    distance its discharged energy would have driven the worker.
    """

    base: float = 2.5
    per_km: float = 1.0
    noise_sd: float = 0.5
    min_bid: float = 0.5

    def amount(self, worker: Worker, task: Task, markup: float = 1.0, z: float = 0.0) -> float:
        km = distance(worker.location, task.origin)
        if task.z is TaskType.V2G:
            km += task.deliverable_energy / worker.energy_per_km
        else:
            km += task.service_distance
        return max(self.min_bid, markup * (self.base + self.per_km * km) + self.noise_sd * z)


@dataclass
class Scenario:
    num_workers: int = 40
    rounds: int = 96
    K: int = 5
    lambda_km: float = 10.0
    rate_rideshare: float = 8.0
    rate_battery_swap: float = 4.0
    rate_v2g: float = 8.0
    count_model: str = "poisson"
    region_km: float = 8.0
    v2g_kwh_min: float = 1.0
    v2g_kwh_max: float = 10.0
    budget_rule: str = "sum_v2g"
    budget_kwh: float = 0.0
    budget_fraction: float = 1.0
    preference_set: tuple[float, ...] = PAPER_PREFERENCES
    bid_base: float = 2.5
    bid_per_km: float = 1.0
    bid_noise_sd: float = 0.5
    bid_min: float = 0.5
    markup_min: float = 0.9
    markup_max: float = 1.3
    energy_per_km_min: float = 0.12
    energy_per_km_max: float = 0.22
    capacity_km_min: float = 250.0
    capacity_km_max: float = 450.0
    reserve_fraction: float = 0.1
    charge_trigger_km: float = 10.0
    speed_kmh: float = 30.0
    discharge_kw: float = 40.0
    charging_rounds: int = 4
    carryover_rounds: int = 1
    seed: int = 0
    variant: str = "CARS-OPT"
    static_mode: bool = False
    update_mode: str = "bernoulli"
    workers_csv: str = ""
    tasks_csv: str = ""

    @property
    def bid_model(self) -> BidModel:
        return BidModel(self.bid_base, self.bid_per_km, self.bid_noise_sd, self.bid_min)

    def validate(self) -> "Scenario":
        def bad(key, why):
            raise ValueError(f"scenario key {key!r}: {why}")

        if self.rounds < 1:
            bad("rounds", "must be >= 1")
        if self.num_workers < 0:
            bad("num_workers", "must be >= 0")
        if self.K < 0:
            bad("K", "must be >= 0")
        if self.lambda_km < 0:
            bad("lambda_km", "must be >= 0")
        for key in ("rate_rideshare", "rate_battery_swap", "rate_v2g"):
            if getattr(self, key) < 0:
                bad(key, "must be >= 0")
        if self.count_model not in ("poisson", "fixed"):
            bad("count_model", "must be poisson or fixed")
        if self.budget_rule not in ("sum_v2g", "fixed"):
            bad("budget_rule", "must be sum_v2g or fixed")
        if self.budget_kwh < 0 or self.budget_fraction < 0:
            bad("budget_kwh", "must be >= 0")
        if not 0 < self.v2g_kwh_min <= self.v2g_kwh_max:
            bad("v2g_kwh_min", "need 0 < v2g_kwh_min <= v2g_kwh_max")
        if not self.preference_set or any(not 0 <= p <= 1 for p in self.preference_set):
            bad("preference_set", "values must lie in [0, 1]")
        if self.variant not in VARIANTS:
            bad("variant", f"must be one of {', '.join(VARIANTS)}")
        if self.update_mode not in cars.UPDATE_MODES:
            bad("update_mode", f"must be one of {', '.join(cars.UPDATE_MODES)}")
        if not 0 < self.energy_per_km_min <= self.energy_per_km_max:
            bad("energy_per_km_min", "need 0 < min <= max")
        if not 0 < self.capacity_km_min <= self.capacity_km_max:
            bad("capacity_km_min", "need 0 < min <= max")
        if not 0 <= self.reserve_fraction < 1:
            bad("reserve_fraction", "must lie in [0, 1)")
        if self.speed_kmh <= 0 or self.discharge_kw <= 0:
            bad("speed_kmh", "speeds and powers must be > 0")
        if self.charging_rounds < 0 or self.carryover_rounds < 0:
            bad("charging_rounds", "must be >= 0")
        return self


# ---------------------------------------------------------------- randomness

class PairDraws:
    """Per-(worker, task) uniform and normal draws for one round, by hashing."""

    def __init__(self, seed: int, round_index: int):
        self._key = f"{seed}:{round_index}:"

    def draw(self, worker_id: int, task_id: int) -> tuple[float, float]:
        h = hashlib.blake2b(f"{self._key}{worker_id}:{task_id}".encode(), digest_size=24).digest()
        u1, u2, u3 = (((int.from_bytes(h[k:k + 8], "little") >> 11) + 0.5) / 9007199254740992.0
                      for k in (0, 8, 16))
        return u1, math.sqrt(-2.0 * math.log(u2)) * math.cos(2.0 * math.pi * u3)


class _SequentialDraws:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def draw(self, worker_id: int, task_id: int) -> tuple[float, float]:
        return float(self.rng.random()), float(self.rng.standard_normal())


# ---------------------------------------------------------------- generators

def generate_workers(scenario: Scenario, rng: np.random.Generator) -> tuple[list[Worker], dict[int, float]]:
    s = scenario
    workers = []
    markups = {}
    for i in range(s.num_workers):
        loc = tuple(float(c) for c in rng.uniform(0.0, s.region_km, 2))
        e = float(rng.uniform(s.energy_per_km_min, s.energy_per_km_max))
        cap = float(rng.uniform(s.capacity_km_min, s.capacity_km_max))
        soc = float(rng.uniform(0.5, 1.0))
        workers.append(Worker(i + 1, loc, e, cap * soc, s.reserve_fraction * cap, capacity_km=cap))
        markups[i + 1] = float(rng.uniform(s.markup_min, s.markup_max))
    return workers, markups


def generate_tasks(scenario: Scenario, round_index: int, rng: np.random.Generator) -> list[Task]:
    """Fresh tasks for one round; ids are ``round * 10000 + k``."""
    s = scenario
    rates = (s.rate_rideshare, s.rate_battery_swap, s.rate_v2g)
    if s.count_model == "poisson":
        counts = [int(rng.poisson(r)) for r in rates]
    else:
        counts = [int(round(r)) for r in rates]
    types = [z for z, c in zip(TaskType, counts) for _ in range(c)]
    if len(types) >= TASK_ID_STRIDE:
        raise ValueError("too many tasks in one round")
    types = [types[k] for k in rng.permutation(len(types))]
    out = []
    for k, z in enumerate(types):
        tid = round_index * TASK_ID_STRIDE + k
        origin = tuple(float(c) for c in rng.uniform(0.0, s.region_km, 2))
        if z is TaskType.V2G:
            out.append(Task(tid, z, origin, origin, float(rng.uniform(s.v2g_kwh_min, s.v2g_kwh_max)),
                            round_index))
        else:
            dest = tuple(float(c) for c in rng.uniform(0.0, s.region_km, 2))
            out.append(Task(tid, z, origin, dest, 0.0, round_index))
    return out


def simulate_bids(A: RecommendationMatrix, workers: Sequence[Worker], tasks: Sequence[Task],
                  prefs: cars.PreferenceModel, bid_model: BidModel, rng,
                  markups: dict[int, float] | None = None) -> list[Bid]:
    """Each recommended worker bids with its hidden probability for the task type.

    ``rng`` is a numpy Generator (draws consumed in (worker, task) order) or
    any object with ``draw(worker_id, task_id) -> (uniform, normal)``.
    """
    draws = _SequentialDraws(rng) if isinstance(rng, np.random.Generator) else rng
    wby = {w.id: w for w in workers}
    tby = {t.id: t for t in tasks}
    out = []
    for wid, tid in A.pairs():
        w, t = wby[wid], tby[tid]
        u, z = draws.draw(wid, tid)
        if u < prefs.alpha_true[prefs.row(wid), int(t.z)]:
            gamma = 1.0 if markups is None else markups.get(wid, 1.0)
            out.append(Bid(wid, tid, bid_model.amount(w, t, gamma, z)))
    return out


# ---------------------------------------------------------------- dynamics

@dataclass(frozen=True)
class Dynamics:
    speed_kmh: float = 30.0
    discharge_kw: float = 40.0
    charging_rounds: int = 4
    charge_trigger_km: float = 10.0


@dataclass
class WorkerDynamicsState:
    workers: dict[int, Worker]
    round: int = 0
    odometer: dict[int, float] = field(default_factory=dict)
    earnings: dict[int, float] = field(default_factory=dict)
    dynamics: Dynamics = Dynamics()

    def available(self) -> list[Worker]:
        return [w for _, w in sorted(self.workers.items()) if w.status is WorkerStatus.AVAILABLE]


def busy_rounds(worker: Worker, task: Task, dyn: Dynamics) -> int:
    """Whole rounds a worker is tied up by a task (at least one)."""
    km = distance(worker.location, task.origin) + task.service_distance
    hours = km / dyn.speed_kmh
    if task.z is TaskType.V2G:
        hours += task.deliverable_energy / dyn.discharge_kw
    return max(1, math.ceil(hours * 60 / ROUND_MINUTES - 1e-9))


def apply_round(state: WorkerDynamicsState, assignment: Assignment, payments: PaymentSchedule | None,
                tasks: Sequence[Task]) -> WorkerDynamicsState:
    """Move winners, drain their batteries, then advance the clock one round."""
    r = state.round
    dyn = state.dynamics
    tby = {t.id: t for t in tasks}
    workers = dict(state.workers)
    odo = dict(state.odometer)
    earn = dict(state.earnings)
    for wid, tid in assignment.pairs:
        w = workers[wid]
        if w.status is not WorkerStatus.AVAILABLE:
            raise SimulationError(f"round {r}: worker {wid} is not available")
        t = tby[tid]
        draw = energy_to_perform(w, t).total_draw
        left = w.range_km - draw / w.energy_per_km
        if left < -1e-9:
            raise SimulationError(f"round {r}: task {tid} would drain worker {wid} below zero")
        left = max(left, 0.0)
        n = busy_rounds(w, t, dyn)
        if left - w.min_range_km <= dyn.charge_trigger_km:
            status, until = WorkerStatus.CHARGING, r + n + dyn.charging_rounds
        else:
            status, until = WorkerStatus.BUSY, r + n
        workers[wid] = replace(w, location=t.destination, range_km=left, status=status, until_round=until)
        odo[wid] = odo.get(wid, 0.0) + distance(w.location, t.origin) + t.service_distance
        if payments is not None and wid in payments.payments:
            earn[wid] = earn.get(wid, 0.0) + payments.payments[wid]
    nxt = r + 1
    for wid, w in workers.items():
        if w.status is not WorkerStatus.AVAILABLE and w.until_round is not None and w.until_round <= nxt:
            rng_km = w.capacity_km if w.status is WorkerStatus.CHARGING else w.range_km
            workers[wid] = replace(w, status=WorkerStatus.AVAILABLE, until_round=None, range_km=rng_km)
    return WorkerDynamicsState(workers, nxt, odo, earn, dyn)


# ---------------------------------------------------------------- records

@dataclass
class RoundRecord:
    round: int
    num_tasks: int
    num_available: int
    num_recommended: int
    num_bids: int
    objective: float
    tasks_completed: int
    v2g_completed: int
    payments_total: float
    delivered_v2g_kwh: float
    budget_kwh: float
    budget_met: bool
    relaxed: bool
    flagged_payments: int
    reward: float
    mae: float


ROUND_COLUMNS = tuple(f.name for f in fields(RoundRecord))
CUMULATIVE_COLUMNS = ("cum_objective", "cum_tasks", "cum_payments", "cum_reward", "avg_price_per_task", "regret")


@dataclass
class RunReport:
    variant: str
    seed: int
    records: list[RoundRecord]
    static_mode: bool = False
    r_star: float | None = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def cum_objective(self) -> np.ndarray:
        return np.cumsum(self.column("objective"))

    @property
    def cum_tasks(self) -> np.ndarray:
        return np.cumsum(self.column("tasks_completed"))

    @property
    def cum_payments(self) -> np.ndarray:
        return np.cumsum(self.column("payments_total"))

    @property
    def cum_reward(self) -> np.ndarray:
        return np.cumsum(self.column("reward"))

    @property
    def mae_curve(self) -> np.ndarray:
        return self.column("mae")

    @property
    def avg_price_per_task(self) -> float:
        done = self.cum_tasks[-1] if self.records else 0
        return float(self.cum_payments[-1] / done) if done else math.nan

    @property
    def objective_per_task(self) -> float:
        done = self.cum_tasks[-1] if self.records else 0
        return float(self.cum_objective[-1] / done) if done else math.nan

    @property
    def regret(self) -> np.ndarray | None:
        if not self.static_mode or self.r_star is None:
            return None
        return cars.regret_curve(self.column("reward"), self.r_star)


# ---------------------------------------------------------------- run loop

def _budget(scenario: Scenario, tasks: Sequence[Task]) -> float:
    if scenario.budget_rule == "fixed":
        return scenario.budget_kwh
    return scenario.budget_fraction * sum(t.deliverable_energy for t in tasks if t.z is TaskType.V2G)


def _empty_matrix(workers, tasks, K) -> RecommendationMatrix:
    return RecommendationMatrix(np.zeros((len(workers), len(tasks)), dtype=bool),
                                tuple(w.id for w in workers), tuple(t.id for t in tasks), K, 0, 0)


def run(scenario: Scenario, observer=None) -> RunReport:
    """Simulate every round of ``scenario``.

    ``observer``, if given, is called after each auction as
    ``observer(round, available_workers, live_tasks, bids, target_kwh, assignment)``.
    """
    s = scenario.validate()
    seed, variant = s.seed, s.variant
    if s.workers_csv:
        workers = ingest_workers(s.workers_csv)
        mrng = np.random.default_rng([seed, 1])
        markups = {w.id: float(mrng.uniform(s.markup_min, s.markup_max)) for w in workers}
    else:
        workers, markups = generate_workers(s, np.random.default_rng([seed, 1]))
    ids = [w.id for w in workers]
    prefs = cars.PreferenceModel.sample(ids, s.preference_set, np.random.default_rng([seed, 2]))
    learner = cars.CarsState.initial(ids) if variant.startswith("CARS") else None
    file_tasks = ingest_tasks(s.tasks_csv) if s.tasks_csv else None
    bm = s.bid_model
    dyn = Dynamics(s.speed_kmh, s.discharge_kw, s.charging_rounds, s.charge_trigger_km)
    state = WorkerDynamicsState({w.id: w for w in workers}, 0, dynamics=dyn)

    def round_tasks(r: int) -> list[Task]:
        if file_tasks is not None:
            return [t for t in file_tasks if t.slot_created == r]
        return generate_tasks(s, r, np.random.default_rng([seed, 0, r]))

    static_tasks = round_tasks(0) if s.static_mode else None
    r_star = None
    if s.static_mode:
        avail0 = state.available()
        if avail0 and static_tasks:
            r_star = solve_potr(prefs.weights(avail0, static_tasks), avail0, static_tasks, s.K, s.lambda_km).objective
        else:
            r_star = 0.0
    pending: list[Task] = []
    records = []
    for r in range(s.rounds):
        try:
            if s.static_mode:
                live = list(static_tasks)
                avail = state.available()
            else:
                live = [t for t in pending if r - t.slot_created <= s.carryover_rounds] + round_tasks(r)
                avail = state.available()
            budget = _budget(s, live)
            relaxed = False
            if not avail or not live:
                A = _empty_matrix(avail, live, s.K)
            elif variant == "BG":
                A = pk_topk(prefs, avail, live, s.K, s.lambda_km)
            elif variant.startswith("PK"):
                sol = solve_potr(prefs.weights(avail, live), avail, live, s.K, s.lambda_km)
                A, relaxed = sol.matrix, bool(sol.relaxation_report)
            else:
                sol = solve_potr(cars.ucb_matrix(learner, avail, live), avail, live, s.K, s.lambda_km)
                A, relaxed = sol.matrix, bool(sol.relaxation_report)
            bids = simulate_bids(A, avail, live, prefs, bm, PairDraws(seed, r), markups)
            reachable = max_deliverable_v2g(bids, live)
            target = budget if reachable >= budget - 1e-9 else reachable
            if variant == "BG":
                assignment = bg_assign(bids, live, target).assignment
            elif variant.endswith("OPT"):
                assignment = solve_wibs_exact(bids, live, avail, target)
            else:
                assignment = bmw(avail, live, bids, target)
            payments = second_price_payments(assignment, bids)
            if observer is not None:
                observer(r, avail, live, bids, target, assignment)
            if learner is not None:
                obs = cars.observations(A, live, [(b.worker_id, b.task_id) for b in bids])
                learner = cars.update(learner, obs, s.update_mode)
            if not s.static_mode:
                state = apply_round(state, assignment, payments, live)
                won = {tid for _, tid in assignment.pairs}
                pending = [t for t in live if t.id not in won]
            v2g_ids = {t.id for t in live if t.z is TaskType.V2G}
            records.append(RoundRecord(
                round=r,
                num_tasks=len(live),
                num_available=len(avail),
                num_recommended=int(A.entries.sum()),
                num_bids=len(bids),
                objective=assignment.total_cost,
                tasks_completed=len(assignment.pairs),
                v2g_completed=sum(1 for _, tid in assignment.pairs if tid in v2g_ids),
                payments_total=payments.total,
                delivered_v2g_kwh=assignment.delivered_v2g_kwh,
                budget_kwh=target,
                budget_met=assignment.feasible,
                relaxed=relaxed,
                flagged_payments=len(payments.flagged),
                reward=cars.realized_reward(A, prefs, live),
                mae=cars.mae(learner, prefs) if learner is not None else math.nan,
            ))
        except SimulationError:
            raise
        except Exception as exc:
            raise SimulationError(f"{variant} seed {seed} round {r}: {exc}") from exc
    return RunReport(variant, seed, records, s.static_mode, r_star)


def scenario_dict(s: Scenario) -> dict:
    return asdict(s)
