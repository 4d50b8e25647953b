"""Bandit learning of per-(worker, task type) bidding probabilities.

Actions are recommendation matrices chosen by the exact recommender with
UCB indices as weights; observations are whether each recommended pair drew
a bid.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .domain import NUM_TASK_TYPES, Task, TaskType, Worker
from .potr import RecommendationMatrix, solve_potr

UPDATE_MODES = ("bernoulli", "literal-eq9")
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class PreferenceModel:
    """Hidden bidding probabilities, rows in ``worker_ids`` order."""

    alpha_true: np.ndarray
    worker_ids: tuple[int, ...]

    def __post_init__(self):
        a = np.asarray(self.alpha_true, dtype=float)
        if a.shape != (len(self.worker_ids), NUM_TASK_TYPES):
            raise ValueError("alpha_true must be workers x task types")
        if ((a < 0) | (a > 1)).any():
            raise ValueError("preferences must lie in [0, 1]")
        object.__setattr__(self, "alpha_true", a)

    def row(self, worker_id: int) -> int:
        return self.worker_ids.index(worker_id)

    def weights(self, workers: Sequence[Worker], tasks: Sequence[Task]) -> np.ndarray:
        rows = [self.row(w.id) for w in workers]
        cols = [int(t.z) for t in tasks]
        return self.alpha_true[np.ix_(rows, cols)] if rows and cols else np.zeros((len(rows), len(cols)))

    @classmethod
    def sample(cls, worker_ids: Sequence[int], values: Sequence[float], rng: np.random.Generator):
        a = rng.choice(np.asarray(values, dtype=float), size=(len(worker_ids), NUM_TASK_TYPES))
        return cls(a, tuple(worker_ids))


@dataclass(frozen=True)
class CarsState:
    alpha_hat: np.ndarray
    m_counts: np.ndarray
    t: int
    worker_ids: tuple[int, ...]

    @property
    def Q(self) -> int:
        return len(self.worker_ids) * NUM_TASK_TYPES

    @classmethod
    def initial(cls, worker_ids: Sequence[int]) -> "CarsState":
        n = len(worker_ids)
        return cls(np.zeros((n, NUM_TASK_TYPES)), np.zeros((n, NUM_TASK_TYPES), dtype=np.int64), 1,
                   tuple(worker_ids))

    def row(self, worker_id: int) -> int:
        try:
            return self.worker_ids.index(worker_id)
        except ValueError:
            raise KeyError(f"unknown worker {worker_id}") from None


class Observation(NamedTuple):
    worker_id: int
    task_id: int
    task_type: TaskType
    did_bid: bool


ObservationBatch = list[Observation]


def ucb_index(state: CarsState, worker_id: int, task_type: TaskType) -> float:
    if state.t < 1:
        raise ValueError("round counter must be >= 1")
    i, z = state.row(worker_id), int(task_type)
    m = state.m_counts[i, z]
    if m == 0:
        return math.inf
    return float(state.alpha_hat[i, z]) + math.sqrt((state.Q + 1) * math.log(state.t) / m)


def ucb_matrix(state: CarsState, workers: Sequence[Worker], tasks: Sequence[Task],
               explore: bool = True) -> np.ndarray:
    """UCB index for every (worker, task) pair; ``explore=False`` drops the bonus."""
    rows = [state.row(w.id) for w in workers]
    cols = [int(t.z) for t in tasks]
    if not rows or not cols:
        return np.zeros((len(rows), len(cols)))
    a = state.alpha_hat[np.ix_(rows, cols)]
    if not explore:
        return a.copy()
    m = state.m_counts[np.ix_(rows, cols)].astype(float)
    bonus = np.sqrt((state.Q + 1) * math.log(state.t) / np.maximum(m, 1.0))
    return np.where(m > 0, a + bonus, math.inf)


def select_action(state: CarsState, workers: Sequence[Worker], tasks: Sequence[Task], K: int,
                  lambda_km: float, explore: bool = True, allow_relaxation: bool = True) -> RecommendationMatrix:
    w = ucb_matrix(state, workers, tasks, explore)
    return solve_potr(w, workers, tasks, K, lambda_km, allow_relaxation=allow_relaxation).matrix


def observations(A: RecommendationMatrix, tasks: Sequence[Task], bid_pairs: Iterable[tuple[int, int]]) -> ObservationBatch:
    """One record per recommended pair, flagged with whether a bid came in."""
    got = set(bid_pairs)
    ztype = {t.id: t.z for t in tasks}
    return [Observation(w, s, ztype[s], (w, s) in got) for w, s in A.pairs()]


def update(state: CarsState, obs: ObservationBatch, mode: str = "bernoulli") -> CarsState:
    """Fold one round of bid feedback into the estimates and advance the clock.

    ``bernoulli`` treats each record as a 0/1 sample of the running mean;
    ``literal-eq9`` only moves the mean on a bid but always counts the record.
    """
    if mode not in UPDATE_MODES:
        raise ValueError(f"unknown update mode {mode!r}")
    a = state.alpha_hat.copy()
    m = state.m_counts.copy()
    for rec in sorted(obs, key=lambda r: (r.worker_id, r.task_id)):
        i = state.row(rec.worker_id)
        z = int(TaskType(rec.task_type))
        x = 1.0 if rec.did_bid else 0.0
        if mode == "bernoulli" or rec.did_bid:
            a[i, z] = (a[i, z] * m[i, z] + x) / (m[i, z] + 1)
        m[i, z] += 1
    return replace(state, alpha_hat=a, m_counts=m, t=state.t + 1)


def realized_reward(A: RecommendationMatrix, prefs: PreferenceModel, tasks: Sequence[Task]) -> float:
    ztype = {t.id: int(t.z) for t in tasks}
    return float(sum(prefs.alpha_true[prefs.row(w), ztype[s]] for w, s in A.pairs()))


def cumulative_regret(history: Sequence[float], r_star: float) -> float:
    return len(history) * r_star - float(sum(history))


def regret_curve(history: Sequence[float], r_star: float) -> np.ndarray:
    h = np.asarray(history, dtype=float)
    return np.arange(1, len(h) + 1) * r_star - np.cumsum(h)


def regret_bound(a_max: float, Q: int, delta_min: float, delta_max: float, t: float) -> float:
    """Logarithmic regret ceiling of the UCB recommender after ``t`` rounds."""
    if delta_min <= 0:
        raise ValueError("delta_min must be > 0")
    if t < 1:
        raise ValueError("t must be >= 1")
    return (4 * a_max**2 * Q**3 * (Q + 1) * math.log(t) / delta_min**2
            + math.pi**2 / 3 * Q**2 + Q) * delta_max


def mae(state: CarsState, prefs: PreferenceModel) -> float:
    rows = [prefs.row(w) for w in state.worker_ids]
    if not rows:
        return math.nan
    return float(np.abs(state.alpha_hat - prefs.alpha_true[rows]).mean())


def dump_state(state: CarsState) -> str:
    buf = io.StringIO()
    buf.write(f"# cars-state v{CHECKPOINT_VERSION} t={state.t}\n")
    buf.write("worker_id,task_type,alpha_hat,m\n")
    for i, w in enumerate(state.worker_ids):
        for z in range(NUM_TASK_TYPES):
            buf.write(f"{w},{z},{float(state.alpha_hat[i, z])!r},{int(state.m_counts[i, z])}\n")
    return buf.getvalue()


def load_state(text: str) -> CarsState:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("# cars-state v"):
        raise ValueError("not a learner checkpoint")
    head = lines[0].split()
    version = int(head[2][1:])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    t = int(head[3].split("=")[1])
    if lines[1] != "worker_id,task_type,alpha_hat,m":
        raise ValueError("bad checkpoint header")
    rows: dict[int, dict[int, tuple[float, int]]] = {}
    for n, ln in enumerate(lines[2:], start=3):
        try:
            w, z, a, m = ln.split(",")
            rows.setdefault(int(w), {})[int(z)] = (float(a), int(m))
        except ValueError as exc:
            raise ValueError(f"checkpoint line {n}: {exc}") from None
    ids = tuple(rows)
    alpha = np.zeros((len(ids), NUM_TASK_TYPES))
    counts = np.zeros((len(ids), NUM_TASK_TYPES), dtype=np.int64)
    for i, w in enumerate(ids):
        if sorted(rows[w]) != list(range(NUM_TASK_TYPES)):
            raise ValueError(f"checkpoint: worker {w} lacks some task types")
        for z, (a, m) in rows[w].items():
            alpha[i, z], counts[i, z] = a, m
    return CarsState(alpha, counts, t, ids)
