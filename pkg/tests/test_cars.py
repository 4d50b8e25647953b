import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evmarket.cars import (CarsState, Observation, PreferenceModel, cumulative_regret, dump_state, load_state, mae,
                           observations, realized_reward, regret_bound, regret_curve, select_action, ucb_index,
                           ucb_matrix, update)
from evmarket.domain import Task, TaskType, Worker, eligibility_matrix
from evmarket.potr import RecommendationMatrix, solve_potr
from evmarket.instances import random_tasks, random_workers

R, SW, V = TaskType.RIDESHARE, TaskType.BATTERY_SWAP, TaskType.V2G


def state_with(alpha, m, t, ids=(1, 2)):
    a = np.zeros((len(ids), 3))
    c = np.zeros((len(ids), 3), dtype=np.int64)
    a[0, 0], c[0, 0] = alpha, m
    return CarsState(a, c, t, tuple(ids))


def test_ucb_hand_value():
    # Q = 2 workers x 3 types = 6
    assert ucb_index(state_with(0.5, 4, 100), 1, R) == pytest.approx(0.5 + math.sqrt(7 * math.log(100) / 4))
    assert ucb_index(state_with(0.5, 4, 100), 1, R) == pytest.approx(3.3389, abs=1e-4)


def test_ucb_unobserved_is_sentinel():
    assert ucb_index(state_with(0.5, 0, 10), 1, R) == math.inf


def test_ucb_zero_width_at_first_round():
    assert ucb_index(state_with(0.3, 1, 1), 1, R) == pytest.approx(0.3)


def test_ucb_matrix_agrees_with_scalar():
    s = state_with(0.5, 4, 100)
    ws = [Worker(i, (0, 0), 0.2, 300, 10) for i in (1, 2)]
    ts = [Task(1, R, (1, 0), (2, 0)), Task(2, V, (1, 0), (1, 0), 2.0)]
    u = ucb_matrix(s, ws, ts)
    assert u[0, 0] == pytest.approx(ucb_index(s, 1, R))
    assert np.isinf(u[0, 1]) and np.isinf(u[1, 0])
    assert ucb_matrix(s, ws, ts, explore=False)[0, 0] == 0.5


def test_update_bid_raises_estimate():
    s = update(state_with(0.5, 4, 7), [Observation(1, 10, R, True)])
    assert s.alpha_hat[0, 0] == pytest.approx(0.6)
    assert s.m_counts[0, 0] == 5 and s.t == 8


@pytest.mark.parametrize("mode,want", [("bernoulli", 0.4), ("literal-eq9", 0.5)])
def test_update_no_bid(mode, want):
    s = update(state_with(0.5, 4, 7), [Observation(1, 10, R, False)], mode=mode)
    assert s.alpha_hat[0, 0] == pytest.approx(want)
    assert s.m_counts[0, 0] == 5


def test_empty_batch_only_ticks_clock():
    s0 = state_with(0.5, 4, 7)
    s1 = update(s0, [])
    assert s1.t == 8
    assert np.array_equal(s1.alpha_hat, s0.alpha_hat) and np.array_equal(s1.m_counts, s0.m_counts)


def test_update_rejects_unknown():
    with pytest.raises(KeyError):
        update(state_with(0.5, 4, 7), [Observation(9, 10, R, True)])
    with pytest.raises(ValueError):
        update(state_with(0.5, 4, 7), [Observation(1, 10, 7, True)])
    with pytest.raises(ValueError):
        update(state_with(0.5, 4, 7), [], mode="ema")


@settings(max_examples=80)
@given(st.lists(st.tuples(st.sampled_from([1, 2]), st.sampled_from(list(TaskType)), st.booleans()), max_size=40),
       st.integers(1, 6))
def test_estimates_stay_in_unit_interval(recs, chunks):
    s = CarsState.initial([1, 2])
    for k in range(chunks):
        part = recs[k::chunks]
        s = update(s, [Observation(w, n, z, b) for n, (w, z, b) in enumerate(part)])
        assert ((s.alpha_hat >= 0) & (s.alpha_hat <= 1)).all()
    assert s.m_counts.sum() == len(recs)


def example_2x2():
    ws = [Worker(i, (0, 0), 0.2, 300, 10) for i in (1, 2)]
    ts = [Task(1, R, (1, 0), (2, 0)), Task(2, V, (1, 0), (1, 0), 3.0)]
    prefs = PreferenceModel(np.array([[0.9, 0.0, 0.1], [0.4, 0.0, 0.7]]), (1, 2))
    return ws, ts, prefs


def test_realized_reward():
    ws, ts, prefs = example_2x2()
    empty = RecommendationMatrix(np.zeros((2, 2), bool), (1, 2), (1, 2), 2, 0, 1)
    assert realized_reward(empty, prefs, ts) == 0.0
    one = RecommendationMatrix(np.array([[False, True], [False, False]]), (1, 2), (1, 2), 2, 0, 1)
    prefs7 = PreferenceModel(np.array([[0.9, 0.0, 0.7], [0.4, 0.0, 0.7]]), (1, 2))
    assert realized_reward(one, prefs7, ts) == pytest.approx(0.7)
    A = solve_potr(prefs.weights(ws, ts), ws, ts, 1, 10.0, psi=1, v2g_min=0).matrix
    assert realized_reward(A, prefs, ts) == pytest.approx(1.6)


def test_argmax_consistency_with_true_preferences():
    ws, ts, prefs = example_2x2()
    s = CarsState(prefs.alpha_true.copy(), np.ones((2, 3), dtype=np.int64), 5, (1, 2))
    A = select_action(s, ws, ts, 1, 10.0, explore=False)
    assert A.pairs() == [(1, 1), (2, 2)]


def test_index_order_preserving_weights_same_argmax():
    ws, ts, prefs = example_2x2()
    s = CarsState(prefs.alpha_true.copy(), np.full((2, 3), 4, dtype=np.int64), 100, (1, 2))
    assert select_action(s, ws, ts, 1, 10.0).pairs() == [(1, 1), (2, 2)]


def test_all_unexplored_fills_every_list():
    rng = np.random.default_rng(0)
    ws, ts = random_workers(rng, 3, region_km=4), random_tasks(rng, 4, region_km=4)
    A = select_action(CarsState.initial([w.id for w in ws]), ws, ts, 2, 10.0)
    elig = np.array(eligibility_matrix(ws, ts, 10.0), dtype=bool).reshape(3, 4)
    assert A.entries.sum(axis=1).tolist() == np.minimum(elig.sum(axis=1), 2).tolist()
    assert A.violations(ws, ts, 10.0) == []


def test_observations_flag_bids():
    ws, ts, prefs = example_2x2()
    A = RecommendationMatrix(np.array([[True, True], [False, True]]), (1, 2), (1, 2), 2, 0, 0)
    obs = observations(A, ts, [(1, 2)])
    assert obs == [Observation(1, 1, R, False), Observation(1, 2, V, True), Observation(2, 2, V, False)]


def test_regret_examples():
    assert cumulative_regret([1.6, 1.6, 1.6], 1.6) == 0
    assert cumulative_regret([1.0, 1.2], 1.6) == pytest.approx(1.0)
    assert cumulative_regret([], 1.6) == 0
    assert regret_curve([1.0, 1.2], 1.6) == pytest.approx([0.6, 1.0])


def test_regret_bound_examples():
    got = regret_bound(1.0, 6, 0.5, 0.5, math.e)
    assert got == pytest.approx((24192 + math.pi**2 / 3 * 36 + 6) * 0.5)
    assert got == pytest.approx(12158.2, abs=0.05)
    assert regret_bound(1.0, 6, 0.5, 0.3, 1) == ((math.pi**2 / 3) * 36 + 6) * 0.3
    step = regret_bound(0.8, 4, 0.2, 0.6, 20) - regret_bound(0.8, 4, 0.2, 0.6, 10)
    assert step == pytest.approx(4 * 0.64 * 64 * 5 * math.log(2) / 0.04 * 0.6)
    with pytest.raises(ValueError):
        regret_bound(1.0, 6, 0.0, 0.5, 10)


def test_mae_examples():
    prefs = PreferenceModel(np.full((2, 3), 0.5), (1, 2))
    s = CarsState(np.full((2, 3), 0.5), np.ones((2, 3), dtype=np.int64), 3, (1, 2))
    assert mae(s, prefs) == 0
    s = CarsState(np.where(np.arange(6).reshape(2, 3) < 3, 0.25, 0.75), s.m_counts, 3, (1, 2))
    assert mae(s, prefs) == pytest.approx(0.25)


def test_checkpoint_round_trip():
    rng = np.random.default_rng(1)
    s = CarsState(rng.uniform(0, 1, (4, 3)), rng.integers(0, 50, (4, 3)), 37, (3, 8, 11, 20))
    back = load_state(dump_state(s))
    assert back.t == 37 and back.worker_ids == s.worker_ids
    assert np.array_equal(back.alpha_hat, s.alpha_hat) and np.array_equal(back.m_counts, s.m_counts)


def test_checkpoint_rejects_garbage():
    with pytest.raises(ValueError):
        load_state("hello")
    with pytest.raises(ValueError):
        load_state(dump_state(CarsState.initial([1])).replace("v1", "v9"))
