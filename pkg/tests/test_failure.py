import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dynpipe.core import build_levels
from dynpipe.failure import (
    MarkovState,
    RoundEvents,
    consume_step,
    expected_delay,
    markov_delay,
    monte_carlo_delay,
    monte_carlo_oracle,
    produce_step,
    schedule_from_trace,
)
from dynpipe.simulator import TwoLevelConfig, simulate_two_level


def state(*probs):
    return MarkovState(np.array(probs, dtype=float))


def test_consume_step():
    assert consume_step(state(0, 0, 1, 0), 1).probs.tolist() == [0, 1, 0, 0]
    assert consume_step(MarkovState.empty(2), 1).p_fail == 1
    assert consume_step(state(0.5, 0, 0.5, 0), 1).probs.tolist() == [0, 0.5, 0, 0.5]


def test_produce_step():
    assert produce_step(MarkovState.empty(2), 1, 1.0).probs.tolist() == [0, 1, 0, 0]
    assert produce_step(MarkovState.empty(2), 1, 0.5).probs.tolist() == [0.5, 0.5, 0, 0]
    got = produce_step(MarkovState.empty(3), 2, 0.9).probs
    np.testing.assert_allclose(got, [0.01, 0.18, 0.81, 0, 0], atol=1e-15)


def test_produce_clamps_at_capacity():
    got = produce_step(state(0, 1, 0), 3, 1.0).probs
    assert got.tolist() == [0, 1, 0]


@settings(max_examples=50)
@given(st.integers(1, 8), st.lists(st.tuples(st.integers(0, 4), st.floats(0, 1), st.integers(0, 3)), max_size=30))
def test_chain_normalization_and_absorption(n_buf, steps):
    s = MarkovState.empty(n_buf)
    prev = 0.0
    for n_prod, p, n_cons in steps:
        s = produce_step(s, n_prod, p)
        assert abs(s.probs.sum() - 1) < 1e-12
        s = consume_step(s, n_cons)
        assert abs(s.probs.sum() - 1) < 1e-12
        assert s.p_fail >= prev - 1e-15
        prev = s.p_fail


def test_geometric_chain_closed_form():
    # one credit at p=1/2 then one consumption each round, buffer of one:
    # the first stall happens at round t with probability 2^-t
    horizon = 20
    sched = [RoundEvents(t, ((0.5, 1),), 1) for t in range(1, horizon + 1)]
    est = markov_delay(sched, 1, lambda _t: 1.0, horizon)
    expected = [0.5**t for t in range(1, horizon + 1)]
    np.testing.assert_allclose(est.p_stall_series[1:], expected, rtol=1e-12)
    assert est.expected_delay == pytest.approx(1 - 0.5**horizon, rel=1e-12)
    mc = monte_carlo_delay(sched, 1, lambda _t: 1.0, 200_000, seed=3)
    assert mc == pytest.approx(1 - 0.5**horizon, abs=0.005)


def small_config(supercond, n_buf=4, budget=2415 + 8 * 17 + 3 * 255):
    low, high = build_levels((3, 9), supercond)
    return TwoLevelConfig.build((low,), high, budget, n_buf, supercond)


def with_p_succ(cfg, p):
    low = dataclasses.replace(cfg.low_factories[0], p_succ=p)
    return dataclasses.replace(cfg, low_factories=(low,))


def test_perfect_factories_give_zero_delay(supercond):
    cfg = with_p_succ(small_config(supercond), 1.0)
    tr = simulate_two_level(cfg)
    est = expected_delay(tr, cfg)
    assert est.expected_delay == 0
    assert est.p_stall_total == 0
    assert monte_carlo_oracle(cfg, 1000, seed=1) == 0


def test_certain_failure_stalls_at_burst(supercond):
    # factories cannot be built with p_succ = 0, so zero the schedule directly
    cfg = small_config(supercond)
    tr = simulate_two_level(cfg)
    sched = [
        dataclasses.replace(ev, before=tuple((0.0, n) for _, n in ev.before), after=tuple((0.0, n) for _, n in ev.after))
        for ev in schedule_from_trace(tr, cfg)
    ]
    est = markov_delay(sched, cfg.n_buf, lambda _t: 1.0, tr.total_rounds)
    first = int(np.flatnonzero(est.p_stall_series)[0])
    assert first == tr.launch_round
    assert est.p_stall_total == 1.0


def test_delay_decreases_with_success_probability(supercond):
    base = small_config(supercond)
    delays = []
    for p in (0.9, 0.99, 0.999, 1.0):
        cfg = with_p_succ(base, p)
        delays.append(expected_delay(simulate_two_level(cfg), cfg).expected_delay)
    assert delays == sorted(delays, reverse=True)
    assert delays[-1] == 0


def test_markov_matches_monte_carlo(supercond):
    cfg = small_config(supercond)
    tr = simulate_two_level(cfg)
    est = expected_delay(tr, cfg)
    assert est.max_norm_error < 1e-12
    assert est.p_stall_total <= 1
    mc = monte_carlo_oracle(cfg, 200_000, seed=5)
    assert mc == pytest.approx(est.expected_delay, rel=0.05)


def test_schedule_covers_all_consumption(supercond):
    cfg = small_config(supercond)
    tr = simulate_two_level(cfg)
    sched = schedule_from_trace(tr, cfg)
    assert sum(ev.consumed for ev in sched) == 15
    assert sum(n for ev in sched for _, n in ev.before + ev.after) == sum(tr.produced_series)
