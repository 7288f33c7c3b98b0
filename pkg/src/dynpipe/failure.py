"""Expected delay from probabilistic low-level factory failures.

The failure-free trace fixes when states are credited and consumed. Each
credited state independently survives post-selection with its factory's
success probability; the buffer level is then a Markov chain with an
absorbing "first stall" state. The expected delay weights the recovery time
of a stall at round ``t`` by the probability that the first stall happens at
``t``. Later stalls are ignored.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from dynpipe.allocator import AllocationProblem, Committed, min_time_fill
from dynpipe.errors import InfeasibleAllocation, UnreachableThreshold
from dynpipe.simulator import SimTrace, TwoLevelConfig, simulate_two_level


@dataclass(frozen=True)
class RoundEvents:
    """Buffer activity in one round: credits before consumption, the
    consumption, credits after it. Credits are ``(p_succ, states)`` pairs."""

    round: int
    before: tuple[tuple[float, int], ...]
    consumed: int
    after: tuple[tuple[float, int], ...] = ()


@dataclass
class MarkovState:
    """``probs[i]`` for buffer level ``i`` in ``0..n_buf``; ``probs[-1]`` is the
    probability that a stall has already occurred."""

    probs: np.ndarray

    @classmethod
    def empty(cls, n_buf: int) -> "MarkovState":
        p = np.zeros(n_buf + 2)
        p[0] = 1.0
        return cls(p)

    @property
    def n_buf(self) -> int:
        return len(self.probs) - 2

    @property
    def p_fail(self) -> float:
        return float(self.probs[-1])


@dataclass
class DelayEstimate:
    p_stall_series: np.ndarray
    recovery_series: np.ndarray
    expected_delay: float
    max_norm_error: float = 0.0

    @property
    def p_stall_total(self) -> float:
        return float(self.p_stall_series.sum())


def consume_step(state: MarkovState, n_cons: int) -> MarkovState:
    """Deterministic consumption; levels below ``n_cons`` fall into the stall state."""
    if n_cons < 0:
        raise ValueError("n_cons must be non-negative")
    p = state.probs
    if n_cons == 0:
        return MarkovState(p.copy())
    out = np.zeros_like(p)
    levels = p[:-1]
    keep = max(len(levels) - n_cons, 0)
    out[:keep] = levels[len(levels) - keep:]
    out[-1] = p[-1] + levels[:len(levels) - keep].sum()
    return MarkovState(out)


def _binom_pmf(n: int, p: float) -> np.ndarray:
    k = np.arange(n + 1)
    comb = np.array([math.comb(n, int(j)) for j in k], dtype=float)
    return comb * p**k * (1 - p) ** (n - k)


def produce_step(state: MarkovState, n_prod: int, p_succ: float) -> MarkovState:
    """Add Binomial(``n_prod``, ``p_succ``) states, clamping at capacity."""
    if not 0 <= p_succ <= 1:
        raise ValueError(f"p_succ must lie in [0, 1], got {p_succ}")
    if n_prod == 0:
        return MarkovState(state.probs.copy())
    p = state.probs
    n_buf = state.n_buf
    pmf = _binom_pmf(n_prod, p_succ)
    full = np.convolve(p[:-1], pmf)
    out = np.zeros_like(p)
    out[:n_buf] = full[:n_buf]
    out[n_buf] = full[n_buf:].sum()
    out[-1] = p[-1]
    return MarkovState(out)


def _credits(entries):
    grouped: dict[float, int] = {}
    for p, n in entries:
        grouped[p] = grouped.get(p, 0) + n
    return tuple(sorted(grouped.items()))


def schedule_from_trace(trace: SimTrace, config: TwoLevelConfig) -> list[RoundEvents]:
    """Per-round credit/consumption events of a failure-free trace."""
    types = config.low_factories
    before: dict[int, list] = {}
    after: dict[int, list] = {}
    for r, kind, n, post in trace.production_log:
        (after if post else before).setdefault(r, []).append((types[kind].p_succ, n))
    rounds = sorted(set(before) | set(after) | {r for r, c in enumerate(trace.consumed_series) if c})
    return [
        RoundEvents(r, _credits(before.get(r, ())), trace.consumed_series[r], _credits(after.get(r, ())))
        for r in rounds
    ]


def markov_delay(
    schedule: Sequence[RoundEvents],
    n_buf: int,
    recovery: Callable[[int], float],
    horizon: int | None = None,
) -> DelayEstimate:
    """Evolve the buffer chain along ``schedule`` and weight first-stall
    probabilities by ``recovery(t)``."""
    horizon = horizon if horizon is not None else (schedule[-1].round if schedule else 0)
    p_stall = np.zeros(horizon + 1)
    rec = np.zeros(horizon + 1)
    state = MarkovState.empty(n_buf)
    worst = 0.0
    for ev in schedule:
        prev = state.p_fail
        for p, n in ev.before:
            state = produce_step(state, n, p)
        state = consume_step(state, ev.consumed)
        for p, n in ev.after:
            state = produce_step(state, n, p)
        worst = max(worst, abs(state.probs.sum() - 1.0))
        p_stall[ev.round] = state.p_fail - prev
        if p_stall[ev.round] > 0:
            rec[ev.round] = recovery(ev.round)
    delay = float(np.dot(p_stall, rec))
    return DelayEstimate(p_stall, rec, delay, worst)


def monte_carlo_delay(
    schedule: Sequence[RoundEvents],
    n_buf: int,
    recovery: Callable[[int], float],
    samples: int,
    seed: int,
) -> float:
    """Sample every credited state's success explicitly; mean first-stall delay."""
    rng = np.random.default_rng(seed)
    buf = np.zeros(samples, dtype=np.int64)
    alive = np.ones(samples, dtype=bool)
    delay = np.zeros(samples)

    def credit(entries):
        for p, n in entries:
            buf[:] = np.minimum(buf + rng.binomial(n, p, size=samples), n_buf)

    for ev in schedule:
        credit(ev.before)
        if ev.consumed:
            short = alive & (buf < ev.consumed)
            if short.any():
                delay[short] = recovery(ev.round)
                alive &= ~short
            buf -= np.where(alive, ev.consumed, 0)
            buf[~alive] = 0
        credit(ev.after)
    return float(delay.mean())


@functools.lru_cache(maxsize=4096)
def _recovery_rounds(types: tuple, pool: int, residual: tuple, move_rounds: int) -> float:
    try:
        fill = min_time_fill(AllocationProblem(types, pool, 1))
    except (InfeasibleAllocation, UnreachableThreshold):
        # nothing fits the freed region: wait on the residual factories from scratch
        committed = tuple(Committed(i, n, 0) for i, n, _ in residual)
        if not committed:
            return math.inf
        fill = min_time_fill(AllocationProblem(types, 0, 1, committed))
    return float(fill.objective + move_rounds)


def recovery_time(trace: SimTrace, config: TwoLevelConfig) -> float:
    """Rounds needed to refill one state through ancilla reuse, moves included."""
    return _recovery_rounds(
        config.low_factories,
        trace.reuse_pool_qubits,
        tuple(trace.residual_counts),
        config.move_out_rounds + config.move_back_rounds,
    )


def expected_delay(trace: SimTrace, config: TwoLevelConfig) -> DelayEstimate:
    """Expected extra rounds caused by low-level failures on a failure-free trace."""
    dt = recovery_time(trace, config)
    return markov_delay(schedule_from_trace(trace, config), config.n_buf, lambda _t: dt, trace.total_rounds)


def monte_carlo_oracle(config: TwoLevelConfig, samples: int, seed: int) -> float:
    """Seeded sampling estimate of :func:`expected_delay` for ``config``."""
    trace = simulate_two_level(config)
    dt = recovery_time(trace, config)
    return monte_carlo_delay(schedule_from_trace(trace, config), config.n_buf, lambda _t: dt, samples, seed)
