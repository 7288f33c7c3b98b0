from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from dynpipe.core import build_15to1
from dynpipe.errors import ProtocolError
from dynpipe.scheduler import (
    Event,
    Phase,
    PhaseState,
    consumption_rate,
    launch_threshold,
    resume_threshold,
    step_phase,
)

rates = st.fractions(min_value=0, max_value=4, max_denominator=30)
pos_rates = rates.filter(lambda r: r > 0)


def test_launch_examples():
    c = Fraction(1, 3)
    assert launch_threshold(15, 4, c, c, 15) == 4
    assert launch_threshold(15, 4, c, 0, 10) == 10
    assert launch_threshold(15, 4, c, c / 2, 15) == 10
    assert launch_threshold(15, 4, c, c / 2, 6) == 6


def test_resume_examples():
    c = Fraction(1, 5)
    assert resume_threshold(11, c, c, 15) == 1
    assert resume_threshold(6, c, 0, 15) == 6
    assert resume_threshold(1, c, 0, 15) == 1
    assert resume_threshold(1, c, 7, 15) == 1


def test_floor_is_exact_on_boundaries():
    # 11 * (1/3) / (1/3) is exactly 11; float arithmetic would give 10.999...
    assert launch_threshold(15, 4, Fraction(1, 3), Fraction(1, 3), 15) == 4
    assert resume_threshold(3, Fraction(1, 10), Fraction(1, 30), 15) == 2


def test_threshold_validation():
    with pytest.raises(ValueError):
        launch_threshold(3, 4, 1, 1, 15)
    with pytest.raises(ValueError):
        launch_threshold(15, 4, 0, 1, 15)
    with pytest.raises(ValueError):
        resume_threshold(0, 1, 1, 15)


@given(st.integers(1, 30), st.integers(1, 30), pos_rates, rates, st.integers(1, 40))
def test_launch_properties(N, n_burst, r_cons, r_prod, n_buf):
    if n_burst > N:
        n_burst, N = N, n_burst
    th = launch_threshold(N, n_burst, r_cons, r_prod, n_buf)
    assert th <= n_buf
    assert th >= min(n_burst, n_buf)
    if r_prod >= r_cons:
        assert th == min(n_burst, n_buf)
    # non-increasing in production, non-decreasing in total demand
    assert launch_threshold(N, n_burst, r_cons, r_prod + Fraction(1, 7), n_buf) <= th
    assert launch_threshold(N + 1, n_burst, r_cons, r_prod, n_buf) >= th


@given(st.integers(1, 30), pos_rates, rates, st.integers(1, 40))
def test_resume_properties(n_rot, r_cons, r_prod, n_buf):
    th = resume_threshold(n_rot, r_cons, r_prod, n_buf)
    assert 1 <= th or n_buf < 1
    assert th <= n_buf
    assert th == resume_threshold(n_rot, r_cons, r_prod, n_buf)


@pytest.mark.parametrize("d", [1, 3, 17])
def test_consumption_rate(supercond, d):
    assert consumption_rate(build_15to1(d, 1e-4, supercond)) == Fraction(1, d)


def test_legal_transitions():
    s = PhaseState(Phase.FILL_BUFFER, 4, 11, 0)
    s = step_phase(s, Event.THRESHOLD_REACHED, clock=10)
    assert s.phase is Phase.PARALLEL_RUN and s.clock == 10
    s = step_phase(s, Event.STALL, rotations_remaining=6)
    assert s.phase is Phase.STALL_REUSE and s.rotations_remaining == 6
    s = step_phase(s, Event.RESUMED)
    assert step_phase(s, Event.COMPLETED).phase is Phase.DONE


@pytest.mark.parametrize("phase,event", [
    (Phase.FILL_BUFFER, Event.STALL),
    (Phase.FILL_BUFFER, Event.COMPLETED),
    (Phase.STALL_REUSE, Event.COMPLETED),
    (Phase.DONE, Event.RESUMED),
])
def test_illegal_transitions(phase, event):
    with pytest.raises(ProtocolError):
        step_phase(PhaseState(phase, 0, 11, 0), event)


def test_negative_buffer_rejected():
    with pytest.raises(ProtocolError):
        PhaseState(Phase.PARALLEL_RUN, -1, 3, 5)
