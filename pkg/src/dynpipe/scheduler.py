"""Launch/resume buffer thresholds and the three-phase execution state machine."""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from fractions import Fraction

from dynpipe.errors import ProtocolError


def _floor_ratio(x, r_prod, r_cons) -> int:
    # exact floor(x * r_prod / r_cons); rates must be rationals to be bit-exact
    q = Fraction(x) * Fraction(r_prod) / Fraction(r_cons)
    return q.numerator // q.denominator


def launch_threshold(N: int, n_burst: int, r_cons, r_prod, n_buf: int) -> int:
    """Buffer count at which the high-level factory is launched.

    Pre-buffers enough states beyond the burst to cover the steady-phase
    shortfall when production is slower than consumption, clamped to the
    buffer capacity.
    """
    if not N >= n_burst >= 1:
        raise ValueError(f"need N >= n_burst >= 1, got N={N}, n_burst={n_burst}")
    if Fraction(r_cons) <= 0 or Fraction(r_prod) < 0:
        raise ValueError("r_cons must be positive and r_prod non-negative")
    n_slack = max(n_burst, N - _floor_ratio(N - n_burst, r_prod, r_cons))
    return min(n_slack, n_buf)


def resume_threshold(n_rot: int, r_cons, r_prod, n_buf: int) -> int:
    """Buffer count at which a stalled high-level factory resumes."""
    if n_rot < 1:
        raise ValueError(f"n_rot must be >= 1, got {n_rot}")
    if Fraction(r_cons) <= 0 or Fraction(r_prod) < 0:
        raise ValueError("r_cons must be positive and r_prod non-negative")
    n_slack = max(1, n_rot - _floor_ratio(n_rot, r_prod, r_cons))
    return min(n_slack, n_buf)


def consumption_rate(spec) -> Fraction:
    """Steady consumption rate (states per round) of a factory."""
    offsets = [o for o, _ in spec.consumption_offsets]
    if len(offsets) < 2:
        raise ValueError("factory has no steady phase")
    gaps = {b - a for a, b in zip(offsets, offsets[1:])}
    if len(gaps) != 1:
        raise ValueError(f"steady consumption is not periodic: gaps {sorted(gaps)}")
    return Fraction(1, gaps.pop())


@dataclass(frozen=True)
class Thresholds:
    n_slack: int
    n_th: int
    n_slack_resume: int
    n_th_resume: int


class Phase(enum.Enum):
    FILL_BUFFER = "FillBuffer"
    PARALLEL_RUN = "ParallelRun"
    STALL_REUSE = "StallReuse"
    DONE = "Done"


class Event(enum.Enum):
    THRESHOLD_REACHED = "threshold_reached"
    STALL = "stall"
    RESUMED = "resumed"
    COMPLETED = "completed"


_TRANSITIONS = {
    (Phase.FILL_BUFFER, Event.THRESHOLD_REACHED): Phase.PARALLEL_RUN,
    (Phase.PARALLEL_RUN, Event.STALL): Phase.STALL_REUSE,
    (Phase.STALL_REUSE, Event.RESUMED): Phase.PARALLEL_RUN,
    (Phase.PARALLEL_RUN, Event.COMPLETED): Phase.DONE,
}


@dataclass(frozen=True)
class PhaseState:
    phase: Phase
    buffer_count: int
    rotations_remaining: int
    clock: int

    def __post_init__(self):
        if self.buffer_count < 0:
            raise ProtocolError(f"negative buffer count {self.buffer_count}")


def step_phase(state: PhaseState, event: Event, **changes) -> PhaseState:
    """Apply ``event``; extra keyword arguments update the other fields."""
    nxt = _TRANSITIONS.get((state.phase, event))
    if nxt is None:
        raise ProtocolError(f"illegal event {event.value} in phase {state.phase.value}")
    return replace(state, phase=nxt, **changes)
