"""Deterministic round-level simulation of a two-level dynamic pipeline.

Low-level factories feed a buffer that the high-level factory drains in its
burst-then-steady pattern. Execution moves through three phases:

1. ``FillBuffer``: every qubit outside the buffer runs low-level factories
   until the launch threshold is buffered;
2. ``ParallelRun``: the high-level factory runs alongside the residual
   low-level factories;
3. ``StallReuse``: when a consumption finds the buffer short, the data
   patches are moved aside and the freed ancilla patches host extra low-level
   factories until the resume threshold is reached.

Within a round, completed runs are credited first, then the high-level factory
consumes, then outputs that found no room are credited. Failures are not
sampled here; see :mod:`dynpipe.failure`.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from dynpipe import scheduler
from dynpipe.allocator import (
    AllocationProblem,
    Committed,
    max_count_by,
    max_rate_alloc,
    min_time_fill,
)
from dynpipe.core import FactorySpec, PhysicalParams, qubits_per_patch, stab_round_time
from dynpipe.errors import InfeasibleAllocation, InfeasibleConfig, ProtocolError, UnreachableThreshold
from dynpipe.scheduler import Event, Phase, PhaseState

MAX_ROUNDS = 10_000_000


@dataclass(frozen=True)
class AncillaReuseContext:
    freed_patches: int
    move_out_rounds: int = 2
    move_back_rounds: int = 2

    def __post_init__(self):
        if self.move_out_rounds < 1 or self.move_back_rounds < 1:
            raise ValueError("data-patch moves take at least one round")


@dataclass(frozen=True)
class TwoLevelConfig:
    low_factories: tuple
    high_factory: FactorySpec
    q_budget: int
    n_buf: int
    buffer_patch_qubits: int
    params: PhysicalParams
    move_out_rounds: int = 2
    move_back_rounds: int = 2

    def __post_init__(self):
        object.__setattr__(self, "low_factories", tuple(self.low_factories))

    @classmethod
    def build(cls, low_factories, high_factory, q_budget, n_buf, params, **kw):
        """Config whose buffered states occupy patches at the producer's distance."""
        low = tuple(low_factories)
        bpq = max(qubits_per_patch(f.patch_distance) for f in low)
        return cls(low, high_factory, int(q_budget), int(n_buf), bpq, params, **kw)

    @property
    def reuse(self) -> AncillaReuseContext:
        return AncillaReuseContext(self.high_factory.freed_patches, self.move_out_rounds, self.move_back_rounds)

    @property
    def buffer_qubits(self) -> int:
        return self.n_buf * self.buffer_patch_qubits

    @property
    def residual_budget(self) -> int:
        return self.q_budget - self.high_factory.physical_qubits - self.buffer_qubits


@dataclass
class SimTrace:
    """Record of one failure-free run.

    ``production_log`` holds ``(round, factory_index, states, after_consumption)``
    for every credit to the buffer. ``reuse_pool_qubits`` and
    ``residual_counts`` describe the hardware available to recover from a
    stall, used for the analytic failure delay.
    """

    total_rounds: int
    qubits_used: int
    buffer_series: list[int]
    phase_intervals: list[tuple[str, int, int]]
    stall_count: int
    produced_series: list[int]
    consumed_series: list[int]
    production_log: list[tuple[int, int, int, bool]] = field(repr=False)
    launch_round: int = 0
    launch_threshold: int = 0
    residual_counts: tuple = ()
    reuse_pool_qubits: int = 0
    stall_rounds: int = 0

    @property
    def final_buffer(self) -> int:
        return self.buffer_series[-1]

    def seconds(self, params: PhysicalParams) -> float:
        return self.total_rounds * stab_round_time(params) * 1e-9


def buffer_qubit_overhead(n_buf: int, producer_distance: int) -> int:
    """Physical qubits of ``n_buf`` storage patches at the producer's distance."""
    if n_buf < 0:
        raise ValueError("buffer size must be non-negative")
    return n_buf * qubits_per_patch(producer_distance)


def ancilla_reuse_pool(high: FactorySpec, residual_qubits: int) -> int:
    """Qubits available to extra low-level factories while ``high`` is stalled."""
    return residual_qubits + high.freed_patches * qubits_per_patch(high.code_distance)


class _Cohort:
    __slots__ = ("kind", "count", "region", "due", "held", "start")

    def __init__(self, kind, count, region, start, rounds):
        self.kind = kind
        self.count = count
        self.region = region
        self.start = start
        self.due = start + rounds
        self.held = 0


class _Run:
    """Mutable simulation state; one instance per call to simulate_two_level."""

    def __init__(self, config: TwoLevelConfig):
        self.cfg = config
        self.types = config.low_factories
        self.high = config.high_factory
        self.cohorts: list[_Cohort] = []
        self.buffer = 0
        self.t = 0
        self.state = PhaseState(Phase.FILL_BUFFER, 0, self.high.rotations, 0)
        self.buffer_points: list[tuple[int, int]] = []
        self.produced: dict[int, int] = {}
        self.consumed: dict[int, int] = {}
        self.log: list[tuple[int, int, int, bool]] = []
        self.intervals: list[tuple[str, int, int]] = []
        self.phase_start = 0
        self.peak = 0
        self.stalls = 0
        self.stalled_total = 0

    # -- bookkeeping ---------------------------------------------------------

    def usage(self) -> int:
        q = self.cfg.buffer_qubits + sum(c.count * self.types[c.kind].qubits for c in self.cohorts)
        if self.state.phase in (Phase.PARALLEL_RUN, Phase.STALL_REUSE):
            if self.sub == "reusing":
                q += self.high.data_patches * qubits_per_patch(self.high.code_distance)
            else:
                q += self.high.physical_qubits
        return q

    def spawn(self, alloc, region):
        for i, n, _ in alloc.counts:
            self.cohorts.append(_Cohort(i, n, region, self.t, self.types[i].rounds))

    def teardown(self, region):
        # partial progress and undeposited outputs are lost
        self.cohorts = [c for c in self.cohorts if c.region != region]

    def set_phase(self, event, **extra):
        self.intervals.append((self.state.phase.value, self.phase_start, self.t))
        self.phase_start = self.t
        self.state = scheduler.step_phase(self.state, event, buffer_count=self.buffer, clock=self.t, **extra)

    def committed(self, region="residual"):
        out = []
        for c in self.cohorts:
            if c.region == region and c.due is not None:
                out.append(Committed(c.kind, c.count, self.t - c.start))
        return tuple(out)

    def complete(self):
        for c in self.cohorts:
            if c.due == self.t:
                c.held += c.count * self.types[c.kind].outputs
                c.due = None

    def deposit(self, after_consumption):
        fresh = []
        for c in self.cohorts:
            if not c.held:
                continue
            m = self.types[c.kind].outputs
            room = self.cfg.n_buf - self.buffer
            put = min(room, c.held)
            if put:
                self.buffer += put
                c.held -= put
                self.produced[self.t] = self.produced.get(self.t, 0) + put
                self.log.append((self.t, c.kind, put, after_consumption))
            busy = -(-c.held // m)
            free = c.count - busy
            if free > 0:
                if busy:
                    c.count = busy
                    fresh.append(_Cohort(c.kind, free, c.region, self.t, self.types[c.kind].rounds))
                else:
                    c.start = self.t
                    c.due = self.t + self.types[c.kind].rounds
        self.cohorts.extend(fresh)

    def consume(self, n):
        self.buffer -= n
        self.consumed[self.t] = self.consumed.get(self.t, 0) + n

    # -- planning ------------------------------------------------------------

    def plan(self, pool, target, cap, region):
        """Launch factories in ``pool`` qubits that reach ``target`` states
        soonest, then pad the pool with as many as finish by then."""
        problem = AllocationProblem(self.types, pool, target, self.committed())
        try:
            horizon = min_time_fill(problem).objective
        except (InfeasibleAllocation, UnreachableThreshold) as exc:
            raise InfeasibleConfig(f"no low-level production possible: {exc}") from None
        alloc = max_count_by(problem, horizon, cap)
        self.spawn(alloc, region)

    # -- main loop -------------------------------------------------------------

    def run(self) -> SimTrace:
        cfg, high = self.cfg, self.high
        if cfg.n_buf < high.burst_demand:
            raise InfeasibleConfig(f"buffer too small: {cfg.n_buf} < burst demand {high.burst_demand}")
        residual = cfg.residual_budget
        if residual < 0:
            raise InfeasibleConfig(
                f"budget too small: {cfg.q_budget} < high factory {high.physical_qubits}"
                f" + buffer {cfg.buffer_qubits}"
            )
        self.sub = None
        par = max_rate_alloc(AllocationProblem(self.types, residual))
        self.r_prod = par.objective
        self.r_cons = scheduler.consumption_rate(high)
        idle = residual - par.qubits
        self.spawn(par, "residual")
        n_th = scheduler.launch_threshold(high.total_demand, high.burst_demand, self.r_cons, self.r_prod, cfg.n_buf)
        self.plan(high.physical_qubits + idle, n_th, cfg.n_buf, "fill")
        self.peak = self.usage()

        offsets = high.consumption_offsets
        idx = 0
        launch = None
        stall = None  # (stall_start, move_out_end, resume_threshold, move_back_end)
        pool = ancilla_reuse_pool(high, idle)

        while True:
            if self.t > MAX_ROUNDS:
                raise ProtocolError("simulation exceeded round limit")
            self.complete()
            self.deposit(False)
            phase = self.state.phase

            if phase is Phase.FILL_BUFFER and self.buffer >= n_th:
                launch = self.t
                self.set_phase(Event.THRESHOLD_REACHED)
                phase = self.state.phase

            if phase is Phase.STALL_REUSE:
                start, out_end, n_res, back_end = stall
                if self.sub == "moving_out" and self.t >= out_end:
                    target = n_res - self.buffer
                    self.sub = "reusing"
                    if target > 0:
                        self.plan(pool, target, cfg.n_buf - self.buffer, "reuse")
                if self.sub == "reusing" and self.buffer >= n_res:
                    self.teardown("reuse")
                    self.sub = "moving_back"
                    back_end = self.t + cfg.move_back_rounds
                    stall = (start, out_end, n_res, back_end)
                if self.sub == "moving_back" and self.t >= back_end:
                    self.stalled_total += self.t - start
                    self.sub = None
                    self.set_phase(Event.RESUMED)
                    phase = self.state.phase

            if phase is Phase.PARALLEL_RUN:
                clock = self.t - launch - self.stalled_total
                while idx < len(offsets) and offsets[idx][0] == clock:
                    need = offsets[idx][1]
                    if self.buffer < need:
                        break
                    self.consume(need)
                    idx += 1
                if idx < len(offsets) and offsets[idx][0] == clock:
                    self.stalls += 1
                    n_rot = len(offsets) - idx
                    n_res = scheduler.resume_threshold(n_rot, self.r_cons, self.r_prod, cfg.n_buf)
                    stall = (self.t, self.t + cfg.move_out_rounds, n_res, None)
                    self.sub = "moving_out"
                    self.set_phase(Event.STALL, rotations_remaining=n_rot)
                elif idx == len(offsets) and clock >= high.duration_rounds:
                    self.set_phase(Event.COMPLETED)

            self.deposit(True)
            if launch == self.t and phase is not Phase.FILL_BUFFER:
                self.teardown("fill")
            self.buffer_points.append((self.t, self.buffer))
            self.peak = max(self.peak, self.usage())
            if self.state.phase is Phase.DONE:
                break
            self.t = self._next_event(launch, idx, stall)

        return self._trace(launch, n_th, par, pool)

    def _next_event(self, launch, idx, stall) -> int:
        times = [c.due for c in self.cohorts if c.due is not None]
        phase = self.state.phase
        if phase is Phase.PARALLEL_RUN:
            base = launch + self.stalled_total
            if idx < len(self.high.consumption_offsets):
                times.append(base + self.high.consumption_offsets[idx][0])
            else:
                times.append(base + self.high.duration_rounds)
        elif phase is Phase.STALL_REUSE:
            _, out_end, _, back_end = stall
            if self.sub == "moving_out":
                times.append(out_end)
            elif self.sub == "moving_back":
                times.append(back_end)
        times = [x for x in times if x > self.t]
        if not times:
            raise InfeasibleConfig("pipeline deadlocked: no pending production or consumption")
        return min(times)

    def _trace(self, launch, n_th, par, pool) -> SimTrace:
        end = self.t
        buffer_series = [0] * (end + 1)
        points = self.buffer_points + [(end + 1, None)]
        for (t0, b), (t1, _) in zip(points, points[1:]):
            for r in range(t0, min(t1, end + 1)):
                buffer_series[r] = b
        produced = [0] * (end + 1)
        consumed = [0] * (end + 1)
        for r, n in self.produced.items():
            produced[r] = n
        for r, n in self.consumed.items():
            consumed[r] = n
        self.intervals.append((Phase.DONE.value, end, end))
        return SimTrace(
            total_rounds=end,
            qubits_used=self.peak,
            buffer_series=buffer_series,
            phase_intervals=self.intervals,
            stall_count=self.stalls,
            produced_series=produced,
            consumed_series=consumed,
            production_log=self.log,
            launch_round=launch,
            launch_threshold=n_th,
            residual_counts=par.counts,
            reuse_pool_qubits=pool,
            stall_rounds=self.stalled_total,
        )


def simulate_two_level(config: TwoLevelConfig) -> SimTrace:
    """Run one configuration to completion of the high-level factory.

    Raises :class:`InfeasibleConfig` when the buffer cannot hold the burst,
    the budget cannot host the high-level factory and buffer, or no
    low-level factory can run.
    """
    return _Run(config).run()


def forced_sequential_config(low, high: FactorySpec, params: PhysicalParams, **kw) -> TwoLevelConfig:
    """Corner config with a full-demand buffer and no residual budget.

    All inputs are prepared before launch and the high-level factory then runs
    uninterrupted, mirroring a sequential pipeline.
    """
    low = tuple(low)
    bpq = max(qubits_per_patch(f.patch_distance) for f in low)
    n_buf = high.total_demand
    return TwoLevelConfig(low, high, high.physical_qubits + n_buf * bpq, n_buf, bpq, params, **kw)


TRACE_COLUMNS = ("round", "buffer_count", "phase", "produced_cum", "consumed_cum")


def phase_at(trace: SimTrace) -> list[str]:
    names = [""] * (trace.total_rounds + 1)
    for name, start, end in trace.phase_intervals:
        for r in range(start, max(end, start + 1) if name == Phase.DONE.value else end):
            if r <= trace.total_rounds:
                names[r] = name
    return names


def write_trace_csv(trace: SimTrace, path: Path) -> None:
    names = phase_at(trace)
    prod = cons = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in range(trace.total_rounds + 1):
            prod += trace.produced_series[r]
            cons += trace.consumed_series[r]
            w.writerow((r, trace.buffer_series[r], names[r], prod, cons))


def production_rate(config: TwoLevelConfig) -> Fraction:
    """Steady production rate of the residual allocation, states per round."""
    return max_rate_alloc(AllocationProblem(config.low_factories, max(config.residual_budget, 0))).objective
