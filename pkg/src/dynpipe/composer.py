"""Multi-level composition, Pareto fronts, baseline cost models and metrics.

A multi-level pipeline is built two levels at a time: the front of the lower
levels becomes a set of composite low-level factories feeding the next level.
Times are in stabilizer rounds (floats once expected failure delay is added).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from dynpipe.core import (
    CompositeFactory,
    FactorySpec,
    PhysicalParams,
    build_levels,
    ceil_rounds,
    qubits_per_patch,
)
from dynpipe.errors import IneffectiveLevelWarning, InfeasibleConfig, PipelineTooSlow
from dynpipe.failure import expected_delay
from dynpipe.scheduler import consumption_rate
from dynpipe.simulator import TwoLevelConfig, simulate_two_level

DEFAULT_GRID = 24
SEQUENTIAL_REPLICATION = 16
PARALLEL_BUFFER_FIRST = 4
PARALLEL_BUFFER_OTHER = 8


@dataclass(frozen=True)
class ParetoPoint:
    """One pipeline configuration; ``factory`` is the pipeline seen as a producer."""

    q: int
    t: float
    distances: tuple[int, ...]
    budget: int
    n_buf: int | None
    factory: object = field(compare=False, repr=False)
    rounds: int = 0
    delay: float = 0.0
    stalls: int = 0

    @property
    def volume(self) -> float:
        return self.q * self.t

    @property
    def descriptor(self) -> tuple:
        return (self.distances, self.budget, self.n_buf)


@dataclass
class ParetoFront:
    points: list[ParetoPoint]

    def __post_init__(self):
        for a, b in zip(self.points, self.points[1:]):
            if not (a.q < b.q and a.t > b.t):
                raise ValueError("front must be sorted by q with strictly decreasing t")

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


def pareto_prune(points: Iterable[ParetoPoint]) -> ParetoFront:
    """Drop every point weakly dominated in (q, t)."""
    kept: list[ParetoPoint] = []
    for p in sorted(points, key=lambda p: (p.q, p.t, p.n_buf or 0, p.budget)):
        if not kept or p.t < kept[-1].t:
            kept.append(p)
    return ParetoFront(kept)


def merge_fronts(*fronts: ParetoFront) -> ParetoFront:
    return pareto_prune(p for f in fronts for p in f.points)


def volume(q: float, t: float) -> float:
    return q * t


def total_qubits(q: int, t: float, magic_count: int, runtime: float) -> int:
    """Physical qubits of enough pipeline copies to supply ``magic_count``
    states within ``runtime`` (same time unit as ``t``)."""
    per_copy = math.floor(runtime / t)
    if per_copy == 0:
        raise PipelineTooSlow(f"pipeline time {t:g} exceeds program runtime {runtime:g}")
    return q * -(-magic_count // per_copy)


def best_volume(front: ParetoFront) -> ParetoPoint:
    if not front.points:
        raise ValueError("empty front")
    return min(front.points, key=lambda p: (p.q * p.t, p.q))


# --- baselines -----------------------------------------------------------------


@dataclass(frozen=True)
class BaselineCost:
    q: int
    t: int
    copies_per_level: tuple[int, ...]

    @property
    def volume(self) -> float:
        return self.q * self.t


def sequential_baseline(levels: Sequence[FactorySpec]) -> BaselineCost:
    """Levels run one after another on shared qubits, ``16**(L-l)`` copies at level l."""
    L = len(levels)
    copies = tuple(SEQUENTIAL_REPLICATION ** (L - 1 - i) for i in range(L))
    q = max(n * f.physical_qubits for n, f in zip(copies, levels))
    t = sum(f.duration_rounds for f in levels)
    return BaselineCost(q, t, copies)


def parallel_baseline(levels: Sequence[FactorySpec]) -> BaselineCost:
    """All levels run concurrently with rate-matched copy counts.

    Copy counts are rounded up so supply never falls short of demand; buffers
    hold 4 patches at the first level and 8 elsewhere, at each level's own
    patch size.
    """
    L = len(levels)
    copies = [0] * L
    copies[-1] = 1
    for l in range(L - 1, 0, -1):
        hi, lo = levels[l], levels[l - 1]
        if lo.p_succ <= 0:
            raise ValueError("parallel baseline needs positive success probability")
        need = copies[l] * hi.total_demand * lo.duration_rounds / (hi.duration_rounds * lo.outputs * lo.p_succ)
        copies[l - 1] = math.ceil(need - 1e-12)
    q = 0
    for l, (n, f) in enumerate(zip(copies, levels)):
        patches = PARALLEL_BUFFER_FIRST if l == 0 else PARALLEL_BUFFER_OTHER
        q += n * (f.physical_qubits + patches * qubits_per_patch(f.code_distance))
    return BaselineCost(q, levels[-1].duration_rounds, tuple(copies))


# --- dynamic composition -----------------------------------------------------------


def buffer_range(high: FactorySpec) -> range:
    """Candidate buffer sizes: from the burst demand to the total demand."""
    return range(high.burst_demand, high.total_demand + 1)


def budget_grid(options: Sequence, high: FactorySpec, n_buf: int, points: int = DEFAULT_GRID) -> list[int]:
    """Geometric budget sweep for one buffer size.

    Runs from the smallest budget that can host the high-level factory, the
    buffer and one low-level factory, to one whose residual region holds
    twice the rate-matching number of the most qubit-efficient producer.
    """
    bpq = max(qubits_per_patch(o.patch_distance) for o in options)
    smallest = min(o.qubits for o in options)
    lo = high.physical_qubits + n_buf * bpq + max(0, smallest - high.physical_qubits)
    eff = min(options, key=lambda o: (o.qubits * o.rounds / o.outputs, o.qubits))
    r_cons = consumption_rate(high)
    match = math.ceil(r_cons * eff.rounds / eff.outputs)
    hi = lo + 2 * match * eff.qubits
    if points <= 1:
        return [lo]
    ratio = (hi / lo) ** (1 / (points - 1))
    grid = sorted({int(round(lo * ratio**k)) for k in range(points)} | {lo, hi})
    return grid


def _as_options(front: ParetoFront) -> tuple:
    return tuple(p.factory for p in front.points)


def evaluate(config: TwoLevelConfig, distances: tuple[int, ...]) -> ParetoPoint:
    """Simulate one configuration and add its expected failure delay."""
    trace = simulate_two_level(config)
    delay = expected_delay(trace, config).expected_delay
    t = trace.total_rounds + delay
    if not math.isfinite(t):
        raise InfeasibleConfig("no way to recover from a failure-induced stall")
    factory = CompositeFactory(
        underlying=config.high_factory,
        supply_pipeline=(distances, config.q_budget, config.n_buf),
        effective_Q=trace.qubits_used,
        effective_T=ceil_rounds(t),
    )
    return ParetoPoint(
        q=trace.qubits_used,
        t=t,
        distances=distances,
        budget=config.q_budget,
        n_buf=config.n_buf,
        factory=factory,
        rounds=trace.total_rounds,
        delay=delay,
        stalls=trace.stall_count,
    )


def sweep_points(
    front: ParetoFront,
    high: FactorySpec,
    params: PhysicalParams,
    grid_points: int = DEFAULT_GRID,
    buffers: Iterable[int] | None = None,
    distances: tuple[int, ...] | None = None,
) -> list[ParetoPoint]:
    """Every feasible (budget, buffer) configuration of ``high`` fed by ``front``."""
    options = _as_options(front)
    distances = distances or (front.points[0].distances + (high.code_distance,))
    out = []
    for n_buf in buffers if buffers is not None else buffer_range(high):
        budgets = budget_grid(options, high, n_buf, grid_points)
        if n_buf == high.total_demand:
            corner = high.physical_qubits + n_buf * max(qubits_per_patch(o.patch_distance) for o in options)
            budgets = sorted(set(budgets) | {corner})
        for budget in budgets:
            cfg = TwoLevelConfig.build(options, high, budget, n_buf, params)
            try:
                out.append(evaluate(cfg, distances))
            except InfeasibleConfig:
                continue
    return out


def extend_front(
    front: ParetoFront,
    high: FactorySpec,
    params: PhysicalParams,
    grid_points: int = DEFAULT_GRID,
    buffers: Iterable[int] | None = None,
) -> ParetoFront:
    """Add one level on top of ``front``, returning the combined front."""
    pts = sweep_points(front, high, params, grid_points, buffers)
    if not pts:
        raise InfeasibleConfig(f"no feasible configuration for level d={high.code_distance}")
    return pareto_prune(pts)


def single_level_front(spec: FactorySpec) -> ParetoFront:
    return ParetoFront([ParetoPoint(spec.physical_qubits, float(spec.duration_rounds), (spec.code_distance,),
                                    spec.physical_qubits, None, spec, spec.duration_rounds)])


def check_levels(levels: Sequence[FactorySpec]) -> None:
    for f in levels:
        if f.eps_out >= f.eps_in:
            warnings.warn(
                f"level d={f.code_distance} does not improve fidelity ({f.eps_in:.3g} -> {f.eps_out:.3g})",
                IneffectiveLevelWarning,
                stacklevel=3,
            )


def compose_pareto(
    distances: Sequence[int],
    params: PhysicalParams,
    grid_points: int = DEFAULT_GRID,
    buffers: Iterable[int] | None = None,
    protocol: str = "15to1",
) -> ParetoFront:
    """Pareto front of dynamic pipelines for the given per-level distances."""
    if protocol != "15to1":
        raise ValueError(f"unsupported protocol {protocol!r}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IneffectiveLevelWarning)
        levels = build_levels(distances, params)
    check_levels(levels)
    front = single_level_front(levels[0])
    for high in levels[1:]:
        front = extend_front(front, high, params, grid_points, buffers)
    return front


def forced_sequential_point(distances: Sequence[int], params: PhysicalParams, lower: ParetoFront | None = None) -> ParetoPoint:
    """The dynamic simulator run in its sequential-like corner for the top level pair."""
    from dynpipe.simulator import forced_sequential_config

    levels = build_levels(distances, params)
    if lower is None:
        lower = single_level_front(levels[0]) if len(levels) == 2 else compose_pareto(distances[:-1], params)
    cfg = forced_sequential_config(_as_options(lower), levels[-1], params)
    return evaluate(cfg, tuple(distances))
