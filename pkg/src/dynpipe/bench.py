"""Benchmark sweeps: two-level pairs, fidelity-threshold search, applications."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from dynpipe.composer import (
    DEFAULT_GRID,
    ParetoFront,
    best_volume,
    compose_pareto,
    parallel_baseline,
    sequential_baseline,
    total_qubits,
)
from dynpipe.core import PhysicalParams, build_levels, stab_round_time
from dynpipe.errors import (
    CodeDoesNotSuppress,
    IneffectiveLevelWarning,
    InfeasibleConfig,
    InfeasibleProtocol,
    PipelineTooSlow,
)

PAIR_ORDERINGS = ("upper", "distinct")
THRESHOLD_DISTANCES = tuple(range(3, 48, 2))
DEFAULT_TARGETS = (1e-10, 1e-15, 1e-20, 1e-25, 1e-30)


def odd_range(lo: int, hi: int) -> list[int]:
    start = lo if lo % 2 else lo + 1
    return list(range(start, hi + 1, 2))


def two_level_pairs(d_min: int, d_max: int, ordering: str = "upper") -> list[tuple[int, int]]:
    """Odd distance pairs in ``[d_min, d_max]``.

    ``upper`` gives every pair with d1 <= d2; ``distinct`` gives every
    ordered pair with d1 != d2.
    """
    if d_min < 3 or d_min > d_max:
        raise ValueError(f"need 3 <= d_min <= d_max, got {d_min}, {d_max}")
    ds = odd_range(d_min, d_max)
    if ordering == "upper":
        return [(a, b) for a in ds for b in ds if a <= b]
    if ordering == "distinct":
        return [(a, b) for a in ds for b in ds if a != b]
    raise ValueError(f"unknown pair ordering {ordering!r}")


def _pmap(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _quiet_levels(distances, params):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IneffectiveLevelWarning)
        return build_levels(distances, params)


def _quiet_front(distances, params, grid_points) -> ParetoFront:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IneffectiveLevelWarning)
        return compose_pareto(distances, params, grid_points)


# --- two-level sweep -----------------------------------------------------------------


@dataclass(frozen=True)
class TwoLevelRow:
    d1: int
    d2: int
    dyn_q: int
    dyn_t: float
    buffer_size: int
    seq_volume: float
    par_volume: float

    @property
    def dyn_volume(self) -> float:
        return self.dyn_q * self.dyn_t

    @property
    def red_seq(self) -> float:
        return 1 - self.dyn_volume / self.seq_volume

    @property
    def red_par(self) -> float:
        return 1 - self.dyn_volume / self.par_volume


def two_level_row(pair: tuple[int, int], params: PhysicalParams, grid_points: int = DEFAULT_GRID) -> TwoLevelRow:
    levels = _quiet_levels(pair, params)
    best = best_volume(_quiet_front(pair, params, grid_points))
    return TwoLevelRow(
        pair[0], pair[1], best.q, best.t, best.n_buf,
        sequential_baseline(levels).volume, parallel_baseline(levels).volume,
    )


class _RowTask:
    # picklable partial for process pools
    def __init__(self, fn, *args):
        self.fn, self.args = fn, args

    def __call__(self, item):
        return self.fn(item, *self.args)


def bench_two_level(
    d_min: int,
    d_max: int,
    params: PhysicalParams,
    grid_points: int = DEFAULT_GRID,
    ordering: str = "upper",
    jobs: int = 1,
) -> list[TwoLevelRow]:
    pairs = two_level_pairs(d_min, d_max, ordering)
    return _pmap(_RowTask(two_level_row, params, grid_points), pairs, jobs)


@dataclass(frozen=True)
class SweepSummary:
    pairs: int
    mean_red_seq: float
    mean_red_par: float
    negative_pairs: int
    worst: float

    @property
    def negative_fraction(self) -> float:
        return self.negative_pairs / self.pairs


def summarize(rows: Sequence[TwoLevelRow]) -> SweepSummary:
    if not rows:
        raise ValueError("no rows to summarize")
    neg = [r for r in rows if r.red_seq < 0 or r.red_par < 0]
    worst = min(min(r.red_seq, r.red_par) for r in rows)
    return SweepSummary(
        len(rows),
        sum(r.red_seq for r in rows) / len(rows),
        sum(r.red_par for r in rows) / len(rows),
        len(neg),
        worst,
    )


# --- fidelity-threshold search ---------------------------------------------------------


def _final_eps(distances, params) -> float | None:
    try:
        return _quiet_levels(distances, params)[-1].eps_out
    except (CodeDoesNotSuppress, InfeasibleProtocol):
        return None


def threshold_candidates(
    target: float,
    params: PhysicalParams,
    grid: Sequence[int] = THRESHOLD_DISTANCES,
    max_levels: int = 3,
) -> list[tuple[int, ...]]:
    """For every prefix of up to ``max_levels - 1`` distances, the sequence
    completed by the smallest last distance that reaches ``target``."""
    if not 0 < target < 1:
        raise ValueError(f"target must lie in (0, 1), got {target}")
    if params.eps_raw <= target:
        return [()]
    prefixes: list[tuple[int, ...]] = [()]
    layer = [()]
    for _ in range(max_levels - 1):
        layer = [p + (d,) for p in layer for d in grid]
        prefixes += layer
    out = []
    for pre in prefixes:
        for d in grid:
            eps = _final_eps(pre + (d,), params)
            if eps is not None and eps <= target:
                out.append(pre + (d,))
                break
    return out


@dataclass(frozen=True)
class ThresholdRow:
    target: float
    dyn_volume: float
    dyn_distances: tuple[int, ...]
    seq_volume: float
    seq_distances: tuple[int, ...]
    par_volume: float
    par_distances: tuple[int, ...]
    candidates: int

    @property
    def feasible(self) -> bool:
        return self.candidates > 0


def _baseline_volumes(distances, params):
    if not distances:
        return 0.0, 0.0
    levels = _quiet_levels(distances, params)
    return sequential_baseline(levels).volume, parallel_baseline(levels).volume


def _dynamic_volume(distances, params, grid_points) -> float:
    if not distances:
        return 0.0
    try:
        return best_volume(_quiet_front(distances, params, grid_points)).volume
    except InfeasibleConfig:
        return math.inf


def bench_threshold(
    targets: Iterable[float],
    params: PhysicalParams,
    grid: Sequence[int] = THRESHOLD_DISTANCES,
    shortlist: int = 3,
    grid_points: int = DEFAULT_GRID,
    jobs: int = 1,
) -> list[ThresholdRow]:
    """Minimum volume per target for the dynamic pipeline and both baselines.

    Baselines are minimized over every candidate sequence. The dynamic
    pipeline is simulated on the ``shortlist`` best sequences of each
    baseline, so its minimum is an upper bound on the true one.
    """
    rows = []
    for target in targets:
        cands = threshold_candidates(target, params, grid)
        if not cands:
            rows.append(ThresholdRow(target, math.inf, (), math.inf, (), math.inf, (), 0))
            continue
        vols = {c: _baseline_volumes(c, params) for c in cands}
        by_seq = sorted(cands, key=lambda c: (vols[c][0], c))
        by_par = sorted(cands, key=lambda c: (vols[c][1], c))
        short = list(dict.fromkeys(by_seq[:shortlist] + by_par[:shortlist]))
        dyn = _pmap(_RowTask(_dynamic_volume, params, grid_points), short, jobs)
        v_dyn, d_dyn = min(zip(dyn, short))
        rows.append(ThresholdRow(
            target, v_dyn, d_dyn,
            vols[by_seq[0]][0], by_seq[0],
            vols[by_par[0]][1], by_par[0],
            len(cands),
        ))
    return rows


# --- applications ------------------------------------------------------------------------


@dataclass(frozen=True)
class AppRequirements:
    name: str
    required_fidelity: float
    magic_count: int
    runtime_s: float
    distances: tuple[int, ...]


@dataclass(frozen=True)
class AppRow:
    name: str
    seq_qubits: int
    par_qubits: int
    dyn_qubits: int

    @property
    def red_seq(self) -> float:
        return 1 - self.dyn_qubits / self.seq_qubits

    @property
    def red_par(self) -> float:
        return 1 - self.dyn_qubits / self.par_qubits


def app_costs(req: AppRequirements, params: PhysicalParams, grid_points: int = DEFAULT_GRID) -> AppRow:
    """Distillation qubits each architecture needs to feed the application.

    The dynamic cost uses the front point needing the fewest total qubits.
    """
    levels = _quiet_levels(req.distances, params)
    if levels[-1].eps_out > req.required_fidelity:
        raise InfeasibleConfig(
            f"{req.name}: distances {req.distances} give {levels[-1].eps_out:.3g} > required {req.required_fidelity:.3g}"
        )
    to_s = stab_round_time(params) * 1e-9
    seq = sequential_baseline(levels)
    par = parallel_baseline(levels)
    seq_q = total_qubits(seq.q, seq.t * to_s, req.magic_count, req.runtime_s)
    par_q = total_qubits(par.q, par.t * to_s, req.magic_count, req.runtime_s)
    best = None
    for p in _quiet_front(req.distances, params, grid_points):
        try:
            q = total_qubits(p.q, p.t * to_s, req.magic_count, req.runtime_s)
        except PipelineTooSlow:
            continue
        best = q if best is None else min(best, q)
    if best is None:
        raise PipelineTooSlow(f"{req.name}: every dynamic pipeline is slower than the program runtime")
    return AppRow(req.name, seq_q, par_q, best)
