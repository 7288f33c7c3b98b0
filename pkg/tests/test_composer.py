import pytest

from dynpipe.composer import (
    BaselineCost,
    ParetoFront,
    ParetoPoint,
    best_volume,
    budget_grid,
    buffer_range,
    compose_pareto,
    extend_front,
    forced_sequential_point,
    merge_fronts,
    parallel_baseline,
    pareto_prune,
    sequential_baseline,
    total_qubits,
    volume,
)
from dynpipe.core import build_levels
from dynpipe.errors import IneffectiveLevelWarning, PipelineTooSlow


def pt(q, t, n_buf=4, budget=0):
    return ParetoPoint(q, float(t), (3,), budget or q, n_buf, None)


def test_sequential_baseline(table1_levels, table1):
    b = sequential_baseline(table1_levels)
    assert b.q == 65_280 and b.t == 297
    assert b.t * table1.round_ns / 1000 == pytest.approx(118.8)
    assert b.copies_per_level == (256, 16, 1)
    assert sequential_baseline(table1_levels[:1]) == BaselineCost(255, 33, (1,))
    assert sequential_baseline(build_levels((3, 9), table1)).q == 4080


def test_parallel_baseline(table1_levels, table1):
    b = parallel_baseline(build_levels((3, 9), table1))
    assert b.copies_per_level == (6, 1)
    assert b.q == 6 * (255 + 4 * 17) + (2415 + 8 * 161)
    b3 = parallel_baseline(table1_levels)
    assert b3.copies_per_level[-1] == 1
    assert b3.t * table1.round_ns / 1000 == pytest.approx(66.0)


def test_volume_and_total_qubits():
    assert volume(100, 2.5) == 250
    assert total_qubits(100, 2, 10, 10) == 200
    assert total_qubits(100, 3, 10, 10) == 400
    with pytest.raises(PipelineTooSlow):
        total_qubits(100, 11, 10, 10)


def test_best_volume():
    front = ParetoFront([pt(10, 10), pt(20, 4), pt(40, 3)])
    assert (best_volume(front).q, best_volume(front).volume) == (20, 80)
    assert best_volume(ParetoFront([pt(10, 10)])).q == 10
    assert best_volume(ParetoFront([pt(10, 8), pt(20, 4)])).q == 10


def test_prune_and_merge():
    front = pareto_prune([pt(10, 10), pt(10, 12), pt(12, 10), pt(20, 4), pt(30, 4), pt(40, 3)])
    assert [(p.q, p.t) for p in front] == [(10, 10), (20, 4), (40, 3)]
    merged = merge_fronts(front, ParetoFront([pt(15, 5)]))
    assert [(p.q, p.t) for p in merged] == [(10, 10), (15, 5), (20, 4), (40, 3)]
    with pytest.raises(ValueError):
        ParetoFront([pt(20, 4), pt(10, 10)])


def test_buffer_range(supercond):
    assert buffer_range(build_levels((3, 9), supercond)[1]) == range(4, 16)


def test_budget_grid_bounds(supercond):
    low, high = build_levels((3, 9), supercond)
    grid = budget_grid((low,), high, 4, 24)
    assert grid[0] == high.physical_qubits + 4 * 17
    assert grid == sorted(set(grid)) and len(grid) <= 24


def test_single_level_front(supercond):
    front = compose_pareto((5,), supercond)
    assert len(front) == 1
    assert (front.points[0].q, front.points[0].t) == (735, 55)


def test_two_level_front_is_pruned_and_plateaus(supercond):
    front = compose_pareto((3, 9), supercond)
    pts = front.points
    for a in pts:
        for b in pts:
            assert a is b or not (b.q <= a.q and b.t <= a.t)
    fastest = pts[-1]
    assert fastest.rounds == fastest.factory.underlying.duration_rounds + 33


def test_front_not_worse_than_sequential_corner(supercond):
    for ds in ((3, 5), (5, 9), (3, 13)):
        front = compose_pareto(ds, supercond)
        corner = forced_sequential_point(ds, supercond)
        assert best_volume(front).volume <= corner.volume


def test_recursion_consistency(supercond):
    kw = dict(grid_points=4, buffers=[4, 10])
    direct = compose_pareto((3, 5, 7), supercond, **kw)
    lower = compose_pareto((3, 5), supercond, **kw)
    stepped = extend_front(lower, build_levels((3, 5, 7), supercond)[2], supercond, 4, [4, 10])
    assert [(p.q, p.t, p.descriptor) for p in direct] == [(p.q, p.t, p.descriptor) for p in stepped]


def test_ineffective_level_warns(table1):
    with pytest.warns(IneffectiveLevelWarning):
        compose_pareto((3, 3), table1, grid_points=2, buffers=[4])
