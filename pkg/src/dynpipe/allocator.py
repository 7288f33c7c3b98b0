"""Exact solvers for the two low-level factory allocation programs.

Both programs pick integer copy counts ``n_i`` of factory types with cost
``Q_i`` qubits, ``M_i`` outputs and ``T_i`` rounds per run:

* the fill program minimises the integer time ``T`` needed to produce
  ``n_threshold`` states, where each copy runs ``k_i <= T / T_i`` times;
* the rate program maximises ``sum n_i M_i / T_i``.

Both respect ``sum n_i Q_i <= q_max``. Factories may be any objects exposing
``qubits``, ``outputs`` and ``rounds``.
"""
from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from dynpipe.errors import InfeasibleAllocation, InstanceTooLarge, UnreachableThreshold


@dataclass(frozen=True)
class Producer:
    """Minimal factory type for the allocator."""

    qubits: int
    outputs: int
    rounds: int


@dataclass(frozen=True)
class Committed:
    """``count`` copies of factory ``index`` already running, ``elapsed`` rounds
    into their current run. They contribute output but no budget."""

    index: int
    count: int
    elapsed: int = 0


@dataclass(frozen=True)
class AllocationProblem:
    factories: tuple
    q_max: int
    n_threshold: int | None = None
    committed: tuple[Committed, ...] = ()

    def __post_init__(self):
        if not self.factories:
            raise ValueError("at least one factory type is required")
        if self.q_max < 0:
            raise ValueError(f"q_max must be non-negative, got {self.q_max}")
        if self.n_threshold is not None and self.n_threshold < 1:
            raise ValueError(f"n_threshold must be >= 1, got {self.n_threshold}")
        object.__setattr__(self, "factories", tuple(self.factories))
        object.__setattr__(self, "committed", tuple(self.committed))


@dataclass(frozen=True)
class Allocation:
    """``counts`` holds ``(index, n_i, k_i)`` for every type with ``n_i > 0``.

    ``objective`` is the fill time in rounds (int) or the production rate in
    states per round (Fraction).
    """

    counts: tuple[tuple[int, int, int], ...]
    objective: int | Fraction
    qubits: int
    copies: int

    def n(self, index: int) -> int:
        for i, n, _ in self.counts:
            if i == index:
                return n
        return 0


def committed_supply(problem: AllocationProblem, t: int) -> int:
    """States delivered by already-running copies within ``t`` rounds."""
    total = 0
    for c in problem.committed:
        f = problem.factories[c.index]
        total += c.count * f.outputs * ((t + c.elapsed) // f.rounds)
    return total


def rate_of(factories: Sequence, counts) -> Fraction:
    return sum((Fraction(n * factories[i].outputs, factories[i].rounds) for i, n, _ in counts), Fraction(0))


def _cover(values, costs, need):
    """Cheapest multiset with total value >= need.

    Returns ``(qubits, copies, counts_by_index)`` minimising qubits, then
    copies, preferring lower indices; ``None`` if no item has value.
    """
    usable = [i for i, v in enumerate(values) if v > 0]
    if not usable:
        return None
    best = [(0, 0, -1)] * (need + 1)
    for v in range(1, need + 1):
        cand = None
        for i in usable:
            q, c, _ = best[max(0, v - values[i])]
            key = (q + costs[i], c + 1)
            if cand is None or key < cand[:2]:
                cand = (key[0], key[1], i)
        best[v] = cand
    counts = [0] * len(values)
    v = need
    while v > 0:
        i = best[v][2]
        counts[i] += 1
        v = max(0, v - values[i])
    return best[need][0], best[need][1], counts


def _fill_at(problem: AllocationProblem, t: int):
    need = problem.n_threshold - committed_supply(problem, t)
    if need <= 0:
        return 0, 0, [0] * len(problem.factories)
    values = [(t // f.rounds) * f.outputs if f.qubits <= problem.q_max else 0 for f in problem.factories]
    costs = [f.qubits for f in problem.factories]
    return _cover(values, costs, need)


def _fill_upper_bound(problem: AllocationProblem) -> int:
    n = problem.n_threshold
    fitting = [f for f in problem.factories if f.qubits <= problem.q_max]
    bounds = []
    if fitting:
        smallest = min(fitting, key=lambda f: (f.qubits, f.rounds))
        bounds.append(-(-n // smallest.outputs) * smallest.rounds)
    if problem.committed:
        # committed copies alone: run until their cumulative output suffices
        per_round = sum(c.count * problem.factories[c.index].outputs for c in problem.committed)
        if per_round > 0:
            slowest = max(problem.factories[c.index].rounds for c in problem.committed)
            bounds.append(-(-n // per_round) * slowest)
    if not bounds:
        raise InfeasibleAllocation(f"no factory fits the budget of {problem.q_max} qubits")
    return min(bounds)


def _fill_candidates(problem: AllocationProblem, t_ub: int) -> list[int]:
    times = set()
    for f in problem.factories:
        if f.qubits <= problem.q_max:
            times.update(range(f.rounds, t_ub + 1, f.rounds))
    for c in problem.committed:
        r = problem.factories[c.index].rounds
        first = r - (c.elapsed % r)
        times.update(range(first, t_ub + 1, r))
    times.add(t_ub)
    return sorted(times)


def min_time_fill(problem: AllocationProblem) -> Allocation:
    """Minimum whole-round time to accumulate ``n_threshold`` states.

    The optimal time always coincides with some run completion, so only the
    finite set of completion times up to a solo-factory bound is searched;
    feasibility is monotone in time, which permits bisection.
    """
    if problem.n_threshold is None:
        raise ValueError("fill problem requires n_threshold")
    t_ub = _fill_upper_bound(problem)
    cands = _fill_candidates(problem, t_ub)

    def ok(t):
        sol = _fill_at(problem, t)
        return sol is not None and sol[0] <= problem.q_max

    if not ok(cands[-1]):
        raise UnreachableThreshold(f"cannot reach {problem.n_threshold} states with {problem.q_max} qubits")
    lo = bisect.bisect_left(range(len(cands)), True, key=lambda j: ok(cands[j]))
    t = cands[lo]
    qubits, copies, counts = _fill_at(problem, t)
    triples = tuple(
        (i, n, t // problem.factories[i].rounds) for i, n in enumerate(counts) if n > 0
    )
    return Allocation(counts=triples, objective=t, qubits=qubits, copies=copies)


def max_count_by(problem: AllocationProblem, horizon: int, cap: int | None = None) -> Allocation:
    """Allocation producing the most states within ``horizon`` rounds.

    Output beyond ``cap`` (counting committed supply) is worthless; among equal
    useful output the cheapest allocation wins. ``problem.n_threshold`` is
    ignored.
    """
    fs = problem.factories
    base = committed_supply(problem, horizon)
    values = [(horizon // f.rounds) * f.outputs if f.qubits <= problem.q_max else 0 for f in fs]
    if cap is None:
        # enough to saturate the budget with the densest type
        cap = base + max(
            ((problem.q_max // f.qubits) * v for f, v in zip(fs, values) if v > 0), default=0
        )
    best = (0, 0, [0] * len(fs))
    need = cap - base
    # the most output the budget allows, searched downward from the cap
    for target in range(need, 0, -1):
        sol = _cover(values, [f.qubits for f in fs], target)
        if sol is not None and sol[0] <= problem.q_max:
            best = sol
            break
    qubits, copies, counts = best
    triples = tuple((i, n, horizon // fs[i].rounds) for i, n in enumerate(counts) if n > 0)
    return Allocation(counts=triples, objective=horizon, qubits=qubits, copies=copies)


_NEG = -(2**62)


def max_rate_alloc(problem: AllocationProblem) -> Allocation:
    """Maximum steady production rate under the qubit budget.

    Unbounded knapsack solved by dynamic programming over the budget (in units
    of the gcd of the factory footprints). Rates are scaled to integers so that
    ties are exact; among equal rates fewer qubits, then fewer copies win.
    """
    fs = problem.factories
    fit = [i for i, f in enumerate(fs) if f.qubits <= problem.q_max]
    if not fit:
        return Allocation(counts=(), objective=Fraction(0), qubits=0, copies=0)
    if len(fit) == 1:
        i = fit[0]
        n = problem.q_max // fs[i].qubits
        return Allocation(((i, n, 0),), Fraction(n * fs[i].outputs, fs[i].rounds), n * fs[i].qubits, n)

    g = math.gcd(*(fs[i].qubits for i in fit))
    cap = problem.q_max // g
    weights = {i: fs[i].qubits // g for i in fit}
    rates = {i: Fraction(fs[i].outputs, fs[i].rounds) for i in fit}
    scale = math.lcm(*(r.denominator for r in rates.values()))
    values = {i: int(rates[i] * scale) for i in fit}
    k_copies = cap // min(weights.values()) + 1
    top = (max(values.values()) * k_copies + 1) * k_copies
    dtype = np.int64 if top < 2**61 else object

    dp = np.full(cap + 1, _NEG, dtype=dtype)
    dp[0] = k_copies - 1
    for i in fit:
        w, add = weights[i], values[i] * k_copies - 1
        for start in range(w, cap + 1, w):
            seg = dp[start:start + w]
            prev = dp[start - w:start - w + len(seg)]
            cand = prev + add
            cand[prev < 0] = _NEG
            np.maximum(seg, cand, out=seg)

    reach = dp >= 0
    vals = np.where(reach, dp // k_copies, -1)
    best_val = vals.max()
    c = int(np.flatnonzero(vals == best_val)[0])
    counts = dict.fromkeys(fit, 0)
    while c > 0:
        for i in fit:
            w = weights[i]
            if w <= c and dp[c - w] >= 0 and dp[c - w] + values[i] * k_copies - 1 == dp[c]:
                counts[i] += 1
                c -= w
                break
        else:  # pragma: no cover - DP table inconsistent
            raise RuntimeError("knapsack reconstruction failed")
    triples = tuple((i, n, 0) for i, n in counts.items() if n > 0)
    qubits = sum(fs[i].qubits * n for i, n, _ in triples)
    copies = sum(n for _, n, _ in triples)
    return Allocation(triples, rate_of(fs, triples), qubits, copies)


# --- brute-force oracles ---------------------------------------------------

_MAX_TYPES = 3
_MAX_Q = 5000
_MAX_N = 60
_MAX_VECTORS = 2_000_000


def _enumerate(problem: AllocationProblem) -> np.ndarray:
    fs = problem.factories
    if len(fs) > _MAX_TYPES or problem.q_max > _MAX_Q:
        raise InstanceTooLarge("brute force limited to 3 types and 5000 qubits")
    ranges = [range(problem.q_max // f.qubits + 1) for f in fs]
    if math.prod(len(r) for r in ranges) > _MAX_VECTORS:
        raise InstanceTooLarge("too many copy vectors to enumerate")
    grid = np.array(list(itertools.product(*ranges)), dtype=np.int64).reshape(-1, len(fs))
    q = np.array([f.qubits for f in fs], dtype=np.int64)
    return grid[grid @ q <= problem.q_max]


def _pick(problem, vectors):
    q = np.array([f.qubits for f in problem.factories], dtype=np.int64)
    keyed = sorted(
        vectors.tolist(), key=lambda v: (int(np.dot(v, q)), sum(v), [-x for x in v])
    )
    return keyed[0]


def brute_force_fill(problem: AllocationProblem) -> Allocation:
    """Scan every integer time and every copy vector; small instances only."""
    if problem.n_threshold is None or problem.n_threshold > _MAX_N:
        raise InstanceTooLarge("brute force limited to n_threshold <= 60")
    vectors = _enumerate(problem)
    fs = problem.factories
    if not any(f.qubits <= problem.q_max for f in fs) and not problem.committed:
        raise InfeasibleAllocation("no factory fits the budget")
    outputs = np.array([f.outputs for f in fs], dtype=np.int64)
    rounds = np.array([f.rounds for f in fs], dtype=np.int64)
    horizon = problem.n_threshold * int(rounds.max()) * 2 + 1
    for t in range(1, horizon + 1):
        made = vectors @ ((t // rounds) * outputs) + committed_supply(problem, t)
        hit = vectors[made >= problem.n_threshold]
        if len(hit):
            v = _pick(problem, hit)
            counts = tuple((i, n, t // fs[i].rounds) for i, n in enumerate(v) if n > 0)
            return Allocation(counts, t, int(np.dot(v, [f.qubits for f in fs])), sum(v))
    raise UnreachableThreshold("threshold not reached within brute-force horizon")


def brute_force_rate(problem: AllocationProblem) -> Allocation:
    """Exhaustive maximum-rate search with exact rational arithmetic."""
    fs = problem.factories
    vectors = _enumerate(problem)
    rates = [Fraction(f.outputs, f.rounds) for f in fs]
    q = [f.qubits for f in fs]
    best = None
    for v in vectors.tolist():
        key = (sum((n * r for n, r in zip(v, rates)), Fraction(0)), -sum(a * b for a, b in zip(v, q)), -sum(v))
        if best is None or key > best[0]:
            best = (key, v)
    (rate, negq, negc), v = best
    counts = tuple((i, n, 0) for i, n in enumerate(v) if n > 0)
    return Allocation(counts, rate, -negq, -negc)
