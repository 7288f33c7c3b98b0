"""Surface-code cost formulas and the 15-to-1 factory model.

Every factory is a black box described by its input pattern (burst then one
state per rotation), output count and fidelity, qubit/time cost and success
probability. Time is counted in stabilizer rounds throughout the package;
conversion to seconds happens only when reporting.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

from dynpipe.errors import CodeDoesNotSuppress, IneffectiveLevelWarning, InfeasibleProtocol

# 15-to-1 protocol constants
PATCHES_15TO1 = 15
DATA_PATCHES_15TO1 = 5
BURST_15TO1 = 4
ROTATIONS_15TO1 = 11


@dataclass(frozen=True)
class PhysicalParams:
    """Hardware timing (nanoseconds) and error rates."""

    t_2q: float
    t_meas: float
    p_phys: float
    eps_raw: float

    def __post_init__(self):
        if not (self.t_2q > 0 and self.t_meas > 0):
            raise ValueError(f"gate and measurement times must be positive, got {self.t_2q}, {self.t_meas}")
        if not 0 < self.p_phys < 1:
            raise ValueError(f"p_phys must lie in (0, 1), got {self.p_phys}")
        if not 0 < self.eps_raw < 1:
            raise ValueError(f"eps_raw must lie in (0, 1), got {self.eps_raw}")

    @property
    def round_ns(self) -> float:
        return stab_round_time(self)


PRESETS = {
    # fidelities of the three-level example table are only consistent with p = 1e-3
    "table1": PhysicalParams(t_2q=50.0, t_meas=100.0, p_phys=1e-3, eps_raw=1e-3),
    "supercond": PhysicalParams(t_2q=50.0, t_meas=100.0, p_phys=1e-4, eps_raw=1e-4),
}
# Majorana hardware parameters must be supplied by the user; the preset only
# unlocks distance-1 levels.
MAJORANA = "majorana"
PRESET_NAMES = tuple(PRESETS) + (MAJORANA,)


def stab_round_time(params: PhysicalParams) -> float:
    """Duration of one stabilizer round: six two-qubit gates plus a measurement."""
    return 6 * params.t_2q + params.t_meas


def logical_error_rate(p_phys: float, d: int) -> float:
    """Per-cycle logical error rate of a distance-``d`` surface code patch."""
    if not 0 < p_phys < 1:
        raise ValueError(f"p_phys must lie in (0, 1), got {p_phys}")
    if d < 1:
        raise ValueError(f"code distance must be >= 1, got {d}")
    p_l = 0.03 * (p_phys / 0.01) ** ((d + 1) / 2)
    if p_l >= 1:
        raise CodeDoesNotSuppress(f"p_L = {p_l:.3g} >= 1 at p = {p_phys}, d = {d}")
    return p_l


def output_error(eps_in: float, p_l: float) -> float:
    """Output error rate of a 15-to-1 factory."""
    eps_out = 35 * eps_in**3 + 7.1 * p_l
    if eps_in > 0 and eps_out >= eps_in:
        warnings.warn(
            f"level does not improve fidelity: eps_out {eps_out:.3g} >= eps_in {eps_in:.3g}",
            IneffectiveLevelWarning,
            stacklevel=2,
        )
    return eps_out


def success_prob(eps_in: float, p_l: float) -> float:
    """Probability that a 15-to-1 run passes post-selection."""
    p = 1 - 15 * eps_in - 356 * p_l
    if p <= 0:
        raise InfeasibleProtocol(f"success probability {p:.3g} <= 0 (eps_in={eps_in}, p_L={p_l})")
    return p


def qubits_per_patch(d: int) -> int:
    return 2 * d * d - 1


@dataclass(frozen=True)
class FactorySpec:
    """One distillation factory at a fixed code distance.

    ``consumption_offsets`` lists ``(round_offset, count)`` pairs relative to
    launch; the first entry is the burst at offset 0.
    """

    code_distance: int
    logical_patches: int
    data_patches: int
    physical_qubits: int
    duration_rounds: int
    burst_demand: int
    total_demand: int
    outputs: int
    eps_in: float
    eps_out: float
    p_succ: float
    consumption_offsets: tuple[tuple[int, int], ...] = field(repr=False)

    def __post_init__(self):
        if self.physical_qubits <= 0 or self.duration_rounds <= 0:
            raise ValueError("factory must have positive qubit and time cost")
        if self.burst_demand > self.total_demand:
            raise ValueError("burst demand exceeds total demand")
        if sum(c for _, c in self.consumption_offsets) != self.total_demand:
            raise ValueError("consumption offsets do not sum to total demand")
        if self.consumption_offsets[0] != (0, self.burst_demand):
            raise ValueError("first consumption entry must be the burst at offset 0")
        if not 0 < self.p_succ <= 1:
            raise ValueError(f"p_succ must lie in (0, 1], got {self.p_succ}")

    # uniform supply-option interface shared with CompositeFactory
    @property
    def qubits(self) -> int:
        return self.physical_qubits

    @property
    def rounds(self) -> int:
        return self.duration_rounds

    @property
    def patch_distance(self) -> int:
        return self.code_distance

    @property
    def rotations(self) -> int:
        return len(self.consumption_offsets) - 1

    @property
    def freed_patches(self) -> int:
        return self.logical_patches - self.data_patches

    def duration_ns(self, params: PhysicalParams) -> float:
        return self.duration_rounds * stab_round_time(params)


def consumption_schedule(spec: FactorySpec) -> list[tuple[int, int]]:
    return list(spec.consumption_offsets)


def _schedule_15to1(d: int) -> tuple[tuple[int, int], ...]:
    # burst at launch, then the k-th rotation needs its state at round k*d
    return ((0, BURST_15TO1),) + tuple((k * d, 1) for k in range(1, ROTATIONS_15TO1 + 1))


def build_15to1(d: int, eps_in: float, params: PhysicalParams) -> FactorySpec:
    """Build a 15-to-1 factory at code distance ``d`` fed with ``eps_in`` inputs.

    ``d`` must be odd; ``d == 1`` is accepted as a degenerate level (one
    physical qubit per patch).
    """
    if d < 1 or d % 2 == 0:
        raise ValueError(f"code distance must be a positive odd integer, got {d}")
    p_l = logical_error_rate(params.p_phys, d)
    return FactorySpec(
        code_distance=d,
        logical_patches=PATCHES_15TO1,
        data_patches=DATA_PATCHES_15TO1,
        physical_qubits=PATCHES_15TO1 * qubits_per_patch(d),
        duration_rounds=ROTATIONS_15TO1 * d,
        burst_demand=BURST_15TO1,
        total_demand=BURST_15TO1 + ROTATIONS_15TO1,
        outputs=1,
        eps_in=eps_in,
        eps_out=output_error(eps_in, p_l),
        p_succ=success_prob(eps_in, p_l),
        consumption_offsets=_schedule_15to1(d),
    )


def build_levels(distances, params: PhysicalParams) -> list[FactorySpec]:
    """Chain 15-to-1 factories, feeding each level the previous level's output."""
    levels = []
    eps = params.eps_raw
    for d in distances:
        spec = build_15to1(d, eps, params)
        levels.append(spec)
        eps = spec.eps_out
    return levels


@dataclass(frozen=True)
class CompositeFactory:
    """A scheduled multi-level sub-pipeline viewed as one low-level factory.

    ``supply_pipeline`` is a hashable descriptor of the configuration that
    realises it (distances, budget and buffer size of each stage).
    """

    underlying: FactorySpec
    supply_pipeline: tuple
    effective_Q: int
    effective_T: int
    effective_M: int = 1

    def __post_init__(self):
        if self.effective_Q < self.underlying.physical_qubits:
            raise ValueError("composite uses fewer qubits than its top factory")
        if self.effective_T < self.underlying.duration_rounds:
            raise ValueError("composite is faster than its top factory")

    @property
    def qubits(self) -> int:
        return self.effective_Q

    @property
    def rounds(self) -> int:
        return self.effective_T

    @property
    def outputs(self) -> int:
        return self.effective_M

    @property
    def p_succ(self) -> float:
        return self.underlying.p_succ

    @property
    def eps_out(self) -> float:
        return self.underlying.eps_out

    @property
    def patch_distance(self) -> int:
        return self.underlying.code_distance


def rounds_to_ns(rounds: float, params: PhysicalParams) -> float:
    return rounds * stab_round_time(params)


def ceil_rounds(t: float) -> int:
    # guard against float noise just above an integer
    return int(math.ceil(t - 1e-9))
