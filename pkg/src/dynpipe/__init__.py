"""Dynamic scheduling and allocation for multi-level magic-state distillation."""

__version__ = "0.1.0"

from dynpipe.allocator import AllocationProblem, Allocation, Committed, Producer, max_rate_alloc, min_time_fill
from dynpipe.composer import (
    ParetoFront,
    ParetoPoint,
    best_volume,
    compose_pareto,
    parallel_baseline,
    sequential_baseline,
    total_qubits,
)
from dynpipe.core import PRESETS, CompositeFactory, FactorySpec, PhysicalParams, build_15to1, build_levels
from dynpipe.failure import expected_delay, monte_carlo_oracle
from dynpipe.scheduler import Phase, launch_threshold, resume_threshold
from dynpipe.simulator import SimTrace, TwoLevelConfig, forced_sequential_config, simulate_two_level

__all__ = [
    "Allocation", "AllocationProblem", "Committed", "CompositeFactory", "FactorySpec", "PRESETS",
    "ParetoFront", "ParetoPoint", "Phase", "PhysicalParams", "Producer", "SimTrace", "TwoLevelConfig",
    "best_volume", "build_15to1", "build_levels", "compose_pareto", "expected_delay", "forced_sequential_config",
    "launch_threshold", "max_rate_alloc", "min_time_fill", "monte_carlo_oracle", "parallel_baseline",
    "resume_threshold", "sequential_baseline", "simulate_two_level", "total_qubits",
]
