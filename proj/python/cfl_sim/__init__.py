"""Coded federated learning planner and straggler simulator.

Thin python surface over the C++ core: delay statistics, load/redundancy
planning, distributed encoding and epoch-synchronous training simulation.
"""

from ._core import (  # noqa: F401
    DeviceProfile,
    DivergenceError,
    ExperimentConfig,
    HeterogeneityConfig,
    LoadPlan,
    PlanError,
    RandomStream,
    RunMode,
    build_profiles,
    convergence_time,
    expected_delay,
    expected_return,
    nmse,
    optimal_device_load,
    paper_config,
    plan,
    plan_with_fixed_delta,
    return_probability,
    run,
    sample_delay,
    synthesize_problem,
)

__all__ = [
    "DeviceProfile",
    "DivergenceError",
    "ExperimentConfig",
    "HeterogeneityConfig",
    "LoadPlan",
    "PlanError",
    "RandomStream",
    "RunMode",
    "build_profiles",
    "convergence_time",
    "expected_delay",
    "expected_return",
    "nmse",
    "optimal_device_load",
    "paper_config",
    "plan",
    "plan_with_fixed_delta",
    "return_probability",
    "run",
    "sample_delay",
    "synthesize_problem",
]
