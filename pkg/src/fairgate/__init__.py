"""Multi-zone perimeter control with proportional and max-min queue balancing."""

from .balancing import (
    AllocationResult,
    InfeasibleBudgetError,
    balance,
    demands_from_queues,
    maxmin_allocate,
    maxmin_oracle,
    proportional_allocate,
)
from .controllers import CONTROLLERS, make_controller
from .gating import ControllerParams, ZoneControllerState, assign_rates, blend_shared, compute_budget, pi_update
from .metrics import compare_report, fairness_stats, gate_loss_times, nfd_points
from .plant import Plant, SimTrace, nfd_flow, receiving_capacity, run
from .scenario import ScenarioError, ScenarioSpec, arrivals, builtin, builtin_path, load_scenario

__version__ = "0.1.0"
