"""Energy-aware assignment of mixed electric and diesel bus fleets.

Solvers (greedy, simulated annealing, exact branch-and-bound), the integer
program export, and the telemetry-to-energy pipeline that feeds them.
"""

__version__ = "0.1.0"

from .anneal import AnnealConfig, Schedule, accept_probability, anneal, random_neighbor
from .exact import ExactResult, solve_exact
from .feasibility import (
    BatteryProfile,
    Task,
    ValidationReport,
    Violation,
    battery_profile,
    charging_task,
    pair_feasible,
    solution_cost,
    trip_task,
    validate_solution,
)
from .generator import generate_instance, random_instance
from .greedy import GreedyConfig, biased_cost, greedy_assign, update_after_assign
from .gtfs import ingest_gtfs
from .instance import (
    ChargingPole,
    CostParams,
    DeadheadEntry,
    Instance,
    Location,
    SlotGrid,
    Solution,
    TransitTrip,
    Vehicle,
    VehicleModelSpec,
    deadhead_duration,
    deadhead_energy,
    load_instance,
    load_solution,
    save_instance,
)
from .milp import MilpModel, build_milp, export_lp, parse_lp

__all__ = [
    "AnnealConfig", "BatteryProfile", "ChargingPole", "CostParams", "DeadheadEntry", "ExactResult",
    "GreedyConfig", "Instance", "Location", "MilpModel", "Schedule", "SlotGrid", "Solution", "Task",
    "TransitTrip", "ValidationReport", "Vehicle", "VehicleModelSpec", "Violation", "accept_probability",
    "anneal", "battery_profile", "biased_cost", "build_milp", "charging_task", "deadhead_duration",
    "deadhead_energy", "export_lp", "generate_instance", "greedy_assign", "ingest_gtfs", "load_instance",
    "load_solution", "pair_feasible", "parse_lp", "random_instance", "random_neighbor", "save_instance",
    "solution_cost", "solve_exact", "trip_task", "update_after_assign", "validate_solution",
]
