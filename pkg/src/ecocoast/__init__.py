"""Eco-coasting control for a conventional vehicle on known road grades.

Spatial-domain vehicle model with fuel cut-off and engine start/stop
coasting, dynamic-programming benchmarks, mixed-integer MPC and a PI
reference controller.
"""

from .dp import DpGrid, DpSolution, ParetoPoint, dp_solve, dp_tracking_solve, pareto_sweep
from .errors import (EcoCoastError, Infeasible, InsufficientKineticEnergy, IoError, ParseError,
                     StalledVehicle, ValidationError, ZeroSpeed)
from .model import (KMH, ControlStep, PowertrainMode, SlopeProfile, StepOutcome, TrajectoryLog,
                    VehicleParams, advance, engine_speed_from_vehicle_speed, final_drive_torque,
                    fuel_rate, resistance_force, restart_speed_drop, simulate, step_fuel)
from .pi import PiConfig, PiState, pi_run, pi_step
from .scenario import CostWeights, OperatingLimits, ReferenceTrace, ScenarioSpec

__version__ = "0.1.0"

__all__ = [
    "DpGrid", "DpSolution", "ParetoPoint", "dp_solve", "dp_tracking_solve", "pareto_sweep",
    "EcoCoastError", "Infeasible", "InsufficientKineticEnergy", "IoError", "ParseError",
    "StalledVehicle", "ValidationError", "ZeroSpeed",
    "KMH", "ControlStep", "PowertrainMode", "SlopeProfile", "StepOutcome", "TrajectoryLog",
    "VehicleParams", "advance", "engine_speed_from_vehicle_speed", "final_drive_torque",
    "fuel_rate", "resistance_force", "restart_speed_drop", "simulate", "step_fuel",
    "PiConfig", "PiState", "pi_run", "pi_step",
    "CostWeights", "OperatingLimits", "ReferenceTrace", "ScenarioSpec",
]
