"""Receding-horizon controllers with minimum-off constraints."""

from .constraints import (BinaryHistory, MinOffConstraints, default_sequence, feasible_sequences,
                          min_off_constraints)
from .controller import (MpcConfig, MpcRun, SolveResult, SolverKind, SolveStatus, heuristic_mpc_run,
                         mimpc_run, mimpc_step)
from .horizon import HorizonWindow, evaluate_horizon, solve_continuous, solve_relaxed
from .search import branch_and_bound, enumerate_binaries

__all__ = [
    "BinaryHistory", "MinOffConstraints", "default_sequence", "feasible_sequences",
    "min_off_constraints", "MpcConfig", "MpcRun", "SolveResult", "SolverKind", "SolveStatus",
    "heuristic_mpc_run", "mimpc_run", "mimpc_step", "HorizonWindow", "evaluate_horizon",
    "solve_continuous", "solve_relaxed", "branch_and_bound", "enumerate_binaries",
]
