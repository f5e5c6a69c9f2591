"""Receding-horizon controllers: mixed-integer MPC and the fixed-binary heuristic MPC."""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from ..errors import Infeasible, StalledVehicle, ValidationError, ZeroSpeed
from ..model import ControlStep, TrajectoryLog, advance
from ..scenario import CostWeights, ScenarioSpec
from .constraints import BinaryHistory, default_sequence, min_off_constraints
from .horizon import ContinuousResult, HorizonWindow, solve_continuous
from .search import branch_and_bound, enumerate_binaries

ENUMERATION_LIMIT = 12


class SolverKind(str, Enum):
    ENUMERATE = "enumerate"
    BRANCH_AND_BOUND = "bnb"

    @classmethod
    def parse(cls, value) -> "SolverKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "").replace("&", "")
        if key in ("enumerate", "enum", "enumeration"):
            return cls.ENUMERATE
        if key in ("bnb", "branchandbound", "bb"):
            return cls.BRANCH_AND_BOUND
        raise ValueError(f"unknown solver kind {value!r}")


class SolveStatus(str, Enum):
    OPTIMAL = "Optimal"
    ITERATION_LIMIT_FALLBACK = "IterationLimitFallback"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class MpcConfig:
    """``weights`` overrides the scenario's weights when given; ``max_iterations``
    caps branch & bound nodes per step (``None`` removes the cap)."""

    horizon_steps: int = 40
    d_min: int = 4
    weights: CostWeights | None = None
    max_iterations: int | None = 200
    solver_kind: SolverKind = SolverKind.BRANCH_AND_BOUND

    def __post_init__(self):
        object.__setattr__(self, "solver_kind", SolverKind.parse(self.solver_kind))
        if self.horizon_steps < 1:
            raise ValidationError("horizon_steps must be >= 1")
        if self.d_min < 1:
            raise ValidationError("d_min must be >= 1")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1 or None")
        if self.solver_kind is SolverKind.ENUMERATE and self.horizon_steps > ENUMERATION_LIMIT:
            raise ValidationError(f"enumeration is limited to horizons of {ENUMERATION_LIMIT} steps")

    def scenario_for(self, scenario: ScenarioSpec) -> ScenarioSpec:
        if self.weights is None:
            return scenario
        return scenario.with_(weights=self.weights)


@dataclass
class SolveResult:
    first_action: ControlStep
    planned_controls: list[ControlStep]
    predicted_speeds: np.ndarray
    objective: float
    status: SolveStatus
    iterations: int
    solve_time: float

    @property
    def planned_signals(self) -> tuple:
        return tuple(c.coast_signal for c in self.planned_controls)


class MpcRun(NamedTuple):
    log: TrajectoryLog
    steps: list

    @property
    def solve_times(self) -> np.ndarray:
        return np.array([s.solve_time for s in self.steps])

    @property
    def iterations(self) -> np.ndarray:
        return np.array([s.iterations for s in self.steps])

    @property
    def fallback_count(self) -> int:
        return sum(s.status is SolveStatus.ITERATION_LIMIT_FALLBACK for s in self.steps)


def shifted_plan(previous: SolveResult | None, horizon: int) -> tuple | None:
    """The previous plan's binaries advanced one step, last value repeated."""
    if previous is None or not previous.planned_controls:
        return None
    sig = list(previous.planned_signals[1:])
    if not sig:
        sig = [previous.planned_signals[-1]]
    while len(sig) < horizon:
        sig.append(sig[-1])
    return tuple(sig[:horizon])


def _result(plan: ContinuousResult, status: SolveStatus, iterations: int, t0: float) -> SolveResult:
    controls = plan.controls()
    return SolveResult(first_action=controls[0], planned_controls=controls,
                       predicted_speeds=plan.predicted_speeds, objective=plan.objective,
                       status=status, iterations=iterations, solve_time=time.perf_counter() - t0)


def mimpc_step(scenario: ScenarioSpec, k: int, v_k: float, history: BinaryHistory,
               config: MpcConfig, previous: SolveResult | None = None) -> SolveResult:
    """Solve the mixed-integer horizon problem at step ``k``.

    The binaries respect the minimum-off rows built from ``history``.  With a
    node cap, ``previous`` (the last step's result) supplies the fallback
    plan; if the cap is hit the best admissible plan known at that point is
    returned with status ``IterationLimitFallback``.  When no admissible plan
    keeps the speed within limits the least-violating one is returned with
    status ``Infeasible``.
    """
    t0 = time.perf_counter()
    sc = config.scenario_for(scenario)
    if len(history) != config.d_min:
        raise ValidationError(f"history must hold exactly d_min={config.d_min} signals")
    window = HorizonWindow.at(sc, k, config.horizon_steps)
    n = len(window)
    if n == 0:
        raise ValidationError(f"step {k} is past the end of the profile")
    if not sc.mode.has_binary:
        plan = solve_continuous(window, np.ones(n), v_k, 1, raise_infeasible=False)
        status = SolveStatus.OPTIMAL if plan.feasible else SolveStatus.INFEASIBLE
        return _result(plan, status, 1, t0)

    if config.solver_kind is SolverKind.ENUMERATE:
        out = enumerate_binaries(window, history, config.d_min, v_k)
    else:
        seed = shifted_plan(previous, n)
        if seed is None or not min_off_constraints(history, n, config.d_min).satisfies(seed):
            seed = default_sequence(history, n, config.d_min)
        out = branch_and_bound(window, history, config.d_min, v_k, incumbent=seed,
                               max_nodes=config.max_iterations)
    if out.plan is None:
        seq = default_sequence(history, n, config.d_min)
        plan = solve_continuous(window, seq, v_k, history.last, raise_infeasible=False)
        return _result(plan, SolveStatus.INFEASIBLE, out.nodes + 1, t0)
    status = SolveStatus.OPTIMAL if out.exhausted else SolveStatus.ITERATION_LIMIT_FALLBACK
    return _result(out.plan, status, out.nodes, t0)


def _apply(scenario, k, v, prev, action):
    try:
        return advance(scenario.params, scenario.mode, action, prev, v,
                       scenario.profile.grades[k], scenario.step_length)
    except (StalledVehicle, ZeroSpeed) as exc:
        raise StalledVehicle(f"step {k}: {exc}", step=k) from exc


def _rollout(scenario: ScenarioSpec, solve, allow_infeasible: bool, meta: dict) -> MpcRun:
    n = len(scenario)
    speeds = np.empty(n + 1)
    speeds[0] = scenario.v0
    fuel = np.empty(n)
    dt = np.empty(n)
    drops = np.empty(n)
    actions = []
    results = []
    prev = 1
    for k in range(n):
        res = solve(k, speeds[k], results[-1] if results else None)
        if res.status is SolveStatus.INFEASIBLE and not allow_infeasible:
            raise Infeasible(f"step {k}: no admissible plan keeps the speed within limits", step=k)
        out = _apply(scenario, k, speeds[k], prev, res.first_action)
        speeds[k + 1] = out.next_speed
        fuel[k] = out.fuel_used
        dt[k] = out.time_elapsed
        drops[k] = out.restart_speed_drop
        actions.append(res.first_action)
        results.append(res)
        prev = res.first_action.coast_signal
    log = TrajectoryLog(
        step_length=scenario.step_length, speeds=speeds,
        engine_torque=[a.engine_torque for a in actions],
        brake_torque=[a.brake_torque for a in actions],
        coast_signal=[a.coast_signal for a in actions],
        fuel=fuel, time=dt, restart_drop=drops, initial_signal=1, meta=meta)
    return MpcRun(log, results)


def mimpc_run(scenario: ScenarioSpec, config: MpcConfig, allow_infeasible: bool = False) -> MpcRun:
    """Closed-loop mixed-integer MPC over the whole profile.

    The first planned action is applied to the plant each step and the
    binary history advanced.  Raises :class:`Infeasible` (or
    :class:`StalledVehicle`) with the step index when a step cannot be solved,
    unless ``allow_infeasible`` applies the least-violating plan instead.
    """
    if scenario.reference is None:
        raise ValidationError("MPC needs a reference trace")
    history = [BinaryHistory.all_on(config.d_min)]

    def solve(k, v, previous):
        res = mimpc_step(scenario, k, v, history[0], config, previous)
        history[0] = history[0].push(res.first_action.coast_signal)
        return res

    meta = {"controller": "mimpc", "horizon_steps": config.horizon_steps, "d_min": config.d_min,
            "solver": config.solver_kind.value}
    return _rollout(scenario, solve, allow_infeasible, meta)


def heuristic_mpc_run(scenario: ScenarioSpec, fixed_binaries, config: MpcConfig,
                      allow_infeasible: bool = False) -> MpcRun:
    """Closed-loop MPC over torques only, the binaries taken from ``fixed_binaries``.

    One continuous solve per step; the minimum-off rule is inherited from
    whatever produced the binaries.
    """
    if scenario.reference is None:
        raise ValidationError("MPC needs a reference trace")
    z = np.asarray(fixed_binaries, dtype=int).reshape(-1)
    if len(z) != len(scenario):
        raise ValidationError(f"expected {len(scenario)} binaries, got {len(z)}")
    if np.any((z != 0) & (z != 1)):
        raise ValidationError("binaries must be 0 or 1")
    sc = config.scenario_for(scenario)

    def solve(k, v, previous):
        t0 = time.perf_counter()
        window = HorizonWindow.at(sc, k, config.horizon_steps)
        prev = previous.first_action.coast_signal if previous is not None else 1
        plan = solve_continuous(window, z[k:k + len(window)], v, prev, raise_infeasible=False)
        status = SolveStatus.OPTIMAL if plan.feasible else SolveStatus.INFEASIBLE
        return _result(plan, status, 1, t0)

    meta = {"controller": "heuristic-mpc", "horizon_steps": config.horizon_steps}
    return _rollout(scenario, solve, allow_infeasible, meta)
