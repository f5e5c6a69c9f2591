"""Finite-horizon tracking problem: evaluation and the continuous inner solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import Infeasible, StalledVehicle, ValidationError, ZeroSpeed
from ..model import ControlStep, PowertrainMode, SlopeProfile, simulate
from ..scenario import ScenarioSpec
from . import kernels

SPEED_PENALTY = 1e4  # quadratic weight on speed-limit violation, per (m/s)^2 per m
FEASIBILITY_TOL = 1e-3  # m/s of tolerated speed-limit overshoot in a solved plan
INNER_MAX_ITER = 500
INNER_TOL = 1e-9


@dataclass(frozen=True)
class HorizonWindow:
    """Everything the horizon problem at one step needs.

    ``vref[i]`` is the reference for the speed reached after step ``i``.
    """

    scenario: ScenarioSpec
    start: int
    grades: np.ndarray
    vref: np.ndarray

    @classmethod
    def at(cls, scenario: ScenarioSpec, start: int, horizon: int) -> "HorizonWindow":
        if scenario.reference is None:
            raise ValidationError("the horizon problem needs a reference trace")
        n = max(0, min(horizon, len(scenario) - start))
        grades = np.ascontiguousarray(scenario.profile.grades[start:start + n], dtype=float)
        vref = np.ascontiguousarray(scenario.reference.at(np.arange(start + 1, start + n + 1)), dtype=float)
        return cls(scenario, start, grades, vref)

    def __len__(self) -> int:
        return len(self.grades)

    @property
    def mode(self) -> PowertrainMode:
        return self.scenario.mode


@dataclass
class ContinuousResult:
    engine_torque: np.ndarray
    brake_torque: np.ndarray
    signals: np.ndarray  # may be fractional for a relaxed solve
    objective: float
    predicted_speeds: np.ndarray
    iterations: int
    feasible: bool

    def controls(self) -> list[ControlStep]:
        return [ControlStep(float(te), float(tb), int(round(z)))
                for te, tb, z in zip(self.engine_torque, self.brake_torque, self.signals)]


def _problem_args(window: HorizonWindow, v_start: float, prev_signal: int):
    sc = window.scenario
    mode = sc.mode
    lim = sc.limits
    return (sc.params.consts(), window.grades, window.vref, float(v_start), float(prev_signal),
            lim.engine_torque_max, lim.brake_torque_max, sc.step_length, sc.weights.beta,
            mode.drag_flag, mode.restarts, mode.has_binary, lim.v_min, lim.v_max)


def _pack(window, controls):
    lim = window.scenario.limits
    n = len(window)
    x = np.zeros(3 * n)
    for i, c in enumerate(controls):
        x[i] = c.engine_torque / lim.engine_torque_max
        x[n + i] = c.brake_torque / lim.brake_torque_max
        x[2 * n + i] = c.coast_signal
    return x


def evaluate_horizon(window: HorizonWindow, controls, v_start: float,
                     prev_signal: int = 1) -> tuple[float, np.ndarray]:
    """Stage-cost sum of ``controls`` over the window and the predicted speeds.

    The objective is ``ds * sum(beta * fuel_i + (1 - beta) * (v_{i+1} - vref_i)**2)``.
    Raises :class:`Infeasible` if the vehicle stalls.
    """
    n = len(window)
    if len(controls) != n:
        raise ValidationError(f"expected {n} controls, got {len(controls)}")
    mode = window.mode
    for c in controls:
        c.check(mode)
    (c, grades, vref, v0, prev0, te_max, tb_max, ds, beta, drag, restarts, gated,
     v_min, v_max) = _problem_args(window, v_start, prev_signal)
    x = _pack(window, controls)
    speeds = np.empty(n + 1)
    cost = kernels.horizon_cost(c, grades, vref, v0, prev0, x, n, te_max, tb_max, ds, beta,
                                drag, restarts, gated, v_min, v_max, 0.0, speeds)
    if not np.isfinite(cost):
        raise Infeasible("candidate stalls the vehicle inside the horizon", step=window.start)
    return float(cost), speeds


def simulate_horizon(window: HorizonWindow, controls, v_start: float, prev_signal: int = 1):
    """Roll ``controls`` through :func:`simulate` and score them; a slow reference
    implementation of :func:`evaluate_horizon`."""
    sc = window.scenario
    profile = SlopeProfile(sc.step_length, window.grades)
    try:
        log = simulate(sc.params, sc.mode, profile, list(controls), v_start, prev_signal)
    except (StalledVehicle, ZeroSpeed) as exc:
        raise Infeasible(str(exc), step=window.start) from exc
    beta = sc.weights.beta
    err = log.speeds[1:] - window.vref
    cost = sc.step_length * np.sum(beta * log.fuel + (1.0 - beta) * err ** 2)
    return float(cost), log.speeds


def _steady_torque(window: HorizonWindow) -> np.ndarray:
    """Scaled engine torque holding the reference speed on each step's grade."""
    sc = window.scenario
    c = sc.params.consts()
    fr = c.mass * c.gravity * (np.sin(window.grades) + c.rolling * np.cos(window.grades)) + c.aero * window.vref ** 2
    te = fr * c.wheel_radius / c.eta_ratio
    return np.clip(te / sc.limits.engine_torque_max, 0.0, 1.0)


def _run(window, v_start, prev_signal, x, kinds, allow_a, allow_b):
    args = _problem_args(window, v_start, prev_signal)
    n = len(window)
    (c, grades, vref, v0, prev0, te_max, tb_max, ds, beta, drag, restarts, gated,
     v_min, v_max) = args
    f, it = kernels.projected_gradient(
        c, grades, vref, v0, prev0, x, n, te_max, tb_max, ds, beta, drag, restarts, gated,
        v_min, v_max, SPEED_PENALTY, kinds, allow_a, allow_b, INNER_MAX_ITER, INNER_TOL)
    speeds = np.empty(n + 1)
    clean = kernels.horizon_cost(c, grades, vref, v0, prev0, x, n, te_max, tb_max, ds, beta,
                                 drag, restarts, gated, v_min, v_max, 0.0, speeds)
    feasible = bool(np.isfinite(f)) and bool(
        np.all(speeds[1:] >= v_min - FEASIBILITY_TOL) and np.all(speeds[1:] <= v_max + FEASIBILITY_TOL))
    return ContinuousResult(
        engine_torque=x[:n] * te_max,
        brake_torque=x[n:2 * n] * tb_max,
        signals=x[2 * n:].copy(),
        objective=float(clean) if feasible else float("inf"),
        predicted_speeds=speeds,
        iterations=int(it),
        feasible=feasible,
    )


def solve_continuous(window: HorizonWindow, binaries, v_start: float, prev_signal: int = 1,
                     raise_infeasible: bool = True) -> ContinuousResult:
    """Optimise torques and brakes for a fixed binary sequence.

    Engine torque is a variable only where the signal is 1, brake torque only
    where it is 0 (baseline: both, signal fixed at 1).  The start point depends
    on the inputs alone, so results are deterministic.
    """
    n = len(window)
    mode = window.mode
    z = np.asarray(binaries, dtype=float).reshape(-1) if mode.has_binary else np.ones(n)
    if len(z) != n:
        raise ValidationError(f"expected {n} binaries, got {len(z)}")
    if np.any((z != 0) & (z != 1)):
        raise ValidationError("binaries must be 0 or 1")
    if mode.has_binary:
        kinds = np.full(n, kernels.FIXED_Z, dtype=np.int64)
        allow_a = z == 1
        allow_b = z == 0
    else:
        kinds = np.full(n, kernels.BOX, dtype=np.int64)
        allow_a = np.ones(n, dtype=bool)
        allow_b = np.ones(n, dtype=bool)
    x = np.concatenate([_steady_torque(window) * allow_a, np.zeros(n), z])
    res = _run(window, v_start, prev_signal, x, kinds, allow_a, allow_b)
    if raise_infeasible and not res.feasible:
        raise Infeasible("no torque plan keeps the speed within limits for this binary sequence",
                         step=window.start)
    return res


def solve_relaxed(window: HorizonWindow, lo, hi, v_start: float, prev_signal: int = 1,
                  start=None) -> ContinuousResult:
    """Continuous relaxation with binaries confined to ``[lo, hi]`` (each 0/1 bound).

    Binaries enter the dynamics and fuel linearly, the restart gate as
    ``z_k * (1 - z_{k-1})``.
    """
    n = len(window)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    fixed = lo == hi
    kinds = np.where(fixed, kernels.FIXED_Z, kernels.FREE_Z).astype(np.int64)
    allow_a = ~fixed | (lo == 1)
    allow_b = ~fixed | (lo == 0)
    if start is None:
        z0 = np.where(fixed, lo, 1.0)
        x = np.concatenate([_steady_torque(window) * z0, np.zeros(n), z0])
    else:
        x = np.array(start, dtype=float)
        x[2 * n:] = np.where(fixed, lo, x[2 * n:])
    return _run(window, v_start, prev_signal, x, kinds, allow_a, allow_b)
