"""Offline global optimisation by backward dynamic programming.

The state is (speed, previous binary signal) at every distance step.  Speed
lives on a grid; between grid points the cost-to-go is interpolated linearly
(default) or the state is quantised to the nearest grid point
(``interpolation="nearest"``).  The quantised variant solves a finite
deterministic problem exactly and is what brute-force checks compare against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import Infeasible, StalledVehicle, ValidationError
from .metrics import switch_count
from .model import (KMH, ControlStep, PowertrainMode, TrajectoryLog, next_speed_kernel,
                    simulate, step_fuel_kernel)
from .scenario import OperatingLimits, ScenarioSpec


@dataclass(frozen=True)
class DpGrid:
    speed_grid: np.ndarray
    torque_grid: np.ndarray
    brake_grid: np.ndarray
    interpolation: str = "linear"
    terminal_tolerance: float = 0.5 * KMH

    def __post_init__(self):
        for name in ("speed_grid", "torque_grid", "brake_grid"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
            if len(arr) < 2 or np.any(np.diff(arr) <= 0):
                raise ValidationError(f"{name} needs at least two strictly increasing points")
        if self.torque_grid[0] < 0 or self.brake_grid[0] < 0:
            raise ValidationError("torque grids must be non-negative")
        if self.interpolation not in ("linear", "nearest"):
            raise ValidationError("interpolation must be 'linear' or 'nearest'")

    @classmethod
    def default(cls, limits: OperatingLimits | None = None, n_speed: int = 81,
                n_torque: int = 13, n_brake: int = 6, **kw) -> "DpGrid":
        limits = limits or OperatingLimits()
        return cls(np.linspace(limits.v_min, limits.v_max, n_speed),
                   np.linspace(0.0, limits.engine_torque_max, n_torque),
                   np.linspace(0.0, limits.brake_torque_max, n_brake), **kw)

    def check_limits(self, limits: OperatingLimits) -> None:
        tol = 1e-9
        if self.speed_grid[0] < limits.v_min - tol or self.speed_grid[-1] > limits.v_max + tol:
            raise ValidationError("speed grid exceeds the operating limits")
        if self.torque_grid[-1] > limits.engine_torque_max + tol or self.brake_grid[-1] > limits.brake_torque_max + tol:
            raise ValidationError("torque grid exceeds the actuator limits")

    def actions(self, mode: PowertrainMode) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Admissible (engine torque, brake torque, signal) triples in tie-break order."""
        te, tb = self.torque_grid, self.brake_grid
        if mode.has_binary:
            on = [(t, 0.0, 1) for t in te]
            off = [(0.0, b, 0) for b in tb]
            rows = on + off
        else:
            rows = [(t, 0.0, 1) for t in te] + [(0.0, b, 1) for b in tb if b > 0]
            rows.sort(key=lambda r: (r[0], r[1]))
        arr = np.array(rows, dtype=float)
        return arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].astype(int)


@dataclass
class DpSolution:
    controls: list[ControlStep]
    trajectory: TrajectoryLog
    total_cost: float
    fuel_g: float
    time_s: float
    switch_count: int
    value_tables: np.ndarray | None = field(default=None, repr=False)

    @property
    def signals(self) -> np.ndarray:
        return np.array([c.coast_signal for c in self.controls], dtype=int)


def stage_costs(scenario: ScenarioSpec, speeds, fuel, signals, prev_signals, objective: str) -> np.ndarray:
    """Per-step cost of a trajectory, ``speeds[k]`` being the speed entering step ``k``."""
    w = scenario.weights
    ds = scenario.step_length
    speeds = np.asarray(speeds, dtype=float)
    if objective == "time":
        second = 1.0 / speeds
    else:
        ref = scenario.reference.at(np.arange(len(speeds)))
        second = (speeds - ref) ** 2
    cost = (w.beta * np.asarray(fuel) + (1.0 - w.beta) * second) * ds
    if scenario.mode is PowertrainMode.FUEL_CUT_OFF:
        cost = cost + w.alpha * (np.asarray(signals) - np.asarray(prev_signals)) ** 2 * ds
    return cost


BISECTION_STEPS = 30


class _ValueInterp:
    """Cost-to-go lookup on the speed grid.

    Infeasible nodes hold +inf. A cell with one feasible end carries a cut
    point: speeds on the feasible side of it take that end's value, the rest
    are +inf. Nothing is ever interpolated across the boundary.
    """

    def __init__(self, grid: DpGrid):
        self.g = grid.speed_grid
        self.nearest = grid.interpolation == "nearest"

    def snap(self, v):
        idx = np.clip(np.searchsorted(self.g, v), 1, len(self.g) - 1)
        lower = v - self.g[idx - 1] <= self.g[idx] - v
        return np.where(lower, idx - 1, idx)

    def __call__(self, table, v, cuts=None):
        g = self.g
        v = np.asarray(v, dtype=float)
        out = np.full(v.shape, np.inf)
        inside = (v >= g[0]) & (v <= g[-1])
        if not np.any(inside):
            return out
        vi = v[inside]
        if self.nearest:
            out[inside] = table[self.snap(vi)]
            return out
        i = np.clip(np.searchsorted(g, vi, side="right") - 1, 0, len(g) - 2)
        w = (vi - g[i]) / (g[i + 1] - g[i])
        lo, hi = table[i], table[i + 1]
        flo, fhi = np.isfinite(lo), np.isfinite(hi)
        with np.errstate(invalid="ignore"):
            val = np.where(flo & fhi, (1.0 - w) * lo + w * hi, np.inf)
            val = np.where(w == 0.0, lo, np.where(w == 1.0, hi, val))
            if cuts is not None:
                c = cuts[i]
                val = np.where(flo & ~fhi & (vi <= c), lo, val)
                val = np.where(~flo & fhi & (vi >= c), hi, val)
        out[inside] = val
        return out


def _transitions(scenario, grid, k, v, p, te, tb, z, objective):
    """Next speed and stage cost for every (speed, action) pair at step ``k``."""
    mode = scenario.mode
    c = scenario.params.consts()
    ds = scenario.step_length
    grade = float(scenario.profile.grades[k])
    V = np.repeat(v, len(te))
    TE = np.tile(te, len(v))
    TB = np.tile(tb, len(v))
    Z = np.tile(z, len(v)).astype(float)
    gate = Z if mode.has_binary else np.ones_like(Z)
    restart = Z * (1.0 - p) if mode.restarts else np.zeros_like(Z)
    vn = next_speed_kernel(c, V, grade, TE, TB, Z if mode.has_binary else np.ones_like(Z),
                           mode.drag_flag, restart, ds)
    fuel = step_fuel_kernel(c, TE, gate, V, ds)
    w = scenario.weights
    if objective == "time":
        second = 1.0 / V
    else:
        second = (V - scenario.reference.at(k)) ** 2
    cost = (w.beta * fuel + (1.0 - w.beta) * second) * ds
    if mode is PowertrainMode.FUEL_CUT_OFF:
        cost = cost + w.alpha * (Z - p) ** 2 * ds
    lim = scenario.limits
    feasible = (vn >= lim.v_min) & (vn <= lim.v_max)
    return vn.reshape(len(v), -1), cost.reshape(len(v), -1), feasible.reshape(len(v), -1), fuel.reshape(len(v), -1)


def _step_values(scenario, grid, k, v, p, te, tb, z, objective, interp, J, C):
    """Cost of every action from speeds ``v`` at step ``k``, +inf where inadmissible."""
    vn, cost, feas, fuel = _transitions(scenario, grid, k, v, p, te, tb, z, objective)
    total = np.full(vn.shape, np.inf)
    for signal in np.unique(z):
        cols = z == signal
        nxt = interp(J[k + 1, signal], vn[:, cols], C[k + 1, signal])
        total[:, cols] = np.where(feas[:, cols], cost[:, cols] + nxt, np.inf)
    return vn, total, fuel


def _backward(scenario, grid, objective):
    n = len(scenario)
    G = grid.speed_grid
    te, tb, z = grid.actions(scenario.mode)
    prevs = (0, 1) if scenario.mode.has_binary else (1,)
    interp = _ValueInterp(grid)
    J = np.full((n + 1, 2, len(G)), np.inf)
    C = np.full((n + 1, 2, len(G) - 1), np.nan)
    tol = grid.terminal_tolerance
    J[n, :, :] = np.where(np.abs(G - scenario.v0) <= tol + 1e-12, 0.0, np.inf)
    if not interp.nearest:
        C[n, :, :] = np.where(G[1:] <= scenario.v0, scenario.v0 - tol, scenario.v0 + tol)
    for k in range(n - 1, -1, -1):
        for p in prevs:
            _, total, _ = _step_values(scenario, grid, k, G, p, te, tb, z, objective, interp, J, C)
            J[k, p] = total.min(axis=1)
            if not interp.nearest:
                C[k, p] = _refine_cuts(scenario, grid, k, p, te, tb, z, objective, interp, J, C)
    return J, C


def _refine_cuts(scenario, grid, k, p, te, tb, z, objective, interp, J, C):
    G = grid.speed_grid
    ok = np.isfinite(J[k, p])
    cuts = np.full(len(G) - 1, np.nan)
    mixed = np.flatnonzero(ok[:-1] != ok[1:])
    if mixed.size == 0:
        return cuts
    good = np.where(ok[mixed], G[mixed], G[mixed + 1])
    bad = np.where(ok[mixed], G[mixed + 1], G[mixed])
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (good + bad)
        _, total, _ = _step_values(scenario, grid, k, mid, p, te, tb, z, objective, interp, J, C)
        admissible = np.isfinite(total.min(axis=1))
        good = np.where(admissible, mid, good)
        bad = np.where(admissible, bad, mid)
    cuts[mixed] = good
    return cuts


def _forward(scenario, grid, J, C, objective, initial_signal):
    n = len(scenario)
    te, tb, z = grid.actions(scenario.mode)
    interp = _ValueInterp(grid)
    nearest = interp.nearest
    v = scenario.v0
    if nearest:
        v = float(grid.speed_grid[interp.snap(np.array([v]))[0]])
    p = initial_signal if scenario.mode.has_binary else 1
    chosen = []
    speeds = [v]
    fuels = []
    for k in range(n):
        vn, total, fuel = _step_values(scenario, grid, k, np.array([v]), p, te, tb, z, objective, interp, J, C)
        vn, total, fuel = vn[0], total[0], fuel[0]
        a = int(np.argmin(total))
        if not np.isfinite(total[a]):
            raise Infeasible(f"no admissible action keeps the terminal window reachable at step {k}", step=k)
        chosen.append(a)
        fuels.append(fuel[a])
        v = float(vn[a])
        if nearest:
            v = float(grid.speed_grid[interp.snap(np.array([v]))[0]])
        speeds.append(v)
        p = int(z[a])
    controls = [ControlStep(float(te[a]), float(tb[a]), int(z[a])) for a in chosen]
    return controls, np.array(speeds), np.array(fuels)


def _solve(scenario: ScenarioSpec, grid: DpGrid, objective: str, initial_signal: int = 1) -> DpSolution:
    if objective == "tracking" and scenario.reference is None:
        raise ValidationError("tracking objective needs a reference trace")
    grid.check_limits(scenario.limits)
    J, C = _backward(scenario, grid, objective)
    controls, speeds, fuels = _forward(scenario, grid, J, C, objective, initial_signal)
    mode = scenario.mode
    if grid.interpolation == "nearest":
        ds = scenario.step_length
        log = TrajectoryLog(
            step_length=ds, speeds=speeds,
            engine_torque=[c.engine_torque for c in controls],
            brake_torque=[c.brake_torque for c in controls],
            coast_signal=[c.coast_signal for c in controls],
            fuel=fuels, time=ds / speeds[:-1], initial_signal=initial_signal,
            meta={"quantized": True})
    else:
        try:
            log = simulate(scenario.params, mode, scenario.profile, controls, scenario.v0, initial_signal)
        except StalledVehicle as exc:  # pragma: no cover - forward pass already checks bounds
            raise Infeasible(str(exc), step=exc.step) from exc
        if abs(log.speeds[-1] - scenario.v0) > grid.terminal_tolerance + 1e-9:
            raise Infeasible("terminal speed outside the tolerance window", step=len(controls))
    signals = log.coast_signal
    prev = np.concatenate([[initial_signal], signals[:-1]]) if len(signals) else signals
    # correctly rounded, so the reported cost does not depend on summation order
    total = math.fsum(stage_costs(scenario, log.speeds[:-1], log.fuel, signals, prev, objective))
    return DpSolution(controls=controls, trajectory=log, total_cost=total, fuel_g=log.total_fuel,
                      time_s=log.total_time,
                      switch_count=switch_count(signals, initial_signal) if mode.has_binary else 0,
                      value_tables=J)


def dp_solve(scenario: ScenarioSpec, grid: DpGrid | None = None, initial_signal: int = 1) -> DpSolution:
    """Minimise weighted fuel and travel time over the whole profile.

    For fuel cut-off the switch penalty ``alpha`` is added; for start/stop the
    restart cost lives in the dynamics.  Raises :class:`Infeasible` when no grid
    path meets the terminal speed window.
    """
    grid = grid or DpGrid.default(scenario.limits)
    return _solve(scenario, grid, "time", initial_signal)


def dp_tracking_solve(scenario: ScenarioSpec, grid: DpGrid | None = None,
                      initial_signal: int = 1) -> DpSolution:
    """As :func:`dp_solve` with squared reference-speed error in place of travel time."""
    grid = grid or DpGrid.default(scenario.limits)
    return _solve(scenario, grid, "tracking", initial_signal)


@dataclass(frozen=True)
class ParetoPoint:
    beta: float
    fuel_g: float
    time_s: float
    switch_count: int = 0
    feasible: bool = True
    tracking_rmse_mps: float = float("nan")


def pareto_sweep(scenario: ScenarioSpec, grid: DpGrid | None = None, betas=(0.1, 0.5, 0.9),
                 objective: str = "time", executor=None) -> list[ParetoPoint]:
    """One DP solve per weight; infeasible points are kept with NaN metrics.

    ``executor`` (a ``concurrent.futures`` executor) runs the points in parallel.
    """
    betas = sorted(float(b) for b in betas)
    if any(not 0.0 <= b <= 1.0 for b in betas):
        raise ValidationError("betas must lie in [0, 1]")
    grid = grid or DpGrid.default(scenario.limits)
    jobs = [(scenario.with_(beta=b), grid, objective) for b in betas]
    results = list(executor.map(_pareto_point, jobs)) if executor else [_pareto_point(j) for j in jobs]
    return results


def _pareto_point(job) -> ParetoPoint:
    from .metrics import tracking_rmse

    scenario, grid, objective = job
    beta = scenario.weights.beta
    try:
        sol = _solve(scenario, grid, objective)
    except Infeasible:
        return ParetoPoint(beta, float("nan"), float("nan"), 0, False)
    return ParetoPoint(beta, sol.fuel_g, sol.time_s, sol.switch_count, True,
                       tracking_rmse(sol.trajectory, scenario.reference))
