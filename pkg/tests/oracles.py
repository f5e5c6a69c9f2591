"""Independent reference computations used by the tests.

Nothing here calls into the solvers under test; the vehicle equations are
written out again from the parameter fields.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from numba import njit

RAD_S_TO_KRPM = 60.0 / (2.0 * math.pi) / 1000.0


def vehicle_terms(params):
    """Plain-number constants of the longitudinal model, recomputed from ``params``."""
    ratio = params.gear_ratio * params.final_drive_ratio
    return dict(
        m=params.effective_mass, g=params.gravity, f=params.rolling_coeff,
        aero=0.5 * params.drag_coeff * params.air_density * params.frontal_area,
        eta_ratio=params.gearbox_efficiency * ratio, r=params.wheel_radius,
        drag=params.engine_drag_torque, inertia=params.engine_inertia,
        omega_per_v=ratio / params.wheel_radius, coeffs=params.fuel_coeffs)


def step_reference(t, mode, te, tb, z, prev, v, grade, ds):
    """One step by hand: returns (next speed, fuel in g, restart drop)."""
    binary = mode in ("fco", "ess")
    gate = z if binary else 1
    drag_on = mode == "fco" and z == 0
    wheel_torque = t["eta_ratio"] * (te - (t["drag"] if drag_on else 0.0)) - tb
    resist = t["m"] * t["g"] * (math.sin(grade) + t["f"] * math.cos(grade)) + t["aero"] * v * v
    v_next = v + (wheel_torque / t["r"] - resist) / (t["m"] * v) * ds
    drop = 0.0
    if mode == "ess" and z == 1 and prev == 0:
        omega = t["omega_per_v"] * v
        energy = 0.5 * t["inertia"] * omega ** 2
        drop = v - math.sqrt(v * v - 2 * energy / t["m"])
    w = t["omega_per_v"] * v * RAD_S_TO_KRPM
    a1, a2, a3, a4 = t["coeffs"]
    fuel = gate * (a1 + a2 * w * te + a3 * w * w * te + a4 * w * te * te) * ds / v
    return v_next - drop, fuel, drop


@njit(cache=True)
def _enumerate(grades, ds, v0_idx, grid, te, tb, zs, m, g, f, aero, eta_ratio, r, drag,
               kappa, omega_k, a1, a2, a3, a4, beta, alpha, drag_mode, restart_mode,
               vmin, vmax, term_lo, term_hi, ref, tracking):
    # depth-first walk over every action sequence; speeds snap to the nearest grid point
    n = grades.shape[0]
    n_act = te.shape[0]
    choice = np.full(n + 1, -1)
    vidx = np.zeros(n + 1, dtype=np.int64)
    prev = np.ones(n + 1, dtype=np.int64)
    cost = np.zeros(n + 1)
    stage = np.zeros(n)
    best_stages = np.zeros(n)
    vidx[0] = v0_idx
    best = np.inf
    depth = 0
    while depth >= 0:
        choice[depth] += 1
        if choice[depth] >= n_act:
            choice[depth] = -1
            depth -= 1
            continue
        a = choice[depth]
        v = grid[vidx[depth]]
        z = zs[a]
        p = prev[depth]
        grade = grades[depth]
        wt = eta_ratio * (te[a] - drag_mode * (1.0 - z) * drag) - tb[a]
        res = m * g * (math.sin(grade) + f * math.cos(grade)) + aero * v * v
        vn = v + (wt / r - res) / (m * v) * ds
        if restart_mode and z == 1 and p == 0:
            vn -= kappa * v
        if not (vn >= vmin and vn <= vmax):
            continue
        w = omega_k * v
        fuel = z * (a1 + a2 * w * te[a] + a3 * w * w * te[a] + a4 * w * te[a] * te[a]) / v * ds
        if tracking:
            second = (v - ref[depth]) ** 2
        else:
            second = 1.0 / v
        c = (beta * fuel + (1.0 - beta) * second) * ds
        if not restart_mode:
            c += alpha * (z - p) * (z - p) * ds
        # nearest grid point, ties to the lower one
        j = 0
        for i in range(1, grid.shape[0]):
            if abs(vn - grid[i]) < abs(vn - grid[j]):
                j = i
        total = cost[depth] + c
        stage[depth] = c
        if depth + 1 == n:
            if grid[j] >= term_lo and grid[j] <= term_hi and total < best:
                best = total
                best_stages[:] = stage
            continue
        depth += 1
        cost[depth] = total
        vidx[depth] = j
        prev[depth] = z
    return best, best_stages


def brute_force_cost(scenario, speed_grid, torque_grid, brake_grid, terminal_tol, objective="time"):
    """Minimum weighted cost over all grid control sequences.

    ``objective`` is ``"time"`` or ``"tracking"``.  Binary modes only.
    Actions are (te, 0, 1) for every engine torque and
    (0, tb, 0) for every brake torque.  Returns ``inf`` if nothing is feasible.
    """
    t = vehicle_terms(scenario.params)
    mode = scenario.mode.value
    te = np.array([*torque_grid, *np.zeros(len(brake_grid))], dtype=float)
    tb = np.array([*np.zeros(len(torque_grid)), *brake_grid], dtype=float)
    zs = np.array([1] * len(torque_grid) + [0] * len(brake_grid), dtype=np.int64)
    grid = np.asarray(speed_grid, dtype=float)
    v0_idx = int(np.argmin(np.abs(grid - scenario.v0)))
    omega_sq_ratio = t["inertia"] * t["omega_per_v"] ** 2 / t["m"]
    kappa = 1.0 - math.sqrt(1.0 - omega_sq_ratio)
    a1, a2, a3, a4 = t["coeffs"]
    lim = scenario.limits
    n = len(scenario)
    ref = scenario.reference.at(np.arange(n)).astype(float) if objective == "tracking" else np.zeros(n)
    best, stages = _enumerate(
        np.asarray(scenario.profile.grades, dtype=float), scenario.step_length, v0_idx, grid,
        te, tb, zs, t["m"], t["g"], t["f"], t["aero"], t["eta_ratio"], t["r"], t["drag"],
        kappa, t["omega_per_v"] * RAD_S_TO_KRPM, a1, a2, a3, a4,
        scenario.weights.beta, scenario.weights.alpha, 1.0 if mode == "fco" else 0.0,
        mode == "ess", max(lim.v_min, grid[0]), min(lim.v_max, grid[-1]),
        scenario.v0 - terminal_tol - 1e-12, scenario.v0 + terminal_tol + 1e-12,
        ref, objective == "tracking")
    return math.fsum(stages) if math.isfinite(best) else math.inf


def min_off_ok(seq, history, d_min):
    """Verbal rule: after a 1->0 switch the signal stays 0 for ``d_min`` steps.

    Switches already in ``history`` count; runs cut off by the end of ``seq``
    are fine.
    """
    full = list(history) + list(seq)
    h = len(history)
    for j in range(1, len(full)):
        if full[j - 1] == 1 and full[j] == 0:
            for tau in range(j, min(j + d_min, len(full))):
                if full[tau] == 1 and tau >= h:
                    return False
    return True


def admissible_sequences(history, horizon, d_min):
    return [s for s in itertools.product((0, 1), repeat=horizon) if min_off_ok(s, history, d_min)]


def off_run_lengths(signals, initial=1):
    """(start, length, reaches_end) for each maximal run of zeros."""
    runs = []
    prev = initial
    start = None
    for i, s in enumerate(signals):
        if s == 0 and prev == 1:
            start = i
        if s == 1 and prev == 0 and start is not None:
            runs.append((start, i - start, False))
            start = None
        prev = s
    if start is not None:
        runs.append((start, len(signals) - start, True))
    return runs
