"""Compiled horizon objective, its adjoint gradient and the projected-gradient solver.

Decision variables are scaled actuator commands per horizon step:
``a`` (engine torque / T_e,max), ``b`` (brake torque / T_b,max) and ``z``
(binary signal, possibly relaxed to [0, 1]).  They are packed as one vector
``x = [a, b, z]`` of length ``3 * n``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..model import MIN_SPEED

# per-step feasible set kinds
FIXED_Z = 0  # z fixed; a in [0, z], b in [0, 1 - z]
FREE_Z = 1  # z free; 0 <= a <= z <= 1 - b, b >= 0
BOX = 2  # baseline: z = 1, a and b both in [0, 1]


@njit(cache=True)
def horizon_cost(c, grades, vref, v0, prev0, x, n, te_max, tb_max, ds, beta,
                 drag_flag, restarts, gated, v_min, v_max, rho, speeds):
    """Objective of a horizon plan; fills ``speeds`` (length n + 1).

    Returns ``inf`` if the speed drops below the stall limit.
    """
    speeds[0] = v0
    total = 0.0
    zprev = prev0
    cw = c.fuel_speed_per_v
    for i in range(n):
        v = speeds[i]
        a = x[i]
        b = x[n + i]
        z = x[2 * n + i]
        te = a * te_max
        tb = b * tb_max
        gate = z if gated else 1.0
        ft = (c.eta_ratio * (te - drag_flag * (1.0 - z) * c.drag_torque) - tb) / c.wheel_radius
        fr = c.mass * c.gravity * (np.sin(grades[i]) + c.rolling * np.cos(grades[i])) + c.aero * v * v
        r = z * (1.0 - zprev) if restarts else 0.0
        vn = v + (ft - fr) / (c.mass * v) * ds - r * c.restart_coeff * v
        if not vn >= MIN_SPEED:
            return np.inf
        speeds[i + 1] = vn
        fuel = gate * (c.a1 / v + cw * te * (c.a2 + c.a3 * cw * v + c.a4 * te)) * ds
        err = vn - vref[i]
        over = max(vn - v_max, 0.0) + max(v_min - vn, 0.0)
        total += ds * (beta * fuel + (1.0 - beta) * err * err) + rho * ds * over * over
        zprev = z
    return total


@njit(cache=True)
def horizon_grad(c, grades, vref, v0, prev0, x, n, te_max, tb_max, ds, beta,
                 drag_flag, restarts, gated, v_min, v_max, rho, speeds, grad):
    """Adjoint gradient of :func:`horizon_cost`; ``speeds`` must hold the forward pass."""
    cw = c.fuel_speed_per_v
    for j in range(3 * n):
        grad[j] = 0.0
    if n == 0:
        return
    lam = 0.0
    for i in range(n - 1, -1, -1):
        vn = speeds[i + 1]
        # cost terms placed on v_{i+1}
        dviol = 0.0
        if vn > v_max:
            dviol = 2.0 * (vn - v_max)
        elif vn < v_min:
            dviol = -2.0 * (v_min - vn)
        lam += ds * (1.0 - beta) * 2.0 * (vn - vref[i]) + rho * ds * dviol
        v = speeds[i]
        a = x[i]
        z = x[2 * n + i]
        zprev = x[2 * n + i - 1] if i > 0 else prev0
        te = a * te_max
        tb = x[n + i] * tb_max
        gate = z if gated else 1.0
        ft = (c.eta_ratio * (te - drag_flag * (1.0 - z) * c.drag_torque) - tb) / c.wheel_radius
        fr = c.mass * c.gravity * (np.sin(grades[i]) + c.rolling * np.cos(grades[i])) + c.aero * v * v
        r = z * (1.0 - zprev) if restarts else 0.0
        mv = c.mass * v
        dvn_dv = 1.0 + ds * (-2.0 * c.aero * v * v - ft + fr) / (mv * v) - r * c.restart_coeff
        dvn_da = ds * c.eta_ratio * te_max / (c.wheel_radius * mv)
        dvn_db = -ds * tb_max / (c.wheel_radius * mv)
        dvn_dz = ds * c.eta_ratio * drag_flag * c.drag_torque / (c.wheel_radius * mv)
        if restarts:
            dvn_dz -= (1.0 - zprev) * c.restart_coeff * v
        body = c.a1 / v + cw * te * (c.a2 + c.a3 * cw * v + c.a4 * te)
        dm_dv = gate * (-c.a1 / (v * v) + c.a3 * cw * cw * te) * ds
        dm_da = gate * cw * (c.a2 + c.a3 * cw * v + 2.0 * c.a4 * te) * te_max * ds
        dm_dz = body * ds if gated else 0.0
        grad[i] = ds * beta * dm_da + lam * dvn_da
        grad[n + i] = lam * dvn_db
        grad[2 * n + i] += ds * beta * dm_dz + lam * dvn_dz
        if restarts and i > 0:
            grad[2 * n + i - 1] += lam * z * c.restart_coeff * v
        lam = ds * beta * dm_dv + lam * dvn_dv


def _face_maps():
    """Affine projections onto the affine hull of every face of the polytope."""
    normals = np.array([[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [1.0, 0.0, -1.0], [0.0, 1.0, 1.0]])
    rhs = np.array([0.0, 0.0, 0.0, 1.0])
    mats, offs = [], []
    for mask in range(1, 16):
        rows = [k for k in range(4) if (mask >> k) & 1]
        if len(rows) > 3:
            continue
        A = normals[rows]
        gram = A @ A.T
        if abs(np.linalg.det(gram)) < 1e-12:
            continue
        K = A.T @ np.linalg.inv(gram)
        mats.append(np.eye(3) - K @ A)
        offs.append(K @ rhs[rows])
    return np.array(mats), np.array(offs)


_FACE_MATS, _FACE_OFFS = _face_maps()


@njit(cache=True)
def _project_polytope(a, b, z):
    """Euclidean projection of (a, b, z) onto {0 <= a <= z <= 1 - b, b >= 0}.

    The projection lies in the relative interior of some face, so the nearest
    feasible face projection is the answer.
    """
    if a >= 0.0 and b >= 0.0 and a <= z and z + b <= 1.0:
        return a, b, z
    best_d = np.inf
    ba, bb, bz = 0.0, 0.0, 0.0
    for f in range(_FACE_MATS.shape[0]):
        M = _FACE_MATS[f]
        ya = M[0, 0] * a + M[0, 1] * b + M[0, 2] * z + _FACE_OFFS[f, 0]
        yb = M[1, 0] * a + M[1, 1] * b + M[1, 2] * z + _FACE_OFFS[f, 1]
        yz = M[2, 0] * a + M[2, 1] * b + M[2, 2] * z + _FACE_OFFS[f, 2]
        if ya >= -1e-12 and yb >= -1e-12 and ya <= yz + 1e-12 and yz + yb <= 1.0 + 1e-12:
            d = (ya - a) ** 2 + (yb - b) ** 2 + (yz - z) ** 2
            if d < best_d:
                best_d = d
                ba, bb, bz = ya, yb, yz
    ba = min(max(ba, 0.0), 1.0)
    bb = min(max(bb, 0.0), 1.0)
    bz = min(max(bz, ba), 1.0 - bb)
    return ba, bb, bz


@njit(cache=True)
def project(x, n, kinds, allow_a, allow_b):
    """Project ``x`` in place onto the per-step feasible sets."""
    for i in range(n):
        k = kinds[i]
        if k == FREE_Z:
            a, b, z = _project_polytope(x[i], x[n + i], x[2 * n + i])
            x[i] = a
            x[n + i] = b
            x[2 * n + i] = z
        else:
            z = x[2 * n + i]
            hi_b = 1.0 if k == BOX else 1.0 - z
            x[i] = min(max(x[i], 0.0), z) if allow_a[i] else 0.0
            x[n + i] = min(max(x[n + i], 0.0), hi_b) if allow_b[i] else 0.0


@njit(cache=True)
def _mask_grad(grad, n, kinds, allow_a, allow_b):
    for i in range(n):
        if kinds[i] != FREE_Z:
            grad[2 * n + i] = 0.0
            if not allow_a[i]:
                grad[i] = 0.0
            if not allow_b[i]:
                grad[n + i] = 0.0


@njit(cache=True)
def projected_gradient(c, grades, vref, v0, prev0, x, n, te_max, tb_max, ds, beta,
                       drag_flag, restarts, gated, v_min, v_max, rho, kinds, allow_a, allow_b,
                       max_iter, tol):
    """Minimise the horizon objective over the projected feasible set, in place.

    Barzilai-Borwein steps safeguarded by Armijo backtracking; stops when the
    objective improves by less than ``tol`` or after ``max_iter`` iterations.
    Returns ``(objective, iterations)``; ``x`` holds the minimiser.
    """
    m = 3 * n
    speeds = np.empty(n + 1)
    trial_speeds = np.empty(n + 1)
    grad = np.empty(m)
    new_grad = np.empty(m)
    trial = np.empty(m)
    project(x, n, kinds, allow_a, allow_b)
    f = horizon_cost(c, grades, vref, v0, prev0, x, n, te_max, tb_max, ds, beta,
                     drag_flag, restarts, gated, v_min, v_max, rho, speeds)
    if n == 0:
        return f, 0
    if not np.isfinite(f):
        return f, 0
    horizon_grad(c, grades, vref, v0, prev0, x, n, te_max, tb_max, ds, beta,
                 drag_flag, restarts, gated, v_min, v_max, rho, speeds, grad)
    _mask_grad(grad, n, kinds, allow_a, allow_b)
    step = 1.0 / max(np.max(np.abs(grad)), 1e-12)
    it = 0
    while it < max_iter:
        it += 1
        t = step
        accepted = False
        f_new = f
        for _ in range(40):
            for j in range(m):
                trial[j] = x[j] - t * grad[j]
            project(trial, n, kinds, allow_a, allow_b)
            decrease = 0.0
            for j in range(m):
                decrease += grad[j] * (x[j] - trial[j])
            f_new = horizon_cost(c, grades, vref, v0, prev0, trial, n, te_max, tb_max, ds, beta,
                                 drag_flag, restarts, gated, v_min, v_max, rho, trial_speeds)
            if f_new <= f - 1e-4 * decrease:
                accepted = True
                break
            t *= 0.5
        if not accepted or decrease <= 0.0:
            break
        horizon_grad(c, grades, vref, v0, prev0, trial, n, te_max, tb_max, ds, beta,
                     drag_flag, restarts, gated, v_min, v_max, rho, trial_speeds, new_grad)
        _mask_grad(new_grad, n, kinds, allow_a, allow_b)
        sy = 0.0
        ss = 0.0
        for j in range(m):
            s = trial[j] - x[j]
            sy += s * (new_grad[j] - grad[j])
            ss += s * s
        improvement = f - f_new
        x[:] = trial
        grad[:] = new_grad
        speeds[:] = trial_speeds
        f = f_new
        step = ss / sy if sy > 1e-300 else 2.0 * t
        step = min(max(step, 1e-10), 1e10)
        if improvement < tol:
            break
    return f, it
