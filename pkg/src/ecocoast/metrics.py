"""Scalar performance measures shared by all controllers."""

from __future__ import annotations

import numpy as np

from .model import TrajectoryLog
from .scenario import ReferenceTrace


def switch_count(signals, initial_signal: int = 1) -> int:
    seq = np.concatenate([[initial_signal], np.asarray(signals, dtype=int)])
    return int(np.count_nonzero(np.diff(seq)))


def tracking_rmse(log: TrajectoryLog, reference: ReferenceTrace | None) -> float:
    """RMS speed error over every logged speed, terminal one included."""
    if reference is None:
        return float("nan")
    ref = reference.at(np.arange(log.n_steps + 1))
    return float(np.sqrt(np.mean((log.speeds - ref) ** 2)))


def off_runs(signals, initial_signal: int = 1):
    """Yield ``(start, length, truncated)`` for every run of zeros entered by a 1->0 switch."""
    seq = np.asarray(signals, dtype=int)
    prev = initial_signal
    k = 0
    n = len(seq)
    while k < n:
        if prev == 1 and seq[k] == 0:
            start = k
            while k < n and seq[k] == 0:
                k += 1
            yield start, k - start, k == n
            prev = 0
            continue
        prev = seq[k]
        k += 1


def min_off_violations(signals, d_min: int, initial_signal: int = 1) -> list[int]:
    """Start indices of off-runs shorter than ``d_min`` (runs cut by the trajectory end excepted)."""
    return [s for s, length, truncated in off_runs(signals, initial_signal)
            if length < d_min and not truncated]


def summarize(log: TrajectoryLog, reference: ReferenceTrace | None = None,
              solve_times=None, iterations=None, fallback_count: int = 0) -> dict:
    solve_times = np.asarray(solve_times if solve_times is not None else [], dtype=float)
    out = {
        "fuel_g": log.total_fuel,
        "time_s": log.total_time,
        "tracking_rmse_mps": tracking_rmse(log, reference),
        "switch_count": switch_count(log.coast_signal, log.initial_signal),
        "solve_time_s_per_step": float(solve_times.mean()) if solve_times.size else 0.0,
    }
    if iterations is not None:
        out["iterations"] = int(np.sum(iterations))
        out["fallback_count"] = int(fallback_count)
    return out
