"""Reading, writing and synthesising slope profiles, reference traces and logs.

File formats (all CSV with a header row):

* grade profile: ``distance_m,grade_deg``; uniformly spaced rows, one per step
* reference trace: ``distance_m,speed_kmh``
* trajectory log: ``step,distance_m,speed_mps,engine_torque_nm,brake_torque_nm,
  coast_signal,fuel_g,time_s``; one row per step plus a terminal row holding
  the final speed with zero actuation, fuel and time

Run summaries are JSON objects, see :func:`write_summary`.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from pathlib import Path

import numpy as np

from .errors import IoError, ParseError, ValidationError
from .model import KMH, SlopeProfile, TrajectoryLog
from .scenario import OperatingLimits, ReferenceTrace

DEFAULT_STEP = 5.0

PROFILE_HEADER = ("distance_m", "grade_deg")
REFERENCE_HEADER = ("distance_m", "speed_kmh")
LOG_HEADER = ("step", "distance_m", "speed_mps", "engine_torque_nm", "brake_torque_nm",
              "coast_signal", "fuel_g", "time_s")
SUMMARY_KEYS = ("fuel_g", "time_s", "tracking_rmse_mps", "switch_count", "solve_time_s_per_step")


def _read_rows(path, header):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in csv.reader(text.splitlines()) if r and any(cell.strip() for cell in r)]
    if not rows:
        raise ParseError(f"{path} is empty")
    first = [cell.strip() for cell in rows[0]]
    if tuple(first) == header:
        rows = rows[1:]
    if not rows:
        raise ParseError(f"{path} has a header but no data")
    return rows


def _parse_columns(rows, header, path):
    width = len(header)
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"{path}: expected {width} columns, got {len(row)}", row=i + 1)
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise ParseError(f"{path}: not a number: {cell!r}", row=i + 1, column=header[j]) from None
            if not math.isfinite(out[i, j]):
                raise ParseError(f"{path}: non-finite value", row=i + 1, column=header[j])
    return out


def _uniform_samples(distances, values, step_length, path):
    """Return values on a ``step_length`` grid, resampling if the file uses another spacing."""
    if len(distances) == 1:
        return values.copy()
    gaps = np.diff(distances)
    spacing = gaps[0]
    if spacing <= 0 or not np.allclose(gaps, spacing, rtol=1e-9, atol=1e-9):
        bad = int(np.flatnonzero(~np.isclose(gaps, spacing, rtol=1e-9, atol=1e-9))[0]) if spacing > 0 else 0
        raise ValidationError(f"{path}: non-uniform spacing at row {bad + 2}")
    if math.isclose(spacing, step_length, rel_tol=1e-9):
        return values.copy()
    warnings.warn(f"{path}: spacing {spacing:g} m resampled to {step_length:g} m", stacklevel=3)
    grid = distances[0] + np.arange(int(np.floor((distances[-1] - distances[0]) / step_length + 1e-9)) + 1) * step_length
    return np.interp(grid, distances, values)


def load_profile(path, step_length: float = DEFAULT_STEP) -> SlopeProfile:
    """Load a grade profile stored in degrees; returns radians."""
    data = _parse_columns(_read_rows(path, PROFILE_HEADER), PROFILE_HEADER, path)
    if np.any(np.abs(data[:, 1]) >= 90.0):
        raise ValidationError(f"{path}: grades must lie strictly within +-90 degrees")
    grades = _uniform_samples(data[:, 0], data[:, 1], step_length, path)
    return SlopeProfile(step_length, np.deg2rad(grades))


def load_reference(path, step_length: float = DEFAULT_STEP,
                   limits: OperatingLimits | None = None) -> ReferenceTrace:
    data = _parse_columns(_read_rows(path, REFERENCE_HEADER), REFERENCE_HEADER, path)
    speeds = _uniform_samples(data[:, 0], data[:, 1], step_length, path) * KMH
    trace = ReferenceTrace(step_length, speeds)
    if limits is not None:
        trace.validate(limits)
    return trace


def _write_csv(path, header, rows):
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_profile(profile: SlopeProfile, path) -> None:
    rows = [(repr(float(d)), repr(float(g))) for d, g in zip(profile.distances, np.rad2deg(profile.grades))]
    _write_csv(path, PROFILE_HEADER, rows)


def write_reference(reference: ReferenceTrace, path) -> None:
    d = np.arange(len(reference)) * reference.step_length
    rows = [(repr(float(x)), repr(float(v / KMH))) for x, v in zip(d, reference.speeds)]
    _write_csv(path, REFERENCE_HEADER, rows)


def write_log(log: TrajectoryLog, path) -> None:
    n = log.n_steps
    last_signal = int(log.coast_signal[-1]) if n else int(log.initial_signal)
    rows = []
    for k in range(n + 1):
        if k < n:
            act = (log.engine_torque[k], log.brake_torque[k], int(log.coast_signal[k]), log.fuel[k], log.time[k])
        else:
            act = (0.0, 0.0, last_signal, 0.0, 0.0)
        rows.append((k, repr(k * log.step_length), repr(float(log.speeds[k])),
                     repr(float(act[0])), repr(float(act[1])), act[2], repr(float(act[3])), repr(float(act[4]))))
    _write_csv(path, LOG_HEADER, rows)


def read_log(path) -> TrajectoryLog:
    data = _parse_columns(_read_rows(path, LOG_HEADER), LOG_HEADER, path)
    if not np.array_equal(data[:, 0], np.arange(len(data))):
        raise ValidationError(f"{path}: step column must count up from 0")
    step_length = float(data[1, 1]) if len(data) > 1 else DEFAULT_STEP
    body = data[:-1]
    return TrajectoryLog(
        step_length=step_length,
        speeds=data[:, 2],
        engine_torque=body[:, 3],
        brake_torque=body[:, 4],
        coast_signal=body[:, 5].astype(int),
        fuel=body[:, 6],
        time=body[:, 7],
        initial_signal=int(data[0, 5]) if len(data) == 1 else 1,
    )


def write_summary(summary: dict, path) -> None:
    """Write a run summary as JSON; non-finite numbers become ``null``."""
    missing = [k for k in SUMMARY_KEYS if k not in summary]
    if missing:
        raise ValidationError(f"summary lacks {missing}")
    clean = {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in summary.items()}
    try:
        Path(path).write_text(json.dumps(clean, indent=2, sort_keys=False) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_summary(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    missing = [k for k in SUMMARY_KEYS if k not in data]
    if missing:
        raise ValidationError(f"{path}: summary lacks {missing}")
    return data


# ---------------------------------------------------------------------------
# synthetic profiles
# ---------------------------------------------------------------------------

def synth_hill(length: float, peak_grade: float, step_length: float = DEFAULT_STEP) -> SlopeProfile:
    """Climb at ``peak_grade`` (rad) for the first half, descend for the second."""
    if not (length > 0 and step_length > 0):
        raise ValidationError("length and step_length must be positive")
    n = int(round(length / step_length))
    half = n // 2
    grades = np.full(n, -float(peak_grade))
    grades[:half] = peak_grade
    return SlopeProfile(step_length, grades)


def synth_rolling(length: float, amplitude: float, wavelength: float,
                  step_length: float = DEFAULT_STEP, phase: float = 0.0) -> SlopeProfile:
    """Sinusoidal grade (rad) with the given amplitude and wavelength in metres."""
    if not (length > 0 and step_length > 0 and wavelength > 0):
        raise ValidationError("length, wavelength and step_length must be positive")
    s = np.arange(int(round(length / step_length))) * step_length
    return SlopeProfile(step_length, amplitude * np.sin(2 * np.pi * s / wavelength + phase))


def perturb_reference(reference: ReferenceTrace, start: float, end: float, delta: float) -> ReferenceTrace:
    """Add ``delta`` (m/s) to the reference between ``start`` and ``end`` metres
    with half-cosine ramps of a quarter of the window on each side."""
    s = np.arange(len(reference)) * reference.step_length
    width = max(end - start, reference.step_length)
    ramp = 0.25 * width
    w = np.zeros_like(s)
    inside = (s >= start) & (s <= end)
    w[inside] = 1.0
    up = (s >= start) & (s < start + ramp)
    w[up] = 0.5 - 0.5 * np.cos(np.pi * (s[up] - start) / ramp)
    down = (s > end - ramp) & (s <= end)
    w[down] = 0.5 - 0.5 * np.cos(np.pi * (end - s[down]) / ramp)
    return ReferenceTrace(reference.step_length, reference.speeds + delta * w)
