"""Spatial-domain longitudinal vehicle, powertrain and fuel model.

Every solver in the package evaluates dynamics through the compiled kernels
defined here (``*_kernel``), so the physics lives in exactly one place.  The
kernels are plain arithmetic and accept scalars or numpy arrays alike; the
public functions wrap them with validation and the package's value types.

All quantities are SI (m, m/s, N, Nm, J) except fuel mass, which is in grams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit

from .errors import InsufficientKineticEnergy, StalledVehicle, ValidationError, ZeroSpeed

KMH = 1.0 / 3.6
MIN_SPEED = 1.0  # m/s; the distance-domain model is singular at rest

_RAD_S_TO_RPM = 60.0 / (2.0 * math.pi)
_FUEL_SPEED_UNITS = {"rpm": _RAD_S_TO_RPM, "krpm": _RAD_S_TO_RPM / 1000.0, "rad/s": 1.0}
_RESTART_CONVENTIONS = ("rad/s", "rev/s")


class PowertrainMode(str, Enum):
    BASELINE = "baseline"
    FUEL_CUT_OFF = "fco"
    ENGINE_START_STOP = "ess"

    @classmethod
    def parse(cls, value: "str | PowertrainMode") -> "PowertrainMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {
            "baseline": cls.BASELINE,
            "fco": cls.FUEL_CUT_OFF,
            "fuel-cut-off": cls.FUEL_CUT_OFF,
            "fuelcutoff": cls.FUEL_CUT_OFF,
            "ess": cls.ENGINE_START_STOP,
            "start-stop": cls.ENGINE_START_STOP,
            "engine-start-stop": cls.ENGINE_START_STOP,
            "enginestartstop": cls.ENGINE_START_STOP,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown powertrain mode {value!r}") from None

    @property
    def has_binary(self) -> bool:
        return self is not PowertrainMode.BASELINE

    @property
    def drag_flag(self) -> float:
        # engine drag only reaches the wheels with the clutch engaged and fuel cut
        return 1.0 if self is PowertrainMode.FUEL_CUT_OFF else 0.0

    @property
    def restarts(self) -> bool:
        return self is PowertrainMode.ENGINE_START_STOP


class VehicleConsts(NamedTuple):
    """Flat, compiled-code friendly view of :class:`VehicleParams`."""

    mass: float
    gravity: float
    rolling: float
    aero: float  # C_d * rho * A / 2
    eta_ratio: float  # eta * I_g * I_final
    wheel_radius: float
    drag_torque: float
    restart_coeff: float  # restart speed drop per unit speed, nan if cranking is impossible
    fuel_speed_per_v: float  # fuel-map engine speed per m/s
    a1: float
    a2: float
    a3: float
    a4: float


@dataclass(frozen=True)
class VehicleParams:
    """Physical and powertrain constants; defaults are the reference SUV.

    ``restart_speed_convention`` selects how engine speed enters the cranking
    energy: ``"rad/s"`` uses ``I_g*I_final*v/r_w``, ``"rev/s"`` divides by
    ``2*pi*r_w`` instead.  ``fuel_speed_unit`` is the engine-speed unit the fuel
    polynomial coefficients expect.
    """

    effective_mass: float = 1870.0
    drag_coeff: float = 0.373
    frontal_area: float = 2.58
    air_density: float = 1.205
    rolling_coeff: float = 0.011
    gravity: float = 9.8
    gearbox_efficiency: float = 0.94
    wheel_radius: float = 0.364
    gear_ratio: float = 0.672
    final_drive_ratio: float = 4.103
    engine_drag_torque: float = 30.0
    engine_inertia: float = 0.15
    fuel_coeffs: tuple = (0.2159, 0.005676, 0.0004349, 8.899e-07)
    restart_speed_convention: str = "rad/s"
    fuel_speed_unit: str = "krpm"

    def __post_init__(self):
        object.__setattr__(self, "fuel_coeffs", tuple(float(a) for a in self.fuel_coeffs))
        positive = ("effective_mass", "frontal_area", "air_density", "gravity",
                    "wheel_radius", "gear_ratio", "final_drive_ratio")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be strictly positive")
        if self.drag_coeff < 0 or self.rolling_coeff < 0:
            raise ValidationError("drag and rolling coefficients must be non-negative")
        if not 0 < self.gearbox_efficiency <= 1:
            raise ValidationError("gearbox_efficiency must lie in (0, 1]")
        if self.engine_drag_torque < 0 or self.engine_inertia < 0:
            raise ValidationError("engine_drag_torque and engine_inertia must be >= 0")
        if len(self.fuel_coeffs) != 4:
            raise ValidationError("fuel_coeffs needs exactly four coefficients")
        if self.restart_speed_convention not in _RESTART_CONVENTIONS:
            raise ValidationError(f"restart_speed_convention must be one of {_RESTART_CONVENTIONS}")
        if self.fuel_speed_unit not in _FUEL_SPEED_UNITS:
            raise ValidationError(f"fuel_speed_unit must be one of {tuple(_FUEL_SPEED_UNITS)}")

    @property
    def overall_ratio(self) -> float:
        return self.gear_ratio * self.final_drive_ratio

    @property
    def restart_engine_speed_per_v(self) -> float:
        if self.restart_speed_convention == "rev/s":
            return self.overall_ratio / (2.0 * math.pi * self.wheel_radius)
        return self.overall_ratio / self.wheel_radius

    def consts(self) -> VehicleConsts:
        a1, a2, a3, a4 = self.fuel_coeffs
        # the cranking energy and the vehicle kinetic energy both scale with v^2,
        # so the restart drop is a fixed fraction of speed
        ratio = self.engine_inertia * self.restart_engine_speed_per_v ** 2 / self.effective_mass
        kappa = 1.0 - math.sqrt(1.0 - ratio) if ratio <= 1.0 else math.nan
        return VehicleConsts(
            mass=float(self.effective_mass),
            gravity=float(self.gravity),
            rolling=float(self.rolling_coeff),
            aero=0.5 * self.drag_coeff * self.air_density * self.frontal_area,
            eta_ratio=self.gearbox_efficiency * self.overall_ratio,
            wheel_radius=float(self.wheel_radius),
            drag_torque=float(self.engine_drag_torque),
            restart_coeff=kappa,
            fuel_speed_per_v=self.overall_ratio / self.wheel_radius * _FUEL_SPEED_UNITS[self.fuel_speed_unit],
            a1=a1, a2=a2, a3=a3, a4=a4,
        )


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def resistance_kernel(c, grade, v):
    return c.mass * c.gravity * (np.sin(grade) + c.rolling * np.cos(grade)) + c.aero * v * v


@njit(cache=True)
def final_drive_kernel(c, te, tb, z, drag_flag):
    return c.eta_ratio * (te - drag_flag * (1.0 - z) * c.drag_torque) - tb


@njit(cache=True)
def fuel_rate_kernel(c, w, te):
    return c.a1 + c.a2 * w * te + c.a3 * w * w * te + c.a4 * w * te * te


@njit(cache=True)
def step_fuel_kernel(c, te, gate, v, ds):
    return gate * fuel_rate_kernel(c, c.fuel_speed_per_v * v, te) / v * ds


@njit(cache=True)
def next_speed_kernel(c, v, grade, te, tb, z, drag_flag, restart_gate, ds):
    traction = final_drive_kernel(c, te, tb, z, drag_flag) / c.wheel_radius
    accel = (traction - resistance_kernel(c, grade, v)) / (c.mass * v)
    return v + accel * ds - restart_gate * c.restart_coeff * v


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ControlStep:
    """One step of actuation.

    ``coast_signal`` is the fuel cut-off signal ``z`` or the start/stop signal
    ``d``; zero means coasting (no fuel, no engine torque).  Baseline always
    uses 1.
    """

    engine_torque: float = 0.0
    brake_torque: float = 0.0
    coast_signal: int = 1

    def __post_init__(self):
        if self.engine_torque < 0 or self.brake_torque < 0:
            raise ValidationError("torques must be non-negative")
        if self.coast_signal not in (0, 1):
            raise ValidationError("coast_signal must be 0 or 1")
        if self.coast_signal == 0 and self.engine_torque != 0:
            raise ValidationError("engine torque must be zero while coasting")

    def check(self, mode: PowertrainMode) -> None:
        """Raise if the step is not admissible for ``mode``."""
        mode = PowertrainMode.parse(mode)
        if mode.has_binary:
            if self.coast_signal == 1 and self.brake_torque != 0:
                raise ValidationError("brake torque must be zero while the engine is fuelled")
        elif self.coast_signal != 1:
            raise ValidationError("baseline mode has no coasting signal")


@dataclass(frozen=True)
class StepOutcome:
    next_speed: float
    fuel_used: float
    time_elapsed: float
    restart_speed_drop: float = 0.0


@dataclass(frozen=True)
class SlopeProfile:
    """Road grade per distance step, in radians."""

    step_length: float
    grades: np.ndarray

    def __post_init__(self):
        grades = np.asarray(self.grades, dtype=float).reshape(-1)
        grades.flags.writeable = False
        object.__setattr__(self, "grades", grades)
        if not self.step_length > 0:
            raise ValidationError("step_length must be positive")
        if not np.all(np.isfinite(grades)) or np.any(np.abs(grades) >= math.pi / 2):
            raise ValidationError("grades must be finite and strictly within +-90 degrees")

    def __len__(self) -> int:
        return len(self.grades)

    @property
    def total_length(self) -> float:
        return len(self.grades) * self.step_length

    @property
    def distances(self) -> np.ndarray:
        return np.arange(len(self.grades)) * self.step_length

    def window(self, start: int, length: int) -> np.ndarray:
        return self.grades[start:start + length]


@dataclass
class TrajectoryLog:
    """Per-step record of a rollout.

    ``speeds`` has one more entry than the per-step arrays: it ends with the
    terminal speed.
    """

    step_length: float
    speeds: np.ndarray
    engine_torque: np.ndarray
    brake_torque: np.ndarray
    coast_signal: np.ndarray
    fuel: np.ndarray
    time: np.ndarray
    restart_drop: np.ndarray | None = None
    initial_signal: int = 1
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.speeds = np.asarray(self.speeds, dtype=float)
        for name in ("engine_torque", "brake_torque", "fuel", "time"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        self.coast_signal = np.asarray(self.coast_signal, dtype=int)
        if self.restart_drop is not None:
            self.restart_drop = np.asarray(self.restart_drop, dtype=float)
        n = len(self.engine_torque)
        if len(self.speeds) != n + 1:
            raise ValidationError("speeds must hold one entry more than the control arrays")
        for name in ("brake_torque", "coast_signal", "fuel", "time"):
            if len(getattr(self, name)) != n:
                raise ValidationError(f"{name} length does not match the number of steps")

    @property
    def n_steps(self) -> int:
        return len(self.engine_torque)

    @property
    def distances(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.step_length

    @property
    def total_fuel(self) -> float:
        return float(np.sum(self.fuel))

    @property
    def total_time(self) -> float:
        return float(np.sum(self.time))

    @property
    def cumulative_fuel(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.fuel)])

    @property
    def cumulative_time(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.time)])

    def controls(self) -> list[ControlStep]:
        return [ControlStep(float(te), float(tb), int(z))
                for te, tb, z in zip(self.engine_torque, self.brake_torque, self.coast_signal)]


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def _check_grade(grade):
    if abs(grade) >= math.pi / 2:
        raise ValidationError("grade must lie strictly within +-90 degrees")


def resistance_force(params: VehicleParams, grade: float, speed: float) -> float:
    """Aerodynamic, grade and rolling resistance in N."""
    if speed < 0:
        raise ValidationError("speed must be non-negative")
    _check_grade(grade)
    return float(resistance_kernel(params.consts(), float(grade), float(speed)))


def final_drive_torque(params: VehicleParams, mode: PowertrainMode, step: ControlStep) -> float:
    mode = PowertrainMode.parse(mode)
    step.check(mode)
    return float(final_drive_kernel(params.consts(), float(step.engine_torque),
                                    float(step.brake_torque), float(step.coast_signal), mode.drag_flag))


def fuel_rate(params: VehicleParams, engine_speed: float, engine_torque: float) -> float:
    """Fuel mass flow in g/s; ``engine_speed`` in ``params.fuel_speed_unit``."""
    if engine_speed < 0 or engine_torque < 0:
        raise ValidationError("engine speed and torque must be non-negative")
    return float(fuel_rate_kernel(params.consts(), float(engine_speed), float(engine_torque)))


def step_fuel(params: VehicleParams, mode: PowertrainMode, step: ControlStep,
              speed: float, step_length: float) -> float:
    """Fuel burnt over one distance step, in g."""
    mode = PowertrainMode.parse(mode)
    if speed <= 0:
        raise ZeroSpeed(f"fuel per step is undefined at speed {speed}")
    step.check(mode)
    gate = float(step.coast_signal) if mode.has_binary else 1.0
    if gate == 0.0:
        return 0.0
    return float(step_fuel_kernel(params.consts(), float(step.engine_torque), gate,
                                  float(speed), float(step_length)))


def engine_speed_from_vehicle_speed(params: VehicleParams, speed: float) -> float:
    """Locked-clutch engine speed used for the cranking energy.

    rad/s under the default convention; see ``VehicleParams``.
    """
    if speed < 0:
        raise ValidationError("speed must be non-negative")
    return params.restart_engine_speed_per_v * speed


def restart_speed_drop(params: VehicleParams, speed: float) -> float:
    """Speed lost when the engine is cranked through the clutch at ``speed``.

    The kinetic energy ``0.5*m*(v**2 - (v - dv)**2)`` equals the engine's
    rotational energy at the synchronised speed.
    """
    if speed <= 0:
        raise ZeroSpeed("restart speed drop needs a positive speed")
    if params.engine_inertia == 0:
        return 0.0
    omega = engine_speed_from_vehicle_speed(params, speed)
    energy = 0.5 * params.engine_inertia * omega * omega
    kinetic = 0.5 * params.effective_mass * speed * speed
    if kinetic < energy:
        raise InsufficientKineticEnergy(
            f"cranking needs {energy:.1f} J but only {kinetic:.1f} J is available")
    return speed - math.sqrt(speed * speed - 2.0 * energy / params.effective_mass)


def advance(params: VehicleParams, mode: PowertrainMode, step: ControlStep, prev_signal: int,
            speed: float, grade: float, step_length: float, time_rule: str = "euler") -> StepOutcome:
    """Propagate the vehicle over one distance step.

    ``time_rule`` is ``"euler"`` (``ds/v``) or ``"trapezoid"``
    (``2*ds/(v + v_next)``).
    """
    mode = PowertrainMode.parse(mode)
    if speed <= 0:
        raise ZeroSpeed(f"cannot advance from speed {speed}")
    _check_grade(grade)
    step.check(mode)
    restarting = mode.restarts and step.coast_signal == 1 and prev_signal == 0
    drop = restart_speed_drop(params, speed) if restarting else 0.0
    c = params.consts()
    z = float(step.coast_signal) if mode.has_binary else 1.0
    v_next = next_speed_kernel(c, float(speed), float(grade), float(step.engine_torque),
                               float(step.brake_torque), z, mode.drag_flag, 0.0, float(step_length))
    v_next = float(v_next) - drop
    if not v_next >= MIN_SPEED:
        raise StalledVehicle(f"speed falls to {v_next:.3f} m/s")
    fuel = step_fuel(params, mode, step, speed, step_length)
    if time_rule == "euler":
        dt = step_length / speed
    elif time_rule == "trapezoid":
        dt = 2.0 * step_length / (speed + v_next)
    else:
        raise ValueError(f"unknown time rule {time_rule!r}")
    return StepOutcome(next_speed=v_next, fuel_used=fuel, time_elapsed=dt, restart_speed_drop=drop)


def simulate(params: VehicleParams, mode: PowertrainMode, profile: SlopeProfile,
             controls: Sequence[ControlStep], v0: float, initial_signal: int = 1,
             time_rule: str = "euler") -> TrajectoryLog:
    """Roll a control sequence out over ``profile``.

    Plant errors are re-raised with the index of the failing step.
    """
    mode = PowertrainMode.parse(mode)
    n = len(profile)
    if len(controls) != n:
        raise ValidationError(f"expected {n} controls, got {len(controls)}")
    if v0 <= 0:
        raise ZeroSpeed("initial speed must be positive")
    speeds = np.empty(n + 1)
    fuel = np.empty(n)
    time = np.empty(n)
    drops = np.empty(n)
    speeds[0] = v0
    prev = initial_signal
    for k, step in enumerate(controls):
        try:
            out = advance(params, mode, step, prev, speeds[k], profile.grades[k],
                          profile.step_length, time_rule)
        except StalledVehicle as exc:
            raise StalledVehicle(f"step {k}: {exc}", step=k) from exc
        except ZeroSpeed as exc:
            raise ZeroSpeed(f"step {k}: {exc}") from exc
        speeds[k + 1] = out.next_speed
        fuel[k] = out.fuel_used
        time[k] = out.time_elapsed
        drops[k] = out.restart_speed_drop
        prev = step.coast_signal
    return TrajectoryLog(
        step_length=profile.step_length,
        speeds=speeds,
        engine_torque=[s.engine_torque for s in controls],
        brake_torque=[s.brake_torque for s in controls],
        coast_signal=[s.coast_signal for s in controls],
        fuel=fuel,
        time=time,
        restart_drop=drops,
        initial_signal=initial_signal,
    )
