"""Rule-based reference controller: PI speed tracking with triggered coasting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import StalledVehicle, ValidationError, ZeroSpeed
from .model import KMH, ControlStep, PowertrainMode, TrajectoryLog, VehicleParams, advance, resistance_force
from .scenario import OperatingLimits, ScenarioSpec


@dataclass(frozen=True)
class PiConfig:
    """PI gains act on a force demand in N: ``kp`` in N per m/s, ``ki`` in N per m.

    The integral accumulates speed error over time.  Coasting triggers when
    the demand is non-positive above ``trigger_speed`` and then holds for
    ``hold_steps`` steps.
    """

    kp: float = 800.0
    ki: float = 40.0
    trigger_speed: float = 75.0 * KMH
    hold_steps: int = 4
    mode: PowertrainMode = PowertrainMode.FUEL_CUT_OFF

    def __post_init__(self):
        object.__setattr__(self, "mode", PowertrainMode.parse(self.mode))
        if self.kp < 0 or self.ki < 0:
            raise ValidationError("PI gains must be non-negative")
        if self.hold_steps < 1:
            raise ValidationError("hold_steps must be >= 1")
        if self.trigger_speed <= 0:
            raise ValidationError("trigger_speed must be positive")

    @classmethod
    def small_gains(cls, mode, **kw) -> "PiConfig":
        """Low per-mode gains (fuel cut-off 0.5/1e-4, start/stop 2/1e-3).

        Under the force-demand mapping used here they barely move the
        actuators; the class defaults are the retuned values.
        """
        mode = PowertrainMode.parse(mode)
        kp, ki = (2.0, 1e-3) if mode is PowertrainMode.ENGINE_START_STOP else (0.5, 1e-4)
        return cls(kp=kp, ki=ki, mode=mode, **kw)


class PiState(NamedTuple):
    integral: float = 0.0
    hold_counter: int = 0
    prev_signal: int = 1


def pi_step(config: PiConfig, v: float, v_ref: float, state: PiState, dt: float,
            params: VehicleParams | None = None, limits: OperatingLimits | None = None):
    """One controller update; returns ``(ControlStep, new_state)``.

    ``u = kp*(v_ref - v) + ki*integral`` is a wheel force demand.  Positive
    demand maps to engine torque through ``r_w/(eta*I_g*I_final)``, negative
    demand to brake torque through ``r_w``.  In the binary modes braking is
    only possible with the signal at 0, so below the trigger speed a negative
    demand leaves both actuators idle.
    """
    if v <= 0:
        raise ZeroSpeed("PI controller needs a positive speed")
    params = params or VehicleParams()
    limits = limits or OperatingLimits()
    mode = config.mode
    err = v_ref - v
    u = config.kp * err + config.ki * state.integral
    torque_scale = params.wheel_radius / (params.gearbox_efficiency * params.overall_ratio)
    brake_scale = params.wheel_radius
    te_req = min(max(u * torque_scale, 0.0), limits.engine_torque_max)
    tb_req = min(max(-u * brake_scale, 0.0), limits.brake_torque_max)

    hold = state.hold_counter
    if mode.has_binary and hold > 0:
        step = ControlStep(0.0, tb_req, 0)
        return step, PiState(state.integral, hold - 1, 0)  # integral frozen during the hold

    if mode.has_binary and u <= 0 and v > config.trigger_speed:
        new_hold = config.hold_steps - 1 if state.prev_signal == 1 else 0
        step = ControlStep(0.0, tb_req, 0)
    elif u > 0:
        new_hold = 0
        step = ControlStep(te_req, 0.0, 1)
    else:
        new_hold = 0
        step = ControlStep(0.0, tb_req if not mode.has_binary else 0.0, 1)

    # conditional integration: stop winding further into a saturated actuator
    saturated = (u * torque_scale > limits.engine_torque_max and err > 0) or \
                (-u * brake_scale > limits.brake_torque_max and err < 0)
    integral = state.integral if saturated else state.integral + err * dt
    return step, PiState(integral, new_hold, step.coast_signal)


def initial_state(config: PiConfig, scenario: ScenarioSpec) -> PiState:
    """Integral preset to the steady force at ``v0`` on the first grade, for a bumpless start."""
    if config.ki == 0:
        return PiState()
    force = resistance_force(scenario.params, float(scenario.profile.grades[0]), scenario.v0)
    return PiState(force / config.ki, 0, 1)


def pi_run(scenario: ScenarioSpec, config: PiConfig | None = None,
           state: PiState | None = None) -> TrajectoryLog:
    """Closed-loop PI rollout against the vehicle model.

    The controller's mode overrides the scenario's.  Plant errors are
    re-raised with the failing step index.
    """
    if scenario.reference is None:
        raise ValidationError("PI tracking needs a reference trace")
    config = config or PiConfig(mode=scenario.mode)
    mode = config.mode
    n = len(scenario)
    state = state or initial_state(config, scenario)
    speeds = np.empty(n + 1)
    speeds[0] = scenario.v0
    fuel = np.empty(n)
    dt = np.empty(n)
    drops = np.empty(n)
    steps = []
    for k in range(n):
        v = speeds[k]
        step, state_next = pi_step(config, v, float(scenario.reference.at(k)), state,
                                   scenario.step_length / v, scenario.params, scenario.limits)
        try:
            out = advance(scenario.params, mode, step, state.prev_signal, v,
                          scenario.profile.grades[k], scenario.step_length)
        except (StalledVehicle, ZeroSpeed) as exc:
            raise StalledVehicle(f"step {k}: {exc}", step=k) from exc
        speeds[k + 1] = out.next_speed
        fuel[k] = out.fuel_used
        dt[k] = out.time_elapsed
        drops[k] = out.restart_speed_drop
        steps.append(step)
        state = state_next
    return TrajectoryLog(
        step_length=scenario.step_length, speeds=speeds,
        engine_torque=[s.engine_torque for s in steps],
        brake_torque=[s.brake_torque for s in steps],
        coast_signal=[s.coast_signal for s in steps],
        fuel=fuel, time=dt, restart_drop=drops, initial_signal=1,
        meta={"controller": "pi", "kp": config.kp, "ki": config.ki})
