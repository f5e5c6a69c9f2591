import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecocoast import (KMH, ControlStep, InsufficientKineticEnergy, PowertrainMode, SlopeProfile,
                      StalledVehicle, ValidationError, VehicleParams, ZeroSpeed, advance,
                      engine_speed_from_vehicle_speed, final_drive_torque, fuel_rate,
                      resistance_force, restart_speed_drop, simulate, step_fuel)
from oracles import step_reference, vehicle_terms

P = VehicleParams()
V75 = 75 * KMH
MODES = list(PowertrainMode)

speeds = st.floats(5.0, 40.0)
grades = st.floats(-0.1, 0.1)


def test_resistance_values():
    assert resistance_force(P, 0.0, 0.0) == pytest.approx(1870 * 9.8 * 0.011, rel=1e-12)
    aero = 0.5 * 0.373 * 1.205 * 2.58 * 20.833 ** 2
    assert resistance_force(P, 0.0, 20.833) == pytest.approx(201.586 + aero, rel=1e-12)
    assert resistance_force(P, 0.0, 20.833) == pytest.approx(453.2, abs=0.05)
    assert resistance_force(VehicleParams(rolling_coeff=0.0), 0.0, 0.0) == 0.0


def test_final_drive_torque_values():
    ratio = 0.94 * 0.672 * 4.103
    assert final_drive_torque(P, "baseline", ControlStep(100, 0, 1)) == pytest.approx(ratio * 100, rel=1e-12)
    assert final_drive_torque(P, "baseline", ControlStep(100, 0, 1)) == pytest.approx(259.2, abs=0.05)
    assert final_drive_torque(P, "fco", ControlStep(0, 0, 0)) == pytest.approx(-ratio * 30, rel=1e-12)
    assert final_drive_torque(P, "fco", ControlStep(0, 0, 1)) == 0.0
    assert final_drive_torque(P, "ess", ControlStep(0, 0, 0)) == 0.0


def test_fuel_rate_polynomial():
    assert fuel_rate(P, 1234.0, 0.0) == pytest.approx(0.2159)
    assert fuel_rate(VehicleParams(fuel_coeffs=(0, 0, 0, 0)), 1500, 50) == 0.0
    expect = 0.2159 + 0.005676 * 1500 * 50 + 0.0004349 * 1500 ** 2 * 50 + 8.899e-7 * 1500 * 50 ** 2
    assert fuel_rate(P, 1500, 50) == pytest.approx(expect, rel=1e-14)


def test_step_fuel():
    assert step_fuel(P, "fco", ControlStep(0, 100, 0), V75, 5.0) == 0.0
    assert step_fuel(P, "ess", ControlStep(0, 0, 0), V75, 5.0) == 0.0
    assert step_fuel(P, "baseline", ControlStep(0, 0, 1), 20.833, 5.0) == pytest.approx(0.2159 / 20.833 * 5, rel=1e-12)
    with pytest.raises(ZeroSpeed):
        step_fuel(P, "baseline", ControlStep(), 0.0, 5.0)


def test_engine_speed():
    assert engine_speed_from_vehicle_speed(P, 0.0) == 0.0
    assert engine_speed_from_vehicle_speed(P, 20.833) == pytest.approx(157.8, abs=0.05)
    assert engine_speed_from_vehicle_speed(P, 30.0) == pytest.approx(2 * engine_speed_from_vehicle_speed(P, 15.0))


def test_restart_drop_value():
    dv = restart_speed_drop(P, 20.833)
    energy = 0.5 * 0.15 * (0.672 * 4.103 * 20.833 / 0.364) ** 2
    assert energy == pytest.approx(1867.7, abs=0.5)
    assert dv == pytest.approx(20.833 - math.sqrt(20.833 ** 2 - 2 * energy / 1870), rel=1e-12)
    assert dv == pytest.approx(0.0480, abs=5e-4)
    assert restart_speed_drop(VehicleParams(engine_inertia=0.0), 20.0) == 0.0


def test_restart_needs_kinetic_energy():
    heavy = VehicleParams(engine_inertia=1e4)
    with pytest.raises(InsufficientKineticEnergy):
        restart_speed_drop(heavy, 10.0)


@settings(max_examples=200, deadline=None)
@given(v=st.floats(0.5, 60.0))
def test_restart_energy_identity(v):
    dv = restart_speed_drop(P, v)
    omega = engine_speed_from_vehicle_speed(P, v)
    lhs = 0.5 * P.effective_mass * (v * v - (v - dv) ** 2)
    assert lhs == pytest.approx(0.5 * P.engine_inertia * omega ** 2, rel=1e-9)
    assert dv >= 0


def test_control_step_invariants():
    with pytest.raises(ValidationError):
        ControlStep(-1, 0, 1)
    with pytest.raises(ValidationError):
        ControlStep(10, 0, 0)
    with pytest.raises(ValidationError):
        ControlStep(0, 0, 2)
    with pytest.raises(ValidationError):
        advance(P, "fco", ControlStep(0, 10, 1), 1, V75, 0.0, 5.0)
    with pytest.raises(ValidationError):
        advance(P, "baseline", ControlStep(0, 0, 0), 1, V75, 0.0, 5.0)


def test_equilibrium_is_fixed_point():
    te = resistance_force(P, 0.01, V75) * P.wheel_radius / (P.gearbox_efficiency * P.overall_ratio)
    out = advance(P, "baseline", ControlStep(te, 0, 1), 1, V75, 0.01, 5.0)
    assert out.next_speed == pytest.approx(V75, rel=1e-13)


def test_no_restart_when_engine_stays_on():
    out = advance(P, "ess", ControlStep(50, 0, 1), 1, V75, 0.0, 5.0)
    assert out.restart_speed_drop == 0.0
    restart = advance(P, "ess", ControlStep(50, 0, 1), 0, V75, 0.0, 5.0)
    assert restart.restart_speed_drop == pytest.approx(restart_speed_drop(P, V75))
    assert restart.next_speed == pytest.approx(out.next_speed - restart.restart_speed_drop, rel=1e-13)


@settings(max_examples=100, deadline=None)
@given(v=speeds, g=grades, te=st.floats(0, 120))
def test_modes_coincide_when_fuelled(v, g, te):
    step = ControlStep(te, 0.0, 1)
    base = advance(P, "baseline", step, 1, v, g, 5.0)
    for mode in ("fco", "ess"):
        assert advance(P, mode, step, 1, v, g, 5.0) == base


@settings(max_examples=200, deadline=None)
@given(v=speeds, g=grades, te=st.floats(0, 120), tb=st.floats(0, 500), z=st.integers(0, 1),
       prev=st.integers(0, 1), mode=st.sampled_from(["baseline", "fco", "ess"]))
def test_advance_matches_hand_computation(v, g, te, tb, z, prev, mode):
    if mode == "baseline":
        z = 1
    step = ControlStep(te if z else 0.0, 0.0 if (z and mode != "baseline") else tb, z)
    out = advance(P, mode, step, prev, v, g, 5.0)
    vn, fuel, drop = step_reference(vehicle_terms(P), mode, step.engine_torque, step.brake_torque,
                                    z, prev, v, g, 5.0)
    assert out.next_speed == pytest.approx(vn, rel=1e-12, abs=1e-12)
    assert out.fuel_used == pytest.approx(fuel, rel=1e-12, abs=1e-15)
    assert out.restart_speed_drop == pytest.approx(drop, rel=1e-12, abs=1e-15)
    assert out.time_elapsed == pytest.approx(5.0 / v)
    assert out.fuel_used >= 0 and out.restart_speed_drop >= 0


def test_trapezoid_time_rule():
    out = advance(P, "baseline", ControlStep(0, 0, 1), 1, V75, 0.02, 5.0, time_rule="trapezoid")
    assert out.time_elapsed == pytest.approx(10.0 / (V75 + out.next_speed))


def test_advance_errors():
    with pytest.raises(ZeroSpeed):
        advance(P, "baseline", ControlStep(), 1, 0.0, 0.0, 5.0)
    with pytest.raises(StalledVehicle):
        advance(P, "baseline", ControlStep(0, 500, 1), 1, 2.0, 0.3, 50.0)


def test_simulate_empty_and_coasting():
    empty = simulate(P, "fco", SlopeProfile(5.0, []), [], V75)
    assert empty.n_steps == 0 and empty.total_fuel == 0 and empty.total_time == 0
    prof = SlopeProfile(5.0, np.full(20, -0.03))
    log = simulate(P, "ess", prof, [ControlStep(0, 0, 0)] * 20, V75)
    assert log.total_fuel == 0.0
    assert np.all(log.fuel == 0)
    assert log.n_steps == 20 and len(log.speeds) == 21


def test_simulate_constant_speed():
    prof = SlopeProfile(5.0, np.zeros(40))
    te = resistance_force(P, 0.0, V75) * P.wheel_radius / (P.gearbox_efficiency * P.overall_ratio)
    log = simulate(P, "fco", prof, [ControlStep(te, 0, 1)] * 40, V75)
    np.testing.assert_allclose(log.speeds, V75, rtol=1e-12)
    assert log.total_time == pytest.approx(prof.total_length / V75, rel=1e-12)


def test_simulate_reports_step_of_stall():
    prof = SlopeProfile(5.0, np.full(400, 0.2))
    with pytest.raises(StalledVehicle) as info:
        simulate(P, "fco", prof, [ControlStep(0, 0, 0)] * 400, 15.0)
    assert info.value.step is not None and info.value.step > 0


def test_mode_parse():
    assert PowertrainMode.parse("FuelCutOff") is PowertrainMode.FUEL_CUT_OFF
    assert PowertrainMode.parse("engine_start_stop") is PowertrainMode.ENGINE_START_STOP
    with pytest.raises(ValueError):
        PowertrainMode.parse("hybrid")


def test_params_validation():
    with pytest.raises(ValidationError):
        VehicleParams(effective_mass=0)
    with pytest.raises(ValidationError):
        VehicleParams(gearbox_efficiency=1.5)
    with pytest.raises(ValidationError):
        VehicleParams(fuel_speed_unit="furlong")
