"""Scenario value types: limits, weights, reference trace and the bundle of all."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError
from .model import KMH, PowertrainMode, SlopeProfile, VehicleParams


@dataclass(frozen=True)
class OperatingLimits:
    v_min: float = 50.0 * KMH
    v_max: float = 90.0 * KMH
    engine_torque_max: float = 120.0
    brake_torque_max: float = 500.0

    def __post_init__(self):
        if not 0 < self.v_min < self.v_max:
            raise ValidationError("speed limits must satisfy 0 < v_min < v_max")
        if not (self.engine_torque_max > 0 and self.brake_torque_max > 0):
            raise ValidationError("torque maxima must be positive")


@dataclass(frozen=True)
class CostWeights:
    """``beta`` trades fuel (1) against time or tracking (0); ``alpha`` prices
    each switch of the fuel cut-off signal."""

    beta: float = 0.5
    alpha: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValidationError("beta must lie in [0, 1]")
        if self.alpha < 0:
            raise ValidationError("alpha must be non-negative")


@dataclass(frozen=True)
class ReferenceTrace:
    step_length: float
    speeds: np.ndarray

    def __post_init__(self):
        speeds = np.asarray(self.speeds, dtype=float).reshape(-1)
        speeds.flags.writeable = False
        object.__setattr__(self, "speeds", speeds)
        if not self.step_length > 0:
            raise ValidationError("step_length must be positive")
        if len(speeds) == 0 or not np.all(np.isfinite(speeds)) or np.any(speeds <= 0):
            raise ValidationError("reference speeds must be finite and positive")

    def __len__(self) -> int:
        return len(self.speeds)

    def validate(self, limits: OperatingLimits) -> None:
        bad = np.flatnonzero((self.speeds < limits.v_min - 1e-9) | (self.speeds > limits.v_max + 1e-9))
        if bad.size:
            k = int(bad[0])
            raise ValidationError(
                f"reference speed {self.speeds[k] / KMH:.2f} km/h at step {k} is outside "
                f"[{limits.v_min / KMH:.1f}, {limits.v_max / KMH:.1f}] km/h")

    def at(self, index) -> np.ndarray:
        """Reference speed at step ``index``; indices past the end hold the last value."""
        idx = np.minimum(np.asarray(index), len(self.speeds) - 1)
        return self.speeds[idx]


@dataclass(frozen=True)
class ScenarioSpec:
    profile: SlopeProfile
    v0: float = 75.0 * KMH
    mode: PowertrainMode = PowertrainMode.BASELINE
    weights: CostWeights = field(default_factory=CostWeights)
    limits: OperatingLimits = field(default_factory=OperatingLimits)
    reference: ReferenceTrace | None = None
    params: VehicleParams = field(default_factory=VehicleParams)

    def __post_init__(self):
        object.__setattr__(self, "mode", PowertrainMode.parse(self.mode))
        if not self.limits.v_min <= self.v0 <= self.limits.v_max:
            raise ValidationError("v0 must lie within the operating speed limits")
        if self.reference is not None:
            if self.reference.step_length != self.profile.step_length:
                raise ValidationError("reference and profile step lengths differ")
            if len(self.reference) < len(self.profile):
                raise ValidationError(
                    f"reference has {len(self.reference)} steps but the profile has {len(self.profile)}")
            self.reference.validate(self.limits)

    def __len__(self) -> int:
        return len(self.profile)

    @property
    def step_length(self) -> float:
        return self.profile.step_length

    def reference_speeds(self, length: int | None = None) -> np.ndarray:
        """Reference speeds for steps ``0..length`` (inclusive)."""
        if self.reference is None:
            raise ValidationError("scenario has no reference trace")
        n = len(self.profile) if length is None else length
        return self.reference.at(np.arange(n + 1))

    def with_(self, **changes) -> "ScenarioSpec":
        if "beta" in changes or "alpha" in changes:
            w = self.weights
            changes["weights"] = CostWeights(changes.pop("beta", w.beta), changes.pop("alpha", w.alpha))
        return replace(self, **changes)
