"""Run manifests: a YAML mapping describing one experiment, plus command-line overrides.

Recognised keys (all optional unless a command needs them)::

    profile: grades.csv            # distance_m,grade_deg
    synthetic:                     # used when no profile file is given
      kind: hill                   # hill | rolling
      length_m: 1000
      peak_grade_deg: 2.0          # hill
      amplitude_deg: 2.5           # rolling
      wavelength_m: 1000           # rolling
    reference: ref.csv             # distance_m,speed_kmh
    reference_synthetic:
      kind: sine                   # sine | constant
      mean_kmh: 75
      amplitude_kmh: 4
      wavelength_m: 1000
      phase: 1.0
    step_length: 5.0
    v0_kmh: 75
    mode: fco                      # baseline | fco | ess
    beta: 0.5
    alpha: 0.0
    betas: [0.1, 0.5, 0.9]
    modes: [baseline, fco, ess]
    controller: pi                 # dp | dp-tracking | mimpc | heuristic-mpc | pi
    controllers: [pi, mimpc, dp-tracking, mimpc:10]
    horizon: 40
    dmin: 4
    max_iterations: 200
    solver: bnb                    # bnb | enumerate
    grid: {n_speed: 81, n_torque: 13, n_brake: 6}
    pi: {kp: 800, ki: 40, trigger_kmh: 75, hold_steps: 4}
    perturbation: {start_m: 600, end_m: 900, delta_kmh: 3}
    vehicle: {engine_inertia: 0.15, fuel_speed_unit: krpm}
    limits: {v_min_kmh: 50, v_max_kmh: 90, engine_torque_max: 120, brake_torque_max: 500}
    jobs: 1
    seed: 0
    out: results/
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .dp import DpGrid
from .errors import IoError, ParseError, ValidationError
from .model import KMH, VehicleParams
from .profiles import DEFAULT_STEP, load_profile, load_reference, synth_hill, synth_rolling
from .scenario import CostWeights, OperatingLimits, ReferenceTrace, ScenarioSpec

CONTROLLERS = ("dp", "dp-tracking", "mimpc", "heuristic-mpc", "pi")


@dataclass
class Manifest:
    data: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def load(cls, path) -> "Manifest":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise IoError(f"cannot read manifest {path}: {exc}") from exc
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ParseError(f"{path}: manifest must be a mapping")
        return cls(data, path.parent)

    def get(self, key, default=None):
        value = self.data.get(key)
        return default if value is None else value

    def update(self, **overrides) -> "Manifest":
        data = dict(self.data)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return Manifest(data, self.base_dir)

    def _path(self, value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    # -- scenario pieces -------------------------------------------------

    @property
    def step_length(self) -> float:
        return float(self.get("step_length", DEFAULT_STEP))

    def profile(self):
        if self.get("profile"):
            return load_profile(self._path(self.data["profile"]), self.step_length)
        syn = self.get("synthetic")
        if syn is None:
            raise ValidationError("manifest needs a 'profile' file or a 'synthetic' profile")
        kind = syn.get("kind", "hill")
        length = float(syn.get("length_m", 1000.0))
        if kind == "hill":
            return synth_hill(length, np.deg2rad(float(syn.get("peak_grade_deg", 2.0))), self.step_length)
        if kind == "rolling":
            return synth_rolling(length, np.deg2rad(float(syn.get("amplitude_deg", 2.5))),
                                 float(syn.get("wavelength_m", 1000.0)), self.step_length,
                                 float(syn.get("phase", 0.0)))
        raise ValidationError(f"unknown synthetic profile kind {kind!r}")

    def limits(self) -> OperatingLimits:
        lim = self.get("limits", {})
        return OperatingLimits(
            v_min=float(lim.get("v_min_kmh", 50.0)) * KMH,
            v_max=float(lim.get("v_max_kmh", 90.0)) * KMH,
            engine_torque_max=float(lim.get("engine_torque_max", 120.0)),
            brake_torque_max=float(lim.get("brake_torque_max", 500.0)))

    def reference(self, n_steps: int, limits: OperatingLimits) -> ReferenceTrace | None:
        if self.get("reference"):
            return load_reference(self._path(self.data["reference"]), self.step_length, limits)
        syn = self.get("reference_synthetic")
        if syn is None:
            return None
        s = np.arange(n_steps + 1) * self.step_length
        kind = syn.get("kind", "sine")
        mean = float(syn.get("mean_kmh", 75.0))
        if kind == "constant":
            kmh = np.full(len(s), mean)
        elif kind == "sine":
            kmh = mean + float(syn.get("amplitude_kmh", 4.0)) * np.sin(
                2 * np.pi * s / float(syn.get("wavelength_m", 1000.0)) + float(syn.get("phase", 0.0)))
        else:
            raise ValidationError(f"unknown synthetic reference kind {kind!r}")
        return ReferenceTrace(self.step_length, kmh * KMH)

    def params(self) -> VehicleParams:
        try:
            return VehicleParams(**self.get("vehicle", {}))
        except TypeError as exc:
            raise ValidationError(f"bad vehicle override: {exc}") from exc

    def scenario(self, mode=None, need_reference: bool = False) -> ScenarioSpec:
        profile = self.profile()
        limits = self.limits()
        ref = self.reference(len(profile), limits)
        if need_reference and ref is None:
            raise ValidationError("this command needs a reference trace ('reference' or 'reference_synthetic')")
        return ScenarioSpec(
            profile=profile,
            v0=float(self.get("v0_kmh", 75.0)) * KMH,
            mode=mode or self.get("mode", "fco"),
            weights=CostWeights(float(self.get("beta", 0.5)), float(self.get("alpha", 0.0))),
            limits=limits, reference=ref, params=self.params())

    def grid(self, limits: OperatingLimits) -> DpGrid:
        g = self.get("grid", {})
        return DpGrid.default(limits, int(g.get("n_speed", 81)), int(g.get("n_torque", 13)),
                              int(g.get("n_brake", 6)))

    @property
    def out_dir(self) -> Path:
        out = Path(self.get("out", "results"))
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IoError(f"cannot create output directory {out}: {exc}") from exc
        return out
