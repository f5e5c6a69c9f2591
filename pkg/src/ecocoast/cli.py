"""Command-line harness: ``ecocoast <command> [--config manifest.yaml] [overrides]``.

Exit codes: 0 success, 2 infeasible scenario (stall, no admissible plan),
1 input/output or validation problems.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import plots
from .dp import dp_solve, dp_tracking_solve, pareto_sweep
from .errors import (EcoCoastError, Infeasible, InsufficientKineticEnergy, IoError, ParseError,
                     StalledVehicle, ValidationError, ZeroSpeed)
from .manifest import CONTROLLERS, Manifest
from .metrics import summarize
from .model import KMH, PowertrainMode, simulate
from .mpc import MpcConfig, heuristic_mpc_run, mimpc_run
from .pi import PiConfig, pi_run
from .profiles import (read_log, read_summary, write_log, write_summary, perturb_reference)
from .scenario import ScenarioSpec

DEFAULT_BETAS = tuple(round(0.1 * i, 1) for i in range(1, 10))
PARETO_HEADER = ("beta", "mode", "fuel_g", "time_s")
COMPARE_HEADER = ("controller", "fuel_g", "time_s", "tracking_rmse_mps", "switch_count", "mean_solve_time_s")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are input errors, not infeasibility
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _csv_floats(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ecocoast", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "simulate": "run one controller (manifest 'controller') or replay a control log",
        "dp": "offline DP (time objective, or tracking with --objective tracking)",
        "pareto": "beta sweep of DP solutions per powertrain mode",
        "mpc": "closed-loop mixed-integer MPC",
        "heuristic": "closed-loop MPC with binaries fixed from DP tracking",
        "pi": "closed-loop PI controller with triggered coasting",
        "compare": "run several controllers on one scenario and tabulate",
        "perturb": "heuristic vs mixed-integer MPC under a reference perturbation",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", help="YAML run manifest")
        p.add_argument("--profile", help="grade profile CSV (distance_m,grade_deg)")
        p.add_argument("--reference", help="reference speed CSV (distance_m,speed_kmh)")
        p.add_argument("--mode", choices=[m.value for m in PowertrainMode])
        p.add_argument("--beta", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--horizon", type=int, help="MPC horizon in steps")
        p.add_argument("--dmin", type=int, help="minimum off steps")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int, help="worker processes for sweeps and comparisons")
        if name == "simulate":
            p.add_argument("--controller", help=f"one of {', '.join(CONTROLLERS)}")
            p.add_argument("--controls", help="trajectory log whose controls are replayed open loop")
        if name == "dp":
            p.add_argument("--objective", choices=("time", "tracking"))
        if name == "pareto":
            p.add_argument("--betas", type=_csv_floats, help="comma-separated weights")
            p.add_argument("--modes", help="comma-separated modes")
        if name == "compare":
            p.add_argument("--controllers", help="comma-separated, e.g. pi,mimpc,dp-tracking,mimpc:10")
        if name == "perturb":
            p.add_argument("--delta", type=float, help="perturbation in km/h")
            p.add_argument("--window", type=_csv_floats, help="start,end in metres")
    return parser


def _manifest(args) -> Manifest:
    m = Manifest.load(args.config) if args.config else Manifest()
    if args.profile:
        m = Manifest({**m.data, "profile": str(Path(args.profile).resolve())}, m.base_dir)
    if args.reference:
        m = Manifest({**m.data, "reference": str(Path(args.reference).resolve())}, m.base_dir)
    return m.update(mode=args.mode, beta=args.beta, alpha=args.alpha, horizon=args.horizon,
                    dmin=args.dmin, out=args.out, seed=args.seed, jobs=args.jobs)


# ---------------------------------------------------------------------------
# controllers
# ---------------------------------------------------------------------------

def _mpc_config(m: Manifest, horizon=None) -> MpcConfig:
    return MpcConfig(horizon_steps=int(horizon or m.get("horizon", 40)), d_min=int(m.get("dmin", 4)),
                     max_iterations=m.get("max_iterations", 200), solver_kind=m.get("solver", "bnb"))


def _pi_config(m: Manifest, mode) -> PiConfig:
    p = m.get("pi", {})
    kw = {k: float(p[k]) for k in ("kp", "ki") if k in p}
    if "trigger_kmh" in p:
        kw["trigger_speed"] = float(p["trigger_kmh"]) * KMH
    if "hold_steps" in p:
        kw["hold_steps"] = int(p["hold_steps"])
    return PiConfig(mode=mode, **kw)


def run_controller(spec: str, scenario: ScenarioSpec, m: Manifest, binaries=None):
    """Run ``spec`` (``name`` or ``name:horizon``); returns ``(log, summary)``."""
    name, _, horizon = spec.partition(":")
    if name not in CONTROLLERS:
        raise ValidationError(f"unknown controller {name!r}; choose from {', '.join(CONTROLLERS)}")
    ref = scenario.reference
    t0 = time.perf_counter()
    if name in ("dp", "dp-tracking"):
        solve = dp_solve if name == "dp" else dp_tracking_solve
        sol = solve(scenario, m.grid(scenario.limits))
        elapsed = time.perf_counter() - t0
        return sol.trajectory, summarize(sol.trajectory, ref, [elapsed / max(len(scenario), 1)])
    if name == "pi":
        log = pi_run(scenario, _pi_config(m, scenario.mode))
        elapsed = time.perf_counter() - t0
        return log, summarize(log, ref, [elapsed / max(len(scenario), 1)])
    cfg = _mpc_config(m, horizon or None)
    if name == "mimpc":
        run = mimpc_run(scenario, cfg)
    else:
        if binaries is None:
            binaries = dp_tracking_solve(scenario, m.grid(scenario.limits)).signals
        run = heuristic_mpc_run(scenario, binaries, cfg)
    return run.log, summarize(run.log, ref, run.solve_times, run.iterations, run.fallback_count)


def _run_job(job):
    spec, scenario, manifest, binaries = job
    return run_controller(spec, scenario, manifest, binaries)


def _executor(m: Manifest):
    jobs = int(m.get("jobs", 1))
    return ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------

def _emit(out: Path, stem: str, log, summary, reference=None):
    log_path = out / f"{stem}_log.csv"
    summary_path = out / f"{stem}_summary.json"
    write_log(log, log_path)
    write_summary(summary, summary_path)
    back = read_log(log_path)  # self-parse check
    if not (np.array_equal(back.speeds, log.speeds) and np.array_equal(back.coast_signal, log.coast_signal)):
        raise IoError(f"{log_path} did not read back identically")
    read_summary(summary_path)
    _plot_runs(out / f"{stem}.svg", {stem: log}, reference, stem)
    print(f"wrote {log_path}, {summary_path}")


def _plot_runs(path, logs: dict, reference, title):
    first = next(iter(logs.values()))
    x = first.distances
    speed = {}
    if reference is not None:
        speed["reference"] = reference.at(np.arange(len(x))) / KMH
    speed.update({k: v.speeds / KMH for k, v in logs.items()})
    plots.stacked_lines(path, x, [("speed [km/h]", speed)], title=title)
    plots.stacked_lines(Path(path).with_name(Path(path).stem + "_actuation.svg"), x, [
        ("signal", {k: v.coast_signal for k, v in logs.items()}),
        ("engine torque [Nm]", {k: v.engine_torque for k, v in logs.items()}),
        ("brake torque [Nm]", {k: v.brake_torque for k, v in logs.items()}),
    ], title=title, step=True)


def _write_rows(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        with open(path, newline="") as fh:  # self-parse check
            back = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    if tuple(back[0]) != header or len(back) != len(rows) + 1:
        raise IoError(f"{path} did not read back identically")
    print(f"wrote {path}")


def _num(v):
    return repr(float(v)) if math.isfinite(v) else "nan"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args, m: Manifest) -> int:
    scenario = m.scenario()
    out = m.out_dir
    controls_path = getattr(args, "controls", None) or m.get("controls")
    if controls_path:
        controls = read_log(controls_path).controls()
        log = simulate(scenario.params, scenario.mode, scenario.profile, controls, scenario.v0)
        _emit(out, "simulate", log, summarize(log, scenario.reference), scenario.reference)
        return 0
    spec = getattr(args, "controller", None) or m.get("controller", "pi")
    log, summary = run_controller(spec, scenario, m)
    _emit(out, spec.replace(":", "_"), log, summary, scenario.reference)
    return 0


def cmd_dp(args, m: Manifest) -> int:
    objective = getattr(args, "objective", None) or m.get("objective", "time")
    name = "dp" if objective == "time" else "dp-tracking"
    scenario = m.scenario(need_reference=objective == "tracking")
    log, summary = run_controller(name, scenario, m)
    _emit(m.out_dir, name, log, summary, scenario.reference)
    return 0


def cmd_pareto(args, m: Manifest) -> int:
    betas = getattr(args, "betas", None) or m.get("betas", DEFAULT_BETAS)
    modes = getattr(args, "modes", None) or m.get("modes", ["baseline", "fco", "ess"])
    if isinstance(modes, str):
        modes = [s.strip() for s in modes.split(",") if s.strip()]
    modes = [PowertrainMode.parse(x) for x in modes]
    out = m.out_dir
    rows = []
    fronts = {}
    executor = _executor(m)
    try:
        for mode in modes:
            scenario = m.scenario(mode=mode)
            points = pareto_sweep(scenario, m.grid(scenario.limits), betas, executor=executor)
            for p in points:
                rows.append((repr(p.beta), mode.value, _num(p.fuel_g), _num(p.time_s)))
            fronts[mode.value] = ([p.fuel_g for p in points], [p.time_s for p in points])
    finally:
        if executor:
            executor.shutdown()
    _write_rows(out / "pareto.csv", PARETO_HEADER, rows)
    plots.scatter_fronts(out / "pareto.svg", fronts, title="Pareto fronts")
    return 0


def cmd_mpc(args, m: Manifest) -> int:
    scenario = m.scenario(need_reference=True)
    log, summary = run_controller("mimpc", scenario, m)
    _emit(m.out_dir, "mimpc", log, summary, scenario.reference)
    return 0


def cmd_heuristic(args, m: Manifest) -> int:
    scenario = m.scenario(need_reference=True)
    log, summary = run_controller("heuristic-mpc", scenario, m)
    _emit(m.out_dir, "heuristic-mpc", log, summary, scenario.reference)
    return 0


def cmd_pi(args, m: Manifest) -> int:
    scenario = m.scenario(need_reference=True)
    log, summary = run_controller("pi", scenario, m)
    _emit(m.out_dir, "pi", log, summary, scenario.reference)
    return 0


def cmd_compare(args, m: Manifest) -> int:
    specs = getattr(args, "controllers", None) or m.get("controllers", ["pi", "mimpc", "dp-tracking"])
    if isinstance(specs, str):
        specs = [s.strip() for s in specs.split(",") if s.strip()]
    scenario = m.scenario(need_reference=True)
    jobs = [(spec, scenario, m, None) for spec in specs]
    executor = _executor(m)
    try:
        results = list(executor.map(_run_job, jobs)) if executor else [_run_job(j) for j in jobs]
    finally:
        if executor:
            executor.shutdown()
    out = m.out_dir
    rows = []
    logs = {}
    for spec, (log, summary) in zip(specs, results):
        stem = spec.replace(":", "_")
        write_log(log, out / f"{stem}_log.csv")
        write_summary(summary, out / f"{stem}_summary.json")
        logs[spec] = log
        rows.append((spec, _num(summary["fuel_g"]), _num(summary["time_s"]),
                     _num(summary["tracking_rmse_mps"]), summary["switch_count"],
                     _num(summary["solve_time_s_per_step"])))
    _write_rows(out / "comparison.csv", COMPARE_HEADER, rows)
    _plot_runs(out / "comparison.svg", logs, scenario.reference, "controller comparison")
    return 0


def perturbation_from(m: Manifest, length: float, args=None) -> dict:
    """Window and magnitude of the reference perturbation; unspecified parts are drawn from the seed."""
    spec = dict(m.get("perturbation", {}))
    if args is not None and getattr(args, "delta", None) is not None:
        spec["delta_kmh"] = args.delta
    if args is not None and getattr(args, "window", None):
        if len(args.window) != 2:
            raise ValidationError("--window needs start,end")
        spec["start_m"], spec["end_m"] = args.window
    rng = np.random.default_rng(int(m.get("seed", 0)))
    start = float(spec["start_m"]) if "start_m" in spec else float(rng.uniform(0.2, 0.6) * length)
    end = float(spec["end_m"]) if "end_m" in spec else start + 0.2 * length
    if "delta_kmh" in spec:
        delta = float(spec["delta_kmh"])
    else:
        delta = float(rng.choice([-1.0, 1.0]) * rng.uniform(2.0, 5.0))
    if not 0 <= start < end:
        raise ValidationError("perturbation window must satisfy 0 <= start < end")
    return {"start_m": start, "end_m": end, "delta_kmh": delta}


def cmd_perturb(args, m: Manifest) -> int:
    scenario = m.scenario(need_reference=True)
    pert = perturbation_from(m, scenario.profile.total_length, args)
    perturbed_ref = perturb_reference(scenario.reference, pert["start_m"], pert["end_m"],
                                      pert["delta_kmh"] * KMH)
    perturbed = scenario.with_(reference=perturbed_ref)
    binaries = dp_tracking_solve(scenario, m.grid(scenario.limits)).signals
    out = m.out_dir
    runs = {
        "heuristic_unperturbed": run_controller("heuristic-mpc", scenario, m, binaries),
        "heuristic_perturbed": run_controller("heuristic-mpc", perturbed, m, binaries),
        "mimpc_perturbed": run_controller("mimpc", perturbed, m),
    }
    for stem, (log, summary) in runs.items():
        write_log(log, out / f"{stem}_log.csv")
        write_summary(summary, out / f"{stem}_summary.json")
    h = runs["heuristic_perturbed"][1]
    mi = runs["mimpc_perturbed"][1]
    report = {
        "perturbation": pert,
        "summaries": {k: v[1] for k, v in runs.items()},
        "heuristic_minus_mimpc": {
            "tracking_rmse_mps": h["tracking_rmse_mps"] - mi["tracking_rmse_mps"],
            "fuel_g": h["fuel_g"] - mi["fuel_g"],
            "fuel_rel": (h["fuel_g"] - mi["fuel_g"]) / mi["fuel_g"],
            "solve_time_ratio": mi["solve_time_s_per_step"] / max(h["solve_time_s_per_step"], 1e-300),
        },
    }
    path = out / "delta_report.json"
    try:
        path.write_text(json.dumps(report, indent=2) + "\n")
        json.loads(path.read_text())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    _plot_runs(out / "perturb.svg", {k: v[0] for k, v in runs.items()}, perturbed_ref, "reference perturbation")
    print(f"wrote {path}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate, "dp": cmd_dp, "pareto": cmd_pareto, "mpc": cmd_mpc,
    "heuristic": cmd_heuristic, "pi": cmd_pi, "compare": cmd_compare, "perturb": cmd_perturb,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = _manifest(args)
        return COMMANDS[args.command](args, manifest)
    except (Infeasible, StalledVehicle, InsufficientKineticEnergy, ZeroSpeed) as exc:
        step = getattr(exc, "step", None)
        where = f" (step {step})" if step is not None else ""
        print(f"infeasible{where}: {exc}", file=sys.stderr)
        return 2
    except (IoError, ParseError, ValidationError, EcoCoastError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
