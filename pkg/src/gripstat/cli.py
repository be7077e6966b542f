"""Command-line interface: simulate, generate, train, eval, forces, sweep.

Every command writes its artifacts inside the directory given by
``--out`` together with a ``manifest.json`` recording the resolved
configuration, seeds, input/output paths (with checksums), tool version
and wall time; re-running the recorded argv reproduces the outputs
checksum-identically.  Exit codes: 0 success, 1 runtime failure,
2 usage/config error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import GripstatError, ScenarioError
from .geometry import load_geometry
from .kinematics import GraspCase, size_for_theta1
from .mode_detector import (
    CompensationSurface,
    ModeModel,
    RankDeficientError,
    TrainConfig,
    detect_switch,
    fit_compensation,
    load_model,
    lstm_train,
    save_model,
    trace_features,
)
from .plant_sim import (
    GraspScenario,
    batch_generate,
    protocol_scenarios,
    read_trace,
    scenario_from_dict,
    scenario_to_dict,
    simulate_grasp,
    write_trace,
)
from .signal_pipeline import FilterConfig, two_stage_filter
from .estimator import EstimatorConfig, estimate, evaluate, write_estimate

_CONFIG_ERRORS = (
    GripstatError,
    FileNotFoundError,
    NotADirectoryError,
    json.JSONDecodeError,
    ValueError,
)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, argv: list[str], config: dict,
                    inputs: list[str], t_start: float,
                    seeds: list[int] | None = None) -> None:
    outputs = {}
    for p in sorted(out_dir.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            outputs[str(p.relative_to(out_dir))] = _sha256(p)
    manifest = {
        "command": command,
        "argv": argv,
        "config": config,
        "seeds": seeds or [],
        "inputs": inputs,
        "outputs": outputs,
        "tool_version": __version__,
        "wall_time_s": time.time() - t_start,
    }
    tmp = out_dir / "manifest.json.tmp"
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, indent=1)
    os.replace(tmp, out_dir / "manifest.json")


def _load_geometry_file(path: str):
    with open(path) as fh:
        return load_geometry(fh.read())


def _load_scenario_file(path: str | None, overrides: dict) -> GraspScenario:
    if path is not None:
        with open(path) as fh:
            base = json.load(fh)
    else:
        base = scenario_to_dict(GraspScenario(object_size=80.0))
    base.update({k: v for k, v in overrides.items() if v is not None})
    return scenario_from_dict(base)


def _parse_speeds(text: str) -> list[float]:
    items = [s for s in text.split(",") if s.strip()]
    if not items:
        raise ScenarioError("empty speed list")
    return [float(s) for s in items]


def _dataset_traces(path: str):
    d = Path(path)
    manifest_path = d / "dataset_manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no dataset_manifest.json in {path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    return [read_trace(d / entry["file"]) for entry in manifest["traces"]]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_simulate(args, argv) -> int:
    t0 = time.time()
    g = _load_geometry_file(args.geometry)
    sc = _load_scenario_file(args.scenario, {"seed": args.seed})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace = simulate_grasp(g, sc)
    write_trace(trace, out / "trace.csv")
    _write_manifest(out, "simulate", argv, {"scenario": scenario_to_dict(sc)},
                    [args.geometry] + ([args.scenario] if args.scenario else []), t0,
                    seeds=[sc.seed])
    return 0


def cmd_generate(args, argv) -> int:
    t0 = time.time()
    g = _load_geometry_file(args.geometry)
    speeds = _parse_speeds(args.speeds)
    theta1_values = [float(v) for v in args.theta1_grid.split(",") if v.strip()]
    if not theta1_values:
        raise ScenarioError("empty theta1 grid")
    scens = protocol_scenarios(
        g, theta1_deg_values=theta1_values, speeds=speeds, reps=args.reps,
        base_seed=args.seed, target_force=args.target_force,
        contact_case=GraspCase(args.case),
    )
    for i in range(args.free_runs):
        scens.append(GraspScenario(
            object_size=None, contact_case=GraspCase.NO_CONTACT,
            motor_speed=speeds[i % len(speeds)], seed=args.seed * 611_953 + i,
        ))
    out = Path(args.out)
    batch_generate(g, scens, out_dir=out, jobs=args.jobs)
    _write_manifest(out, "generate", argv, {
        "theta1_grid": theta1_values, "speeds": speeds, "reps": args.reps,
        "free_runs": args.free_runs, "base_seed": args.seed,
        "target_force": args.target_force, "case": args.case,
    }, [args.geometry], t0, seeds=[sc.seed for sc in scens])
    return 0


def cmd_train(args, argv) -> int:
    t0 = time.time()
    g = _load_geometry_file(args.geometry)
    traces = _dataset_traces(args.dataset)
    cfg_f = FilterConfig()
    filtered = [two_stage_filter(tr, cfg_f) for tr in traces]
    dataset = [
        (trace_features(ft), tr.labels.astype(int))
        for ft, tr in zip(filtered, traces)
    ]
    tc = TrainConfig(epochs=args.epochs, seed=args.seed, learning_rate=args.learning_rate,
                     hidden_dim=args.hidden_dim)
    params, feat_mean, feat_std, report = lstm_train(dataset, tc)

    model = ModeModel(params=params, feat_mean=feat_mean, feat_std=feat_std,
                      surface=CompensationSurface.zero())
    comp_samples = []
    for ft, tr in zip(filtered, traces):
        if tr.truth is None or tr.truth.switch_index is None:
            continue
        idx, theta1_raw, _ = detect_switch(ft, model, g)
        if idx is None:
            continue
        comp_samples.append((
            float(tr.meta.get("motor_speed", np.max(tr.velocity))),
            float(tr.truth.object_size),
            theta1_raw - tr.truth.theta1_at_switch,
        ))
    comp_note = ""
    try:
        surface, fit_report = fit_compensation(comp_samples)
        model.surface = surface
        comp_note = (f"compensation fit: n={fit_report.n_samples} "
                     f"residual_rms={fit_report.residual_rms:.3e} rad")
    except RankDeficientError as exc:
        comp_note = f"compensation not fitted ({exc}); zero surface stored"

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "model.json")
    with open(out / "training_report.txt", "w") as fh:
        fh.write(report.to_text())
        fh.write(comp_note + "\n")
    _write_manifest(out, "train", argv, {
        "train_config": dataclasses.asdict(tc), "dataset": args.dataset,
    }, [args.geometry, args.dataset], t0, seeds=[tc.seed])
    return 0


def cmd_eval(args, argv) -> int:
    t0 = time.time()
    g = _load_geometry_file(args.geometry)
    model = load_model(args.model)
    traces = _dataset_traces(args.dataset)
    report = evaluate(traces, g, model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "evaluation.txt", "w") as fh:
        fh.write(report.to_text())
    with open(out / "evaluation.json", "w") as fh:
        json.dump(report.to_dict(), fh, indent=1)
    _write_manifest(out, "eval", argv, {"dataset": args.dataset, "model": args.model},
                    [args.geometry, args.dataset, args.model], t0)
    return 0


def cmd_forces(args, argv) -> int:
    t0 = time.time()
    g = _load_geometry_file(args.geometry)
    model = load_model(args.model)
    trace = read_trace(args.trace)
    cfg = EstimatorConfig(
        case_prior=GraspCase(args.case) if args.case else None)
    est = estimate(trace, g, model, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_estimate(est, trace, out / "forces.csv")
    with open(out / "summary.json", "w") as fh:
        summary = dict(est.summary)
        summary["steady_forces"] = list(summary["steady_forces"])
        json.dump(summary, fh, indent=1, default=str)
    _write_manifest(out, "forces", argv, {"trace": args.trace, "model": args.model},
                    [args.geometry, args.model, args.trace], t0)
    return 0


def cmd_sweep(args, argv) -> int:
    t0 = time.time()
    g = _load_geometry_file(args.geometry)
    model = load_model(args.model)
    speeds = _parse_speeds(args.speeds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    # Table of switch-angle accuracy per object and speed.
    theta1_grid = [float(v) for v in args.theta1_grid.split(",") if v.strip()]
    scens = protocol_scenarios(g, theta1_deg_values=theta1_grid, speeds=speeds,
                               reps=args.reps, base_seed=args.seed,
                               target_force=100.0)
    traces = [simulate_grasp(g, sc) for sc in scens]
    rep_switch = evaluate(traces, g, model)

    # Normal (parallel pinch) force accuracy over the setpoint ladder.
    rows_normal = []
    for setpoint in np.arange(50.0, 200.1, 25.0):
        devs = []
        for j, speed in enumerate(speeds):
            sc = GraspScenario(
                object_size=size_for_theta1(g, math.radians(50.0)),
                contact_case=GraspCase.DISTAL_FIRST, motor_speed=speed,
                target_force=float(setpoint),
                seed=args.seed * 31 + int(setpoint) * 7 + j,
            )
            tr = simulate_grasp(g, sc)
            est = estimate(tr, g, model, EstimatorConfig(case_prior=GraspCase.DISTAL_FIRST))
            truth = tr.truth.forces[-1, 2]
            devs.append(abs(est.summary["steady_forces"][2] - truth) / truth)
        rows_normal.append((setpoint, float(np.mean(devs)), float(np.max(devs))))

    # Multi-point enveloping force accuracy.
    rows_env = []
    for theta1_deg in (30.0, 40.0, 50.0):
        devs = []
        for j, speed in enumerate(speeds):
            sc = GraspScenario(
                object_size=size_for_theta1(g, math.radians(theta1_deg)),
                contact_case=GraspCase.PROXIMAL_FIRST, motor_speed=speed,
                target_force=120.0,
                seed=args.seed * 59 + int(theta1_deg) * 11 + j,
            )
            tr = simulate_grasp(g, sc)
            est = estimate(tr, g, model, EstimatorConfig(case_prior=GraspCase.PROXIMAL_FIRST))
            truth = tr.truth.forces[-1]
            act = truth > 1e-9
            e = np.asarray(est.summary["steady_forces"])
            devs.extend((np.abs(e - truth)[act] / truth[act]).tolist())
        rows_env.append((theta1_deg, float(np.mean(devs)), float(np.max(devs))))

    with open(out / "sweep_switch_angle.txt", "w") as fh:
        fh.write(rep_switch.to_text())
    with open(out / "sweep_force_normal.txt", "w") as fh:
        fh.write("setpoint_N  rate_mean  rate_max\n")
        for sp, m, mx in rows_normal:
            fh.write(f"{sp:>10.0f}  {m:>9.5f}  {mx:>8.5f}\n")
    with open(out / "sweep_force_envelope.txt", "w") as fh:
        fh.write("theta1_deg  rate_mean  rate_max\n")
        for t1, m, mx in rows_env:
            fh.write(f"{t1:>10.0f}  {m:>9.5f}  {mx:>8.5f}\n")
    _write_manifest(out, "sweep", argv, {
        "speeds": speeds, "reps": args.reps, "theta1_grid": theta1_grid,
        "seed": args.seed, "model": args.model,
    }, [args.geometry, args.model], t0, seeds=[args.seed])
    return 0


# ---------------------------------------------------------------------------
# Parser / entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gripstat", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=False):
        sp.add_argument("--geometry", required=True, help="geometry config file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--jobs", type=int, default=1)
        if model:
            sp.add_argument("--model", required=True, help="model document path")

    sp = sub.add_parser("simulate", help="simulate one grasp episode")
    common(sp)
    sp.add_argument("--scenario", help="scenario JSON file")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("generate", help="generate a dataset directory")
    common(sp)
    sp.add_argument("--speeds", default="60")
    sp.add_argument("--theta1-grid", default=",".join(str(v) for v in range(30, 61, 2)))
    sp.add_argument("--reps", type=int, default=100)
    sp.add_argument("--free-runs", type=int, default=0)
    sp.add_argument("--target-force", type=float, default=100.0)
    sp.add_argument("--case", default="middle_first",
                    choices=[c.value for c in GraspCase])
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("train", help="train the mode detector on a dataset")
    common(sp)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--epochs", type=int, default=8)
    sp.add_argument("--learning-rate", type=float, default=1.0)
    sp.add_argument("--hidden-dim", type=int, default=32)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a model against dataset truth")
    common(sp, model=True)
    sp.add_argument("--dataset", required=True)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("forces", help="force estimate for one trace")
    common(sp, model=True)
    sp.add_argument("--trace", required=True)
    sp.add_argument("--case", help="grasp-case prior",
                    choices=[c.value for c in GraspCase])
    sp.set_defaults(func=cmd_forces)

    sp = sub.add_parser("sweep", help="accuracy sweep tables")
    common(sp, model=True)
    sp.add_argument("--speeds", default="50,60,70,80")
    sp.add_argument("--theta1-grid", default="30,36,42,48,54,60")
    sp.add_argument("--reps", type=int, default=3)
    sp.set_defaults(func=cmd_sweep)

    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args, argv)
    except _CONFIG_ERRORS as exc:
        print(f"gripstat {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"gripstat {args.command}: runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
