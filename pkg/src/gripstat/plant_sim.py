"""Quasi-static actuator/gripper plant: grasp episodes with noisy current.

An episode advances the actuation angle at constant motor speed through
the screw transmission, switches the joint decoupling when the object
is hit (per the scenario's grasp case), winds the joint springs during
the enveloping wrap, then holds position while the commanded current
ramps to the force setpoint.  The emitted current is the command plus
Gaussian noise whose spread grows with the load torque, plus occasional
single-sample spikes; the ground-truth record carries the exact
contact forces, load torques and switch geometry.

Trace table format (one CSV per trace):
    t_s,current_A,position_rad,velocity_rpm,label
with a ``<name>.meta.json`` sidecar holding the scenario, seed, truth
record and the position reference.  A dataset directory additionally
carries ``dataset_manifest.json`` listing files and grid coordinates.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ScenarioError
from .geometry import FingerGeometry
from .kinematics import (
    GraspCase,
    envelope_wrap,
    inverse_actuation_array,
    parallel_theta1_array,
    point_c_array,
    state_from_joint_angles,
    theta1_for_size,
    SIZE_RANGE_MM,
)
from .statics import contact_forces_arrays, transmission_ratio_arrays

_DEG = math.pi / 180.0


@dataclass(frozen=True)
class GraspScenario:
    """One grasp episode: object, drive settings, and noise calibration."""

    object_size: float | None          # mm; None = free open-close run
    motor_speed: float = 60.0          # rpm
    contact_case: GraspCase = GraspCase.MIDDLE_FIRST
    target_force: float = 100.0        # N, distal-contact setpoint
    seed: int = 0
    sample_rate: float = 1000.0        # Hz
    sigma0: float = 0.01               # A, no-load current noise
    c_load: float = 0.004              # A per N.m of load torque
    friction_tau: float = 0.15         # N.m constant drive friction
    spike_rate_hz: float = 0.5         # Poisson rate of single-sample outliers
    spike_amp: tuple[float, float] = (0.1, 0.5)   # A, magnitude range
    approach_margin_deg: tuple[float, float] = (2.0, 20.0)
    contact_transient_tau: float = 0.4  # N.m impact/settling torque at each onset
    transient_decay_s: float = 0.06
    ramp_time_s: float = 0.8
    hold_time_s: float = 0.8
    free_run_theta1_deg: tuple[float, float] = (25.0, 85.0)
    contact_arms: tuple[float, float, float] | None = None  # mm, default L_i/2


def validate_scenario(g: FingerGeometry, sc: GraspScenario) -> None:
    if not sc.motor_speed > 0.0:
        raise ScenarioError(f"motor speed {sc.motor_speed!r} rpm must be positive")
    if not sc.sample_rate > 0.0:
        raise ScenarioError(f"sample rate {sc.sample_rate!r} Hz must be positive")
    if sc.contact_case is not GraspCase.NO_CONTACT:
        if sc.object_size is None:
            raise ScenarioError("contact scenario needs an object size")
        lo, hi = SIZE_RANGE_MM
        if not (lo <= sc.object_size <= hi):
            raise ScenarioError(
                f"object size {sc.object_size!r} mm outside the dimension range [{lo}, {hi}] mm"
            )
        theta1_for_size(g, sc.object_size)  # raises if unreachable
    if sc.target_force < 0.0:
        raise ScenarioError("negative target force")


@dataclass
class TruthRecord:
    """Ground truth of a simulated episode."""

    case: str
    switch_index: int | None
    theta1_at_switch: float | None
    lock_index: int
    theta_at_lock: tuple[float, float, float]
    contact_onsets: dict[str, int]     # phalange name -> first contact sample
    forces: np.ndarray                 # (n, 3) N
    tau_load: np.ndarray               # (n,) N.m, net load torque
    i_free: float                      # A, no-load current
    contact_arms: tuple[float, float, float]
    object_size: float | None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["forces"] = self.forces.tolist()
        d["tau_load"] = self.tau_load.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TruthRecord":
        d = dict(d)
        d["forces"] = np.asarray(d["forces"], dtype=float)
        d["tau_load"] = np.asarray(d["tau_load"], dtype=float)
        d["theta_at_lock"] = tuple(d["theta_at_lock"])
        d["contact_arms"] = tuple(d["contact_arms"])
        return cls(**d)


@dataclass
class CurrentTrace:
    """Sampled actuator signals for one episode."""

    sample_rate: float
    t: np.ndarray
    current: np.ndarray
    position: np.ndarray               # motor shaft angle, rad
    velocity: np.ndarray               # rpm
    labels: np.ndarray | None = None   # 0 parallel / 1 enveloping
    truth: TruthRecord | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.t)
        for name in ("current", "position", "velocity"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} length mismatch")
        if n > 1:
            dt = np.diff(self.t)
            if np.any(dt <= 0):
                raise ValueError("timestamps not strictly increasing")
            if np.max(np.abs(dt - 1.0 / self.sample_rate)) > 1e-9 / self.sample_rate + 1e-12:
                raise ValueError("timestamps not uniform at 1/sample_rate")
        if self.labels is not None:
            if len(self.labels) != n:
                raise ValueError("labels length mismatch")
            if np.any(np.diff(self.labels.astype(int)) < 0):
                raise ValueError("labels must be monotone non-decreasing")

    @property
    def n_samples(self) -> int:
        return len(self.t)


# ---------------------------------------------------------------------------
# Episode simulation
# ---------------------------------------------------------------------------

@dataclass
class _Segment:
    theta_a: np.ndarray
    tau_load: np.ndarray
    mask: tuple[bool, bool, bool]
    moving: bool
    d2: np.ndarray          # spring deflection arrays
    d3: np.ndarray
    theta2: np.ndarray
    theta3: np.ndarray


def _wrap_segment_grid(g, theta3_grid, t1, t2_of, t3_of):
    """theta_a over a wrap DOF grid (vectorized IK of the C point)."""
    cx, cy = point_c_array(g, np.full_like(theta3_grid, t1), t2_of(theta3_grid), t3_of(theta3_grid))
    return inverse_actuation_array(g, cx, cy)


def simulate_grasp(g: FingerGeometry, sc: GraspScenario) -> CurrentTrace:
    """Simulate one grasp episode; deterministic given (geometry, scenario)."""
    validate_scenario(g, sc)
    rng = np.random.default_rng(sc.seed)
    fs = sc.sample_rate
    dt = 1.0 / fs
    rate = sc.motor_speed * 2.0 * math.pi / 60.0 / g.screw_gain  # theta_a rad/s
    k = sc.contact_arms or (g.L1 / 2.0, g.L2 / 2.0, g.L3 / 2.0)
    i_free = sc.friction_tau / (g.torque_constant_A * g.screw_gain)
    case = sc.contact_case

    segments: list[_Segment] = []
    onsets: dict[str, int] = {}

    def motion_segment(theta_a0, theta_a1, tau_of_theta_a, mask, th2_of, th3_of, d2_of, d3_of):
        n = max(1, int(math.ceil((theta_a1 - theta_a0) / (rate * dt))))
        ta = theta_a0 + rate * dt * np.arange(n)
        ta = np.minimum(ta, theta_a1)
        return _Segment(
            theta_a=ta, tau_load=tau_of_theta_a(ta), mask=mask, moving=True,
            d2=d2_of(ta), d3=d3_of(ta), theta2=th2_of(ta), theta3=th3_of(ta),
        )

    zeros_like = lambda ta: np.zeros_like(ta)

    if case is GraspCase.NO_CONTACT:
        lo, hi = (v * _DEG for v in sc.free_run_theta1_deg)
        ta0 = state_from_joint_angles(g, lo, g.beta_parallel - lo, 0.0).theta_a
        ta1 = state_from_joint_angles(g, hi, g.beta_parallel - hi, 0.0).theta_a
        seg = motion_segment(
            ta0, ta1, zeros_like, (False, False, False),
            lambda ta: g.beta_parallel - parallel_theta1_array(g, ta),
            zeros_like, zeros_like, zeros_like,
        )
        segments.append(seg)
        theta1_c = None
        switch_index = None
        lock_state = None
    else:
        theta1_c = theta1_for_size(g, sc.object_size)
        margin = rng.uniform(*sc.approach_margin_deg) * _DEG
        theta1_start = max(g.theta1_range[0] + 0.5 * _DEG, theta1_c - margin)
        ta_start = state_from_joint_angles(g, theta1_start, g.beta_parallel - theta1_start, 0.0).theta_a
        ta_c = state_from_joint_angles(g, theta1_c, g.beta_parallel - theta1_c, 0.0).theta_a
        theta2_c = g.beta_parallel - theta1_c
        d2_wrap, d3_wrap = envelope_wrap(g, sc.object_size)

        segments.append(motion_segment(
            ta_start, ta_c, zeros_like, (False, False, False),
            lambda ta: g.beta_parallel - parallel_theta1_array(g, ta),
            zeros_like, zeros_like, zeros_like,
        ))

        def interp_builder(dof_grid, ta_grid):
            return lambda ta: np.interp(ta, ta_grid, dof_grid)

        if case is GraspCase.DISTAL_FIRST:
            onsets["distal"] = sum(len(s.theta_a) for s in segments)
            switch_index = None  # parallel pinch: mode never switches
            lock_state = state_from_joint_angles(g, theta1_c, theta2_c, 0.0)
            final_mask = (False, False, True)
        elif case is GraspCase.MIDDLE_FIRST:
            switch_index = sum(len(s.theta_a) for s in segments)
            onsets["intermediate"] = switch_index
            t3_grid = np.linspace(0.0, d3_wrap, 1200)
            ta_grid = _wrap_segment_grid(
                g, t3_grid, theta1_c, lambda t3: np.full_like(t3, theta2_c), lambda t3: t3)
            t3_of = interp_builder(t3_grid, ta_grid)
            x3_of = lambda ta: transmission_ratio_arrays(g, ta)[2]
            segments.append(motion_segment(
                ta_grid[0], ta_grid[-1],
                lambda ta: g.K3 * t3_of(ta) / x3_of(ta),
                (False, True, False),
                lambda ta: np.full_like(ta, theta2_c),
                t3_of, zeros_like, t3_of,
            ))
            onsets["distal"] = sum(len(s.theta_a) for s in segments)
            lock_state = state_from_joint_angles(g, theta1_c, theta2_c, d3_wrap)
            final_mask = (False, True, True)
        elif case is GraspCase.PROXIMAL_FIRST:
            switch_index = sum(len(s.theta_a) for s in segments)
            onsets["proximal"] = switch_index
            # P2: both springs deflect together by delta in [0, d2_wrap]
            dlt_grid = np.linspace(0.0, d2_wrap, 1200)
            ta_grid = _wrap_segment_grid(
                g, dlt_grid, theta1_c,
                lambda d: theta2_c + d, lambda d: d)
            dlt_of = interp_builder(dlt_grid, ta_grid)

            def tau_p2(ta):
                _, x2, x3 = transmission_ratio_arrays(g, ta)
                d = dlt_of(ta)
                return (g.K2 + g.K3) * d / (x2 + x3)

            segments.append(motion_segment(
                ta_grid[0], ta_grid[-1], tau_p2, (True, False, False),
                lambda ta: theta2_c + dlt_of(ta), dlt_of, dlt_of, dlt_of,
            ))
            onsets["intermediate"] = sum(len(s.theta_a) for s in segments)
            # P3: theta3 continues alone from d2_wrap to d3_wrap
            theta2_lock = theta2_c + d2_wrap
            t3_grid = np.linspace(d2_wrap, d3_wrap, 1200)
            ta_grid3 = _wrap_segment_grid(
                g, t3_grid, theta1_c,
                lambda t3: np.full_like(t3, theta2_lock), lambda t3: t3)
            t3_of = interp_builder(t3_grid, ta_grid3)
            x3_of = lambda ta: transmission_ratio_arrays(g, ta)[2]
            segments.append(motion_segment(
                ta_grid3[0], ta_grid3[-1],
                lambda ta: g.K3 * t3_of(ta) / x3_of(ta),
                (True, True, False),
                lambda ta: np.full_like(ta, theta2_lock),
                t3_of,
                lambda ta: np.full_like(ta, d2_wrap),
                t3_of,
            ))
            onsets["distal"] = sum(len(s.theta_a) for s in segments)
            lock_state = state_from_joint_angles(g, theta1_c, theta2_lock, d3_wrap)
            final_mask = (True, True, True)
        else:  # pragma: no cover
            raise ScenarioError(f"unsupported case {case!r}")

        # Force ramp and hold at the locked pose.
        ta_lock = lock_state.theta_a
        x1l, x2l, x3l = (float(v[0]) for v in transmission_ratio_arrays(g, np.array([ta_lock])))
        d2_lock = (lock_state.theta1 + lock_state.theta2) - g.beta_parallel
        d3_lock = lock_state.theta3
        # Distal force is zero at the lock instant, so the lock torque is the
        # spring torque through the distal ratio (zero for a parallel pinch).
        tau_lock = 0.0 if case is GraspCase.DISTAL_FIRST else g.K3 * d3_lock / x3l
        tau_target = tau_lock + sc.target_force * (k[2] * 1e-3) / x3l
        n_ramp = max(1, int(round(sc.ramp_time_s * fs)))
        n_hold = max(1, int(round(sc.hold_time_s * fs)))
        tau_ramp = tau_lock + (tau_target - tau_lock) * (np.arange(1, n_ramp + 1) / n_ramp)
        for n, tau_arr in ((n_ramp, tau_ramp), (n_hold, np.full(n_hold, tau_target))):
            segments.append(_Segment(
                theta_a=np.full(n, ta_lock),
                tau_load=tau_arr,
                mask=final_mask,
                moving=False,
                d2=np.full(n, d2_lock),
                d3=np.full(n, d3_lock),
                theta2=np.full(n, lock_state.theta2),
                theta3=np.full(n, lock_state.theta3),
            ))
        lock_index = sum(len(s.theta_a) for s in segments[:-2])

    # --- assemble columns -------------------------------------------------
    theta_a = np.concatenate([s.theta_a for s in segments])
    tau_load = np.concatenate([s.tau_load for s in segments])
    moving = np.concatenate([np.full(len(s.theta_a), s.moving) for s in segments])
    n = len(theta_a)
    t = np.arange(n) * dt

    # Impact/settling transient at every contact onset: a decaying torque
    # bump that sharpens the current surge without touching steady state.
    if sc.contact_transient_tau > 0.0:
        for onset in onsets.values():
            span = np.arange(n - onset)
            tau_load[onset:] += sc.contact_transient_tau * np.exp(
                -span * dt / sc.transient_decay_s)

    position = g.screw_gain * (theta_a - theta_a[0])
    velocity = np.where(moving, sc.motor_speed, 0.0)

    i_cmd = i_free + tau_load / (g.torque_constant_A * g.screw_gain)
    sigma = sc.sigma0 + sc.c_load * np.abs(tau_load)
    current = i_cmd + rng.normal(0.0, 1.0, n) * sigma
    n_spikes = rng.poisson(sc.spike_rate_hz * n * dt)
    if n_spikes > 0:
        idx = rng.integers(0, n, n_spikes)
        amp = rng.uniform(*sc.spike_amp, n_spikes) * rng.choice([-1.0, 1.0], n_spikes)
        current[idx] += amp
    current = np.maximum(current, 0.0)

    # --- truth ------------------------------------------------------------
    forces = np.zeros((n, 3))
    pos0 = 0
    for s in segments:
        m = len(s.theta_a)
        if any(s.mask):
            x1, x2, x3 = transmission_ratio_arrays(g, s.theta_a)
            f1, f2, f3 = contact_forces_arrays(
                g, k, s.mask, x1, x2, x3, tau_load[pos0:pos0 + m],
                s.d2, s.d3, s.theta2, s.theta3)
            forces[pos0:pos0 + m, 0] = f1
            forces[pos0:pos0 + m, 1] = f2
            forces[pos0:pos0 + m, 2] = f3
        pos0 += m

    if case is GraspCase.NO_CONTACT:
        labels = np.zeros(n, dtype=int)
        truth = TruthRecord(
            case=case.value, switch_index=None, theta1_at_switch=None,
            lock_index=n, theta_at_lock=(math.nan, math.nan, math.nan),
            contact_onsets={}, forces=forces, tau_load=tau_load,
            i_free=i_free, contact_arms=tuple(k), object_size=None,
        )
    else:
        labels = np.zeros(n, dtype=int)
        if switch_index is not None:
            labels[switch_index:] = 1
        truth = TruthRecord(
            case=case.value,
            switch_index=switch_index,
            theta1_at_switch=None if theta1_c is None else float(theta1_c),
            lock_index=lock_index,
            theta_at_lock=(lock_state.theta1, lock_state.theta2, lock_state.theta3),
            contact_onsets=onsets,
            forces=forces,
            tau_load=tau_load,
            i_free=i_free,
            contact_arms=tuple(k),
            object_size=sc.object_size,
        )

    meta = {
        "theta_a0": float(theta_a[0]),
        "seed": sc.seed,
        "motor_speed": sc.motor_speed,
        "scenario": scenario_to_dict(sc),
    }
    return CurrentTrace(
        sample_rate=fs, t=t, current=current, position=position,
        velocity=velocity, labels=labels, truth=truth, meta=meta,
    )


# ---------------------------------------------------------------------------
# Dataset protocol and trace I/O
# ---------------------------------------------------------------------------

def scenario_to_dict(sc: GraspScenario) -> dict:
    d = dataclasses.asdict(sc)
    d["contact_case"] = sc.contact_case.value
    return d


def scenario_from_dict(d: dict) -> GraspScenario:
    d = dict(d)
    d["contact_case"] = GraspCase(d["contact_case"])
    for key in ("spike_amp", "approach_margin_deg", "free_run_theta1_deg"):
        d[key] = tuple(d[key])
    if d.get("contact_arms") is not None:
        d["contact_arms"] = tuple(d["contact_arms"])
    return GraspScenario(**d)


def protocol_scenarios(
    g: FingerGeometry,
    theta1_deg_values=tuple(range(30, 61, 2)),
    speeds=(60.0,),
    reps: int = 100,
    base_seed: int = 1000,
    **overrides,
) -> list[GraspScenario]:
    """Scenario grid of the data-collection protocol.

    Object sizes are the 16 contact angles 30..60 deg (step 2); one
    trace per (size, speed, rep).  Seeds are derived deterministically
    from the base seed and the grid index.
    """
    scenarios = []
    idx = 0
    for theta1_deg in theta1_deg_values:
        size = 2.0 * (g.L1 * math.cos(theta1_deg * _DEG) + 18.026007166283436)
        for speed in speeds:
            for _ in range(reps):
                scenarios.append(GraspScenario(
                    object_size=size,
                    motor_speed=float(speed),
                    seed=base_seed * 1_000_003 + idx,
                    **overrides,
                ))
                idx += 1
    return scenarios


def write_trace(trace: CurrentTrace, path: str | Path) -> None:
    """Write the trace table and its metadata sidecar."""
    path = Path(path)
    labels = trace.labels if trace.labels is not None else np.zeros(trace.n_samples, dtype=int)
    with open(path, "w") as fh:
        fh.write("t_s,current_A,position_rad,velocity_rpm,label\n")
        for i in range(trace.n_samples):
            fh.write("%.17g,%.17g,%.17g,%.17g,%d\n" % (
                trace.t[i], trace.current[i], trace.position[i],
                trace.velocity[i], labels[i],
            ))
    sidecar = {
        "meta": trace.meta,
        "sample_rate": trace.sample_rate,
        "truth": trace.truth.to_dict() if trace.truth is not None else None,
    }
    _atomic_write_json(path.with_suffix(path.suffix + ".meta.json"), sidecar)


def read_trace(path: str | Path) -> CurrentTrace:
    path = Path(path)
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    data = np.atleast_2d(data)
    sidecar_path = path.with_suffix(path.suffix + ".meta.json")
    meta: dict = {}
    truth = None
    sample_rate = None
    if sidecar_path.exists():
        with open(sidecar_path) as fh:
            sidecar = json.load(fh)
        meta = sidecar.get("meta", {})
        sample_rate = sidecar.get("sample_rate")
        if sidecar.get("truth") is not None:
            truth = TruthRecord.from_dict(sidecar["truth"])
    if sample_rate is None:
        sample_rate = 1.0 / (data[1, 0] - data[0, 0]) if len(data) > 1 else 1.0
    return CurrentTrace(
        sample_rate=float(sample_rate),
        t=data[:, 0], current=data[:, 1], position=data[:, 2],
        velocity=data[:, 3], labels=data[:, 4].astype(int),
        truth=truth, meta=meta,
    )


def _atomic_write_json(path: Path, obj: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(obj, fh, indent=1)
    os.replace(tmp, path)


def batch_generate(
    g: FingerGeometry,
    scenarios: list[GraspScenario],
    out_dir: str | Path | None = None,
    jobs: int = 1,
) -> list[CurrentTrace]:
    """Simulate every scenario; optionally write a dataset directory.

    Results are ordered by grid index regardless of execution order, so
    identical seeds always produce identical datasets.
    """
    if not scenarios:
        raise ScenarioError("empty scenario grid")
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            traces = list(pool.map(lambda sc: simulate_grasp(g, sc), scenarios))
    else:
        traces = [simulate_grasp(g, sc) for sc in scenarios]
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        entries = []
        for i, (sc, tr) in enumerate(zip(scenarios, traces)):
            name = f"trace_{i:05d}.csv"
            write_trace(tr, out_dir / name)
            entries.append({
                "file": name,
                "object_size": sc.object_size,
                "motor_speed": sc.motor_speed,
                "seed": sc.seed,
                "case": sc.contact_case.value,
            })
        _atomic_write_json(out_dir / "dataset_manifest.json", {
            "n_traces": len(entries),
            "traces": entries,
        })
    return traces
