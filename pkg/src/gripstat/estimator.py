"""End-to-end sensor-less force estimation from current/position traces.

Pipeline per trace: two-stage filtering -> position delay alignment ->
LSTM switch detection -> compensation -> grasp-case joint decoupling ->
current-to-torque mapping -> transmission ratios -> joint torques ->
contact forces.  Every stage's intermediates are retained in the audit
record so any emitted force sample can be reproduced by re-running the
statics on them.

Observability rules: the no-load current is estimated from the
pre-contact segment of the filtered trace; the object size (which sets
the enveloping wrap extents) is inferred from the detected switch angle
through the opening-width calibration unless a prior is supplied; the
grasp case comes from the configured prior, defaulting to middle-first
contact.  The distal contact arm defaults to the mid-phalange point.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NoSolutionError, ScenarioError
from .geometry import FingerGeometry
from .kinematics import (
    GraspCase,
    JointState,
    envelope_wrap,
    middle_theta3_array,
    parallel_theta1_array,
    size_for_theta1,
    state_from_joint_angles,
    solve_coupled_wrap,
)
from .mode_detector import ModeModel, compensate, detect_switch
from .plant_sim import CurrentTrace
from .signal_pipeline import FilterConfig, IncrementalTwoStage, two_stage_filter
from .statics import contact_forces_arrays, transmission_ratio_arrays, transmission_ratios


@dataclass(frozen=True)
class EstimatorConfig:
    filter: FilterConfig = field(default_factory=FilterConfig)
    case_prior: GraspCase | None = None        # None -> MIDDLE_FIRST on switch
    size_prior: float | None = None            # mm; None -> from switch angle
    contact_arms: tuple[float, float, float] | None = None   # mm, default L_i/2
    baseline_guard: int = 25       # samples kept clear of the switch when
                                   # estimating the no-load current
    steady_fraction: float = 0.2   # trailing fraction of quiet contact samples
    steady_slope_limit: float = 0.3    # A/s; windowed |dI/dt| below this is quiet
    steady_slope_window: int = 100     # samples for the slope estimate


@dataclass
class ForceEstimate:
    """Per-sample estimate plus summary and the full audit record."""

    t: np.ndarray
    mode: np.ndarray
    theta1: np.ndarray
    theta2: np.ndarray
    theta3: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    summary: dict
    audit: dict

    @property
    def forces(self) -> np.ndarray:
        return np.stack([self.f1, self.f2, self.f3], axis=1)


def _baseline_current(filt: np.ndarray, end: int, guard: int) -> float:
    """No-load current estimate from the pre-contact filtered segment."""
    stop = max(1, end - guard)
    start = min(stop - 1, 20)  # skip the filter warm-up
    return float(np.mean(filt[start:stop]))


def estimate(
    trace: CurrentTrace,
    g: FingerGeometry,
    model: ModeModel,
    cfg: EstimatorConfig | None = None,
) -> ForceEstimate:
    """Recover grasp mode, joint angles, and per-phalange contact forces."""
    cfg = cfg or EstimatorConfig()
    k = cfg.contact_arms or (g.L1 / 2.0, g.L2 / 2.0, g.L3 / 2.0)
    n = trace.n_samples
    ft = two_stage_filter(trace, cfg.filter)
    switch_idx, theta1_raw, probs = detect_switch(ft, model, g)

    theta_a0 = float(trace.meta.get("theta_a0", 0.0))
    theta_a = theta_a0 + ft.position_aligned / g.screw_gain
    speed = float(trace.meta.get("motor_speed", np.max(trace.velocity)))

    # Position plateau: the drive reports zero velocity once the mechanism
    # locks and the current ramp begins.
    stopped = trace.velocity < 0.5 * max(speed, 1e-9)
    plateau_idx = int(np.argmax(stopped)) if bool(np.any(stopped)) else n

    flags: dict = {"warnings": []}
    mode = np.zeros(n, dtype=int)
    theta1 = np.empty(n)
    theta2 = np.empty(n)
    theta3 = np.empty(n)
    f = np.zeros((n, 3))
    segments: list[dict] = []  # audit: per-segment statics inputs

    size_est = cfg.size_prior
    theta1_corr = None
    extrapolated = False
    if switch_idx is None:
        case = GraspCase.DISTAL_FIRST if plateau_idx < n else GraspCase.NO_CONTACT
        flags["case_source"] = "no switch detected"
    elif cfg.case_prior is GraspCase.DISTAL_FIRST:
        # Parallel pinch: the onset is fingertip contact, not a mode switch.
        case = GraspCase.DISTAL_FIRST
        flags["case_source"] = "prior"
    else:
        case = cfg.case_prior or GraspCase.MIDDLE_FIRST
        if case is GraspCase.NO_CONTACT:
            case = GraspCase.MIDDLE_FIRST
            flags["case_source"] = "switch contradicts no-contact prior"
        else:
            flags["case_source"] = "prior" if cfg.case_prior else "default middle-first"
        mode[switch_idx:] = 1
        if size_est is None:
            size_est = size_for_theta1(g, theta1_raw)
        theta1_corr, extrapolated = compensate(model.surface, speed, size_est, theta1_raw)
        if cfg.size_prior is None:
            size_est = size_for_theta1(g, theta1_corr)
    flags["case"] = case.value
    flags["extrapolated_compensation"] = extrapolated

    # --- no-load current and net load torque -------------------------------
    contact_start = switch_idx if switch_idx is not None else plateau_idx
    i_free_hat = _baseline_current(ft.current_filt, min(contact_start, n), cfg.baseline_guard)
    tau_gain = g.torque_constant_A * g.screw_gain
    tau_load = np.maximum(ft.current_filt - i_free_hat, 0.0) * tau_gain

    # --- joint trajectory and contact mask segments ------------------------
    parallel_theta3 = g.alpha_parallel - g.beta_parallel

    def solve_parallel(sl: slice):
        if sl.stop <= sl.start:
            return
        t1 = parallel_theta1_array(g, theta_a[sl])
        theta1[sl] = t1
        theta2[sl] = g.beta_parallel - t1
        theta3[sl] = parallel_theta3

    def safe_middle_theta3(sl: slice, t1c: float, t2c: float) -> None:
        """Middle-first wrap solve with per-sample hold-last fallback."""
        if sl.stop <= sl.start:
            return
        try:
            theta3[sl] = middle_theta3_array(g, theta_a[sl], t1c, t2c)
            return
        except NoSolutionError:
            pass
        last = parallel_theta3
        for j in range(sl.start, sl.stop):
            try:
                last = float(middle_theta3_array(g, theta_a[j:j + 1], t1c, t2c)[0])
            except NoSolutionError:
                flags["warnings"].append(f"wrap closure infeasible at sample {j}; holding state")
            theta3[j] = last

    if case is GraspCase.NO_CONTACT:
        solve_parallel(slice(0, n))
    elif case is GraspCase.DISTAL_FIRST:
        # Parallel pinch: the pose freezes where the position plateaus.
        solve_parallel(slice(0, max(plateau_idx, 1)))
        t1_pinch = theta1[max(plateau_idx - 1, 0)]
        theta1[plateau_idx:] = t1_pinch
        theta2[plateau_idx:] = g.beta_parallel - t1_pinch
        theta3[plateau_idx:] = parallel_theta3
        segments.append({"slice": (plateau_idx, n), "mask": (False, False, True)})
    elif case is GraspCase.MIDDLE_FIRST:
        solve_parallel(slice(0, switch_idx))
        t1c = theta1_corr
        t2c = g.beta_parallel - t1c
        theta1[switch_idx:] = t1c
        theta2[switch_idx:] = t2c
        safe_middle_theta3(slice(switch_idx, n), t1c, t2c)
        wrap_end = max(plateau_idx, switch_idx)
        segments.append({"slice": (switch_idx, wrap_end), "mask": (False, True, False)})
        segments.append({"slice": (wrap_end, n), "mask": (False, True, True)})
    elif case is GraspCase.PROXIMAL_FIRST:
        solve_parallel(slice(0, switch_idx))
        t1c = theta1_corr
        t2c = g.beta_parallel - t1c
        d2_wrap, _ = envelope_wrap(g, size_est)
        theta1[switch_idx:] = t1c
        onset2 = max(plateau_idx, switch_idx)
        delta_prev = 0.0
        for j in range(switch_idx, min(plateau_idx, n)):
            try:
                delta = solve_coupled_wrap(g, theta_a[j], t1c, t2c, 0.0)
            except NoSolutionError:
                flags["warnings"].append(f"coupled wrap infeasible at sample {j}; holding state")
                delta = delta_prev
            delta_prev = delta
            if delta >= d2_wrap:
                onset2 = j
                break
            theta2[j] = t2c + delta
            theta3[j] = delta
        t2_lock = t2c + d2_wrap
        theta2[onset2:] = t2_lock
        safe_middle_theta3(slice(onset2, n), t1c, t2_lock)
        segments.append({"slice": (switch_idx, onset2), "mask": (True, False, False)})
        segments.append({"slice": (onset2, max(plateau_idx, onset2)), "mask": (True, True, False)})
        segments.append({"slice": (max(plateau_idx, onset2), n), "mask": (True, True, True)})
        flags["intermediate_onset"] = onset2

    # --- statics on each contact segment ------------------------------------
    x1, x2, x3 = transmission_ratio_arrays(g, theta_a)
    # near-degenerate instantaneous centers are flagged at the landmark samples
    for label, idx in (("switch", switch_idx),
                       ("plateau", plateau_idx if plateau_idx < n else None),
                       ("end", n - 1)):
        if idx is None:
            continue
        probe = JointState(theta_a=float(theta_a[idx]), theta_b=0.0,
                           theta1=float(theta1[idx]), theta2=float(theta2[idx]),
                           theta3=float(theta3[idx]), alpha=0.0, beta=0.0)
        try:
            res = transmission_ratios(g, probe)
        except NoSolutionError:
            flags["warnings"].append(f"transmission not assembled at {label} sample {idx}")
            continue
        if res.degenerate or res.warning:
            flags["warnings"].append(f"instantaneous center near-degenerate at {label} sample {idx}")
    d2_arr = (theta1 + theta2) - g.beta_parallel
    d3_arr = theta3 - (g.alpha_parallel - g.beta_parallel)
    audit_segments = []
    for seg in segments:
        a, b = seg["slice"]
        if b <= a:
            continue
        sl = slice(a, b)
        f1s, f2s, f3s = contact_forces_arrays(
            g, k, seg["mask"], x1[sl], x2[sl], x3[sl],
            tau_load[sl], d2_arr[sl], d3_arr[sl], theta2[sl], theta3[sl])
        f[sl, 0] = f1s
        f[sl, 1] = f2s
        f[sl, 2] = f3s
        audit_segments.append({"slice": (a, b), "mask": seg["mask"]})

    # --- steady state --------------------------------------------------------
    # Only the final contact configuration can be steady: earlier segments
    # are still wrapping.
    final_contact = np.zeros(n, dtype=bool)
    for seg in reversed(audit_segments):
        a, b = seg["slice"]
        if any(seg["mask"]) and b > a:
            final_contact[a:b] = True
            break
    # dI/dt estimated over a window so hold-phase noise stays below the limit
    w = min(cfg.steady_slope_window, max(1, n - 1))
    slope = np.full(n, np.inf)
    if n > w:
        slope[w:] = np.abs(ft.current_filt[w:] - ft.current_filt[:-w]) * (
            trace.sample_rate / w)
    quiet = final_contact & (slope < cfg.steady_slope_limit)
    quiet_idx = np.nonzero(quiet)[0]
    if len(quiet_idx) > 0:
        take = max(1, int(cfg.steady_fraction * len(quiet_idx)))
        steady_idx = quiet_idx[-take:]
        steady_forces = tuple(float(np.mean(f[steady_idx, j])) for j in range(3))
    else:
        steady_idx = np.array([], dtype=int)
        steady_forces = (0.0, 0.0, 0.0)

    summary = {
        "switch_index": switch_idx,
        "theta1_raw": theta1_raw,
        "theta1_corrected": theta1_corr,
        "size_estimate": None if switch_idx is None else size_est,
        "plateau_index": plateau_idx if plateau_idx < n else None,
        "steady_forces": steady_forces,
        "i_free_estimate": i_free_hat,
        "case": flags["case"],
        "flags": flags,
    }
    audit = {
        "current_filt": ft.current_filt,
        "current_deriv": ft.current_deriv,
        "position_aligned": ft.position_aligned,
        "probabilities": probs,
        "theta_a": theta_a,
        "tau_load": tau_load,
        "x_ratios": (x1, x2, x3),
        "d2": d2_arr,
        "d3": d3_arr,
        "contact_arms": k,
        "segments": audit_segments,
        "steady_indices": steady_idx,
    }
    return ForceEstimate(
        t=trace.t, mode=mode, theta1=theta1, theta2=theta2, theta3=theta3,
        f1=f[:, 0], f2=f[:, 1], f3=f[:, 2], summary=summary, audit=audit,
    )


def write_estimate(est: ForceEstimate, trace: CurrentTrace, path) -> None:
    """Trace-format table with mode, joint-angle and force columns added."""
    labels = trace.labels if trace.labels is not None else np.zeros(trace.n_samples, dtype=int)
    with open(path, "w") as fh:
        fh.write("t_s,current_A,position_rad,velocity_rpm,label,"
                 "mode,theta1_rad,theta2_rad,theta3_rad,f1_N,f2_N,f3_N\n")
        for i in range(trace.n_samples):
            fh.write("%.17g,%.17g,%.17g,%.17g,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n" % (
                trace.t[i], trace.current[i], trace.position[i], trace.velocity[i],
                labels[i], est.mode[i], est.theta1[i], est.theta2[i], est.theta3[i],
                est.f1[i], est.f2[i], est.f3[i],
            ))


# ---------------------------------------------------------------------------
# Dataset evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvaluationRow:
    group: str                 # e.g. "size=86.1mm" or "speed=60rpm" or "setpoint=100N"
    n: int
    theta1_dev_mean: float     # rad (nan when no switch truth)
    theta1_dev_max: float
    force_dev_mean: float      # N
    force_dev_max: float
    force_rate_mean: float     # relative
    force_rate_max: float


@dataclass
class EvaluationReport:
    rows_by_size: list[EvaluationRow]
    rows_by_speed: list[EvaluationRow]
    rows_by_setpoint: list[EvaluationRow]
    overall: EvaluationRow

    def to_text(self) -> str:
        def table(title, rows):
            lines = [title, "group                n   th1_mean_deg th1_max_deg  "
                            "f_dev_N  f_max_N  rate_mean  rate_max"]
            for r in rows:
                t_mean = math.degrees(r.theta1_dev_mean) if math.isfinite(r.theta1_dev_mean) else float("nan")
                t_max = math.degrees(r.theta1_dev_max) if math.isfinite(r.theta1_dev_max) else float("nan")
                lines.append(
                    f"{r.group:<18} {r.n:>4d}   {t_mean:>10.4f} {t_max:>10.4f}  "
                    f"{r.force_dev_mean:>7.3f} {r.force_dev_max:>8.3f}  "
                    f"{r.force_rate_mean:>9.4f} {r.force_rate_max:>9.4f}"
                )
            return "\n".join(lines)

        return "\n\n".join([
            table("by object size", self.rows_by_size),
            table("by motor speed", self.rows_by_speed),
            table("by force setpoint", self.rows_by_setpoint),
            table("overall", [self.overall]),
        ]) + "\n"

    def to_dict(self) -> dict:
        return {
            "by_size": [dataclasses.asdict(r) for r in self.rows_by_size],
            "by_speed": [dataclasses.asdict(r) for r in self.rows_by_speed],
            "by_setpoint": [dataclasses.asdict(r) for r in self.rows_by_setpoint],
            "overall": dataclasses.asdict(self.overall),
        }


def _aggregate(group: str, samples: list[dict]) -> EvaluationRow:
    t_devs = [s["theta1_dev"] for s in samples if s["theta1_dev"] is not None]
    f_devs = [d for s in samples for d in s["force_devs"]]
    f_rates = [r for s in samples for r in s["force_rates"]]
    return EvaluationRow(
        group=group,
        n=len(samples),
        theta1_dev_mean=float(np.mean(t_devs)) if t_devs else math.nan,
        theta1_dev_max=float(np.max(t_devs)) if t_devs else math.nan,
        force_dev_mean=float(np.mean(f_devs)) if f_devs else math.nan,
        force_dev_max=float(np.max(f_devs)) if f_devs else math.nan,
        force_rate_mean=float(np.mean(f_rates)) if f_rates else math.nan,
        force_rate_max=float(np.max(f_rates)) if f_rates else math.nan,
    )


def evaluate(
    traces: list[CurrentTrace],
    g: FingerGeometry,
    model: ModeModel,
    cfg: EstimatorConfig | None = None,
) -> EvaluationReport:
    """Estimator accuracy against the truth records of a dataset.

    Per trace: the switch-angle deviation (post-compensation) and the
    per-phalange steady-state force deviations (absolute and relative,
    active contacts only), aggregated by object size, motor speed, and
    force setpoint.
    """
    samples = []
    for trace in traces:
        if trace.truth is None:
            raise ValueError("evaluate needs traces with truth records")
        tru = trace.truth
        case_prior = GraspCase(tru.case) if tru.case != "no_contact" else None
        run_cfg = cfg or EstimatorConfig()
        if run_cfg.case_prior is None and case_prior in (
                GraspCase.MIDDLE_FIRST, GraspCase.PROXIMAL_FIRST):
            run_cfg = dataclasses.replace(run_cfg, case_prior=case_prior)
        est = estimate(trace, g, model, run_cfg)
        truth_steady = tru.forces[-1]
        active = truth_steady > 1e-9
        est_steady = np.asarray(est.summary["steady_forces"])
        devs = np.abs(est_steady - truth_steady)[active]
        rates = devs / truth_steady[active]
        theta1_dev = None
        if tru.switch_index is not None and est.summary["theta1_corrected"] is not None:
            theta1_dev = abs(est.summary["theta1_corrected"] - tru.theta1_at_switch)
        samples.append({
            "size": tru.object_size,
            "speed": float(trace.meta.get("motor_speed", math.nan)),
            "setpoint": float(truth_steady[2]),
            "theta1_dev": theta1_dev,
            "force_devs": devs.tolist(),
            "force_rates": rates.tolist(),
        })

    def group_rows(key, fmt):
        values = sorted({s[key] for s in samples if s[key] is not None})
        return [
            _aggregate(fmt(v), [s for s in samples if s[key] == v])
            for v in values
        ]

    return EvaluationReport(
        rows_by_size=group_rows("size", lambda v: f"size={v:.1f}mm"),
        rows_by_speed=group_rows("speed", lambda v: f"speed={v:.0f}rpm"),
        rows_by_setpoint=group_rows("setpoint", lambda v: f"setpoint={v:.0f}N"),
        overall=_aggregate("all", samples),
    )


# ---------------------------------------------------------------------------
# Ring force-feedback check
# ---------------------------------------------------------------------------

@dataclass
class RingCurve:
    """Quadratic force -> deformation fit from dynamometer-style samples."""

    coeffs: tuple[float, float, float]
    domain: tuple[float, float]
    rms: float

    def deformation(self, force: float) -> float:
        lo, hi = self.domain
        if not lo <= force <= hi:
            raise DomainError(f"force {force!r} N outside fitted domain [{lo}, {hi}] N")
        return float(np.polyval(self.coeffs, force))


def fit_ring_curve(samples: list[tuple[float, float]]) -> RingCurve:
    """Fit (force, deformation) pairs; expects the 0..100 N step-5 protocol."""
    arr = np.asarray(samples, dtype=float)
    if len(arr) < 3:
        raise ValueError("need at least 3 (force, deformation) samples")
    coeffs = np.polyfit(arr[:, 0], arr[:, 1], 2)
    resid = arr[:, 1] - np.polyval(coeffs, arr[:, 0])
    return RingCurve(
        coeffs=tuple(float(c) for c in coeffs),
        domain=(float(arr[:, 0].min()), float(arr[:, 0].max())),
        rms=float(np.sqrt(np.mean(resid ** 2))),
    )


def sample_ring_curve(
    ring_stiffness: float = 5.0,
    forces=None,
    noise_std: float = 0.0,
    seed: int = 0,
) -> list[tuple[float, float]]:
    """Dynamometer-style sampling of a linear ring (deformation = F/k)."""
    if forces is None:
        forces = np.arange(0.0, 100.1, 5.0)
    rng = np.random.default_rng(seed)
    out = []
    for fval in forces:
        d = fval / ring_stiffness
        if noise_std > 0:
            d += rng.normal(0.0, noise_std)
        out.append((float(fval), float(d)))
    return out


@dataclass
class RingCheckResult:
    setpoint: float
    runs: int
    within_band: int
    deformations: list[float]
    band: float
    expected: float


def ring_grasp_check(
    g: FingerGeometry,
    model: ModeModel,
    ring_curve: RingCurve,
    setpoints=(50.0, 75.0, 100.0),
    runs: int = 30,
    ring_stiffness: float = 5.0,
    noisy: bool = True,
    base_seed: int = 77,
    band_floor: float = 0.12,
    cfg: EstimatorConfig | None = None,
) -> list[RingCheckResult]:
    """Closed-loop grasp of an elastic ring at each force setpoint.

    The simulated plant ramps current while the estimator (running on
    the incrementally filtered noisy current) watches its distal-force
    estimate; the ramp stops at the setpoint and the resulting true
    ring deformation must sit within the fitted curve's band.
    """
    cfg = cfg or EstimatorConfig()
    k3 = (cfg.contact_arms or (g.L1 / 2, g.L2 / 2, g.L3 / 2))[2]
    results = []
    for setpoint in setpoints:
        ring_curve.deformation(setpoint)  # raises DomainError outside the fit
        band = max(band_floor, 4.0 * ring_curve.rms, 0.02 * setpoint / ring_stiffness)
        expected = ring_curve.deformation(setpoint)
        hits = 0
        deformations = []
        for run in range(runs):
            f_true = _closed_loop_pinch(
                g, setpoint, k3, noisy=noisy,
                seed=base_seed * 7919 + run, cfg=cfg)
            d_true = f_true / ring_stiffness
            deformations.append(d_true)
            if abs(d_true - expected) <= band:
                hits += 1
        results.append(RingCheckResult(
            setpoint=float(setpoint), runs=runs, within_band=hits,
            deformations=deformations, band=band, expected=expected,
        ))
    return results


def _closed_loop_pinch(
    g: FingerGeometry, setpoint: float, k3_mm: float,
    noisy: bool, seed: int, cfg: EstimatorConfig,
) -> float:
    """Ramp the pinch current until the online estimate reaches the setpoint.

    Returns the true distal force at the stop sample (the plant side of
    the loop, computed from the commanded noise-free current).
    """
    rng = np.random.default_rng(seed)
    fs = 250.0
    theta1_pinch = math.radians(55.0)
    s = state_from_joint_angles(g, theta1_pinch, g.beta_parallel - theta1_pinch, 0.0)
    x3 = float(transmission_ratio_arrays(g, np.array([s.theta_a]))[2][0])
    tau_gain = g.torque_constant_A * g.screw_gain
    friction_tau = 0.15
    i_free = friction_tau / tau_gain
    sigma0 = 0.01 if noisy else 0.0
    c_load = 0.004 if noisy else 0.0
    ramp_rate = setpoint / 1.2  # N/s of commanded distal force

    inc = IncrementalTwoStage(cfg.filter, fs)
    # estimator warms its no-load baseline on a short idle head
    n_head = 100
    outputs = []
    cmd = []
    for j in range(n_head):
        i_cmd = i_free
        cmd.append(0.0)
        noise = rng.normal(0.0, sigma0) if noisy else 0.0
        outputs.extend(inc.push(i_cmd + noise))
    baseline = None
    t_step = 1.0 / fs
    f_cmd = 0.0
    stop_force = None
    max_steps = int(20 * fs)
    for j in range(max_steps):
        f_cmd = min(setpoint * 2.0, f_cmd + ramp_rate * t_step)
        tau_load = f_cmd * (k3_mm * 1e-3) / x3
        i_cmd = i_free + tau_load / tau_gain
        cmd.append(f_cmd)
        sigma = sigma0 + c_load * tau_load
        noise = rng.normal(0.0, sigma) if noisy else 0.0
        for filt, _ in inc.push(i_cmd + noise):
            outputs.append((filt, 0.0))
            emitted = len(outputs) - 1
            if baseline is None and emitted >= n_head - cfg.baseline_guard:
                head = [o[0] for o in outputs[20:n_head - cfg.baseline_guard]]
                baseline = float(np.mean(head)) if head else i_free
            if baseline is not None and emitted >= n_head:
                tau_est = max(0.0, filt - baseline) * tau_gain
                f_est = x3 * tau_est / (k3_mm * 1e-3)
                if f_est >= setpoint:
                    # true force of the command that produced this sample
                    src = max(0, emitted - cfg.filter.delay_units)
                    stop_force = cmd[min(src, len(cmd) - 1)]
                    break
        if stop_force is not None:
            break
    if stop_force is None:
        raise ScenarioError("closed-loop ramp never reached the setpoint estimate")
    return float(stop_force)
