import math

import numpy as np
import pytest

from gripstat.errors import DomainError
from gripstat.geometry import REFERENCE_GEOMETRY as G
from gripstat.kinematics import GraspCase, size_for_theta1
from gripstat.estimator import (
    EstimatorConfig,
    estimate,
    evaluate,
    fit_ring_curve,
    ring_grasp_check,
    sample_ring_curve,
    write_estimate,
)
from gripstat.plant_sim import GraspScenario, protocol_scenarios, simulate_grasp
from gripstat.statics import contact_forces_arrays

DEG = math.pi / 180.0


def scenario(theta1_deg=45.0, **kw):
    base = dict(object_size=size_for_theta1(G, theta1_deg * DEG),
                motor_speed=60.0, seed=5, target_force=100.0)
    base.update(kw)
    return GraspScenario(**base)


def test_idle_trace_gives_zero_forces(trained_model):
    model, _ = trained_model
    tr = simulate_grasp(G, GraspScenario(object_size=None,
                                         contact_case=GraspCase.NO_CONTACT, seed=2))
    est = estimate(tr, G, model)
    assert np.all(est.forces == 0.0)
    assert np.all(est.mode == 0)
    assert est.summary["switch_index"] is None


def test_parallel_grasp_steady_force_within_3pct(trained_model):
    model, _ = trained_model
    for seed, setpoint in ((3, 60.0), (4, 120.0), (5, 180.0)):
        tr = simulate_grasp(G, scenario(theta1_deg=50.0, seed=seed,
                                        contact_case=GraspCase.DISTAL_FIRST,
                                        target_force=setpoint))
        est = estimate(tr, G, model, EstimatorConfig(case_prior=GraspCase.DISTAL_FIRST))
        truth = tr.truth.forces[-1, 2]
        assert abs(est.summary["steady_forces"][2] - truth) / truth <= 0.03
        assert np.all(est.mode == 0)


def test_enveloping_grasp_forces_within_3pct(trained_model):
    model, _ = trained_model
    for seed, t1 in ((11, 38.0), (12, 50.0)):
        tr = simulate_grasp(G, scenario(theta1_deg=t1, seed=seed,
                                        contact_case=GraspCase.PROXIMAL_FIRST,
                                        target_force=120.0))
        est = estimate(tr, G, model, EstimatorConfig(case_prior=GraspCase.PROXIMAL_FIRST))
        truth = tr.truth.forces[-1]
        got = np.asarray(est.summary["steady_forces"])
        assert np.all(truth > 0)
        assert np.max(np.abs(got - truth) / truth) <= 0.03


def test_no_contact_nullity_before_switch(trained_model):
    model, _ = trained_model
    tr = simulate_grasp(G, scenario(seed=6))
    est = estimate(tr, G, model)
    sw = est.summary["switch_index"]
    assert sw is not None
    assert np.all(est.forces[:sw] == 0.0)
    tr1 = simulate_grasp(G, scenario(seed=7, contact_case=GraspCase.DISTAL_FIRST))
    est1 = estimate(tr1, G, model, EstimatorConfig(case_prior=GraspCase.DISTAL_FIRST))
    plateau = est1.summary["plateau_index"]
    assert np.all(est1.forces[:plateau] == 0.0)


def test_mode_is_monotone(trained_model):
    model, _ = trained_model
    tr = simulate_grasp(G, scenario(seed=8))
    est = estimate(tr, G, model)
    assert np.all(np.diff(est.mode) >= 0)
    assert int(np.sum(np.diff(est.mode))) <= 1


def test_audit_reproduces_forces_bit_identically(trained_model):
    model, _ = trained_model
    tr = simulate_grasp(G, scenario(seed=9, contact_case=GraspCase.PROXIMAL_FIRST))
    est = estimate(tr, G, model, EstimatorConfig(case_prior=GraspCase.PROXIMAL_FIRST))
    au = est.audit
    x1, x2, x3 = au["x_ratios"]
    rebuilt = np.zeros((tr.n_samples, 3))
    for seg in au["segments"]:
        a, b = seg["slice"]
        sl = slice(a, b)
        f1, f2, f3 = contact_forces_arrays(
            G, au["contact_arms"], seg["mask"], x1[sl], x2[sl], x3[sl],
            au["tau_load"][sl], au["d2"][sl], au["d3"][sl],
            est.theta2[sl], est.theta3[sl])
        rebuilt[sl, 0] = f1
        rebuilt[sl, 1] = f2
        rebuilt[sl, 2] = f3
    assert np.array_equal(rebuilt, est.forces)


def test_force_continuity_no_estimator_spikes(trained_model):
    """Between consecutive same-mask samples the force step is bounded by
    the torque step times the exact stage gain (plus a small pose-drift
    allowance): the estimator adds no spikes of its own."""
    model, _ = trained_model
    tr = simulate_grasp(G, scenario(seed=10))
    est = estimate(tr, G, model)
    au = est.audit
    tau = au["tau_load"]
    x1, x2, x3 = au["x_ratios"]
    for seg in au["segments"]:
        a, b = seg["slice"]
        if b - a < 3 or not any(seg["mask"]):
            continue
        sl = slice(a, b)
        # exact torque-to-force gain of the cascade (springs suppressed)
        gains = np.stack(contact_forces_arrays(
            G, au["contact_arms"], seg["mask"], x1[sl], x2[sl], x3[sl],
            np.ones(b - a), np.zeros(b - a), np.zeros(b - a),
            est.theta2[sl], est.theta3[sl]), axis=1)
        df = np.abs(np.diff(est.forces[sl], axis=0))
        dtau = np.abs(np.diff(tau[sl]))[:, None]
        bound = 10.0 * dtau * np.abs(gains[1:]) + 1.0
        assert np.all(df <= bound)


def test_perfect_model_noise_free_run_near_zero_deviation(trained_model):
    model, _ = trained_model
    tr = simulate_grasp(G, scenario(seed=20, sigma0=0.0, c_load=0.0,
                                    spike_rate_hz=0.0))
    est = estimate(tr, G, model)
    truth = tr.truth.forces[-1]
    got = np.asarray(est.summary["steady_forces"])
    active = truth > 1e-9
    assert np.max(np.abs(got - truth)[active] / truth[active]) <= 2e-3
    dev = abs(est.summary["theta1_corrected"] - tr.truth.theta1_at_switch)
    assert dev <= 0.15 * DEG


def test_evaluate_report_layout(trained_model):
    model, _ = trained_model
    scens = protocol_scenarios(G, theta1_deg_values=(36, 44, 52), speeds=(60.0,),
                               reps=2, base_seed=303, target_force=100.0)
    traces = [simulate_grasp(G, sc) for sc in scens]
    rep = evaluate(traces, G, model)
    assert len(rep.rows_by_size) == 3     # one row per object
    assert len(rep.rows_by_speed) == 1
    assert all(r.n == 2 for r in rep.rows_by_size)
    text = rep.to_text()
    assert "by object size" in text and "by motor speed" in text
    d = rep.to_dict()
    assert set(d) == {"by_size", "by_speed", "by_setpoint", "overall"}


def test_evaluate_setpoint_ladder_rows(trained_model):
    model, _ = trained_model
    traces = []
    for i, setpoint in enumerate(np.arange(50.0, 200.1, 25.0)):
        traces.append(simulate_grasp(G, scenario(
            theta1_deg=48.0, seed=400 + i, target_force=float(setpoint))))
    rep = evaluate(traces, G, model)
    assert len(rep.rows_by_setpoint) == 7


def test_evaluate_requires_truth(trained_model):
    model, _ = trained_model
    tr = simulate_grasp(G, scenario(seed=1))
    tr.truth = None
    with pytest.raises(ValueError):
        evaluate([tr], G, model)


def test_write_estimate_columns(tmp_path, trained_model):
    model, _ = trained_model
    tr = simulate_grasp(G, scenario(seed=2))
    est = estimate(tr, G, model)
    path = tmp_path / "forces.csv"
    write_estimate(est, tr, path)
    header = path.read_text().splitlines()[0]
    assert header.endswith("f1_N,f2_N,f3_N")
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    assert data.shape == (tr.n_samples, 12)
    assert np.array_equal(data[:, 11], est.f3)


# ---------------------------------------------------------------------------
# ring force-feedback check
# ---------------------------------------------------------------------------

def test_ring_curve_linear_model():
    curve = fit_ring_curve(sample_ring_curve(ring_stiffness=5.0))
    assert curve.deformation(50.0) == pytest.approx(10.0, abs=1e-9)
    assert curve.rms <= 1e-12


def test_ring_check_noise_free(trained_model):
    model, _ = trained_model
    curve = fit_ring_curve(sample_ring_curve(ring_stiffness=5.0))
    results = ring_grasp_check(G, model, curve, setpoints=(50.0,), runs=6, noisy=False)
    assert results[0].within_band == 6
    assert results[0].expected == pytest.approx(10.0, abs=1e-9)


def test_ring_check_noisy(trained_model):
    model, _ = trained_model
    curve = fit_ring_curve(sample_ring_curve(ring_stiffness=5.0, noise_std=0.02, seed=3))
    results = ring_grasp_check(G, model, curve, setpoints=(75.0,), runs=6, noisy=True)
    assert results[0].within_band >= 5


def test_ring_check_domain_error(trained_model):
    model, _ = trained_model
    curve = fit_ring_curve(sample_ring_curve())
    with pytest.raises(DomainError):
        ring_grasp_check(G, model, curve, setpoints=(150.0,), runs=1)
