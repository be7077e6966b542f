"""Shared fixtures; the trained detector is built once per session."""

import time

import numpy as np
import pytest

from gripstat.geometry import REFERENCE_GEOMETRY
from gripstat.kinematics import GraspCase
from gripstat.mode_detector import (
    CompensationSurface,
    ModeModel,
    TrainConfig,
    detect_switch,
    fit_compensation,
    lstm_train,
    trace_features,
)
from gripstat.plant_sim import GraspScenario, protocol_scenarios, simulate_grasp
from gripstat.signal_pipeline import FilterConfig, two_stage_filter


@pytest.fixture(scope="session")
def geometry():
    return REFERENCE_GEOMETRY


@pytest.fixture(scope="session")
def trained_model(geometry):
    """Detector trained on the protocol grid, with fitted compensation.

    Returns (model, info) where info carries the training report, the
    compensation fit report, and wall-clock timings used by the
    acceptance budget check.
    """
    g = geometry
    t0 = time.time()
    scens = protocol_scenarios(
        g, speeds=(50.0, 60.0, 70.0, 80.0), reps=3, base_seed=11, target_force=100.0)
    scens += [
        GraspScenario(object_size=None, contact_case=GraspCase.NO_CONTACT,
                      motor_speed=sp, seed=900 + i)
        for i, sp in enumerate((50.0, 60.0, 70.0, 80.0) * 4)
    ]
    traces = [simulate_grasp(g, sc) for sc in scens]
    cfg_f = FilterConfig()
    filtered = [two_stage_filter(tr, cfg_f) for tr in traces]
    dataset = [(trace_features(ft), tr.labels.astype(int))
               for ft, tr in zip(filtered, traces)]
    params, feat_mean, feat_std, report = lstm_train(
        dataset, TrainConfig(epochs=8, seed=1, hidden_dim=32))
    model = ModeModel(params=params, feat_mean=feat_mean, feat_std=feat_std,
                      surface=CompensationSurface.zero())

    comp_scens = protocol_scenarios(
        g, speeds=(50.0, 60.0, 70.0, 80.0), reps=4, base_seed=500, target_force=100.0)
    samples = []
    for sc in comp_scens:
        tr = simulate_grasp(g, sc)
        ft = two_stage_filter(tr, cfg_f)
        idx, theta1_raw, _ = detect_switch(ft, model, g)
        if idx is None:
            continue
        samples.append((sc.motor_speed, sc.object_size,
                        theta1_raw - tr.truth.theta1_at_switch))
    surface, fit_report = fit_compensation(samples)
    model.surface = surface
    info = {
        "train_report": report,
        "fit_report": fit_report,
        "train_seconds": time.time() - t0,
        "n_compensation_samples": len(samples),
    }
    return model, info


def random_states(g, n, seed, theta3_max_deg=90.0):
    """Seeded in-limit joint triples (theta1, theta2, theta3)."""
    rng = np.random.default_rng(seed)
    t1 = rng.uniform(g.theta1_range[0], g.theta1_range[1], n)
    t2 = rng.uniform(g.theta2_range[0], g.theta2_range[1], n)
    t3 = rng.uniform(0.0, np.radians(theta3_max_deg), n)
    return np.stack([t1, t2, t3], axis=1)


def operational_states(g, n, seed):
    """Seeded in-limit states on the reachable grasp families.

    Draws from the parallel sweep and the three contact-wrap families,
    which is the region the single-direction drive can actually visit
    (the transmission four-bars are assembled throughout).
    """
    from gripstat.kinematics import envelope_wrap, size_for_theta1

    rng = np.random.default_rng(seed)
    beta = g.beta_parallel
    out = []
    while len(out) < n:
        family = rng.integers(0, 4)
        if family == 0:      # parallel
            t1 = rng.uniform(np.radians(21.0), np.radians(89.0))
            out.append((t1, beta - t1, 0.0))
        elif family == 1:    # middle-first wrap
            t1 = rng.uniform(np.radians(30.0), np.radians(60.0))
            out.append((t1, beta - t1, rng.uniform(0.0, np.radians(35.0))))
        elif family == 2:    # proximal-first coupled wrap
            t1 = rng.uniform(np.radians(30.0), np.radians(60.0))
            d = rng.uniform(0.0, np.radians(18.0))
            out.append((t1, beta - t1 + d, d))
        else:                # full envelope at/beyond the lock pose
            t1 = rng.uniform(np.radians(30.0), np.radians(60.0))
            d2, d3 = envelope_wrap(g, size_for_theta1(g, t1))
            out.append((t1, beta - t1 + d2, rng.uniform(d2, d3)))
    return np.array(out)
