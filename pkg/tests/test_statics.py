import math

import numpy as np
import pytest

from gripstat.errors import SingularContactError
from gripstat.geometry import REFERENCE_GEOMETRY as G, with_overrides
from gripstat.kinematics import (
    envelope_wrap,
    size_for_theta1,
    spring_deflections,
    state_from_joint_angles,
)
from gripstat import statics as st
from gripstat.statics import (
    ActuationState,
    ContactState,
    FourBarInstant,
    contact_force_solution,
    contact_forces,
    contact_forces_arrays,
    contact_point,
    contact_torques,
    contact_velocities,
    force_map_inverse,
    four_bar_instant,
    instantaneous_center,
    jacobian,
    joint_torques,
    phalange_normal,
    power_balance,
    torque_from_current,
    transmission_matrix,
    transmission_ratio_arrays,
    transmission_ratios,
    validate_contact,
)

from conftest import operational_states, random_states

DEG = math.pi / 180.0
K_DEFAULT = (G.L1 / 2.0, G.L2 / 2.0, G.L3 / 2.0)


def state(t1, t2, t3):
    return state_from_joint_angles(G, t1, t2, t3)


def contact(k=K_DEFAULT, mask=(True, True, True)):
    return ContactState(mask=mask, k=k)


# ---------------------------------------------------------------------------
# Jacobian
# ---------------------------------------------------------------------------

def test_jacobian_straight_finger():
    s = state(40 * DEG, 0.0, 0.0)
    j = jacobian(G, s, contact(k=(10.0, 11.0, 12.0)))
    assert j[1, 0] == pytest.approx(11.0 + G.L1)
    assert j[2, 0] == pytest.approx(12.0 + G.L1 + G.L2)
    assert j[2, 1] == pytest.approx(12.0 + G.L2)
    assert np.allclose(np.diag(j), (10.0, 11.0, 12.0))
    assert j[0, 1] == j[0, 2] == j[1, 2] == 0.0


def test_jacobian_right_angles():
    s = state(20 * DEG, 90 * DEG, 90 * DEG)
    j = jacobian(G, s, contact(k=(10.0, 11.0, 12.0)))
    assert j[1, 0] == pytest.approx(11.0)                 # cos 90 = 0
    assert j[2, 1] == pytest.approx(12.0)
    assert j[2, 0] == pytest.approx(12.0 - G.L1)          # cos 180 = -1


def test_jacobian_requires_all_arms():
    s = state(40 * DEG, 10 * DEG, 0.0)
    with pytest.raises(SingularContactError):
        jacobian(G, s, ContactState(mask=(True, True, True), k=(10.0, 0.0, 12.0)))


def _contact_point_velocity_fd(t1, t2, t3, omega, i, k_i, h=1e-7):
    """Independent oracle: central difference of the pose chain, projected
    onto the phalange normal."""
    def pos(scale):
        q = (t1 + scale * omega[0], t2 + scale * omega[1], t3 + scale * omega[2])
        return contact_point(G, q[0], q[1], q[2], i, k_i)
    p_plus = pos(h)
    p_minus = pos(-h)
    vx = (p_plus.x - p_minus.x) / (2 * h)
    vy = (p_plus.y - p_minus.y) / (2 * h)
    nx, ny = phalange_normal(t1, t2, t3, i)
    return vx * nx + vy * ny


def test_jacobian_matches_finite_difference_velocities():
    rng = np.random.default_rng(77)
    k = K_DEFAULT
    for t1, t2, t3 in random_states(G, 100, seed=9):
        s = state_from_joint_angles(G, t1, t2, t3)
        omega = rng.uniform(-1.0, 1.0, 3)
        v = contact_velocities(jacobian(G, s, contact()), omega)
        for i in range(3):
            ref = _contact_point_velocity_fd(t1, t2, t3, omega, i, k[i])
            assert abs(v[i] - ref) <= 1e-6 * max(1.0, abs(ref))


# ---------------------------------------------------------------------------
# contact velocities
# ---------------------------------------------------------------------------

def test_velocity_proximal_rate_only():
    s = state(40 * DEG, 0.0, 0.0)
    k = (10.0, 11.0, 12.0)
    v = contact_velocities(jacobian(G, s, contact(k=k)), np.array([1.0, 0.0, 0.0]))
    assert v == pytest.approx([10.0, 11.0 + G.L1, 12.0 + G.L1 + G.L2])


def test_velocity_distal_rate_only():
    s = state(40 * DEG, 25 * DEG, 10 * DEG)
    k = (10.0, 11.0, 12.0)
    v = contact_velocities(jacobian(G, s, contact(k=k)), np.array([0.0, 0.0, 1.0]))
    assert v == pytest.approx([0.0, 0.0, 12.0])


def test_velocity_matches_direct_expansion():
    rng = np.random.default_rng(3)
    for t1, t2, t3 in random_states(G, 50, seed=4):
        s = state_from_joint_angles(G, t1, t2, t3)
        k = tuple(rng.uniform(5.0, 20.0, 3))
        om = rng.uniform(-2.0, 2.0, 3)
        v = contact_velocities(jacobian(G, s, contact(k=k)), om)
        v1 = k[0] * om[0]
        v2 = (k[1] + G.L1 * math.cos(t2)) * om[0] + k[1] * om[1]
        v3 = ((k[2] + G.L1 * math.cos(t2 + t3) + G.L2 * math.cos(t3)) * om[0]
              + (k[2] + G.L2 * math.cos(t3)) * om[1] + k[2] * om[2])
        assert v == pytest.approx([v1, v2, v3], rel=1e-15, abs=1e-12)


def test_velocity_dimension_mismatch():
    with pytest.raises(ValueError):
        contact_velocities(np.eye(3), np.array([1.0, 2.0]))


# ---------------------------------------------------------------------------
# instantaneous center
# ---------------------------------------------------------------------------

def _ic_oracle(fb: FourBarInstant):
    """Brute-force line intersection from explicit joint coordinates."""
    u = fb.lam + fb.theta_a
    ob = (-fb.La * math.cos(u), fb.La * math.sin(u))
    oc = (fb.Lia - fb.Lic * math.cos(fb.phi), fb.Lic * math.sin(fb.phi))
    denom = oc[1] - ob[1]
    x_v = ob[0] - ob[1] * (oc[0] - ob[0]) / denom
    return x_v


def _random_four_bar(rng):
    return FourBarInstant(
        La=rng.uniform(10.0, 100.0),
        Lic=rng.uniform(5.0, 120.0),
        Lia=rng.uniform(10.0, 150.0),
        lam=rng.uniform(-math.pi, math.pi),
        theta_a=rng.uniform(-math.pi, math.pi),
        phi=rng.uniform(0.05, math.pi - 0.05),
    )


def test_ic_matches_line_intersection_oracle():
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 1000:
        fb = _random_four_bar(rng)
        den = fb.La * math.sin(fb.lam + fb.theta_a) - fb.Lic * math.sin(fb.phi)
        if abs(den) < 1e-6:
            continue
        res = instantaneous_center(fb)
        x_v = _ic_oracle(fb)
        assert abs(abs(res.l_va) - abs(x_v)) < 1e-9
        assert abs(abs(res.l_vi) - abs(fb.Lia - x_v)) < 1e-9
        checked += 1


def test_ic_parallelogram_reports_translation():
    # parallelogram four-bar: coupler parallel to the ground line
    fb = FourBarInstant(La=30.0, Lic=30.0, Lia=70.0, lam=0.0,
                        theta_a=50 * DEG, phi=50 * DEG)
    res = instantaneous_center(fb)
    assert res.degenerate
    assert res.ratio == 1.0


def test_ic_right_angle_substitution():
    la, lic, lia = 40.0, 25.0, 60.0
    fb = FourBarInstant(La=la, Lic=lic, Lia=lia, lam=20 * DEG,
                        theta_a=70 * DEG, phi=90 * DEG)
    res = instantaneous_center(fb)
    assert res.l_va == pytest.approx(la * lia / (la - lic))
    assert res.branch == "va"


def test_ic_branch_formulas_agree_at_tie():
    fb = FourBarInstant(La=40.0, Lic=40.0, Lia=80.0, lam=0.3,
                        theta_a=1.0, phi=1.9)
    res = instantaneous_center(fb)
    ratio_va = (res.l_va - fb.Lia) / res.l_va
    ratio_vi = res.l_vi / (res.l_vi - fb.Lia)
    assert ratio_va == pytest.approx(ratio_vi, rel=1e-12)
    assert res.ratio == pytest.approx(ratio_va, rel=1e-12)


def test_ic_near_degenerate_sets_warning():
    fb = FourBarInstant(La=30.0, Lic=30.0, Lia=70.0, lam=0.0,
                        theta_a=50 * DEG, phi=50 * DEG + 2e-8)
    res = instantaneous_center(fb)
    assert res.warning and not res.degenerate


# ---------------------------------------------------------------------------
# transmission
# ---------------------------------------------------------------------------

def test_fully_actuated_gives_identity_matrix():
    s = state(45 * DEG, 45 * DEG, 0.0)
    tr = transmission_ratios(G, s, fully_actuated=True)
    assert np.array_equal(transmission_matrix(tr.X), np.eye(3))


def _inverse_four_bar_u(i, phi, u_guess):
    from scipy.optimize import brentq
    la, lia, lic, lib = G.La, G.Lia[i], G.Lic[i], G.Lib[i]
    oc = (lia - lic * math.cos(phi), lic * math.sin(phi))

    def resid(u):
        ob = (-la * math.cos(u), la * math.sin(u))
        return math.hypot(oc[0] - ob[0], oc[1] - ob[1]) - lib

    for width in (1e-3, 1e-2, 0.1):
        try:
            return brentq(resid, u_guess - width, u_guess + width, xtol=1e-15)
        except ValueError:
            continue
    raise RuntimeError("no bracket for the inverse closure")


def test_transmission_matches_closure_differentiation():
    rng = np.random.default_rng(8)
    for _ in range(60):
        theta_a = rng.uniform(123 * DEG, 152 * DEG)
        s = state(45 * DEG, 45 * DEG, 0.0)
        tr = transmission_ratios(G, s)
        # ratios depend on theta_a only; rebuild at the probe angle
        for i in range(3):
            fb = four_bar_instant(G, i, theta_a)
            res = instantaneous_center(fb)
            h = 1e-7
            u_plus = _inverse_four_bar_u(i, fb.phi + h, G.lam[i] + theta_a)
            u_minus = _inverse_four_bar_u(i, fb.phi - h, G.lam[i] + theta_a)
            fd = (u_plus - u_minus) / (2.0 * h)
            assert abs(fd - res.ratio) <= 1e-5 * abs(res.ratio)


def test_transmission_degeneracy_propagates():
    # a geometry whose first four-bar is a parallelogram is degenerate at
    # every pose (coupler stays parallel to the ground line)
    g2 = with_overrides(G, Lia=(70.0, G.Lia[1], G.Lia[2]),
                        Lic=(30.0, G.Lic[1], G.Lic[2]),
                        Lib=(70.0, G.Lib[1], G.Lib[2]),
                        lam=(0.0, G.lam[1], G.lam[2]))
    fb = four_bar_instant(g2, 0, 130 * DEG)
    res = instantaneous_center(fb)
    assert res.degenerate
    assert res.ratio == 1.0
    # and the flag propagates through the transmission-ratio result
    from gripstat.kinematics import JointState
    s = JointState(theta_a=130 * DEG, theta_b=0.0, theta1=0.8, theta2=0.7,
                   theta3=0.1, alpha=1.6, beta=1.5)
    tr = transmission_ratios(g2, s)
    assert tr.degenerate and tr.warning
    assert tr.X[0] == 1.0


def test_transmission_matrix_layout():
    t = transmission_matrix((1.0, 1.0, 1.0))
    assert np.array_equal(t, np.array([[1, 1, 1], [0, 1, 0], [0, 0, 1]], dtype=float))


def test_transmission_matrix_first_row_expansion():
    rng = np.random.default_rng(10)
    x = tuple(rng.uniform(0.5, 6.0, 3))
    om = rng.uniform(-1.0, 1.0, 3)
    wa = transmission_matrix(x) @ om
    assert wa[0] == pytest.approx(x[0] * om[0] + x[1] * om[1] + x[2] * om[2], rel=1e-15)
    assert wa[1] == om[1] and wa[2] == om[2]


def test_transmission_ratio_arrays_match_scalar():
    tas = np.linspace(123, 152, 15) * DEG
    x1, x2, x3 = transmission_ratio_arrays(G, tas)
    for j, ta in enumerate(tas):
        s = state(45 * DEG, 45 * DEG, 0.0)
        per = [instantaneous_center(four_bar_instant(G, i, ta)).ratio for i in range(3)]
        assert (x1[j], x2[j], x3[j]) == pytest.approx(per, rel=1e-13)


# ---------------------------------------------------------------------------
# joint torques
# ---------------------------------------------------------------------------

def test_joint_torques_without_deflection():
    a = ActuationState(tau_a=2.0, current=1.0, delta_theta2=0.0, delta_theta3=0.0)
    x = (5.0, 2.5, 0.8)
    assert joint_torques(a, x, G) == pytest.approx((10.0, 5.0, 1.6))


def test_joint_torques_pure_spring():
    a = ActuationState(tau_a=0.0, current=0.0, delta_theta2=1.0, delta_theta3=0.0)
    tp = joint_torques(a, (5.0, 2.5, 0.8), G)
    assert tp == pytest.approx((0.0, -G.K2, 0.0))


def test_joint_torques_equal_matrix_form():
    rng = np.random.default_rng(6)
    for _ in range(50):
        a = ActuationState(tau_a=rng.uniform(0, 5), current=1.0,
                           delta_theta2=rng.uniform(-0.3, 0.5),
                           delta_theta3=rng.uniform(-0.3, 0.5))
        x = tuple(rng.uniform(0.5, 6.0, 3))
        t_vec = st.input_torque_vector(a, G)
        tau_matrix = transmission_matrix(x).T @ t_vec
        assert joint_torques(a, x, G) == pytest.approx(tuple(tau_matrix), rel=1e-15)


def test_actuation_state_from_current():
    a = ActuationState.from_current(G, 1.5)
    assert a.tau_a == pytest.approx(G.torque_constant_A * 1.5 * G.screw_gain)


def test_torque_from_current_mapping():
    assert torque_from_current(G, 0.0) == 0.0
    # 1.2 N.m at motor -> 41.76 N.m after the screw
    i_nominal = 1.2 / G.torque_constant_A
    assert torque_from_current(G, i_nominal) == pytest.approx(41.76)
    assert torque_from_current(G, 2.0) == pytest.approx(2.0 * torque_from_current(G, 1.0))
    with pytest.raises(ValueError):
        torque_from_current(G, -1.0)


# ---------------------------------------------------------------------------
# contact forces
# ---------------------------------------------------------------------------

def test_distal_only_contact():
    s = state(45 * DEG, 20 * DEG, 10 * DEG)
    jac = jacobian(G, s, contact())
    tau = np.array([0.7, 0.4, 0.3])
    f = contact_forces(jac, tau, (False, False, True))
    assert f[0] == f[1] == 0.0
    assert f[2] == pytest.approx(tau[2] / K_DEFAULT[2])


def test_full_contact_substitutes_back():
    rng = np.random.default_rng(12)
    for t1, t2, t3 in random_states(G, 100, seed=13):
        s = state_from_joint_angles(G, t1, t2, t3)
        jac = jacobian(G, s, contact())
        tau = rng.uniform(-2.0, 5.0, 3)
        f = contact_forces(jac, tau, (True, True, True))
        resid = np.abs(jac.T @ f - tau)
        assert np.max(resid) <= 1e-12 * max(1.0, np.max(np.abs(tau)))


def test_diagonal_path_unit_force():
    jac = np.array([[1.0, 0.0, 0.0], [0.5, 1.0, 0.0], [0.4, 0.3, 1.0]])
    f = contact_forces(jac, np.array([1.0, 0.0, 0.0]), (True, True, True))
    assert f == pytest.approx([1.0, 0.0, 0.0])


def test_all_false_mask_gives_zero():
    jac = np.eye(3)
    assert np.array_equal(contact_forces(jac, np.ones(3), (False, False, False)), np.zeros(3))


def test_zero_arm_on_active_contact_raises():
    jac = np.array([[0.0, 0.0, 0.0], [0.5, 1.0, 0.0], [0.4, 0.3, 1.0]])
    with pytest.raises(SingularContactError):
        contact_forces(jac, np.ones(3), (True, False, False))


def test_reduced_system_matches_restricted_full_solution():
    # construct a torque vector whose full solution has f2 = 0 exactly;
    # deleting phalange 2 must then reproduce f1, f3
    rng = np.random.default_rng(14)
    for t1, t2, t3 in random_states(G, 50, seed=15):
        s = state_from_joint_angles(G, t1, t2, t3)
        jac = jacobian(G, s, contact())
        f_target = np.array([rng.uniform(1, 10), 0.0, rng.uniform(1, 10)])
        tau = jac.T @ f_target
        f_reduced = contact_forces(jac, tau, (True, False, True))
        assert np.max(np.abs(f_reduced - f_target)) <= 1e-12 * np.max(np.abs(f_target))


def test_force_map_inverse_is_transposed_inverse():
    for t1, t2, t3 in random_states(G, 50, seed=16):
        s = state_from_joint_angles(G, t1, t2, t3)
        jac = jacobian(G, s, contact())
        ident = force_map_inverse(jac) @ jac.T
        assert np.max(np.abs(ident - np.eye(3))) <= 1e-12


def test_explicit_inverse_matches_solver():
    rng = np.random.default_rng(17)
    for t1, t2, t3 in random_states(G, 30, seed=18):
        s = state_from_joint_angles(G, t1, t2, t3)
        jac = jacobian(G, s, contact())
        tau = rng.uniform(-3, 6, 3)
        f_explicit = contact_forces(jac, tau, (True, True, True))
        f_solve = np.linalg.solve(jac.T, tau)
        assert np.max(np.abs(f_explicit - f_solve)) <= 1e-9 * max(1.0, np.max(np.abs(f_solve)))


# ---------------------------------------------------------------------------
# contact torques
# ---------------------------------------------------------------------------

def test_contact_torque_last_row_identity():
    jac = np.array([[10.0, 0, 0], [40.0, 11.0, 0], [50.0, 45.0, 12.0]])
    tau = (1.0, 2.0, 3.0)
    assert contact_torques(tau, jac)[2] == tau[2]


def test_contact_torque_r23_zero():
    jac = np.array([[10.0, 0, 0], [40.0, 11.0, 0], [50.0, 0.0, 12.0]])
    tau = (1.0, 2.0, 3.0)
    assert contact_torques(tau, jac)[1] == pytest.approx(tau[1])


def test_contact_torque_equals_force_times_arm():
    rng = np.random.default_rng(19)
    for t1, t2, t3 in random_states(G, 50, seed=20):
        s = state_from_joint_angles(G, t1, t2, t3)
        jac = jacobian(G, s, contact())
        tau = rng.uniform(-2, 6, 3)
        f = contact_forces(jac, tau, (True, True, True))
        tpp = contact_torques(tau, jac)
        expected = f * np.diag(jac)
        assert np.max(np.abs(np.array(tpp) - expected)) <= 1e-12 * max(1.0, np.max(np.abs(expected)))


def test_contact_torque_singular_arm_raises():
    jac = np.array([[10.0, 0, 0], [40.0, 0.0, 0], [50.0, 45.0, 12.0]])
    with pytest.raises(SingularContactError, match="reduced"):
        contact_torques((1.0, 2.0, 3.0), jac)


# ---------------------------------------------------------------------------
# virtual-work balance
# ---------------------------------------------------------------------------

def _assemble_snapshot(s, tau_a, d2, d3, omega, k=K_DEFAULT):
    a = ActuationState(tau_a=tau_a, current=math.nan, delta_theta2=d2, delta_theta3=d3)
    tr = transmission_ratios(G, s)
    t_vec = st.input_torque_vector(a, G)
    t_mat = transmission_matrix(tr.X)
    tau = t_mat.T @ t_vec
    jac = jacobian(G, s, contact(k=k))
    f = contact_forces(jac, tau, (True, True, True))
    v = contact_velocities(jac, omega)
    omega_a = t_mat @ omega
    return t_vec, omega_a, f, v, tau, omega


def test_power_balance_zero_motion():
    s = state(45 * DEG, 30 * DEG, 10 * DEG)
    t_vec, omega_a, f, v, tau, om = _assemble_snapshot(s, 2.0, 0.1, 0.2, np.zeros(3))
    assert power_balance(t_vec, omega_a, f, v, tau, om) == 0.0


def test_power_balance_random_snapshots():
    rng = np.random.default_rng(21)
    worst = 0.0
    for t1, t2, t3 in operational_states(G, 200, seed=22):
        s = state_from_joint_angles(G, t1, t2, t3)
        snap = _assemble_snapshot(
            s, rng.uniform(0.1, 5.0), rng.uniform(-0.2, 0.5),
            rng.uniform(-0.2, 0.5), rng.uniform(-1.0, 1.0, 3))
        worst = max(worst, power_balance(*snap))
    assert worst <= 1e-9


def test_power_balance_detects_corruption():
    s = state(45 * DEG, 30 * DEG, 10 * DEG)
    t_vec, omega_a, f, v, tau, om = _assemble_snapshot(s, 2.0, 0.1, 0.2, np.array([0.3, -0.2, 0.5]))
    f = f.copy()
    f[0] += 1.0
    assert power_balance(t_vec, omega_a, f, v, tau, om) > 1e-6


# ---------------------------------------------------------------------------
# composed solution and vector mirror
# ---------------------------------------------------------------------------

def test_contact_force_solution_matches_arrays():
    for t1_deg in (35.0, 45.0, 55.0):
        size = size_for_theta1(G, t1_deg * DEG)
        d2w, d3w = envelope_wrap(G, size)
        t1 = t1_deg * DEG
        s = state_from_joint_angles(G, t1, G.beta_parallel - t1 + d2w, d3w)
        for tau_a in (0.5, 2.0, 4.0):
            sol = contact_force_solution(
                G, s, contact(), tau_a)
            x1, x2, x3 = transmission_ratio_arrays(G, np.array([s.theta_a]))
            d2, d3 = spring_deflections(G, s)
            f1, f2, f3 = contact_forces_arrays(
                G, K_DEFAULT, (True, True, True), x1, x2, x3,
                np.array([tau_a]), d2, d3, s.theta2, s.theta3)
            assert sol.f == pytest.approx((f1[0], f2[0], f3[0]), rel=1e-12)


def test_force_positivity_in_operating_region():
    """Documented feasibility region: enveloping lock states from the wrap
    protocol, distal setpoints 25..250 N, all contact forces non-negative.
    (Below ~15 N of distal force the proximal can momentarily pull a few
    newtons negative at the small-object corner; the operating protocol
    starts at 50 N.)"""
    for t1_deg in np.linspace(30.0, 60.0, 16):
        t1 = t1_deg * DEG
        size = size_for_theta1(G, t1)
        d2w, d3w = envelope_wrap(G, size)
        s = state_from_joint_angles(G, t1, G.beta_parallel - t1 + d2w, d3w)
        tr = transmission_ratios(G, s)
        _, d3 = spring_deflections(G, s)
        tau_lock = G.K3 * d3 / tr.X[2]
        for f3_target in (25.0, 50.0, 100.0, 150.0, 200.0, 250.0):
            tau_a = tau_lock + f3_target * (K_DEFAULT[2] * 1e-3) / tr.X[2]
            sol = contact_force_solution(G, s, contact(), tau_a)
            assert min(sol.f) >= 0.0, (t1_deg, f3_target, sol.f)


def test_validate_contact_rules():
    validate_contact(G, ContactState(mask=(True, False, True),
                                     k=(20.0, 15.0, 10.0), F=(1.0, 0.0, 2.0)))
    with pytest.raises(SingularContactError):
        validate_contact(G, ContactState(mask=(True, False, False),
                                         k=(G.L1 + 1.0, 15.0, 10.0)))
    with pytest.raises(SingularContactError):
        validate_contact(G, ContactState(mask=(False, False, False),
                                         k=(10.0, 10.0, 10.0), F=(0.5, 0.0, 0.0)))


def test_four_bar_instant_invariants():
    with pytest.raises(ValueError):
        FourBarInstant(La=30.0, Lic=20.0, Lia=50.0, lam=0.0, theta_a=1.0, phi=0.0)
    with pytest.raises(ValueError):
        FourBarInstant(La=-1.0, Lic=20.0, Lia=50.0, lam=0.0, theta_a=1.0, phi=1.0)
