"""Kinetostatic force model: Jacobian, Kennedy-IC transmission, virtual work.

Quasi-static, friction-free contact model.  Contact forces are normal
to their phalange, positive toward the grasped object.

Unit bookkeeping: the Jacobian carries lengths in the unit of the
geometry (mm), joint torques are N.m, so the pure linear-algebra
operations here are unit-agnostic -- callers must feed a consistent
set.  :func:`contact_force_solution` is the composition used by the
plant and the estimator; it does the single N.m -> N.mm conversion and
returns forces in N.

Four-bar frame convention (one four-bar per phalange, other phalanges
locked): actuation joint ``O_a`` at the origin, phalange joint ``O_i``
at ``(Lia, 0)``, crank joint ``O_b = La*(-cos u, sin u)`` with input
angle ``u = lam_i + theta_a``, coupler joint ``O_c`` at the positive-y
closure of coupler ``Lib`` and output link ``Lic``, so the angle at
``O_i`` between rays ``O_i O_c`` and ``O_i O_a`` is ``phi in (0, pi)``.
Under this convention the closed-form side lengths of the IC triangle
are exact identities of the line intersection of ``O_b O_c`` with
``O_a O_i``:

    l_va = La*(Lia*sin u + Lic*sin(phi - u)) / (La*sin u - Lic*sin phi)
    l_vi = Lia - l_va

both signed along the ground line (``l_va`` from ``O_a`` toward
``O_i``, ``l_vi`` from ``O_i`` toward ``O_a``), and the velocity ratio
``theta_a_dot / theta_i_dot = 1 - Lia/l_va`` is branch-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateICError, NoSolutionError, SingularContactError
from .geometry import FingerGeometry
from .kinematics import JointState, PlanarPoint, spring_deflections

# IC-at-infinity threshold and the near-degenerate warning band for the
# denominator of the closed-form side lengths (mm scale).
IC_DEGENERATE_TOL = 1e-12
IC_WARNING_TOL = 1e-6


@dataclass(frozen=True)
class ContactState:
    """Per-phalange contact mask, contact-arm lengths (mm) and forces (N)."""

    mask: tuple[bool, bool, bool]
    k: tuple[float, float, float]
    F: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def active_indices(self) -> list[int]:
        return [i for i, m in enumerate(self.mask) if m]


def validate_contact(g: FingerGeometry, c: ContactState) -> None:
    """Raise if an active contact arm is out of (0, L_i] or an inactive
    phalange carries force."""
    lengths = g.link_lengths
    for i in range(3):
        if c.mask[i]:
            if not (0.0 < c.k[i] <= lengths[i]):
                raise SingularContactError(
                    f"contact arm k{i + 1}={c.k[i]!r} mm outside (0, {lengths[i]!r}]"
                )
        elif c.F[i] != 0.0:
            raise SingularContactError(f"inactive phalange {i + 1} carries force {c.F[i]!r}")


@dataclass(frozen=True)
class ActuationState:
    """Actuation torque, motor current, and spring deflections."""

    tau_a: float
    current: float
    delta_theta2: float
    delta_theta3: float

    @classmethod
    def from_current(
        cls, g: FingerGeometry, current: float,
        delta_theta2: float = 0.0, delta_theta3: float = 0.0,
    ) -> "ActuationState":
        return cls(
            tau_a=torque_from_current(g, current),
            current=current,
            delta_theta2=delta_theta2,
            delta_theta3=delta_theta3,
        )


def torque_from_current(g: FingerGeometry, current: float) -> float:
    """Gripper-side actuation torque for a motor current (N.m).

    The motor torque (torque constant x current) is amplified by the
    screw transmission gain.
    """
    if current < 0.0:
        raise ValueError(f"negative current {current!r} A")
    return g.torque_constant_A * current * g.screw_gain


@dataclass(frozen=True)
class FourBarInstant:
    """Instantaneous four-bar data for one phalange (lengths mm, angles rad)."""

    La: float
    Lic: float
    Lia: float
    lam: float
    theta_a: float
    phi: float

    def __post_init__(self):
        for name in ("La", "Lic", "Lia"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"non-positive four-bar length {name}")
        if not 0.0 < self.phi < math.pi:
            raise ValueError(f"phi={self.phi!r} outside (0, pi)")


@dataclass(frozen=True)
class ICResult:
    """Instantaneous-center solution of one four-bar."""

    length: float          # side length of the selected branch (signed)
    branch: str            # "va" (La >= Lic) or "vi" (La < Lic)
    l_va: float
    l_vi: float
    x_v: float             # signed IC coordinate along O_a -> O_i
    ratio: float           # theta_a_dot / theta_i_dot
    degenerate: bool       # IC at infinity (pure-translation instant)
    warning: bool          # near-degenerate; numbers unreliable


def instantaneous_center(fb: FourBarInstant) -> ICResult:
    """Closed-form Kennedy IC of the four-bar, with branch per La vs Lic.

    The parallel-lines degeneracy (coupler parallel to the ground line)
    is reported as ``degenerate=True`` with ratio 1 (both links share
    the same instantaneous rotation rate); denominators between the
    degeneracy tolerance and the warning tolerance set ``warning``.
    """
    u = fb.lam + fb.theta_a
    den = fb.La * math.sin(u) - fb.Lic * math.sin(fb.phi)
    branch = "va" if fb.La >= fb.Lic else "vi"
    if abs(den) < IC_DEGENERATE_TOL:
        inf = math.inf
        return ICResult(
            length=inf, branch=branch, l_va=inf, l_vi=inf, x_v=inf,
            ratio=1.0, degenerate=True, warning=True,
        )
    x_v = fb.La * (fb.Lia * math.sin(u) + fb.Lic * math.sin(fb.phi - u)) / den
    l_va = x_v
    l_vi = fb.Lia - x_v
    if x_v == 0.0:
        raise DegenerateICError("instantaneous center at the actuation joint (ratio diverges)")
    ratio = 1.0 - fb.Lia / x_v
    return ICResult(
        length=l_va if branch == "va" else l_vi,
        branch=branch, l_va=l_va, l_vi=l_vi, x_v=x_v, ratio=ratio,
        degenerate=False, warning=abs(den) < IC_WARNING_TOL,
    )


def four_bar_coordinates(
    g: FingerGeometry, i: int, theta_a: float
) -> tuple[tuple[float, float], tuple[float, float], tuple[float, float], tuple[float, float]]:
    """Joint coordinates (O_a, O_b, O_c, O_i) of phalange i's four-bar.

    ``i`` is 0-based.  O_c is reconstructed by closing the coupler on
    the positive-y side (phi in (0, pi)).  Raises
    :class:`NoSolutionError` outside the assembled range.
    """
    la, lia, lic, lib = g.La, g.Lia[i], g.Lic[i], g.Lib[i]
    u = g.lam[i] + theta_a
    ob = (-la * math.cos(u), la * math.sin(u))
    oi = (lia, 0.0)
    dx, dy = oi[0] - ob[0], oi[1] - ob[1]
    d = math.hypot(dx, dy)
    if d < 1e-12:
        raise NoSolutionError(f"four-bar {i + 1}: crank joint coincides with phalange joint")
    a = (d * d + lib * lib - lic * lic) / (2.0 * d)
    h2 = lib * lib - a * a
    if h2 < 0.0:
        if h2 > -1e-9 * lib * lib:
            h2 = 0.0
        else:
            raise NoSolutionError(
                f"four-bar {i + 1} not assembled at theta_a={math.degrees(theta_a):.3f} deg"
            )
    h = math.sqrt(h2)
    ux, uy = dx / d, dy / d
    mx, my = ob[0] + a * ux, ob[1] + a * uy
    candidates = [(mx - h * uy, my + h * ux), (mx + h * uy, my - h * ux)]
    above = [c for c in candidates if c[1] > 1e-12]
    if not above:
        raise NoSolutionError(
            f"four-bar {i + 1} coupler joint on/below the ground line "
            f"at theta_a={math.degrees(theta_a):.3f} deg (dead point)"
        )
    oc = max(above, key=lambda c: c[1])
    return ((0.0, 0.0), ob, oc, oi)


def four_bar_instant(g: FingerGeometry, i: int, theta_a: float) -> FourBarInstant:
    """FourBarInstant for phalange i, phi computed from joint coordinates."""
    _, _, oc, oi = four_bar_coordinates(g, i, theta_a)
    # O_c = (Lia - Lic*cos phi, Lic*sin phi)
    phi = math.atan2(oc[1], oi[0] - oc[0])
    return FourBarInstant(
        La=g.La, Lic=g.Lic[i], Lia=g.Lia[i], lam=g.lam[i],
        theta_a=theta_a, phi=phi,
    )


@dataclass(frozen=True)
class TransmissionResult:
    """Transmission ratios with per-phalange IC diagnostics."""

    X: tuple[float, float, float]
    ic: tuple[ICResult, ICResult, ICResult] | None = None

    @property
    def degenerate(self) -> bool:
        return self.ic is not None and any(r.degenerate for r in self.ic)

    @property
    def warning(self) -> bool:
        return self.ic is not None and any(r.warning for r in self.ic)


def transmission_ratios(
    g: FingerGeometry, s: JointState, fully_actuated: bool = False
) -> TransmissionResult:
    """Ratios X_i = theta_a_dot / theta_i_dot with the other phalanges locked.

    A fully actuated finger has every joint driven directly, which in
    the expanded transmission form is X = (1, 0, 0) (identity matrix).
    """
    if fully_actuated:
        return TransmissionResult(X=(1.0, 0.0, 0.0), ic=None)
    results = []
    for i in range(3):
        fb = four_bar_instant(g, i, s.theta_a)
        results.append(instantaneous_center(fb))
    return TransmissionResult(
        X=tuple(r.ratio for r in results),  # type: ignore[arg-type]
        ic=tuple(results),  # type: ignore[arg-type]
    )


def transmission_matrix(x: tuple[float, float, float]) -> np.ndarray:
    """Expanded transmission matrix: first row X, spring-joint selectors below."""
    return np.array([
        [x[0], x[1], x[2]],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ])


def input_torque_vector(a: ActuationState, g: FingerGeometry) -> np.ndarray:
    """t = (tau_a, -K2*dtheta2, -K3*dtheta3); only joints 2 and 3 carry springs."""
    return np.array([
        a.tau_a,
        -g.K2 * a.delta_theta2,
        -g.K3 * a.delta_theta3,
    ])


def joint_torques(
    a: ActuationState, x: tuple[float, float, float], g: FingerGeometry
) -> tuple[float, float, float]:
    """Output torques at the phalange joints (N.m)."""
    return (
        x[0] * a.tau_a,
        x[1] * a.tau_a - g.K2 * a.delta_theta2,
        x[2] * a.tau_a - g.K3 * a.delta_theta3,
    )


# ---------------------------------------------------------------------------
# Jacobian and contact forces
# ---------------------------------------------------------------------------

def jacobian(g: FingerGeometry, s: JointState, c: ContactState) -> np.ndarray:
    """Lower-triangular contact Jacobian, entries in mm.

    Diagonal (k1, k2, k3); below-diagonal couplings depend on the
    relative joint angles only.  All three contact arms must be
    supplied (reduction for partial contact happens in
    :func:`contact_forces`).
    """
    k1, k2, k3 = c.k
    for i, k in enumerate((k1, k2, k3)):
        if not (k > 0.0 and math.isfinite(k)):
            raise SingularContactError(f"missing or non-positive contact arm k{i + 1}={k!r}")
    t2, t3 = s.theta2, s.theta3
    r12 = k2 + g.L1 * math.cos(t2)
    r13 = k3 + g.L1 * math.cos(t2 + t3) + g.L2 * math.cos(t3)
    r23 = k3 + g.L2 * math.cos(t3)
    return np.array([
        [k1, 0.0, 0.0],
        [r12, k2, 0.0],
        [r13, r23, k3],
    ])


def contact_velocities(jac: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Projected (phalange-normal) contact-point velocities v = J * theta_dot."""
    omega = np.asarray(omega, dtype=float)
    if jac.shape != (3, 3) or omega.shape != (3,):
        raise ValueError(f"dimension mismatch: J{jac.shape} vs omega{omega.shape}")
    return jac @ omega


def force_map_inverse(jac: np.ndarray) -> np.ndarray:
    """Explicit inverse-transpose of the full-contact Jacobian."""
    k1 = jac[0, 0]
    k2 = jac[1, 1]
    k3 = jac[2, 2]
    r12 = jac[1, 0]
    r13 = jac[2, 0]
    r23 = jac[2, 1]
    if k1 == 0.0 or k2 == 0.0 or k3 == 0.0:
        raise SingularContactError("zero contact arm: full-contact force map singular")
    return np.array([
        [1.0 / k1, -r12 / (k1 * k2), (r12 * r23 - k2 * r13) / (k1 * k2 * k3)],
        [0.0, 1.0 / k2, -r23 / (k2 * k3)],
        [0.0, 0.0, 1.0 / k3],
    ])


def contact_forces(
    jac: np.ndarray,
    tau_prime: np.ndarray | tuple[float, float, float],
    mask: tuple[bool, bool, bool],
) -> np.ndarray:
    """Contact forces from joint torques; units must be consistent with J.

    Full contact solves the explicit triangular inverse; with fewer
    contacts the rows/columns of the non-contacting phalanges are
    deleted, the reduced system solved, and their forces set to zero.
    An all-false mask yields the zero vector.
    """
    tau = np.asarray(tau_prime, dtype=float)
    active = [i for i, m in enumerate(mask) if m]
    if not active:
        return np.zeros(3)
    for i in active:
        if jac[i, i] == 0.0:
            raise SingularContactError(f"zero contact arm k{i + 1} on an active contact")
    if len(active) == 3:
        return force_map_inverse(jac) @ tau
    sub = jac[np.ix_(active, active)]
    f_red = np.linalg.solve(sub.T, tau[active])
    f = np.zeros(3)
    f[active] = f_red
    return f


def contact_torques(
    tau_prime: np.ndarray | tuple[float, float, float], jac: np.ndarray
) -> tuple[float, float, float]:
    """Torques generated by the contact forces about their own joints.

    Valid only for full contact (k1*k2*k3 != 0); otherwise callers must
    go through the reduced system of :func:`contact_forces`.
    """
    k2 = jac[1, 1]
    k3 = jac[2, 2]
    if jac[0, 0] == 0.0 or k2 == 0.0 or k3 == 0.0:
        raise SingularContactError(
            "k1*k2*k3 = 0: contact-torque map undefined; use the reduced-system contact_forces"
        )
    r12 = jac[1, 0]
    r13 = jac[2, 0]
    r23 = jac[2, 1]
    t1, t2, t3 = float(tau_prime[0]), float(tau_prime[1]), float(tau_prime[2])
    return (
        t1 - (r12 / k2) * t2 + ((r12 * r23 - k2 * r13) / (k2 * k3)) * t3,
        t2 - (r23 / k3) * t3,
        t3,
    )


def power_balance(
    t: np.ndarray, omega_a: np.ndarray,
    f: np.ndarray, v: np.ndarray,
    tau: np.ndarray, omega: np.ndarray,
) -> float:
    """Max pairwise relative residual of the three virtual-power forms.

    Input power t . omega_a must equal the contact power F . v and the
    joint power tau . theta_dot for any consistent snapshot.
    """
    p_in = float(np.dot(t, omega_a))
    p_contact = float(np.dot(f, v))
    p_joint = float(np.dot(tau, omega))
    scale = max(abs(p_in), abs(p_contact), abs(p_joint))
    if scale == 0.0:
        return 0.0
    return max(
        abs(p_in - p_contact), abs(p_in - p_joint), abs(p_contact - p_joint)
    ) / scale


# ---------------------------------------------------------------------------
# Vectorized mirrors (used on whole trace segments)
# ---------------------------------------------------------------------------

def transmission_ratio_arrays(g: FingerGeometry, theta_a) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(X1, X2, X3) sample arrays; vector mirror of :func:`transmission_ratios`."""
    theta_a = np.asarray(theta_a, dtype=float)
    out = []
    for i in range(3):
        la, lia, lic, lib = g.La, g.Lia[i], g.Lic[i], g.Lib[i]
        u = g.lam[i] + theta_a
        obx = -la * np.cos(u)
        oby = la * np.sin(u)
        dx = lia - obx
        dy = -oby
        d = np.hypot(dx, dy)
        a = (d * d + lib * lib - lic * lic) / (2.0 * d)
        h2 = lib * lib - a * a
        if np.any(h2 < -1e-9):
            raise NoSolutionError(f"four-bar {i + 1} disassembles along the array")
        h = np.sqrt(np.maximum(h2, 0.0))
        ux, uy = dx / d, dy / d
        y_plus = oby + a * uy + h * ux
        y_minus = oby + a * uy - h * ux
        take_plus = y_plus >= y_minus
        ocx = np.where(take_plus, obx + a * ux - h * uy, obx + a * ux + h * uy)
        ocy = np.where(take_plus, y_plus, y_minus)
        if np.any(ocy <= 0.0):
            raise NoSolutionError(f"four-bar {i + 1} hits its dead point along the array")
        phi = np.arctan2(ocy, lia - ocx)
        den = la * np.sin(u) - lic * np.sin(phi)
        xv = la * (lia * np.sin(u) + lic * np.sin(phi - u)) / den
        out.append(1.0 - lia / xv)
    return out[0], out[1], out[2]


def contact_forces_arrays(
    g: FingerGeometry,
    k: tuple[float, float, float],
    mask: tuple[bool, bool, bool],
    x1, x2, x3, tau_a, d2, d3, theta2, theta3,
):
    """Per-sample contact forces (N) for one fixed mask pattern.

    Same back-substitution as the reduced-system solve in
    :func:`contact_forces`: inactive phalanges carry zero force and
    their equations drop out.  Arms in mm, torques in N.m.
    """
    tau_a = np.asarray(tau_a, dtype=float)
    k1m, k2m, k3m = (ki * 1e-3 for ki in k)
    tp1 = x1 * tau_a
    tp2 = x2 * tau_a - g.K2 * np.asarray(d2, dtype=float)
    tp3 = x3 * tau_a - g.K3 * np.asarray(d3, dtype=float)
    r12 = (k[1] + g.L1 * np.cos(theta2)) * 1e-3
    r13 = (k[2] + g.L1 * np.cos(np.asarray(theta2) + theta3) + g.L2 * np.cos(theta3)) * 1e-3
    r23 = (k[2] + g.L2 * np.cos(theta3)) * 1e-3
    z = np.zeros_like(tau_a)
    f3 = tp3 / k3m if mask[2] else z
    f2 = (tp2 - r23 * f3) / k2m if mask[1] else z
    f1 = (tp1 - r12 * f2 - r13 * f3) / k1m if mask[0] else z
    return f1, f2, f3


# ---------------------------------------------------------------------------
# Pose-chain helpers and the composed force solution
# ---------------------------------------------------------------------------

def contact_point(
    g: FingerGeometry, theta1: float, theta2: float, theta3: float,
    i: int, k_i: float,
) -> PlanarPoint:
    """Position of the contact point at arm k_i on phalange i (0-based)."""
    angles = (theta1, theta1 + theta2, theta1 + theta2 + theta3)
    x = y = 0.0
    for j, length in zip(range(i), g.link_lengths):
        x += length * math.cos(angles[j])
        y += length * math.sin(angles[j])
    x += k_i * math.cos(angles[i])
    y += k_i * math.sin(angles[i])
    return PlanarPoint(x, y)


def phalange_normal(theta1: float, theta2: float, theta3: float, i: int) -> tuple[float, float]:
    """Unit normal of phalange i (the direction its contact force acts)."""
    angles = (theta1, theta1 + theta2, theta1 + theta2 + theta3)
    return (-math.sin(angles[i]), math.cos(angles[i]))


@dataclass(frozen=True)
class ForceSolution:
    """Composed kinetostatic solution for one snapshot."""

    f: tuple[float, float, float]          # contact forces, N
    tau_prime: tuple[float, float, float]  # joint torques, N.m
    X: tuple[float, float, float]
    jac: np.ndarray                        # mm entries
    warning: bool = False


def contact_force_solution(
    g: FingerGeometry, s: JointState, contact: ContactState, tau_a: float,
) -> ForceSolution:
    """Forces on the contacting phalanges for a net actuation torque (N.m).

    Spring deflections are derived from the joint state; the Jacobian
    (mm) and the joint torques (N.m) meet through a single N.m -> N.mm
    conversion so forces come out in N.
    """
    validate_contact(g, contact)
    d2, d3 = spring_deflections(g, s)
    trans = transmission_ratios(g, s)
    a = ActuationState(tau_a=tau_a, current=math.nan, delta_theta2=d2, delta_theta3=d3)
    tau_prime = joint_torques(a, trans.X, g)
    jac = jacobian(g, s, contact)
    tau_nmm = np.asarray(tau_prime) * 1e3
    f = contact_forces(jac, tau_nmm, contact.mask)
    return ForceSolution(
        f=tuple(float(x) for x in f),  # type: ignore[arg-type]
        tau_prime=tau_prime,
        X=trans.X,
        jac=jac,
        warning=trans.warning,
    )
