"""Planar finger kinematics: fingertip chain, actuation IK, grasp-case decoupling.

Frame convention (all angles measured CCW from the +x axis):

* frame point F is the origin and the root of the phalange chain,
* the fingertip is ``P = F + L1*e(theta1) + L2*e(beta) + L3*e(alpha)``
  with ``beta = theta1 + theta2`` and ``alpha = beta + theta3``,
* the transmission point C sits on the distal phalange:
  ``C = P - L3*e(alpha) + L3C*e(alpha - gamma)``,
* the driving chain is A -> B -> C with ``A = F + L1a*e(epsilon)``,
  ``B = A + La*e(theta_a)`` and ``C = B + Lb*e(theta_b)``.

The finger is assembled with a fixed elbow orientation at B: the cross
product (B - A) x (C - B) keeps one sign over the whole working space.
All closure solvers select roots by that sign and raise
:class:`AmbiguousBranchError` if both roots ever present the same sign.

Every grasp case of the mode-switch sequence leaves exactly one phalange
degree of freedom, so each decoupled solve reduces to intersecting two
circles; no iterative solver is involved and closure holds to machine
precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .errors import AmbiguousBranchError, LimitError, NoSolutionError, ScenarioError
from .geometry import FingerGeometry

TWO_PI = 2.0 * math.pi

# Elbow orientation of the assembled A->B->C chain: sign of
# (B - A) x (C - B).  Fixed by the reference assembly; see module docstring.
ASSEMBLY_ELBOW_SIGN = -1.0

# Side of the center->B line on which the physical root of every
# decoupling circle-circle solve lies: sign of (B - center) x (Q - center).
PHALANGE_BRANCH_SIGN = -1.0

_LIMIT_TOL = 1e-9


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    w = (a + math.pi) % TWO_PI - math.pi
    return math.pi if w == -math.pi else w


def unit(angle: float) -> tuple[float, float]:
    return (math.cos(angle), math.sin(angle))


@dataclass(frozen=True)
class PlanarPoint:
    """A point in the finger plane, mm."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x!r}, {self.y!r})")

    def __add__(self, other: "PlanarPoint") -> "PlanarPoint":
        return PlanarPoint(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "PlanarPoint") -> "PlanarPoint":
        return PlanarPoint(self.x - other.x, self.y - other.y)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


class GraspCase(Enum):
    """Which phalange meets the object first (drives the decoupling)."""

    DISTAL_FIRST = "distal_first"
    MIDDLE_FIRST = "middle_first"
    PROXIMAL_FIRST = "proximal_first"
    NO_CONTACT = "no_contact"


@dataclass(frozen=True)
class JointState:
    """Instantaneous joint/actuation angles and angular velocities.

    ``omega`` carries (theta_a_dot, theta1_dot, theta2_dot, theta3_dot)
    in rad/s.  ``alpha``/``beta`` are stored (not derived) so that raw,
    possibly non-chain states can be represented; states built through
    :func:`state_from_joint_angles` always satisfy
    ``beta = theta1 + theta2`` and ``alpha = beta + theta3``.
    """

    theta_a: float
    theta_b: float
    theta1: float
    theta2: float
    theta3: float
    alpha: float
    beta: float
    omega: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def joint_angles(self) -> tuple[float, float, float]:
        return (self.theta1, self.theta2, self.theta3)


@dataclass(frozen=True)
class ContactAngles:
    """Joint angles frozen at contact onset (only the relevant ones set)."""

    theta1: float | None = None
    theta2: float | None = None
    theta3: float | None = None


def check_limits(g: FingerGeometry, theta1: float, theta2: float) -> None:
    lo1, hi1 = g.theta1_range
    lo2, hi2 = g.theta2_range
    if not (lo1 - _LIMIT_TOL <= theta1 <= hi1 + _LIMIT_TOL):
        raise LimitError(
            f"theta1={math.degrees(theta1):.4f} deg outside "
            f"[{math.degrees(lo1):.4f}, {math.degrees(hi1):.4f}] deg"
        )
    if not (lo2 - _LIMIT_TOL <= theta2 <= hi2 + _LIMIT_TOL):
        raise LimitError(
            f"theta2={math.degrees(theta2):.4f} deg outside "
            f"[{math.degrees(lo2):.4f}, {math.degrees(hi2):.4f}] deg"
        )


# ---------------------------------------------------------------------------
# Forward chain
# ---------------------------------------------------------------------------

def forward_fingertip(g: FingerGeometry, s: JointState, enforce_limits: bool = True) -> PlanarPoint:
    """Fingertip position P from (theta1, beta, alpha)."""
    if enforce_limits:
        check_limits(g, s.theta1, s.theta2)
    px = g.L1 * math.cos(s.theta1) + g.L2 * math.cos(s.beta) + g.L3 * math.cos(s.alpha)
    py = g.L1 * math.sin(s.theta1) + g.L2 * math.sin(s.beta) + g.L3 * math.sin(s.alpha)
    return PlanarPoint(px, py)


def solve_py(g: FingerGeometry, p_x: float, alpha: float, beta: float) -> float:
    """Recover the fingertip height p_y from p_x and the two orientations.

    Eliminating the proximal angle from the chain gives a quadratic in
    p_y; the root with the positive square-root sign is the exterior
    (assembled) configuration.  Raises :class:`NoSolutionError` when p_x
    is unreachable.
    """
    k1 = 2.0 * (g.L2 * math.cos(beta) + g.L3 * math.cos(alpha))
    k2 = 2.0 * (g.L2 * math.sin(beta) + g.L3 * math.sin(alpha))
    k3 = (g.L2 ** 2 + g.L3 ** 2 - g.L1 ** 2
          + 2.0 * g.L2 * g.L3 * math.cos(alpha - beta))
    disc = k2 ** 2 - 4.0 * (p_x ** 2 - k1 * p_x + k3)
    if disc < 0.0:
        if disc > -1e-9 * max(1.0, k2 ** 2):
            disc = 0.0  # tangent within round-off
        else:
            raise NoSolutionError(f"fingertip x={p_x!r} mm unreachable (discriminant {disc!r})")
    return 0.5 * (k2 + math.sqrt(disc))


def point_c(g: FingerGeometry, p: PlanarPoint, alpha: float) -> PlanarPoint:
    """Transmission point C on the distal phalange, from the fingertip P."""
    cx = p.x - g.L3 * math.cos(alpha) + g.L3C * math.cos(alpha - g.gamma)
    cy = p.y - g.L3 * math.sin(alpha) + g.L3C * math.sin(alpha - g.gamma)
    return PlanarPoint(cx, cy)


def point_c_from_thetas(g: FingerGeometry, theta1: float, theta2: float, theta3: float) -> PlanarPoint:
    beta = theta1 + theta2
    alpha = beta + theta3
    cx = (g.L1 * math.cos(theta1) + g.L2 * math.cos(beta)
          + g.L3C * math.cos(alpha - g.gamma))
    cy = (g.L1 * math.sin(theta1) + g.L2 * math.sin(beta)
          + g.L3C * math.sin(alpha - g.gamma))
    return PlanarPoint(cx, cy)


# ---------------------------------------------------------------------------
# Inverse actuation
# ---------------------------------------------------------------------------

def actuation_rho(g: FingerGeometry, c: PlanarPoint) -> tuple[float, float, float]:
    """Coefficients of ``rho1*cos(ta) + rho2*sin(ta) + rho3 = 0``.

    Derived by expanding the A->B->C closure directly (the closed form
    this package uses everywhere; a transcription with a stray L1a
    prefactor circulates and does not satisfy the closure).
    """
    ax = g.L1a * math.cos(g.epsilon)
    ay = g.L1a * math.sin(g.epsilon)
    dx = c.x - ax
    dy = c.y - ay
    rho1 = 2.0 * g.La * (ax - c.x)
    rho2 = 2.0 * g.La * (ay - c.y)
    rho3 = dx * dx + dy * dy + g.La ** 2 - g.Lb ** 2
    return rho1, rho2, rho3


def inverse_actuation(g: FingerGeometry, c: PlanarPoint) -> float:
    """Actuation angle theta_a that places the A->B->C chain onto C.

    Uses the tan-half-angle quadratic and returns the root with the
    positive square-root sign (the exterior assembly).  Raises
    :class:`NoSolutionError` when C is outside the reachable annulus.
    """
    rho1, rho2, rho3 = actuation_rho(g, c)
    disc = rho2 ** 2 + rho1 ** 2 - rho3 ** 2
    if disc < 0.0:
        scale = max(1.0, rho1 ** 2 + rho2 ** 2)
        if disc > -1e-9 * scale:
            disc = 0.0
        else:
            raise NoSolutionError(
                f"point C=({c.x!r}, {c.y!r}) unreachable by the actuation chain"
            )
    lead = rho3 - rho1
    root = math.sqrt(disc)
    if abs(lead) < 1e-12 * max(1.0, abs(rho1), abs(rho3)):
        if rho2 == 0.0:
            raise NoSolutionError("degenerate actuation closure (rho coefficients vanish)")
        t = -(rho1 + rho3) / (2.0 * rho2)
    else:
        t = (-rho2 + root) / lead
    return wrap_angle(2.0 * math.atan(t))


def actuation_closure_residual(g: FingerGeometry, c: PlanarPoint, theta_a: float) -> float:
    """|BC| - Lb for the given actuation angle (zero iff closed)."""
    ax = g.L1a * math.cos(g.epsilon)
    ay = g.L1a * math.sin(g.epsilon)
    bx = ax + g.La * math.cos(theta_a)
    by = ay + g.La * math.sin(theta_a)
    return math.hypot(c.x - bx, c.y - by) - g.Lb


def theta_b_from(g: FingerGeometry, c: PlanarPoint, theta_a: float) -> float:
    ax = g.L1a * math.cos(g.epsilon)
    ay = g.L1a * math.sin(g.epsilon)
    bx = ax + g.La * math.cos(theta_a)
    by = ay + g.La * math.sin(theta_a)
    return math.atan2(c.y - by, c.x - bx)


def state_from_joint_angles(
    g: FingerGeometry,
    theta1: float,
    theta2: float,
    theta3: float,
    omega: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0),
    enforce_limits: bool = True,
) -> JointState:
    """Build a fully consistent JointState (theta_a, theta_b via IK)."""
    if enforce_limits:
        check_limits(g, theta1, theta2)
    beta = theta1 + theta2
    alpha = beta + theta3
    c = point_c_from_thetas(g, theta1, theta2, theta3)
    theta_a = inverse_actuation(g, c)
    theta_b = theta_b_from(g, c, theta_a)
    return JointState(
        theta_a=theta_a, theta_b=theta_b,
        theta1=theta1, theta2=theta2, theta3=theta3,
        alpha=alpha, beta=beta, omega=omega,
    )


# ---------------------------------------------------------------------------
# Grasp-case decoupling
# ---------------------------------------------------------------------------

def _circle_branch(
    cx0: float, cy0: float, r0: float, cx1: float, cy1: float, r1: float,
    branch_sign: float = PHALANGE_BRANCH_SIGN,
) -> tuple[float, float]:
    """Intersection of two circles on the requested side of the center line.

    ``branch_sign`` is the sign of (c1 - c0) x (Q - c0) of the returned
    point Q.  Tangent intersections (both roots coincide) are returned
    regardless of side.  Raises :class:`NoSolutionError` when the
    circles do not meet and :class:`AmbiguousBranchError` for a
    degenerate request.
    """
    if branch_sign not in (-1.0, 1.0):
        raise AmbiguousBranchError(f"branch sign must be +-1, got {branch_sign!r}")
    dx = cx1 - cx0
    dy = cy1 - cy0
    d = math.hypot(dx, dy)
    if d < 1e-12:
        raise NoSolutionError("coincident circle centers in closure solve")
    a = (d * d + r0 * r0 - r1 * r1) / (2.0 * d)
    h2 = r0 * r0 - a * a
    if h2 < 0.0:
        if h2 > -1e-9 * max(1.0, r0 * r0):
            h2 = 0.0
        else:
            raise NoSolutionError(
                f"closure infeasible: circles (r={r0!r}, r={r1!r}) at distance {d!r} do not meet"
            )
    h = math.sqrt(h2)
    ux, uy = dx / d, dy / d
    mx, my = cx0 + a * ux, cy0 + a * uy
    # Q = m + s*h*perp(u) has (c1-c0) x (Q-c0) = s*h*d.
    return (mx + branch_sign * h * -uy, my + branch_sign * h * ux)


def elbow_sign(g: FingerGeometry, theta_a: float, c: PlanarPoint) -> float:
    """Sign of the transmission elbow (B - A) x (C - B)."""
    ax = g.L1a * math.cos(g.epsilon)
    ay = g.L1a * math.sin(g.epsilon)
    bx = ax + g.La * math.cos(theta_a)
    by = ay + g.La * math.sin(theta_a)
    cross = (bx - ax) * (c.y - by) - (by - ay) * (c.x - bx)
    return math.copysign(1.0, cross)


def _solve_parallel_theta1(g: FingerGeometry, theta_a: float) -> float:
    """theta1 from theta_a with alpha/beta at their parallel constants."""
    ax = g.L1a * math.cos(g.epsilon)
    ay = g.L1a * math.sin(g.epsilon)
    bx = ax + g.La * math.cos(theta_a)
    by = ay + g.La * math.sin(theta_a)
    k0x = g.L2 * math.cos(g.beta_parallel) + g.L3C * math.cos(g.alpha_parallel - g.gamma)
    k0y = g.L2 * math.sin(g.beta_parallel) + g.L3C * math.sin(g.alpha_parallel - g.gamma)
    q = _circle_branch(k0x, k0y, g.L1, bx, by, g.Lb)
    return math.atan2(q[1] - k0y, q[0] - k0x)


def solve_coupled_wrap(
    g: FingerGeometry, theta_a: float, theta1: float, theta2_0: float, theta3_0: float
) -> float:
    """Common spring-deflection advance of joints 2 and 3 (proximal-first wrap).

    With the proximal frozen, the two equal-stiffness joint springs
    deflect together: theta2 = theta2_0 + delta, theta3 = theta3_0 +
    delta.  The closure |C(delta) - B(theta_a)| = Lb determines delta.
    """
    ax = g.L1a * math.cos(g.epsilon)
    ay = g.L1a * math.sin(g.epsilon)
    bx = ax + g.La * math.cos(theta_a)
    by = ay + g.La * math.sin(theta_a)

    def residual(delta: float) -> float:
        c = point_c_from_thetas(g, theta1, theta2_0 + delta, theta3_0 + delta)
        return math.hypot(c.x - bx, c.y - by) - g.Lb

    lo = -5.0 * math.pi / 180.0
    hi = min(g.theta2_range[1] - theta2_0, math.pi / 2 - theta3_0) + 1e-9
    if hi <= lo:
        raise NoSolutionError("no wrap headroom left for the coupled joints")
    r_lo = residual(lo)
    r_hi = residual(hi)
    if r_lo == 0.0:
        return lo
    if r_hi == 0.0:
        return hi
    if r_lo * r_hi > 0.0:
        raise NoSolutionError(
            f"coupled-wrap closure has no root for theta_a={theta_a!r} "
            f"(residuals {r_lo:.6g}, {r_hi:.6g})"
        )
    return float(brentq(residual, lo, hi, xtol=1e-14, rtol=8.9e-16))


def decouple_joints(
    g: FingerGeometry,
    case: GraspCase,
    theta_a: float,
    contact_angles: ContactAngles | None = None,
    enforce_limits: bool = True,
) -> tuple[float, float, float]:
    """Joint angles (theta1, theta2, theta3) for the actuation angle theta_a.

    The grasp case fixes which joints are frozen at their contact-onset
    values and which single degree of freedom follows the actuation:

    * NO_CONTACT / DISTAL_FIRST: parallel mode; alpha and beta hold the
      configured constants, theta1 follows theta_a (theta2 reciprocal).
    * MIDDLE_FIRST: theta1, theta2 frozen; theta3 follows.
    * PROXIMAL_FIRST: theta1 frozen; the equal-stiffness springs at
      joints 2 and 3 deflect together, so theta2 and theta3 advance by
      a common closure-determined amount.

    Frozen joints are returned bit-identical to the onset values.
    """
    ca = contact_angles or ContactAngles()

    if case in (GraspCase.NO_CONTACT, GraspCase.DISTAL_FIRST):
        theta1 = _solve_parallel_theta1(g, theta_a)
        theta2 = g.beta_parallel - theta1
        theta3 = g.alpha_parallel - g.beta_parallel
    elif case is GraspCase.MIDDLE_FIRST:
        if ca.theta1 is None or ca.theta2 is None:
            raise ValueError("MIDDLE_FIRST requires frozen theta1 and theta2")
        theta1 = ca.theta1
        theta2 = ca.theta2
        beta = theta1 + theta2
        dxy = (g.L1 * math.cos(theta1) + g.L2 * math.cos(beta),
               g.L1 * math.sin(theta1) + g.L2 * math.sin(beta))
        ax = g.L1a * math.cos(g.epsilon)
        ay = g.L1a * math.sin(g.epsilon)
        bx = ax + g.La * math.cos(theta_a)
        by = ay + g.La * math.sin(theta_a)
        q = _circle_branch(dxy[0], dxy[1], g.L3C, bx, by, g.Lb)
        theta3 = wrap_angle(math.atan2(q[1] - dxy[1], q[0] - dxy[0]) + g.gamma - beta)
    elif case is GraspCase.PROXIMAL_FIRST:
        if ca.theta1 is None or ca.theta2 is None or ca.theta3 is None:
            raise ValueError("PROXIMAL_FIRST requires all three onset angles")
        theta1 = ca.theta1
        delta = solve_coupled_wrap(g, theta_a, ca.theta1, ca.theta2, ca.theta3)
        theta2 = ca.theta2 + delta
        theta3 = ca.theta3 + delta
    else:  # pragma: no cover - exhaustive enum
        raise ValueError(f"unknown grasp case {case!r}")

    if enforce_limits:
        check_limits(g, theta1, theta2)
    return (theta1, theta2, theta3)


def decoupled_state(
    g: FingerGeometry,
    case: GraspCase,
    theta_a: float,
    contact_angles: ContactAngles | None = None,
    enforce_limits: bool = True,
) -> JointState:
    """Full JointState for the decoupled solve (theta_b included)."""
    theta1, theta2, theta3 = decouple_joints(g, case, theta_a, contact_angles, enforce_limits)
    c = point_c_from_thetas(g, theta1, theta2, theta3)
    return JointState(
        theta_a=theta_a,
        theta_b=theta_b_from(g, c, theta_a),
        theta1=theta1, theta2=theta2, theta3=theta3,
        alpha=theta1 + theta2 + theta3, beta=theta1 + theta2,
    )


def spring_deflections(g: FingerGeometry, s: JointState) -> tuple[float, float]:
    """Torsion-spring deflections (d_theta2, d_theta3) of joints O2, O3.

    The springs rest in the parallel-coupled pose: deflection 2 is how
    far the intermediate orientation has risen above the parallel
    constant, deflection 3 the relative distal-intermediate angle above
    its straight rest.
    """
    d2 = (s.theta1 + s.theta2) - g.beta_parallel
    d3 = s.theta3 - (g.alpha_parallel - g.beta_parallel)
    return (d2, d3)


# ---------------------------------------------------------------------------
# Vectorized closed forms (array mirrors of the scalar solvers above)
# ---------------------------------------------------------------------------

def point_c_array(g: FingerGeometry, t1, t2, t3):
    """Vector form of :func:`point_c_from_thetas`; returns (cx, cy) arrays."""
    t1 = np.asarray(t1, dtype=float)
    beta = t1 + t2
    alpha = beta + t3
    cx = g.L1 * np.cos(t1) + g.L2 * np.cos(beta) + g.L3C * np.cos(alpha - g.gamma)
    cy = g.L1 * np.sin(t1) + g.L2 * np.sin(beta) + g.L3C * np.sin(alpha - g.gamma)
    return cx, cy


def inverse_actuation_array(g: FingerGeometry, cx, cy) -> np.ndarray:
    """Vector form of :func:`inverse_actuation` (positive-sign root)."""
    ax = g.L1a * math.cos(g.epsilon)
    ay = g.L1a * math.sin(g.epsilon)
    cx = np.asarray(cx, dtype=float)
    cy = np.asarray(cy, dtype=float)
    rho1 = 2.0 * g.La * (ax - cx)
    rho2 = 2.0 * g.La * (ay - cy)
    rho3 = (cx - ax) ** 2 + (cy - ay) ** 2 + g.La ** 2 - g.Lb ** 2
    disc = rho1 ** 2 + rho2 ** 2 - rho3 ** 2
    if np.any(disc < 0.0):
        raise NoSolutionError("point C outside the reachable annulus of the actuation chain")
    t = (-rho2 + np.sqrt(disc)) / (rho3 - rho1)
    return 2.0 * np.arctan(t)


def _circle_branch_array(cx0, cy0, r0, bx, by, r1):
    dx = bx - cx0
    dy = by - cy0
    d = np.hypot(dx, dy)
    a = (d * d + r0 * r0 - r1 * r1) / (2.0 * d)
    h2 = r0 * r0 - a * a
    if np.any(h2 < -1e-9 * max(1.0, r0 * r0)):
        raise NoSolutionError("closure infeasible somewhere along the array")
    h = np.sqrt(np.maximum(h2, 0.0))
    ux, uy = dx / d, dy / d
    # PHALANGE_BRANCH_SIGN = -1 side, same as the scalar _circle_branch
    return cx0 + a * ux + h * uy, cy0 + a * uy - h * ux


def parallel_theta1_array(g: FingerGeometry, theta_a) -> np.ndarray:
    """Vector form of the parallel-mode theta1(theta_a) solve."""
    theta_a = np.asarray(theta_a, dtype=float)
    ax = g.L1a * math.cos(g.epsilon)
    ay = g.L1a * math.sin(g.epsilon)
    bx = ax + g.La * np.cos(theta_a)
    by = ay + g.La * np.sin(theta_a)
    k0x = g.L2 * math.cos(g.beta_parallel) + g.L3C * math.cos(g.alpha_parallel - g.gamma)
    k0y = g.L2 * math.sin(g.beta_parallel) + g.L3C * math.sin(g.alpha_parallel - g.gamma)
    qx, qy = _circle_branch_array(k0x, k0y, g.L1, bx, by, g.Lb)
    return np.arctan2(qy - k0y, qx - k0x)


def middle_theta3_array(g: FingerGeometry, theta_a, theta1: float, theta2: float) -> np.ndarray:
    """Vector form of the middle-first theta3(theta_a) solve."""
    theta_a = np.asarray(theta_a, dtype=float)
    beta = theta1 + theta2
    dx0 = g.L1 * math.cos(theta1) + g.L2 * math.cos(beta)
    dy0 = g.L1 * math.sin(theta1) + g.L2 * math.sin(beta)
    ax = g.L1a * math.cos(g.epsilon)
    ay = g.L1a * math.sin(g.epsilon)
    bx = ax + g.La * np.cos(theta_a)
    by = ay + g.La * np.sin(theta_a)
    qx, qy = _circle_branch_array(dx0, dy0, g.L3C, bx, by, g.Lb)
    raw = np.arctan2(qy - dy0, qx - dx0) + g.gamma - beta
    return (raw + math.pi) % (2.0 * math.pi) - math.pi


# ---------------------------------------------------------------------------
# Object size <-> contact-angle calibration
# ---------------------------------------------------------------------------
#
# The object is abstracted to the proximal angle at which its first phalange
# contact occurs.  The documented mapping uses the palm opening between the
# two mirror fingers: opening(theta1) = 2 * (L1*cos(theta1) + offset), with
# the offset chosen so theta1 = 110 deg corresponds to a 1.85 mm opening
# (thin coin) and theta1 = 20 deg to ~130 mm (a 125 mm cube fits).

OPENING_OFFSET_MM = 18.026007166283436

SIZE_RANGE_MM = (1.85, 125.0)


def opening_width(g: FingerGeometry, theta1: float) -> float:
    return 2.0 * (g.L1 * math.cos(theta1) + OPENING_OFFSET_MM)


def theta1_for_size(g: FingerGeometry, size_mm: float) -> float:
    """Proximal angle at contact onset for an object of the given size."""
    lo, hi = SIZE_RANGE_MM
    if not (lo <= size_mm <= hi):
        raise ScenarioError(f"object size {size_mm!r} mm outside [{lo}, {hi}] mm")
    arg = (0.5 * size_mm - OPENING_OFFSET_MM) / g.L1
    if not -1.0 <= arg <= 1.0:
        raise ScenarioError(f"object size {size_mm!r} mm outside the opening range")
    return math.acos(arg)


def size_for_theta1(g: FingerGeometry, theta1: float) -> float:
    return opening_width(g, theta1)


def envelope_wrap(g: FingerGeometry, size_mm: float) -> tuple[float, float]:
    """Enveloping wrap advances (d_theta2, d_theta3) in rad for an object size.

    Calibration rule shared by the plant and the estimator: larger
    objects engage more wrap (normalized against the graspable band
    above 40 mm), which is what makes the settled post-contact current
    grow with object size.
    """
    s_hat = min(1.0, max(0.0, (size_mm - 40.0) / (SIZE_RANGE_MM[1] - 40.0)))
    d2 = math.radians(6.0 + 9.0 * s_hat)
    d3 = math.radians(16.0 + 22.0 * s_hat)
    return (d2, d3)
