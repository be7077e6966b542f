"""Fixed finger geometry: parameters, validation, and config-file I/O.

Canonical units everywhere inside the package: lengths in mm, angles in
rad, torsional stiffness in N.m/rad, motor torque constant in N.m/A.
Unit conversions happen only at I/O boundaries (the config document
declares the canonical unit set and is rejected otherwise).

Conventions baked into the parameter set:

* The finger is a serial 3R chain rooted at the frame point F (origin).
  Phalange link lengths ``L1, L2, L3``; absolute phalange orientations
  are ``theta1`` (proximal), ``beta = theta1 + theta2`` (intermediate)
  and ``alpha = beta + theta3`` (distal).
* The actuation joint A sits at ``L1a`` from F along direction
  ``epsilon``;  the driving transmission is the two-link chain
  A -> B -> C with lengths ``La`` and ``Lb``; C is the point on the
  distal phalange at ``L3C`` from joint D, offset by the fixed angle
  ``gamma`` from the phalange axis.
* During free (parallel-mode) motion the intermediate and distal
  orientations hold the configured constants ``beta_parallel`` /
  ``alpha_parallel``.
* Per-phalange transmission four-bars are abstracted by the declared
  constants ``Lia[i]`` (actuation joint to phalange joint), ``Lic[i]``
  (phalange joint to coupler joint), ``Lib[i]`` (coupler length) and
  the input offset angles ``lam[i]``; see :mod:`gripstat.statics`.
* ``deij`` holds the four side lengths (DE, EI, IJ, JD) of the fixed
  parallelogram riding on the intermediate phalange.  DE is the
  phalange itself, so DE must equal L2 and opposite sides must match.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from .errors import GeometryParseError, GeometryValidationError

_DEG = math.pi / 180.0

# Keys whose values are vectors in the config document.
_VECTOR_FIELDS = {
    "Lia": 3,
    "Lic": 3,
    "Lib": 3,
    "lambda": 3,
    "theta1_range": 2,
    "theta2_range": 2,
    "deij": 4,
}

_UNITS_LINE = "units mm rad N.m/rad N.m/A"

# Hard mechanical stops of the finger; declared ranges must stay inside.
THETA1_HARD_LIMIT = (20.0 * _DEG, 110.0 * _DEG)
THETA2_HARD_LIMIT = (0.0, 90.0 * _DEG)

_PARALLELOGRAM_TOL = 1e-9  # mm


@dataclass(frozen=True)
class FingerGeometry:
    """All fixed parameters of one finger.  Immutable after construction."""

    L1: float
    L2: float
    L3: float
    La: float
    Lb: float
    L1a: float
    L3C: float
    epsilon: float
    gamma: float
    Lia: tuple[float, float, float]
    Lic: tuple[float, float, float]
    Lib: tuple[float, float, float]
    lam: tuple[float, float, float]
    K2: float
    K3: float
    theta1_range: tuple[float, float]
    theta2_range: tuple[float, float]
    torque_constant_A: float
    screw_gain: float
    alpha_parallel: float = math.pi / 2.0
    beta_parallel: float = math.pi / 2.0
    deij: tuple[float, float, float, float] = field(default=(0.0, 0.0, 0.0, 0.0))

    def __post_init__(self):
        if self.deij == (0.0, 0.0, 0.0, 0.0):
            # Default parallelogram: DE = IJ = L2, EI = JD = L3C.
            object.__setattr__(self, "deij", (self.L2, self.L3C, self.L2, self.L3C))

    @property
    def actuation_point(self) -> tuple[float, float]:
        """Position of the actuation joint A in the frame of F."""
        return (self.L1a * math.cos(self.epsilon), self.L1a * math.sin(self.epsilon))

    @property
    def link_lengths(self) -> tuple[float, float, float]:
        return (self.L1, self.L2, self.L3)


@dataclass
class ValidationReport:
    """Outcome of :func:`validate_geometry`.  Empty violations == consistent."""

    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, message: str) -> None:
        self.violations.append(message)

    def __str__(self) -> str:
        if self.ok:
            return "geometry consistent"
        return "; ".join(self.violations)


def validate_geometry(g: FingerGeometry) -> ValidationReport:
    """Check every mechanical-consistency invariant; report all violations.

    Never raises: callers that need an exception use
    :func:`require_valid`.
    """
    report = ValidationReport()

    scalar_lengths = {
        "L1": g.L1, "L2": g.L2, "L3": g.L3, "La": g.La, "Lb": g.Lb,
        "L1a": g.L1a, "L3C": g.L3C,
    }
    for name, value in scalar_lengths.items():
        if not (value > 0.0 and math.isfinite(value)):
            report.add(f"non-positive length {name}={value!r}")
    for name, vec in (("Lia", g.Lia), ("Lic", g.Lic), ("Lib", g.Lib)):
        for i, value in enumerate(vec):
            if not (value > 0.0 and math.isfinite(value)):
                report.add(f"non-positive length {name}[{i}]={value!r}")

    for name, value in (("K2", g.K2), ("K3", g.K3)):
        if not (value > 0.0 and math.isfinite(value)):
            report.add(f"non-positive spring stiffness {name}={value!r}")

    if not (g.torque_constant_A > 0.0):
        report.add(f"non-positive torque constant {g.torque_constant_A!r}")
    if not (g.screw_gain > 0.0):
        report.add(f"non-positive screw gain {g.screw_gain!r}")

    for name, rng, hard in (
        ("theta1_range", g.theta1_range, THETA1_HARD_LIMIT),
        ("theta2_range", g.theta2_range, THETA2_HARD_LIMIT),
    ):
        lo, hi = rng
        if not lo < hi:
            report.add(f"{name} empty: [{lo!r}, {hi!r}]")
        if lo < hard[0] - 1e-12 or hi > hard[1] + 1e-12:
            report.add(
                f"{name} [{math.degrees(lo):.6g} deg, {math.degrees(hi):.6g} deg] "
                f"exceeds mechanical limit "
                f"[{math.degrees(hard[0]):.6g} deg, {math.degrees(hard[1]):.6g} deg]"
            )

    de, ei, ij, jd = g.deij
    if abs(de - ij) > _PARALLELOGRAM_TOL or abs(ei - jd) > _PARALLELOGRAM_TOL:
        report.add(
            f"fixed parallelogram DEIJ not closed: opposite sides "
            f"({de!r}, {ij!r}) and ({ei!r}, {jd!r}) differ beyond {_PARALLELOGRAM_TOL} mm"
        )
    if abs(de - g.L2) > _PARALLELOGRAM_TOL:
        report.add(f"parallelogram side DE={de!r} must equal L2={g.L2!r}")

    return report


def require_valid(g: FingerGeometry) -> FingerGeometry:
    """Return ``g`` unchanged or raise :class:`GeometryValidationError`."""
    report = validate_geometry(g)
    if not report.ok:
        raise GeometryValidationError(str(report))
    return g


# ---------------------------------------------------------------------------
# Reference parameter set
# ---------------------------------------------------------------------------
#
# The source material gives no numeric link lengths; the values below are
# implementation constants chosen to
#   * satisfy every invariant of validate_geometry,
#   * keep the transmission point C reachable by the A->B->C chain over the
#     whole joint box (theta1 in [20, 110] deg x theta2 in [0, 90] deg x
#     theta3 in [0, 90] deg),
#   * give a maximum opening of ~130 mm (large enough for a 125 mm cube) and
#     a minimum of ~1.85 mm (a coin on edge),
#   * produce positive, well-separated transmission ratios X1 > X2 > X3 over
#     the working actuation range so enveloping grasps load all phalanges
#     toward the object.
#
# Spring stiffness 0.019 N.m/deg per joint and the 1.2 N.m -> 41.76 N.m
# screw amplification (gain 34.8) are taken from the physical gripper this
# model mirrors.

REFERENCE_GEOMETRY = FingerGeometry(
    L1=50.0,
    L2=40.0,
    L3=30.0,
    La=30.0,
    Lb=70.0,
    L1a=20.0,
    L3C=10.0,
    epsilon=math.pi / 2.0,
    gamma=20.0 * _DEG,
    Lia=(55.0, 50.0, 70.0),
    Lic=(85.0, 85.0, 25.0),
    Lib=(60.0, 50.0, 70.0),
    lam=(65.0 * _DEG, -115.0 * _DEG, -45.0 * _DEG),
    K2=0.019 / _DEG,
    K3=0.019 / _DEG,
    theta1_range=(20.0 * _DEG, 110.0 * _DEG),
    theta2_range=(0.0, 90.0 * _DEG),
    torque_constant_A=0.06,
    screw_gain=41.76 / 1.2,
)


# ---------------------------------------------------------------------------
# Config document I/O
# ---------------------------------------------------------------------------

def _field_map(g: FingerGeometry) -> dict[str, object]:
    out: dict[str, object] = {}
    for f in fields(FingerGeometry):
        key = "lambda" if f.name == "lam" else f.name
        out[key] = getattr(g, f.name)
    return out


def serialize_geometry(g: FingerGeometry) -> str:
    """Render ``g`` as the flat key/value config document (full precision)."""
    lines = ["# gripstat finger geometry", _UNITS_LINE]
    for key, value in _field_map(g).items():
        if isinstance(value, tuple):
            lines.append(key + " " + " ".join(repr(float(v)) for v in value))
        else:
            lines.append(f"{key} {float(value)!r}")
    return "\n".join(lines) + "\n"


def load_geometry(text: str) -> FingerGeometry:
    """Parse a geometry config document and validate the result.

    Raises :class:`GeometryParseError` on malformed input or missing
    fields and :class:`GeometryValidationError` on mechanically
    inconsistent values.
    """
    raw: dict[str, list[float]] = {}
    saw_units = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        key = tokens[0]
        if key == "units":
            if line != _UNITS_LINE:
                raise GeometryParseError(
                    f"line {lineno}: unsupported units {line!r}; expected {_UNITS_LINE!r}"
                )
            saw_units = True
            continue
        try:
            values = [float(t) for t in tokens[1:]]
        except ValueError as exc:
            raise GeometryParseError(f"line {lineno}: bad numeric value in {line!r}") from exc
        if not values:
            raise GeometryParseError(f"line {lineno}: field {key!r} has no value")
        if key in raw:
            raise GeometryParseError(f"line {lineno}: duplicate field {key!r}")
        raw[key] = values

    if not saw_units:
        raise GeometryParseError("missing 'units' header line")

    kwargs: dict[str, object] = {}
    for f in fields(FingerGeometry):
        key = "lambda" if f.name == "lam" else f.name
        if key not in raw:
            if f.name in ("alpha_parallel", "beta_parallel", "deij"):
                continue  # have defaults
            raise GeometryParseError(f"missing field {key!r}")
        values = raw.pop(key)
        if key in _VECTOR_FIELDS:
            if len(values) != _VECTOR_FIELDS[key]:
                raise GeometryParseError(
                    f"field {key!r} needs {_VECTOR_FIELDS[key]} values, got {len(values)}"
                )
            kwargs[f.name] = tuple(values)
        else:
            if len(values) != 1:
                raise GeometryParseError(f"field {key!r} needs 1 value, got {len(values)}")
            kwargs[f.name] = values[0]

    if raw:
        raise GeometryParseError(f"unknown fields: {sorted(raw)}")

    return require_valid(FingerGeometry(**kwargs))


def with_overrides(g: FingerGeometry, **kwargs) -> FingerGeometry:
    """Copy ``g`` with selected fields replaced (does not re-validate)."""
    return replace(g, **kwargs)
