"""Exception hierarchy shared across the toolkit."""


class GripstatError(Exception):
    """Base class for all toolkit errors."""


class GeometryValidationError(GripstatError):
    """Finger geometry violates a mechanical-consistency invariant."""


class GeometryParseError(GripstatError):
    """Geometry configuration document is malformed or incomplete."""


class LimitError(GripstatError):
    """A joint angle lies outside its mechanical range."""


class NoSolutionError(GripstatError):
    """A closure equation has no real solution (target unreachable)."""


class AmbiguousBranchError(GripstatError):
    """Both closure roots are geometrically admissible; refusing to guess."""


class SingularContactError(GripstatError):
    """Contact-arm configuration makes the force system singular."""


class DegenerateICError(GripstatError):
    """Instantaneous center at infinity (pure-translation instant)."""


class ScenarioError(GripstatError):
    """Grasp scenario is infeasible for the configured gripper."""


class ModelFormatError(GripstatError):
    """Model document is corrupt or truncated."""


class ModelVersionError(GripstatError):
    """Model document was written by an incompatible format version."""


class DomainError(GripstatError):
    """Query lies outside a fitted or calibrated domain."""
