"""Under-actuated 3-phalange gripper simulation and sensor-less force estimation."""

__version__ = "0.1.0"

from .geometry import FingerGeometry, REFERENCE_GEOMETRY, load_geometry, serialize_geometry, validate_geometry
from .kinematics import GraspCase, JointState, PlanarPoint
from .plant_sim import CurrentTrace, GraspScenario, simulate_grasp
from .signal_pipeline import FilterConfig, two_stage_filter
from .mode_detector import ModeModel, load_model, save_model
from .estimator import EstimatorConfig, estimate, evaluate

__all__ = [
    "FingerGeometry",
    "REFERENCE_GEOMETRY",
    "load_geometry",
    "serialize_geometry",
    "validate_geometry",
    "GraspCase",
    "JointState",
    "PlanarPoint",
    "CurrentTrace",
    "GraspScenario",
    "simulate_grasp",
    "FilterConfig",
    "two_stage_filter",
    "ModeModel",
    "load_model",
    "save_model",
    "EstimatorConfig",
    "estimate",
    "evaluate",
    "__version__",
]
