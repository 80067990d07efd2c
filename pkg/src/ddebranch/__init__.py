"""Periodic orbits of scalar delayed-feedback equations x'(t) = r f(x(t), x(t-1)).

Computes, continues, and verifies branches of periodic solutions in the
time-amplitude parametrization, approximates Floquet spectra, and builds
the planar reduction (first integral, companion field, nested projected
orbits).  See README.md for the command-line pipeline.
"""

__version__ = "0.1.0"

from . import _kernels
from .models import ModelDefinition, builtin, certify_feedback, eval_with_grad, parse_model
from .orbits import PeriodicOrbit, locate_depth, orbit_residual, solve_orbit
from .stepping import HistorySegment, Trajectory, integrate, project_planar

__all__ = [
    "__version__",
    "ModelDefinition",
    "PeriodicOrbit",
    "HistorySegment",
    "Trajectory",
    "builtin",
    "parse_model",
    "eval_with_grad",
    "certify_feedback",
    "integrate",
    "project_planar",
    "solve_orbit",
    "orbit_residual",
    "locate_depth",
    "_kernels",
]
