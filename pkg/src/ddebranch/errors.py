"""Exception hierarchy shared across the toolkit.

``BranchBoundarySignal`` is control flow rather than failure: the orbit
solver raises it when a requested amplitude sits on an equilibrium or
the iterate collapses to a constant, which the continuation driver
interprets as having reached a branch boundary.
"""

from __future__ import annotations


class DdeBranchError(Exception):
    """Base class for toolkit errors."""


class ConfigError(DdeBranchError):
    """Bad run configuration or command usage (CLI exit code 2)."""


class NumericalError(DdeBranchError):
    """Numerical failure in a solver or integrator (CLI exit code 3)."""


class VerificationFailure(DdeBranchError):
    """A verification criterion did not pass (CLI exit code 1)."""


class BlowupError(NumericalError):
    def __init__(self, t: float, bound: float):
        super().__init__(f"|x| exceeded {bound:g} at t = {t:.6g}")
        self.t = t
        self.bound = bound


class RangeError(DdeBranchError):
    """Evaluation time outside the covered range of a trajectory."""


class NewtonDivergenceError(NumericalError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual {residual:.3g} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class PeriodRangeError(NumericalError):
    def __init__(self, period: float, p_max: float):
        super().__init__(f"period {period:.6g} left the admissible range (0, {p_max:g}]")
        self.period = period


class SimpleOscillationError(NumericalError):
    """Profile has more than one maximum or minimum per period."""


class OutsideChartError(DdeBranchError):
    """Planar point not covered by the chart (inversion left the annulus)."""


class BranchBoundarySignal(DdeBranchError):
    """Solve hit a branch boundary (equilibrium collapse), not a failure."""

    def __init__(self, message: str, equilibrium: float | None = None):
        super().__init__(message)
        self.equilibrium = equilibrium
