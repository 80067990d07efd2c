"""Forward integration of x'(t) = r f(x(t), x(t-1)) by the method of steps.

The stepper is classical RK4 with a fixed step h = 1/m dividing the
delay exactly, so the propagated discontinuity points always sit on the
mesh.  Delayed values are read from cubic Hermite dense output of the
already-computed solution (never re-integrated).  The hot loop lives in
:mod:`ddebranch._kernels` (compiled when available).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline

from . import _kernels, expressions as ex
from .errors import BlowupError, RangeError
from .models import ModelDefinition

__all__ = ["HistorySegment", "Trajectory", "integrate", "project_planar"]

DEFAULT_STEPS_PER_UNIT = 128
DEFAULT_BLOWUP = 1e6


def _hermite(y0, y1, d0, d1, h, frac):
    """Cubic Hermite value at relative position frac in [0, 1]."""
    t = frac
    h00 = (1.0 + 2.0 * t) * (1.0 - t) ** 2
    h10 = t * (1.0 - t) ** 2
    h01 = t * t * (3.0 - 2.0 * t)
    h11 = t * t * (t - 1.0)
    return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1


def _hermite_deriv(y0, y1, d0, d1, h, frac):
    t = frac
    g00 = 6.0 * t * (t - 1.0)
    g10 = (1.0 - t) * (1.0 - 3.0 * t)
    g01 = -g00
    g11 = t * (3.0 * t - 2.0)
    return (g00 * y0 + g01 * y1) / h + g10 * d0 + g11 * d1


class HistorySegment:
    """Initial data on [-1, 0]: samples on a uniform grid, cubic interpolation.

    When derivative samples are supplied the interpolant is the cubic
    Hermite one (this is what trajectory restarts use); otherwise a
    not-a-knot cubic spline through the values supplies the derivatives.
    """

    def __init__(self, samples, derivatives=None):
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 4:
            raise ValueError("history needs at least 4 samples on [-1, 0]")
        self.samples = samples
        self.grid = np.linspace(-1.0, 0.0, samples.size)
        if derivatives is not None:
            derivatives = np.asarray(derivatives, dtype=np.float64)
            if derivatives.shape != samples.shape:
                raise ValueError("derivative samples must match value samples")
            self.derivatives = derivatives
        else:
            spline = CubicSpline(self.grid, samples)
            self.derivatives = spline.derivative()(self.grid)

    @classmethod
    def constant(cls, value: float, n: int = DEFAULT_STEPS_PER_UNIT + 1) -> "HistorySegment":
        return cls(np.full(n, float(value)), np.zeros(n))

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray], n: int = DEFAULT_STEPS_PER_UNIT + 1) -> "HistorySegment":
        grid = np.linspace(-1.0, 0.0, n)
        return cls(np.asarray(fn(grid), dtype=np.float64))

    @classmethod
    def from_expression(cls, text: str, n: int = DEFAULT_STEPS_PER_UNIT + 1) -> "HistorySegment":
        """History given as an expression in the time variable ``u``."""
        prog = ex.compile_ast(ex.parse(text, variables=("u",)), source=text)
        grid = np.linspace(-1.0, 0.0, n)
        return cls(ex.eval_program(prog, grid, 0.0))

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if np.any(theta < -1.0 - 1e-12) or np.any(theta > 1e-12):
            raise RangeError("history evaluation outside [-1, 0]")
        m = self.samples.size - 1
        pos = np.clip((theta + 1.0) * m, 0.0, m)
        k = np.minimum(pos.astype(np.int64), m - 1)
        frac = pos - k
        return _hermite(
            self.samples[k], self.samples[k + 1],
            self.derivatives[k], self.derivatives[k + 1],
            1.0 / m, frac,
        )

    def resample(self, m: int) -> Tuple[np.ndarray, np.ndarray]:
        """Values and derivatives on the m+1 node mesh of [-1, 0]."""
        if self.samples.size == m + 1:
            return self.samples.copy(), self.derivatives.copy()
        grid = np.linspace(-1.0, 0.0, m + 1)
        vals = self(grid)
        h = 1.0 / (self.samples.size - 1)
        pos = np.clip((grid + 1.0) / h, 0.0, self.samples.size - 1)
        k = np.minimum(pos.astype(np.int64), self.samples.size - 2)
        frac = pos - k
        ders = _hermite_deriv(
            self.samples[k], self.samples[k + 1],
            self.derivatives[k], self.derivatives[k + 1],
            h, frac,
        )
        return vals, ders


@dataclass
class Trajectory:
    """Dense-output solution on [0, t_end] with its history on [-1, 0]."""

    model: ModelDefinition
    r: float
    m: int
    values: np.ndarray  # node values, node k at time -1 + k/m
    derivs: np.ndarray
    t_end: float
    domain_violation_t: Optional[float] = None
    _max_residual: Optional[float] = field(default=None, repr=False)

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def times(self) -> np.ndarray:
        return -1.0 + np.arange(self.values.size) / self.m

    def _locate(self, t):
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < -1.0 - 1e-9) or np.any(t > self.t_end + 1e-9):
            raise RangeError(f"time outside [-1, {self.t_end}]")
        pos = np.clip((t + 1.0) * self.m, 0.0, self.values.size - 1.0)
        k = np.minimum(pos.astype(np.int64), self.values.size - 2)
        return k, pos - k

    def value(self, t):
        k, frac = self._locate(t)
        return _hermite(self.values[k], self.values[k + 1], self.derivs[k], self.derivs[k + 1], self.h, frac)

    def deriv(self, t):
        k, frac = self._locate(t)
        return _hermite_deriv(self.values[k], self.values[k + 1], self.derivs[k], self.derivs[k + 1], self.h, frac)

    def project_planar(self, t):
        """(x(t), x(t-1)) read from dense output; exact at mesh points."""
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < 0.0 - 1e-12):
            raise RangeError("planar projection needs t >= 0 so x(t-1) is covered")
        return self.value(t), self.value(t - 1.0)

    def residual(self, t):
        u, v = self.project_planar(t)
        return np.abs(self.deriv(t) - self.r * self.model.f(u, v))

    def max_residual(self, n: int = 2001) -> float:
        if self._max_residual is None:
            ts = np.linspace(0.0, self.t_end, n)
            self._max_residual = float(np.max(self.residual(ts)))
        return self._max_residual

    def segment_at(self, t: float) -> HistorySegment:
        """State segment x_t as a history usable to restart integration."""
        if t < 0.0 or t > self.t_end + 1e-12:
            raise RangeError("segment start must lie in [0, t_end]")
        grid = t + np.linspace(-1.0, 0.0, self.m + 1)
        return HistorySegment(self.value(grid), self.deriv(grid))


def integrate(
    model: ModelDefinition,
    r: float,
    history: Union[HistorySegment, float],
    t_end: float,
    *,
    m: int = DEFAULT_STEPS_PER_UNIT,
    blowup: float = DEFAULT_BLOWUP,
) -> Trajectory:
    """Integrate the delayed-feedback equation from a history segment.

    Leaving the certified rectangle is recorded on the returned
    trajectory (first violation time), not treated as fatal; the blow-up
    guard and expression domain guards abort.
    """
    if t_end <= 0.0:
        raise ValueError("t_end must be positive")
    if isinstance(history, (int, float)):
        history = HistorySegment.constant(float(history), m + 1)

    n_steps = int(np.ceil(t_end * m - 1e-9))
    values = np.zeros(m + n_steps + 1)
    derivs = np.zeros(m + n_steps + 1)
    values[: m + 1], derivs[: m + 1] = history.resample(m)

    ops, iargs, consts = model.kernel_args()
    (u0, u1), (v0, v1) = model.domain
    status, last, viol = _kernels.simulate_scalar(
        ops, iargs, consts, float(r), values, derivs, m, n_steps, blowup, u0, u1, v0, v1
    )
    if status == _kernels.DOMAIN:
        raise ex.DomainError(
            f"model evaluation guard tripped near t = {-1.0 + last / m:.6g}"
        )
    if status == _kernels.BLOWUP:
        raise BlowupError(-1.0 + last / m, blowup)

    return Trajectory(
        model=model,
        r=float(r),
        m=m,
        values=values,
        derivs=derivs,
        t_end=float(t_end),
        domain_violation_t=None if viol < 0 else -1.0 + viol / m,
    )


def project_planar(trajectory: Trajectory, t):
    """Module-level convenience mirroring :meth:`Trajectory.project_planar`."""
    return trajectory.project_planar(t)
