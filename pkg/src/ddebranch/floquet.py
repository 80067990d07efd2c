"""Monodromy approximation, Floquet multipliers, and the adjoint pairing.

The linearization of the flow around a periodic orbit is

    y'(t) = A(t) y(t) + B(t) y(t-1),
    A(t) = r d1f(x(t), x(t-1)),   B(t) = r d2f(x(t), x(t-1)),

and the monodromy map takes an initial segment on [-1, 0] to its image
one (unnormalized) period later.  It is discretized by integrating every
cardinal-basis segment of a uniform mesh with the same RK4/Hermite
stepper family used for the nonlinear flow; the columns are propagated
together as one vector system.

The formal adjoint equation

    w'(t) = -A(t) w(t) - B(t+1) w(t+1)

is solved backwards in time (substituting s = -t turns it into a
forward delay equation), and the time-dependent pairing

    [phiT, phi]_t = phiT(0) phi(0) + Int_0^1 phiT(th) B(t+th) phi(th-1) dth

is evaluated by Gauss-Legendre quadrature.  Along an adjoint pair the
pairing is constant in t; with a forcing l(t) added to the linear
equation its t-derivative is w(t) l(t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import NumericalError
from .models import ModelDefinition
from .orbits import PeriodicOrbit

__all__ = [
    "LinearTrajectory",
    "MonodromyDiscretization",
    "FloquetReport",
    "AdjointSolution",
    "linear_coefficients",
    "integrate_linear",
    "monodromy",
    "floquet_report",
    "adjoint_integrate",
    "bilinear_form",
    "variational_forcing_solution",
]

DEFAULT_BASIS = 64
DEFAULT_LIN_STEPS = 128


def linear_coefficients(orbit: PeriodicOrbit) -> Tuple[Callable, Callable]:
    """Vectorized A(t), B(t) sampled from the orbit interpolant."""
    model = orbit.model

    def coeffs(t):
        t = np.asarray(t, dtype=np.float64)
        x = orbit.x(t)
        xd = orbit.x(t - 1.0)
        _, d1, d2 = model.with_grad(x, xd)
        return orbit.delay * d1, orbit.delay * d2

    def A(t):
        return coeffs(t)[0]

    def B(t):
        return coeffs(t)[1]

    return A, B


@dataclass
class LinearTrajectory:
    """Dense-output solution of the linear delay equation (vector columns)."""

    times: np.ndarray  # (K,)
    values: np.ndarray  # (K, C)
    derivs: np.ndarray  # (K, C)

    def _locate(self, t: float) -> Tuple[int, float]:
        times = self.times
        if t < times[0] - 1e-9 or t > times[-1] + 1e-9:
            raise NumericalError(f"linear trajectory evaluated outside [{times[0]}, {times[-1]}]")
        k = int(np.searchsorted(times, t, side="right")) - 1
        k = min(max(k, 0), times.size - 2)
        h = times[k + 1] - times[k]
        return k, (t - times[k]) / h

    def value(self, t: float) -> np.ndarray:
        k, frac = self._locate(t)
        h = self.times[k + 1] - self.times[k]
        y0, y1 = self.values[k], self.values[k + 1]
        d0, d1 = self.derivs[k], self.derivs[k + 1]
        h00 = (1 + 2 * frac) * (1 - frac) ** 2
        h10 = frac * (1 - frac) ** 2
        h01 = frac * frac * (3 - 2 * frac)
        h11 = frac * frac * (frac - 1)
        return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1

    def deriv(self, t: float) -> np.ndarray:
        k, frac = self._locate(t)
        h = self.times[k + 1] - self.times[k]
        y0, y1 = self.values[k], self.values[k + 1]
        d0, d1 = self.derivs[k], self.derivs[k + 1]
        g00 = 6 * frac * (frac - 1)
        g10 = (1 - frac) * (1 - 3 * frac)
        g01 = -g00
        g11 = frac * (3 * frac - 2)
        return (g00 * y0 + g01 * y1) / h + g10 * d0 + g11 * d1


def _fd_derivative_matrix(n: int, h: float) -> np.ndarray:
    """Fourth-order finite-difference derivative on a uniform mesh."""
    if n < 5:
        raise ValueError("mesh too small for the 5-point derivative")
    D = np.zeros((n, n))
    c = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
    for i in range(2, n - 2):
        D[i, i - 2 : i + 3] = c
    D[0, :5] = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
    D[1, :5] = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0
    D[n - 2, n - 5 :] = -np.array([-3.0, -10.0, 18.0, -6.0, 1.0])[::-1] / 12.0
    D[n - 1, n - 5 :] = -np.array([-25.0, 48.0, -36.0, 16.0, -3.0])[::-1] / 12.0
    return D / h


def integrate_linear(
    A_fn: Callable,
    B_fn: Callable,
    hist_times: np.ndarray,
    hist_values: np.ndarray,
    hist_derivs: np.ndarray,
    t_end: float,
    *,
    m: int = DEFAULT_LIN_STEPS,
    forcing: Optional[Callable] = None,
) -> LinearTrajectory:
    """March y' = A y + B y(.-1) (+ forcing) from t0 = hist_times[-1] to t_end.

    The history may live on its own mesh; forward nodes use step 1/m with
    one trailing partial step to land exactly on ``t_end``.
    """
    t0 = float(hist_times[-1])
    if t_end <= t0:
        raise ValueError("t_end must exceed the history end")
    hist_values = np.atleast_2d(np.asarray(hist_values, dtype=np.float64).T).T
    hist_derivs = np.atleast_2d(np.asarray(hist_derivs, dtype=np.float64).T).T
    n_cols = hist_values.shape[1]

    h = 1.0 / m
    n_full = int(math.floor((t_end - t0) / h + 1e-12))
    steps = [h] * n_full
    rem = (t_end - t0) - n_full * h
    if rem > 1e-12:
        steps.append(rem)

    # the junction node appears twice: once with the history-side slope
    # (for delayed reads inside the data) and once with the equation-side
    # slope (the solution's derivative jumps there when the data is not
    # itself a solution)
    n_hist = hist_times.size
    K = n_hist + 1 + len(steps)
    times = np.empty(K)
    values = np.empty((K, n_cols))
    derivs = np.empty((K, n_cols))
    times[:n_hist] = hist_times
    values[:n_hist] = hist_values
    derivs[:n_hist] = hist_derivs
    times[n_hist] = hist_times[-1]
    values[n_hist] = hist_values[-1]

    # stage times are known in advance; evaluate coefficients in one batch
    node_t = np.empty(len(steps) + 1)
    node_t[0] = t0
    node_t[1:] = t0 + np.cumsum(steps)
    mid_t = node_t[:-1] + 0.5 * np.asarray(steps)
    A_node = np.asarray(A_fn(node_t), dtype=np.float64)
    B_node = np.asarray(B_fn(node_t), dtype=np.float64)
    A_mid = np.asarray(A_fn(mid_t), dtype=np.float64)
    B_mid = np.asarray(B_fn(mid_t), dtype=np.float64)
    if forcing is not None:
        L_node = np.atleast_2d(np.asarray(forcing(node_t), dtype=np.float64).T).T
        L_mid = np.atleast_2d(np.asarray(forcing(mid_t), dtype=np.float64).T).T

    traj = LinearTrajectory(times=times, values=values, derivs=derivs)

    # equation-side derivative on the duplicated junction node
    yd_j = traj_value_upto(traj, n_hist, t0 - 1.0)
    l_j = L_node[0] if forcing is not None else 0.0
    derivs[n_hist] = A_node[0] * values[n_hist] + B_node[0] * yd_j + l_j

    write = n_hist + 1
    for i, step in enumerate(steps):
        t = node_t[i]
        y = values[write - 1]
        yd0 = traj_value_upto(traj, write, t - 1.0)
        ydm = traj_value_upto(traj, write, t + 0.5 * step - 1.0)
        yd1 = traj_value_upto(traj, write, t + step - 1.0)

        l0 = L_node[i] if forcing is not None else 0.0
        lm = L_mid[i] if forcing is not None else 0.0
        l1 = L_node[i + 1] if forcing is not None else 0.0

        k1 = A_node[i] * y + B_node[i] * yd0 + l0
        k2 = A_mid[i] * (y + 0.5 * step * k1) + B_mid[i] * ydm + lm
        k3 = A_mid[i] * (y + 0.5 * step * k2) + B_mid[i] * ydm + lm
        k4 = A_node[i + 1] * (y + step * k3) + B_node[i + 1] * yd1 + l1
        y_new = y + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        times[write] = node_t[i + 1]
        values[write] = y_new
        derivs[write] = A_node[i + 1] * y_new + B_node[i + 1] * yd1 + l1
        write += 1

    return traj


def traj_value_upto(traj: LinearTrajectory, n_valid: int, t: float) -> np.ndarray:
    """Hermite evaluation restricted to the first ``n_valid`` nodes."""
    times = traj.times[:n_valid]
    k = int(np.searchsorted(times, t, side="right")) - 1
    k = min(max(k, 0), n_valid - 2)
    h = traj.times[k + 1] - traj.times[k]
    frac = (t - traj.times[k]) / h
    y0, y1 = traj.values[k], traj.values[k + 1]
    d0, d1 = traj.derivs[k], traj.derivs[k + 1]
    h00 = (1 + 2 * frac) * (1 - frac) ** 2
    h10 = frac * (1 - frac) ** 2
    h01 = frac * frac * (3 - 2 * frac)
    h11 = frac * frac * (frac - 1)
    return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1


# ---------------------------------------------------------------------------
# Monodromy


@dataclass
class MonodromyDiscretization:
    """Dense matrix acting on the mesh samples of history segments."""

    matrix: np.ndarray
    mesh: np.ndarray  # M points on [-1, 0]
    orbit: PeriodicOrbit
    m_steps: int

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def monodromy(orbit: PeriodicOrbit, basis_size: int = DEFAULT_BASIS, *, m_steps: int = DEFAULT_LIN_STEPS) -> MonodromyDiscretization:
    """Time-p image of every Lagrange cardinal segment on a uniform mesh.

    All columns integrate simultaneously (the linearized equation is the
    same for each); the result maps initial mesh samples to the samples
    of the segment at time p.
    """
    if basis_size < 16:
        raise ValueError("basis size must be at least 16")
    M = basis_size
    mesh = np.linspace(-1.0, 0.0, M)
    A_fn, B_fn = linear_coefficients(orbit)
    Dh = _fd_derivative_matrix(M, 1.0 / (M - 1))
    traj = integrate_linear(
        A_fn,
        B_fn,
        mesh,
        np.eye(M),
        Dh @ np.eye(M),
        orbit.period,
        m=m_steps,
    )
    p = orbit.period
    matrix = np.empty((M, M))
    for i, theta in enumerate(mesh):
        matrix[i] = traj.value(p + theta)
    return MonodromyDiscretization(matrix=matrix, mesh=mesh, orbit=orbit, m_steps=m_steps)


@dataclass
class FloquetReport:
    multipliers: np.ndarray  # sorted by modulus, descending
    trivial_error: float
    mu_c: float
    hyperbolic: bool
    spectral_gap: Tuple[float, float]
    mu_c_real: bool
    mu_c_zero_changes: Optional[int]
    warning: Optional[str] = None


def _sign_changes(values: np.ndarray, rel_tol: float = 1e-9) -> int:
    scale = float(np.max(np.abs(values)))
    if scale == 0.0:
        return 0
    sign = np.sign(np.where(np.abs(values) < rel_tol * scale, 0.0, values))
    sign = sign[sign != 0.0]
    return int(np.count_nonzero(sign[1:] != sign[:-1]))


def _propagate_segment(disc: MonodromyDiscretization, segment: np.ndarray) -> np.ndarray:
    """Node values of the linearized solution on [0, p] from one segment."""
    orbit = disc.orbit
    A_fn, B_fn = linear_coefficients(orbit)
    M = disc.mesh.size
    Dh = _fd_derivative_matrix(M, 1.0 / (M - 1))
    traj = integrate_linear(
        A_fn, B_fn, disc.mesh, segment[:, None], (Dh @ segment)[:, None], orbit.period, m=disc.m_steps
    )
    mask = traj.times >= -1e-12
    return traj.values[mask, 0]


def floquet_report(disc: MonodromyDiscretization, *, hyperbolicity_tol: float = 1e-6) -> FloquetReport:
    """Extract multipliers and the critical eigenvalue mu_c.

    mu_c is chosen among the positive real multipliers whose propagated
    eigenfunction changes sign exactly twice per period, excluding the
    trivial candidate (the one aligned with the orbit derivative); if no
    candidate qualifies the second-largest modulus is used with a
    warning.
    """
    orbit = disc.orbit
    evals, evecs = np.linalg.eig(disc.matrix)
    order = np.argsort(-np.abs(evals))
    evals = evals[order]
    evecs = evecs[:, order]

    trivial_error = float(np.min(np.abs(evals - 1.0)))

    xdot_mesh = orbit.xdot(disc.mesh)
    xdot_mesh = xdot_mesh / np.linalg.norm(xdot_mesh)

    candidates: List[Tuple[int, complex]] = []
    for i, mu in enumerate(evals):
        if abs(mu.imag) <= 1e-8 * max(1.0, abs(mu)) and mu.real > 1e-8:
            candidates.append((i, mu))

    best: Optional[Tuple[int, complex, int]] = None
    trivial_index: Optional[int] = None
    annotated = []
    for i, mu in candidates[:8]:
        vec = np.real(evecs[:, i])
        nrm = np.linalg.norm(vec)
        if nrm == 0.0:
            continue
        vec = vec / nrm
        cos_sim = abs(float(np.dot(vec, xdot_mesh)))
        changes = _sign_changes(_propagate_segment(disc, vec))
        annotated.append((i, mu, cos_sim, changes))
    if annotated:
        trivial_index = max(annotated, key=lambda rec: rec[2])[0]
    for i, mu, cos_sim, changes in annotated:
        if i == trivial_index:
            continue
        if changes == 2:
            if best is None or abs(mu.imag) < abs(best[1].imag):
                best = (i, mu, changes)

    warning = None
    if best is not None:
        mu_c = float(best[1].real)
        mu_c_real = True
        zero_changes: Optional[int] = best[2]
    else:
        fallback = evals[1] if evals.size > 1 else evals[0]
        mu_c = float(abs(fallback))
        mu_c_real = bool(abs(fallback.imag) <= 1e-8 * max(1.0, abs(fallback)))
        zero_changes = None
        warning = "no real positive multiplier with two sign changes; using second-largest modulus"

    if mu_c <= 0.0:
        raise NumericalError("critical multiplier came out nonpositive")

    lo, hi = min(1.0, mu_c), max(1.0, mu_c)
    return FloquetReport(
        multipliers=evals,
        trivial_error=trivial_error,
        mu_c=mu_c,
        hyperbolic=bool(abs(mu_c - 1.0) > hyperbolicity_tol),
        spectral_gap=(lo, hi),
        mu_c_real=mu_c_real,
        mu_c_zero_changes=zero_changes,
        warning=warning,
    )


# ---------------------------------------------------------------------------
# Formal adjoint


@dataclass
class AdjointSolution:
    """Backward solution w(t) of the adjoint equation, t in [t_min, t_max]."""

    orbit: PeriodicOrbit
    _reversed: LinearTrajectory
    _offset: float = 0.0

    @property
    def t_min(self) -> float:
        return self._offset - float(self._reversed.times[-1])

    @property
    def t_max(self) -> float:
        return self._offset + 1.0

    def value(self, t: float) -> float:
        return float(self._reversed.value(self._offset - t)[0])

    def deriv(self, t: float) -> float:
        return -float(self._reversed.deriv(self._offset - t)[0])

    def residual(self, n_check: int = 200) -> float:
        """Max defect of w' = -A w - B(t+1) w(t+1) on interior checkpoints."""
        A_fn, B_fn = linear_coefficients(self.orbit)
        ts = np.linspace(self.t_min + 1e-9, self._offset - 1e-9, n_check)
        out = 0.0
        for t in ts:
            lhs = self.deriv(t)
            rhs = -float(A_fn(t)) * self.value(t) - float(B_fn(t + 1.0)) * self.value(t + 1.0)
            out = max(out, abs(lhs - rhs))
        return out


def adjoint_integrate(
    orbit: PeriodicOrbit,
    terminal_values: np.ndarray,
    *,
    t_back: Optional[float] = None,
    terminal_offset: float = 0.0,
    m: int = DEFAULT_LIN_STEPS,
) -> AdjointSolution:
    """Solve the adjoint equation backwards from data on an interval of length 1.

    ``terminal_values`` samples w on a uniform ascending grid of
    [terminal_offset, terminal_offset + 1].  Substituting
    z(s) = w(terminal_offset - s) gives the forward equation
    z'(s) = A(off - s) z(s) + B(off - s + 1) z(s - 1), which reuses the
    linear stepper; the solution covers [t_back, terminal_offset + 1].
    """
    off = float(terminal_offset)
    if t_back is None:
        t_back = off - (orbit.period + 1.0)
    if t_back >= off:
        raise ValueError("t_back must precede the terminal interval")
    terminal_values = np.asarray(terminal_values, dtype=np.float64)
    n = terminal_values.size
    if n < 5:
        raise ValueError("terminal segment needs at least 5 samples")
    A_fn, B_fn = linear_coefficients(orbit)

    def A_rev(s):
        return np.asarray(A_fn(off - np.asarray(s)))

    def B_rev(s):
        return np.asarray(B_fn(off - np.asarray(s) + 1.0))

    z_hist_vals = terminal_values[::-1].copy()
    Dh = _fd_derivative_matrix(n, 1.0 / (n - 1))
    z_hist_ders = Dh @ z_hist_vals
    s_grid = np.linspace(-1.0, 0.0, n)
    traj = integrate_linear(
        A_rev, B_rev, s_grid, z_hist_vals[:, None], z_hist_ders[:, None], off - t_back, m=m
    )
    return AdjointSolution(orbit=orbit, _reversed=traj, _offset=off)


# ---------------------------------------------------------------------------
# Bilinear pairing


def bilinear_form(
    orbit: PeriodicOrbit,
    phi_T: Callable[[float], float],
    phi: Callable[[float], float],
    t: float,
    *,
    n_gauss: int = 64,
    breakpoints: Optional[Sequence[float]] = None,
) -> float:
    """phiT(0) phi(0) + Int_0^1 phiT(th) B(t+th) phi(th-1) dth.

    Solutions produced by the method of steps are only piecewise smooth
    (derivative kinks one delay apart); pass their kink phases through
    ``breakpoints`` so the Gauss-Legendre panels stay spectral.
    """
    _, B_fn = linear_coefficients(orbit)
    nodes, weights = np.polynomial.legendre.leggauss(n_gauss)
    edges = [0.0, 1.0]
    for b in breakpoints or ():
        frac = b % 1.0
        if 1e-12 < frac < 1.0 - 1e-12:
            edges.append(frac)
    edges = sorted(set(edges))
    total = float(phi_T(0.0)) * float(phi(0.0))
    for lo, hi in zip(edges, edges[1:]):
        theta = lo + 0.5 * (hi - lo) * (nodes + 1.0)
        w = 0.5 * (hi - lo) * weights
        B_vals = np.asarray(B_fn(t + theta), dtype=np.float64)
        for th, ww, bb in zip(theta, w, B_vals):
            total += ww * float(phi_T(th)) * bb * float(phi(th - 1.0))
    return total


def variational_forcing_solution(orbit: PeriodicOrbit, *, m: int = DEFAULT_LIN_STEPS) -> LinearTrajectory:
    """Solution of y' = A y + B y(.-1) + xdot/r with zero history.

    This is the sensitivity of the flow with respect to the delay
    parameter; its pairing against adjoint solutions obeys the forced
    bilinear-form identity.
    """
    A_fn, B_fn = linear_coefficients(orbit)
    mesh = np.linspace(-1.0, 0.0, m + 1)
    zeros = np.zeros((m + 1, 1))

    def forcing(t):
        return orbit.xdot(np.asarray(t)) / orbit.delay

    return integrate_linear(A_fn, B_fn, mesh, zeros, zeros, orbit.period, m=m, forcing=forcing)
