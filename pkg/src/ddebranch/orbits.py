"""Periodic boundary-value solver in the period-1 normalization.

A periodic solution x(t) with minimal period p is stored through its
normalized profile X(s) = x(p s), which satisfies

    X'(s) = p r f(X(s), X(s - 1/p mod 1)),   X(0) = max X,  X'(0) = 0.

The profile is discretized by real trigonometric collocation on N
uniform points of the circle; the delayed argument is a pure rotation,
applied exactly in coefficient space.  Newton unknowns are the N sample
values plus (p, r), closed by the amplitude constraint X(0) = a (or, in
the alternative solve modes, by pinning r or p instead).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Union

import numpy as np

from .errors import (
    BranchBoundarySignal,
    NewtonDivergenceError,
    PeriodRangeError,
    SimpleOscillationError,
)
from .models import ModelDefinition

__all__ = [
    "FourierProfile",
    "PeriodicOrbit",
    "OrbitSeed",
    "cosine_seed",
    "solve_orbit",
    "orbit_residual",
    "locate_depth",
    "period_interval_index",
]

DEFAULT_N_MODES = 128
NEWTON_TOL = 1e-10
P_MAX_DEFAULT = 200.0

_rfft_eye: Dict[int, np.ndarray] = {}
_diff_mat: Dict[int, np.ndarray] = {}


def _rfft_table(n: int) -> np.ndarray:
    tab = _rfft_eye.get(n)
    if tab is None:
        tab = np.fft.rfft(np.eye(n), axis=0)
        _rfft_eye[n] = tab
    return tab


def _deriv_mult(n: int) -> np.ndarray:
    k = np.arange(n // 2 + 1)
    mult = 2j * np.pi * k.astype(np.float64)
    if n % 2 == 0:
        mult[-1] = 0.0  # Nyquist mode has no odd derivative partner
    return mult


def _shift_mult(n: int, theta: float) -> np.ndarray:
    k = np.arange(n // 2 + 1)
    mult = np.exp(-2j * np.pi * k * theta).astype(np.complex128)
    if n % 2 == 0:
        mult[-1] = math.cos(math.pi * n * theta)
    return mult


def diff_matrix(n: int) -> np.ndarray:
    mat = _diff_mat.get(n)
    if mat is None:
        mat = np.fft.irfft(_deriv_mult(n)[:, None] * _rfft_table(n), n=n, axis=0)
        _diff_mat[n] = mat
    return mat


def shift_matrix(n: int, theta: float) -> np.ndarray:
    return np.fft.irfft(_shift_mult(n, theta)[:, None] * _rfft_table(n), n=n, axis=0)


class FourierProfile:
    """Trigonometric interpolant of N uniform samples of a 1-periodic function."""

    def __init__(self, samples: np.ndarray):
        self.samples = np.asarray(samples, dtype=np.float64)
        self.n = self.samples.size
        self.coeffs = np.fft.rfft(self.samples)

    def eval(self, s, deriv: int = 0):
        """Evaluate interpolant (or a derivative) at arbitrary phases s."""
        s = np.asarray(s, dtype=np.float64)
        k = np.arange(self.n // 2 + 1)
        weights = np.full(k.size, 2.0)
        weights[0] = 1.0
        if self.n % 2 == 0:
            weights[-1] = 1.0
        c = self.coeffs * weights
        if deriv:
            mult = _deriv_mult(self.n)
            for _ in range(deriv):
                c = c * mult
        flat = np.atleast_1d(s).ravel()
        out = np.empty(flat.size)
        chunk = max(1, (1 << 21) // max(k.size, 1))
        for i in range(0, flat.size, chunk):
            block = flat[i : i + chunk]
            phases = np.exp(2j * np.pi * np.outer(block, k))
            out[i : i + chunk] = (phases @ c).real / self.n
        out = out.reshape(np.atleast_1d(s).shape)
        return out if np.ndim(s) else float(out[0])

    def node_deriv(self) -> np.ndarray:
        return np.fft.irfft(self.coeffs * _deriv_mult(self.n), n=self.n)

    def node_shift(self, theta: float) -> np.ndarray:
        return np.fft.irfft(self.coeffs * _shift_mult(self.n, theta), n=self.n)

    def resample(self, n_new: int) -> np.ndarray:
        """Samples on a finer/coarser uniform grid via spectral padding."""
        if n_new == self.n:
            return self.samples.copy()
        from scipy.signal import resample as _fft_resample

        return np.asarray(_fft_resample(self.samples, n_new), dtype=np.float64)


@dataclass
class OrbitSeed:
    """Initial guess for the solver: profile samples plus (p, r)."""

    samples: np.ndarray
    period: float
    delay: float


def cosine_seed(amplitude: float, period: float, delay: float, n_modes: int = DEFAULT_N_MODES, offset: float = 0.0) -> OrbitSeed:
    s = np.arange(n_modes) / n_modes
    return OrbitSeed(offset + amplitude * np.cos(2 * np.pi * s), period, delay)


@dataclass
class PeriodicOrbit:
    """One normalized periodic solution and its derived quantities.

    ``residual`` is the fine-grid maximum of |X' - p r f| in normalized
    time; divide by p for the residual of the unnormalized equation.
    """

    model: ModelDefinition
    samples: np.ndarray
    period: float
    delay: float
    amplitude: float
    depth: float
    q: float
    n_index: int
    residual: float
    newton_iterations: int = 0
    _profile: Optional[FourierProfile] = field(default=None, repr=False, compare=False)

    @property
    def profile(self) -> FourierProfile:
        if self._profile is None:
            self._profile = FourierProfile(self.samples)
        return self._profile

    @property
    def n_modes(self) -> int:
        return self.samples.size

    @property
    def theta(self) -> float:
        return (1.0 / self.period) % 1.0

    def x(self, t):
        """Unnormalized solution x(t) (period ``period``, max at t = 0)."""
        t = np.asarray(t, dtype=np.float64)
        return self.profile.eval(t / self.period)

    def xdot(self, t):
        t = np.asarray(t, dtype=np.float64)
        return self.profile.eval(t / self.period, deriv=1) / self.period

    def xddot(self, t):
        t = np.asarray(t, dtype=np.float64)
        return self.profile.eval(t / self.period, deriv=2) / self.period**2

    def planar_point(self, t):
        return self.x(t), self.x(np.asarray(t, dtype=np.float64) - 1.0)

    def curve(self, n_points: int = 256) -> np.ndarray:
        """Closed planar projection polyline (x(t), x(t-1)), shape (n, 2).

        Vertices are spaced uniformly in arc length, not in phase: near a
        homoclinic boundary the phase parametrization dwells at the
        saddle and would undersample the fast excursion.
        """
        dense = max(8 * n_points, 2048)
        s = np.arange(dense) / dense
        u = self.profile.eval(s)
        v = self.profile.eval(s - self.theta)
        pts = np.column_stack([u, v])
        seg = np.linalg.norm(np.diff(np.vstack([pts, pts[:1]]), axis=0), axis=1)
        arc = np.concatenate([[0.0], np.cumsum(seg)])
        total = arc[-1]
        if total <= 0.0:
            return pts[:n_points]
        targets = np.arange(n_points) / n_points * total
        idx = np.searchsorted(arc, targets, side="right") - 1
        idx = np.clip(idx, 0, dense - 1)
        frac = (targets - arc[idx]) / np.maximum(seg[idx], 1e-300)
        nxt = (idx + 1) % dense
        return pts[idx] + frac[:, None] * (pts[nxt] - pts[idx])

    def with_samples(self, n_new: int) -> "PeriodicOrbit":
        return PeriodicOrbit(
            model=self.model,
            samples=self.profile.resample(n_new),
            period=self.period,
            delay=self.delay,
            amplitude=self.amplitude,
            depth=self.depth,
            q=self.q,
            n_index=self.n_index,
            residual=self.residual,
            newton_iterations=self.newton_iterations,
        )

    def to_dict(self) -> dict:
        return {
            "a": self.amplitude,
            "p": self.period,
            "r": self.delay,
            "q": self.q,
            "depth": self.depth,
            "residual": self.residual,
            "n_index": self.n_index,
            "profile": [float(x) for x in self.samples],
        }

    @classmethod
    def from_dict(cls, model: ModelDefinition, data: dict) -> "PeriodicOrbit":
        return cls(
            model=model,
            samples=np.asarray(data["profile"], dtype=np.float64),
            period=float(data["p"]),
            delay=float(data["r"]),
            amplitude=float(data["a"]),
            depth=float(data["depth"]),
            q=float(data["q"]),
            n_index=int(data["n_index"]),
            residual=float(data["residual"]),
        )


def period_interval_index(period: float) -> int:
    """Index n with period in J_n = (2/n, 2/(n-1))."""
    if period <= 0:
        raise PeriodRangeError(period, math.inf)
    return int(math.floor(2.0 / period)) + 1


# ---------------------------------------------------------------------------
# Newton solver


def _collocation_residual(model, X, p, r, mode, target, phase_ref=None):
    n = X.size
    c = np.fft.rfft(X)
    dmult = _deriv_mult(n)
    Xp = np.fft.irfft(c * dmult, n=n)
    theta = (1.0 / p) % 1.0
    smult = _shift_mult(n, theta)
    Xs = np.fft.irfft(c * smult, n=n)
    fv, d1, d2 = model.with_grad(X, Xs)
    F = np.empty(n + 2)
    F[:n] = Xp - p * r * fv
    if mode == "amplitude":
        F[n] = X[0] - target
    elif mode == "delay":
        F[n] = r - target
    else:
        F[n] = p - target
    if phase_ref is None:
        F[n + 1] = Xp[0]
    else:
        ref_X, ref_Xp = phase_ref
        F[n + 1] = float(np.dot(X - ref_X, ref_Xp)) / n
    pieces = (c, dmult, smult, Xs, Xp, fv, d1, d2)
    return F, pieces


def _collocation_jacobian(model, X, p, r, mode, pieces, phase_ref=None):
    n = X.size
    c, dmult, smult, Xs, Xp, fv, d1, d2 = pieces
    theta = (1.0 / p) % 1.0
    D = diff_matrix(n)
    S = shift_matrix(n, theta)
    Xsp = np.fft.irfft(c * dmult * smult, n=n)

    J = np.zeros((n + 2, n + 2))
    J[:n, :n] = D - p * r * (np.diag(d1) + d2[:, None] * S)
    J[:n, n] = -r * fv - (r / p) * d2 * Xsp
    J[:n, n + 1] = -p * fv
    if mode == "amplitude":
        J[n, 0] = 1.0
    elif mode == "delay":
        J[n, n + 1] = 1.0
    else:
        J[n, n] = 1.0
    if phase_ref is None:
        J[n + 1, :n] = D[0]
    else:
        J[n + 1, :n] = phase_ref[1] / n
    return J


def solve_orbit(
    model: ModelDefinition,
    target_amplitude: Optional[float] = None,
    guess: Union[PeriodicOrbit, OrbitSeed, None] = None,
    *,
    target_delay: Optional[float] = None,
    target_period: Optional[float] = None,
    n_modes: Optional[int] = None,
    newton_tol: float = NEWTON_TOL,
    max_iterations: int = 60,
    max_halvings: int = 20,
    p_max: float = P_MAX_DEFAULT,
    collapse_tol: float = 1e-9,
    validate: bool = True,
    phase: str = "extremum",
    _gauge_retry: bool = False,
) -> PeriodicOrbit:
    """Solve the periodic BVP for one target (amplitude, delay, or period).

    The guess must lie in the damped-Newton basin; continuation drivers
    are responsible for keeping steps small enough.  Raises
    :class:`BranchBoundarySignal` when the target amplitude is an
    equilibrium value or the iterate collapses to a constant, and
    :class:`NewtonDivergenceError` / :class:`PeriodRangeError` on
    genuine failures.
    """
    modes = [m for m, t in (("amplitude", target_amplitude), ("delay", target_delay), ("period", target_period)) if t is not None]
    if len(modes) != 1:
        raise ValueError("specify exactly one of target_amplitude, target_delay, target_period")
    mode = modes[0]
    target = {"amplitude": target_amplitude, "delay": target_delay, "period": target_period}[mode]

    if guess is None:
        raise ValueError("an initial guess (orbit or seed) is required")

    if mode == "amplitude":
        fa = float(model.f(target, target))
        if abs(fa) < 1e-12:
            raise BranchBoundarySignal(
                f"amplitude {target:.12g} is an equilibrium of f (branch boundary)",
                equilibrium=float(target),
            )

    X = np.asarray(guess.samples, dtype=np.float64).copy()
    p = float(guess.period)
    r = float(guess.delay)
    if n_modes is not None and n_modes != X.size:
        X = FourierProfile(X).resample(n_modes)

    phase_ref = None
    if phase == "reference":
        # orthogonality to the seed profile: stays well conditioned when
        # the extremum gauge degenerates (flat maximum near a homoclinic)
        ref_prof = FourierProfile(X)
        phase_ref = (X.copy(), ref_prof.node_deriv())
    elif phase != "extremum":
        raise ValueError(f"unknown phase condition {phase!r}")

    def scaled_norm(F, p_cur, r_cur):
        return float(np.max(np.abs(F))) / max(1.0, abs(p_cur * r_cur))

    F, pieces = _collocation_residual(model, X, p, r, mode, target, phase_ref)
    norm = scaled_norm(F, p, r)
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        if norm < newton_tol:
            break
        J = _collocation_jacobian(model, X, p, r, mode, pieces, phase_ref)
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise NewtonDivergenceError(f"singular collocation Jacobian: {exc}", norm, iterations)
        lam = 1.0
        accepted = False
        for _ in range(max_halvings + 1):
            X_new = X + lam * step[:-2]
            p_new = p + lam * step[-2]
            r_new = r + lam * step[-1]
            if p_new <= 0.0:
                lam *= 0.5
                continue
            try:
                F_new, pieces_new = _collocation_residual(model, X_new, p_new, r_new, mode, target, phase_ref)
            except ArithmeticError:
                lam *= 0.5
                continue
            norm_new = scaled_norm(F_new, p_new, r_new)
            if norm_new < (1.0 - 1e-4 * lam) * norm or norm_new < newton_tol:
                X, p, r = X_new, p_new, r_new
                F, pieces, norm = F_new, pieces_new, norm_new
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            raise NewtonDivergenceError("damped Newton stalled", norm, iterations)
    else:
        raise NewtonDivergenceError("Newton did not converge", norm, max_iterations)

    if not (0.0 < p <= p_max):
        raise PeriodRangeError(p, p_max)

    span = float(np.max(X) - np.min(X))
    if span < collapse_tol * max(1.0, abs(X[0])):
        raise BranchBoundarySignal(
            f"iterate collapsed to the constant {X[0]:.9g} (branch boundary)",
            equilibrium=float(X[0]),
        )

    if phase == "reference":
        # re-gauge afterwards: rotate the profile so the maximum sits at 0
        X = _rotate_max_to_zero(X)
        orbit = _finalize(model, X, p, r, iterations)
        if validate:
            validate_orbit(orbit)
        return orbit

    # gauge: the phase condition admits the minimum too
    if FourierProfile(X).eval(0.0, deriv=2) > 0.0:
        if mode == "amplitude" or _gauge_retry:
            # with the amplitude pinned this is a different orbit (the one
            # whose *depth* equals the target); treat as a failed step
            raise NewtonDivergenceError("converged to the depth gauge", norm, iterations)
        shift = int(np.argmax(X))
        X = np.roll(X, -shift)
        return solve_orbit(
            model,
            guess=OrbitSeed(X, p, r),
            target_delay=target_delay,
            target_period=target_period,
            newton_tol=newton_tol,
            max_iterations=max_iterations,
            max_halvings=max_halvings,
            p_max=p_max,
            collapse_tol=collapse_tol,
            validate=validate,
            _gauge_retry=True,
        )

    orbit = _finalize(model, X, p, r, iterations)
    if validate:
        validate_orbit(orbit)
    return orbit


def _rotate_max_to_zero(X: np.ndarray) -> np.ndarray:
    """Spectral rotation putting the profile maximum at phase 0."""
    prof = FourierProfile(X)
    n = X.size
    dense = 8 * n
    s = np.arange(dense) / dense
    vals = prof.eval(s)
    k = int(np.argmax(vals))
    # parabolic refinement on the dense grid
    vm, v0, vp = vals[(k - 1) % dense], vals[k], vals[(k + 1) % dense]
    denom = vm - 2.0 * v0 + vp
    shift = 0.0 if denom == 0.0 else 0.5 * (vm - vp) / denom
    s0 = (s[k] + shift / dense) % 1.0
    if s0 == 0.0:
        return X
    kk = np.arange(n // 2 + 1)
    mult = np.exp(2j * np.pi * kk * s0).astype(np.complex128)
    if n % 2 == 0:
        mult[-1] = math.cos(math.pi * n * s0)
    return np.fft.irfft(prof.coeffs * mult, n=n)


def _finalize(model, X, p, r, iterations) -> PeriodicOrbit:
    profile = FourierProfile(X)
    q, depth = _depth_of(profile, p)
    orbit = PeriodicOrbit(
        model=model,
        samples=X,
        period=p,
        delay=r,
        amplitude=float(profile.eval(0.0)),
        depth=depth,
        q=q,
        n_index=period_interval_index(p),
        residual=0.0,
        newton_iterations=iterations,
    )
    orbit.residual = orbit_residual(model, orbit)
    return orbit


def _critical_points(profile: FourierProfile, oversample: int = 4):
    """Phases of the zeros of X' on [0, 1), located by bracketed bisection."""
    n_dense = oversample * profile.n
    s = np.arange(n_dense) / n_dense
    w = profile.eval(s, deriv=1)
    scale = float(np.max(np.abs(w)))
    if scale == 0.0:
        return []
    sign = np.sign(np.where(np.abs(w) < 1e-9 * scale, 0.0, w))
    idx_nz = np.nonzero(sign)[0]
    if idx_nz.size == 0:
        return []
    nz = sign[idx_nz]
    roots = []
    for j in range(len(nz)):
        j2 = (j + 1) % len(nz)
        if nz[j] == nz[j2]:
            continue
        a = s[idx_nz[j]]
        b = s[idx_nz[j2]]
        if b <= a:
            b += 1.0
        fa = profile.eval(a, deriv=1)
        for _ in range(60):
            mid = 0.5 * (a + b)
            fm = profile.eval(mid, deriv=1)
            if fa * fm <= 0.0:
                b = mid
            else:
                a, fa = mid, fm
            if b - a < 1e-14:
                break
        roots.append(0.5 * (a + b) % 1.0)
    roots.sort()
    # merge near-duplicates (circularly)
    merged: list[float] = []
    for s0 in roots:
        if merged and abs(s0 - merged[-1]) < 1e-7:
            continue
        merged.append(s0)
    if len(merged) > 1 and abs((merged[0] + 1.0) - merged[-1]) < 1e-7:
        merged.pop()
    return merged


def _depth_of(profile: FourierProfile, p: float):
    roots = _critical_points(profile)
    if len(roots) != 2:
        raise SimpleOscillationError(
            f"profile has {len(roots)} critical points per period, expected 2"
        )
    # near a homoclinic boundary the profile is extremely flat around the
    # maximum, so the max root can drift numerically; identify the depth
    # by value instead of by position
    vals = [float(profile.eval(s0)) for s0 in roots]
    k_min = int(np.argmin(vals))
    s_min, v_min = roots[k_min], vals[k_min]
    v_max = vals[1 - k_min]
    if not v_min < v_max:
        raise SimpleOscillationError("critical values do not separate max and min")
    if min(s_min, 1.0 - s_min) < 1e-12:
        raise SimpleOscillationError("depth coincides with the normalized maximum")
    return float(s_min * p), float(v_min)


def locate_depth(orbit: PeriodicOrbit):
    """Time of depth q (unnormalized) and the depth value, with checks.

    Verifies the relative-position chain for q implied by the period
    interval J_n: with n1 = floor((n-1)/2),

        n odd:  n1 p < 1 < q + n1 p < q + 1 < (n1 + 1) p
        n even: n1 p < q - p + 1 < q + n1 p < 1 < (n1 + 1) p
    """
    q, depth = _depth_of(orbit.profile, orbit.period)
    p = orbit.period
    n = orbit.n_index
    n1 = (n - 1) // 2
    slack = 1e-8 * max(1.0, p)
    if n % 2 == 1:
        chain = [n1 * p, 1.0, q + n1 * p, q + 1.0, (n1 + 1) * p]
    else:
        chain = [n1 * p, q - p + 1.0, q + n1 * p, 1.0, (n1 + 1) * p]
    for left, right in zip(chain, chain[1:]):
        if not left < right + slack:
            raise SimpleOscillationError(
                f"depth position chain violated for n={n}: {chain}"
            )
    return q, depth


def validate_orbit(orbit: PeriodicOrbit, *, slack: float = 1e-8) -> None:
    """Structural invariants every accepted orbit must satisfy."""
    p = orbit.period
    if min(abs(p - 1.0), abs(p - 2.0)) < 1e-9:
        raise PeriodRangeError(p, P_MAX_DEFAULT)

    n = orbit.n_index
    parity_negative = n % 2 == 1  # n odd <-> r * d2f < 0
    sign_rfeedback = math.copysign(1.0, orbit.delay) * orbit.model.feedback_sign
    if parity_negative != (sign_rfeedback < 0):
        raise SimpleOscillationError(
            f"period parity mismatch: p={p:.6g} in J_{n} but sign(r d2f)={sign_rfeedback:+.0f}"
        )

    q, _depth = locate_depth(orbit)

    # sign products at the normalized max/min (unnormalized times)
    xdd0 = float(orbit.xddot(0.0))
    xddq = float(orbit.xddot(q))
    xd_p1 = float(orbit.xdot(1.0))
    xd_m1 = float(orbit.xdot(-1.0))
    xd_qp = float(orbit.xdot(q + 1.0))
    xd_qm = float(orbit.xdot(q - 1.0))
    scale = max(abs(orbit.amplitude), abs(orbit.depth), 1e-12)
    checks = (xdd0 * xddq, xd_p1 * xd_m1, xd_qp * xd_qm)
    if not all(c < slack * scale**2 for c in checks):
        raise SimpleOscillationError(f"sign-product property violated: {checks}")
    # curvature at the extrema degenerates toward a homoclinic boundary;
    # only flag signs that exceed the spectral noise floor
    s_dense = np.arange(4 * orbit.n_modes) / (4 * orbit.n_modes)
    d2_scale = float(np.max(np.abs(orbit.profile.eval(s_dense, deriv=2)))) / orbit.period**2
    noise = 1e-12 * max(d2_scale, 1e-300)
    if xdd0 > noise or xddq < -noise:
        raise SimpleOscillationError("curvature signs at max/min are wrong")


def orbit_residual(model: ModelDefinition, orbit: PeriodicOrbit, n_check: Optional[int] = None) -> float:
    """Max |X' - p r f| on a grid finer than collocation (anti-aliasing)."""
    n = n_check or 4 * orbit.n_modes
    s = np.arange(n) / n
    prof = orbit.profile
    Xp = prof.eval(s, deriv=1)
    Xv = prof.eval(s)
    Xs = prof.eval(s - orbit.theta)
    fv = model.f(Xv, Xs)
    return float(np.max(np.abs(Xp - orbit.period * orbit.delay * fv)))


def raw_residual(model: ModelDefinition, orbit: PeriodicOrbit, times: np.ndarray) -> np.ndarray:
    """|x'(t) - r f(x(t), x(t-1))| of the unnormalized solution."""
    x = orbit.x(times)
    xd = orbit.x(np.asarray(times) - 1.0)
    return np.abs(orbit.xdot(times) - orbit.delay * model.f(x, xd))
