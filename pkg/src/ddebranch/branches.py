"""Amplitude continuation of periodic orbits and branch bookkeeping.

A branch is continued naturally in the amplitude (the parametrization
has no folds there, so pseudo-arclength machinery is unnecessary); the
step adapts by halving on failure and growing on fast convergence.
Boundaries are classified as Hopf (orbit collapses onto an equilibrium
whose characteristic equation has a matching root), homoclinic (period
grows beyond the cap while the amplitude converges), the edge of the
requested window, or unresolved.

Near a homoclinic boundary the amplitude saturates at double-precision
resolution while the period keeps growing, so the driver switches to
period-targeted solves for the last stretch; amplitudes of these tail
orbits agree with the homoclinic limit to far better than the reported
extrapolation.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import (
    BranchBoundarySignal,
    NewtonDivergenceError,
    NumericalError,
    PeriodRangeError,
    SimpleOscillationError,
)
from .models import ModelDefinition
from .orbits import (
    FourierProfile,
    OrbitSeed,
    PeriodicOrbit,
    orbit_residual,
    solve_orbit,
)

__all__ = [
    "HopfData",
    "StepPolicy",
    "Branch",
    "BoundaryHopf",
    "BoundaryHomoclinic",
    "BoundaryDomainEdge",
    "BoundaryUnresolved",
    "find_equilibria",
    "hopf_scan",
    "hopf_seed",
    "continue_branch",
    "classify_boundary",
    "rescale_branch",
    "rescale_orbit",
]


@dataclass(frozen=True)
class HopfData:
    """Root (nu, r) of i nu = r (A + exp(-i nu) B) at an equilibrium."""

    equilibrium: float
    nu: float
    r: float
    residual: float

    @property
    def seed_period(self) -> float:
        return 2.0 * math.pi / self.nu


@dataclass(frozen=True)
class BoundaryHopf:
    equilibrium: float
    nu: float
    r: float
    kind: str = "hopf"


@dataclass(frozen=True)
class BoundaryHomoclinic:
    limit_amplitude: float
    p_reached: float
    kind: str = "homoclinic"


@dataclass(frozen=True)
class BoundaryDomainEdge:
    amplitude: float
    kind: str = "domain-edge"


@dataclass(frozen=True)
class BoundaryUnresolved:
    diagnostics: dict
    kind: str = "unresolved"


Boundary = object


@dataclass
class StepPolicy:
    initial: float = 0.05
    minimum: float = 1e-9
    maximum: float = 0.25
    grow: float = 1.4
    shrink: float = 0.5
    fast_iterations: int = 4
    max_steps: int = 2000
    max_iterations: int = 30


@dataclass
class Branch:
    """Amplitude-ordered family of orbits with classified boundaries.

    ``homoclinic_tail`` holds period-parametrized orbits computed past
    the amplitude resolution limit near a homoclinic boundary; their
    amplitudes coincide with the limit to machine precision, so they are
    kept out of the amplitude-ordered family.
    """

    model: ModelDefinition
    orbits: List[PeriodicOrbit]
    lower_boundary: Boundary
    upper_boundary: Boundary
    m_index: int = 0
    hopf: Optional[HopfData] = None
    homoclinic_tail: List[PeriodicOrbit] = field(default_factory=list)

    def __post_init__(self):
        self.orbits.sort(key=lambda o: o.amplitude)
        amps = self.amplitudes
        if np.any(np.diff(amps) <= 0):
            raise NumericalError("branch amplitudes are not strictly increasing")

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([o.amplitude for o in self.orbits])

    @property
    def r_values(self) -> np.ndarray:
        return np.array([o.delay for o in self.orbits])

    @property
    def p_values(self) -> np.ndarray:
        return np.array([o.period for o in self.orbits])

    @property
    def amplitude_domain(self) -> Tuple[float, float]:
        amps = self.amplitudes
        return float(amps[0]), float(amps[-1])

    def orbit_nearest(self, amplitude: float) -> PeriodicOrbit:
        amps = self.amplitudes
        return self.orbits[int(np.argmin(np.abs(amps - amplitude)))]

    def solve_at_delay(self, r_target: float, **kwargs) -> PeriodicOrbit:
        """Orbit on this branch at a prescribed delay value."""
        rs = self.r_values
        k = int(np.argmin(np.abs(rs - r_target)))
        return solve_orbit(self.model, target_delay=r_target, guess=self.orbits[k], **kwargs)

    def interior_same_n(self) -> bool:
        ns = {o.n_index for o in self.orbits}
        return len(ns) == 1


# ---------------------------------------------------------------------------
# Equilibria and Hopf roots


def find_equilibria(model: ModelDefinition, window: Optional[Tuple[float, float]] = None, n_scan: int = 2048) -> List[float]:
    """Zeros of x -> f(x, x) on the diagonal of the certified rectangle."""
    (u0, u1), (v0, v1) = model.domain
    lo = max(u0, v0) if window is None else window[0]
    hi = min(u1, v1) if window is None else window[1]
    xs = np.linspace(lo, hi, n_scan)
    g = np.asarray(model.f(xs, xs), dtype=np.float64)
    roots: List[float] = []
    for i in range(n_scan - 1):
        a, b = g[i], g[i + 1]
        if a == 0.0:
            roots.append(float(xs[i]))
        elif a * b < 0.0:
            roots.append(float(brentq(lambda x: float(model.f(x, x)), xs[i], xs[i + 1], xtol=1e-14)))
    if g[-1] == 0.0:
        roots.append(float(xs[-1]))
    merged: List[float] = []
    for x in sorted(roots):
        if merged and abs(x - merged[-1]) < 1e-9:
            continue
        merged.append(x)
    return merged


def hopf_scan(model: ModelDefinition, equilibrium: float, *, max_frequency: float = 50.0, tol: float = 1e-10) -> List[HopfData]:
    """Real roots (nu > 0, r real) of the characteristic equation.

    With A = d1f and B = d2f at the equilibrium, purely imaginary
    spectrum requires cos(nu) = -A/B and nu = -r B sin(nu); the returned
    family is sorted by frequency.
    """
    fval, A, B = (float(x) for x in model.with_grad(equilibrium, equilibrium))
    if abs(fval) > 1e-12:
        raise NumericalError(f"{equilibrium} is not an equilibrium: f = {fval:.3g}")
    if B == 0.0:
        raise NumericalError("d2f vanishes at the equilibrium; feedback is degenerate")
    ratio = -A / B
    if abs(ratio) > 1.0:
        return []
    base = math.acos(ratio)
    out: List[HopfData] = []
    k = 0
    while True:
        produced = False
        for nu in (base + 2 * math.pi * k, -base + 2 * math.pi * (k + 1)):
            if nu <= 0.0 or nu > max_frequency:
                continue
            produced = True
            s = math.sin(nu)
            if abs(s) < 1e-12:
                continue
            r = -nu / (B * s)
            residual = abs(1j * nu - r * (A + cmath.exp(-1j * nu) * B))
            if residual < tol and r != 0.0:
                out.append(HopfData(equilibrium=equilibrium, nu=nu, r=r, residual=residual))
        if not produced and 2 * math.pi * k > max_frequency:
            break
        k += 1
    out.sort(key=lambda h: h.nu)
    # drop duplicates when base is 0 or pi (both formulas give the same nu)
    dedup: List[HopfData] = []
    for h in out:
        if dedup and abs(h.nu - dedup[-1].nu) < 1e-12:
            continue
        dedup.append(h)
    return dedup


def hopf_seed(model: ModelDefinition, hopf: HopfData, epsilon: float = 1e-2, n_modes: int = 128) -> OrbitSeed:
    s = np.arange(n_modes) / n_modes
    samples = hopf.equilibrium + epsilon * np.cos(2 * np.pi * s)
    return OrbitSeed(samples, hopf.seed_period, hopf.r)


# ---------------------------------------------------------------------------
# Continuation


def _predict(prev: Sequence[PeriodicOrbit], a_next: float) -> OrbitSeed:
    last = prev[-1]
    if len(prev) < 2:
        return OrbitSeed(last.samples.copy(), last.period, last.delay)
    before = prev[-2]
    da = last.amplitude - before.amplitude
    if abs(da) < 1e-14:
        return OrbitSeed(last.samples.copy(), last.period, last.delay)
    w = (a_next - last.amplitude) / da
    w = float(np.clip(w, -2.0, 2.0))
    samples_b = before.samples
    if samples_b.size != last.samples.size:
        samples_b = FourierProfile(samples_b).resample(last.samples.size)
    samples = last.samples + w * (last.samples - samples_b)
    period = last.period + w * (last.period - before.period)
    delay = last.delay + w * (last.delay - before.delay)
    if period <= 0:
        period = last.period
    return OrbitSeed(samples, period, delay)


def _maybe_refine(model, orbit, newton_tol, n_max, p_max) -> PeriodicOrbit:
    """Double the mode count until the anti-aliasing residual is honest."""
    while orbit.residual > 50 * newton_tol * max(1.0, abs(orbit.period * orbit.delay)) and orbit.n_modes < n_max:
        seed = OrbitSeed(orbit.profile.resample(orbit.n_modes * 2), orbit.period, orbit.delay)
        orbit = solve_orbit(
            model,
            target_amplitude=orbit.amplitude,
            guess=seed,
            newton_tol=newton_tol,
            p_max=p_max,
        )
    return orbit


def continue_branch(
    model: ModelDefinition,
    seed: PeriodicOrbit,
    direction: int = +1,
    *,
    amplitude_window: Tuple[float, float],
    policy: Optional[StepPolicy] = None,
    newton_tol: float = 1e-10,
    p_max: float = 200.0,
    hopf_span_tol: float = 1e-4,
    homoclinic_amp_tol: float = 1e-5,
    n_max: int = 2048,
    tail_growth: float = 1.35,
    collect: bool = True,
) -> Branch:
    """March the seed orbit in amplitude until a boundary is classified.

    ``direction`` selects the marching side; the other side of the
    branch keeps the seed as its endpoint (continue twice and merge for
    a two-sided branch).
    """
    policy = policy or StepPolicy()
    orbits: List[PeriodicOrbit] = [seed]
    tail: List[PeriodicOrbit] = []
    da = policy.initial
    lower, upper = amplitude_window
    boundary: Boundary = BoundaryUnresolved({"reason": "continuation did not start"})
    sign = 1 if direction >= 0 else -1

    def finish(bnd: Boundary) -> Branch:
        if sign > 0:
            lower_b: Boundary = BoundaryDomainEdge(orbits[0].amplitude)
            upper_b = bnd
        else:
            lower_b = bnd
            upper_b = BoundaryDomainEdge(orbits[-1].amplitude)
        branch_orbits = list(orbits) if collect else [orbits[0], orbits[-1]]
        return Branch(
            model=model,
            orbits=branch_orbits,
            lower_boundary=lower_b,
            upper_boundary=upper_b,
            homoclinic_tail=tail,
        )

    steps = 0
    while steps < policy.max_steps:
        steps += 1
        a_cur = orbits[-1].amplitude
        a_next = a_cur + sign * da
        hit_edge = False
        if a_next > upper:
            a_next, hit_edge = upper, True
        if a_next < lower:
            a_next, hit_edge = lower, True
        if abs(a_next - a_cur) < policy.minimum:
            # a stall at the window edge can still be a genuine boundary
            # (the window may end exactly at a homoclinic amplitude)
            boundary, tail = _resolve_stall(
                model,
                orbits,
                newton_tol=newton_tol,
                p_max=p_max,
                hopf_span_tol=hopf_span_tol,
                homoclinic_amp_tol=homoclinic_amp_tol,
                n_max=n_max,
                tail_growth=tail_growth,
            )
            if hit_edge and getattr(boundary, "kind", "") == "unresolved":
                boundary = BoundaryDomainEdge(a_cur)
            return finish(boundary)

        try:
            orbit = solve_orbit(
                model,
                target_amplitude=a_next,
                guess=_predict(orbits, a_next),
                newton_tol=newton_tol,
                p_max=p_max,
                max_iterations=policy.max_iterations,
            )
            orbit = _maybe_refine(model, orbit, newton_tol, n_max, p_max)
        except (NewtonDivergenceError, PeriodRangeError, SimpleOscillationError, BranchBoundarySignal, ArithmeticError):
            da *= policy.shrink
            if da < policy.minimum:
                boundary, tail = _resolve_stall(
                    model,
                    orbits,
                    newton_tol=newton_tol,
                    p_max=p_max,
                    hopf_span_tol=hopf_span_tol,
                    homoclinic_amp_tol=homoclinic_amp_tol,
                    n_max=n_max,
                    tail_growth=tail_growth,
                )
                return finish(boundary)
            continue

        orbits.append(orbit)
        if orbit.newton_iterations <= policy.fast_iterations:
            da = min(da * policy.grow, policy.maximum)

        span = orbit.amplitude - orbit.depth
        if span < hopf_span_tol:
            boundary = _classify_collapse(model, orbits)
            return finish(boundary)
        if hit_edge:
            boundary = BoundaryDomainEdge(orbit.amplitude)
            return finish(boundary)

    return finish(BoundaryUnresolved({"reason": "step budget exhausted", "steps": steps}))


def _classify_collapse(model, orbits) -> Boundary:
    last = orbits[-1]
    xbar = 0.5 * (last.amplitude + last.depth)
    fv = float(model.f(xbar, xbar))
    if abs(fv) < 1e-6:
        equilibria = find_equilibria(model)
        if equilibria:
            xbar = min(equilibria, key=lambda x: abs(x - xbar))
        target_nu = 2.0 * math.pi / last.period
        hopfs = hopf_scan(model, xbar)
        match = min(hopfs, key=lambda h: abs(h.nu - target_nu), default=None)
        if match is not None:
            return BoundaryHopf(equilibrium=xbar, nu=match.nu, r=match.r)
    return BoundaryUnresolved({"reason": "collapse without equilibrium", "f_at_limit": fv})


def _richardson_limit(values: Sequence[float]) -> float:
    """Geometric-sequence extrapolation of the last three entries."""
    if len(values) < 3:
        return float(values[-1])
    a0, a1, a2 = values[-3], values[-2], values[-1]
    d1, d2 = a1 - a0, a2 - a1
    if abs(d1) < 1e-300 or abs(d2) >= abs(d1):
        return float(a2)
    q = d2 / d1
    return float(a2 + d2 * q / (1.0 - q))


def _resolve_stall(
    model, orbits, *, newton_tol, p_max, hopf_span_tol, homoclinic_amp_tol, n_max, tail_growth
) -> Tuple[Boundary, List[PeriodicOrbit]]:
    """Amplitude step underflow: classify Hopf, grow a homoclinic tail, or give up."""
    last = orbits[-1]
    span = last.amplitude - last.depth
    if span < hopf_span_tol:
        return _classify_collapse(model, orbits), []

    # the amplitude is pinned at machine resolution while the orbit stays far
    # from constant; a growing period is the homoclinic signature, and the
    # family continues in the period instead
    periods = [o.period for o in orbits[-4:]]
    growing = periods[-1] > 5.0 and periods[-1] >= periods[0]
    if not growing:
        return (
            BoundaryUnresolved({"reason": "step underflow", "span": span, "period": last.period}),
            [],
        )

    tail: List[PeriodicOrbit] = []
    current = last
    p_target = current.period
    failures = 0
    growth = tail_growth
    # the translation gauge is nearly flat when the maximum dwells at a
    # saddle, which floors the attainable collocation residual; the raw
    # (unnormalized) residual stays ~ tail_tol / p, far below need
    tail_tol = 50.0 * newton_tol
    while current.period <= p_max and failures < 10:
        p_target = min(p_target * growth, p_max * 1.1)
        # the excursion width shrinks like 1/p in normalized phase; grow
        # the mode count ahead of the period jump
        n_needed = min(n_max, max(current.n_modes, 1 << int(math.ceil(math.log2(8.0 * p_target)))))
        samples = current.samples if n_needed == current.n_modes else current.profile.resample(n_needed)
        seed = OrbitSeed(samples.copy(), p_target, current.delay)
        try:
            orbit = solve_orbit(
                model,
                target_period=p_target,
                guess=seed,
                newton_tol=tail_tol,
                p_max=p_max * 1.2,
                max_iterations=35,
                phase="reference",
            )
            if orbit.residual > 50 * tail_tol * max(1.0, abs(orbit.period * orbit.delay)) and orbit.n_modes < n_max:
                raise NewtonDivergenceError("needs more modes", orbit.residual, 0)
        except (NewtonDivergenceError, SimpleOscillationError, ArithmeticError):
            if current.n_modes < n_max:
                # refine the current tail point spectrally, then retry;
                # successful refinements do not consume the failure budget
                bigger = OrbitSeed(current.profile.resample(current.n_modes * 2), current.period, current.delay)
                try:
                    current = solve_orbit(
                        model,
                        target_period=current.period,
                        guess=bigger,
                        newton_tol=tail_tol,
                        p_max=p_max * 1.2,
                        max_iterations=35,
                        phase="reference",
                    )
                    if tail:
                        tail[-1] = current
                    p_target = current.period
                    continue
                except (NewtonDivergenceError, SimpleOscillationError, ArithmeticError):
                    failures += 1
                    break
            failures += 1
            growth = math.sqrt(growth)
            p_target = current.period
            if growth < 1.001:
                break
            continue
        current = orbit
        tail.append(orbit)

    amps = [last.amplitude] + [o.amplitude for o in tail]
    cauchy = (
        max(abs(amps[i + 1] - amps[i]) for i in range(len(amps) - 1)) < homoclinic_amp_tol
        if len(amps) > 1
        else False
    )
    if current.period > p_max and cauchy:
        boundary: Boundary = BoundaryHomoclinic(
            limit_amplitude=_richardson_limit(amps[-5:]),
            p_reached=current.period,
        )
    else:
        boundary = BoundaryUnresolved(
            {"reason": "period tail stalled", "p_reached": current.period, "amplitude_cauchy": cauchy}
        )
    return boundary, tail


def classify_boundary(
    model: ModelDefinition,
    tail: Sequence[PeriodicOrbit],
    *,
    hopf_span_tol: float = 1e-4,
    p_max: float = 200.0,
    homoclinic_amp_tol: float = 1e-5,
    at_window_edge: bool = False,
) -> Boundary:
    """Classify an already-computed branch tail (>= 5 orbits)."""
    if len(tail) < 5:
        raise ValueError("need at least 5 tail orbits to classify a boundary")
    if at_window_edge:
        return BoundaryDomainEdge(tail[-1].amplitude)
    last = tail[-1]
    spans = [o.amplitude - o.depth for o in tail]
    amps = [o.amplitude for o in tail]
    hopf_like = spans[-1] < hopf_span_tol and spans[-1] <= min(spans)
    homoclinic_like = last.period > p_max and max(
        abs(amps[-1] - amps[-2]), abs(amps[-2] - amps[-3])
    ) < homoclinic_amp_tol
    if hopf_like and homoclinic_like:
        return BoundaryUnresolved({"reason": "contradictory signals", "span": spans[-1], "period": last.period})
    if hopf_like:
        return _classify_collapse(model, list(tail))
    if homoclinic_like:
        return BoundaryHomoclinic(limit_amplitude=_richardson_limit(amps), p_reached=last.period)
    return BoundaryUnresolved({"reason": "no boundary signature", "span": spans[-1], "period": last.period})


def boundary_to_dict(b) -> dict:
    out = {"kind": getattr(b, "kind", "unknown")}
    for key in ("equilibrium", "nu", "r", "limit_amplitude", "p_reached", "amplitude", "diagnostics"):
        if hasattr(b, key):
            value = getattr(b, key)
            out[key] = float(value) if isinstance(value, (int, float, np.floating)) and key != "diagnostics" else value
    return out


def boundary_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "hopf":
        return BoundaryHopf(equilibrium=float(d["equilibrium"]), nu=float(d["nu"]), r=float(d["r"]))
    if kind == "homoclinic":
        return BoundaryHomoclinic(limit_amplitude=float(d["limit_amplitude"]), p_reached=float(d["p_reached"]))
    if kind == "domain-edge":
        return BoundaryDomainEdge(amplitude=float(d["amplitude"]))
    return BoundaryUnresolved(diagnostics=d.get("diagnostics", {}))


def branch_payload(branch: Branch) -> dict:
    """JSON-serializable snapshot of a branch (profiles included)."""
    return {
        "model": {"name": branch.model.name, "f": branch.model.f_text},
        "m_index": branch.m_index,
        "boundaries": {
            "lower": boundary_to_dict(branch.lower_boundary),
            "upper": boundary_to_dict(branch.upper_boundary),
        },
        "hopf": None
        if branch.hopf is None
        else {
            "equilibrium": branch.hopf.equilibrium,
            "nu": branch.hopf.nu,
            "r": branch.hopf.r,
            "residual": branch.hopf.residual,
        },
        "orbits": [o.to_dict() for o in branch.orbits],
        "tail": [o.to_dict() for o in branch.homoclinic_tail],
    }


def branch_from_payload(model: ModelDefinition, payload: dict) -> Branch:
    hopf = None
    if payload.get("hopf"):
        h = payload["hopf"]
        hopf = HopfData(
            equilibrium=float(h["equilibrium"]),
            nu=float(h["nu"]),
            r=float(h["r"]),
            residual=float(h.get("residual", 0.0)),
        )
    return Branch(
        model=model,
        orbits=[PeriodicOrbit.from_dict(model, d) for d in payload["orbits"]],
        lower_boundary=boundary_from_dict(payload["boundaries"]["lower"]),
        upper_boundary=boundary_from_dict(payload["boundaries"]["upper"]),
        m_index=int(payload.get("m_index", 0)),
        hopf=hopf,
        homoclinic_tail=[PeriodicOrbit.from_dict(model, d) for d in payload.get("tail", [])],
    )


def seed_from_planar(
    model: ModelDefinition,
    amplitude: float,
    *,
    n_modes: int = 256,
    g_key: str = "g_analytic",
    t_span: float = 400.0,
) -> OrbitSeed:
    """Orbit seed from the integrable planar companion system.

    For models shipping an analytic companion g (the double-well and the
    symmetric oscillator) the unit-speed planar system (u', v') = (f, g)
    is integrable and x(t) = U(r t) recovers the solution profile.  The
    seed starts at the u-maximum (amplitude, v0) with f(amplitude, v0) =
    0, takes the planar return time T, reads the delay r off the time of
    the v-maximum, and samples the profile as X(s) = U(T s).  Branches
    without a Hopf endpoint (e.g. outside a homoclinic figure) are
    seeded this way.
    """
    from scipy.integrate import solve_ivp

    if g_key not in model.companions:
        raise NumericalError(f"model {model.name!r} has no planar companion {g_key!r}")

    (v_lo, v_hi) = model.domain[1]
    vv = np.linspace(v_lo, v_hi, 4096)
    fv = np.asarray(model.f(amplitude, vv))
    roots = []
    for i in range(vv.size - 1):
        if fv[i] == 0.0:
            roots.append(float(vv[i]))
        elif fv[i] * fv[i + 1] < 0.0:
            roots.append(float(brentq(lambda y: float(model.f(amplitude, y)), vv[i], vv[i + 1], xtol=1e-15)))
    if not roots:
        raise NumericalError(f"no u-maximum nullcline point at amplitude {amplitude}")
    # keep roots that really are maxima of u along the flow: d(u')/dt < 0
    good = [
        v0
        for v0 in roots
        if float(model.d2f(amplitude, v0)) * float(model.companion(g_key, amplitude, v0)) < 0.0
    ]
    v0 = min(good or roots, key=abs)

    def rhs(t, y):
        return [float(model.f(y[0], y[1])), float(model.companion(g_key, y[0], y[1]))]

    def umax_event(t, y):
        return float(model.f(y[0], y[1]))

    def vmax_event(t, y):
        return float(model.companion(g_key, y[0], y[1]))

    umax_event.terminal = False
    vmax_event.terminal = False
    sol = solve_ivp(
        rhs,
        (0.0, t_span),
        [amplitude, v0],
        rtol=1e-12,
        atol=1e-14,
        dense_output=True,
        events=[umax_event, vmax_event],
        max_step=1.0,
    )
    scale = max(1.0, abs(amplitude))
    T = None
    for t_ev in sol.t_events[0]:
        if t_ev < 1e-9:
            continue
        u_ev, v_ev = sol.sol(t_ev)
        if abs(u_ev - amplitude) < 1e-6 * scale and abs(v_ev - v0) < 1e-6 * scale:
            T = float(t_ev)
            break
    if T is None:
        raise NumericalError(f"planar orbit at amplitude {amplitude} did not close within t = {t_span}")
    r = None
    for t_ev in sol.t_events[1]:
        if t_ev < 1e-9 or t_ev > T:
            continue
        u_ev, v_ev = sol.sol(t_ev)
        if abs(v_ev - amplitude) < 1e-6 * scale:
            r = float(t_ev)
            break
    if r is None:
        raise NumericalError("could not read the delay off the planar v-maximum")
    s = np.arange(n_modes) / n_modes
    samples = sol.sol(T * s)[0]
    return OrbitSeed(np.asarray(samples, dtype=np.float64), T / r, r)


# ---------------------------------------------------------------------------
# Time-rescaling symmetry


def rescale_orbit(orbit: PeriodicOrbit, m: int, *, newton_tol: float = 1e-10) -> PeriodicOrbit:
    """Branch copy x((1 + m p) t) at delay (1 + m p) r.

    The minimal period becomes p / |1 + m p| (time reverses when the
    factor is negative, flipping the normalized profile); the planar
    projection is unchanged as a set.
    """
    factor = 1.0 + m * orbit.period
    if abs(factor) < 1e-12:
        raise ZeroDivisionError("1 + m p vanishes; rescaling undefined")
    if m == 0:
        return orbit
    r2 = factor * orbit.delay
    p2 = orbit.period / abs(factor)
    if factor > 0:
        samples = orbit.samples.copy()
    else:
        n = orbit.samples.size
        idx = (n - np.arange(n)) % n
        samples = orbit.samples[idx]
    prof = FourierProfile(samples)
    from .orbits import _depth_of  # local import to keep module surface tidy

    q2, depth2 = _depth_of(prof, p2)
    copy = PeriodicOrbit(
        model=orbit.model,
        samples=samples,
        period=p2,
        delay=r2,
        amplitude=orbit.amplitude,
        depth=depth2,
        q=q2,
        n_index=int(math.floor(2.0 / p2)) + 1,
        residual=0.0,
        newton_iterations=0,
    )
    copy.residual = orbit_residual(orbit.model, copy)
    if copy.residual > 10 * newton_tol * max(1.0, abs(p2 * r2)) + 10 * orbit.residual:
        raise NumericalError(
            f"rescaled orbit residual {copy.residual:.3g} too large (m={m})"
        )
    return copy


def rescale_branch(branch: Branch, m: int, *, newton_tol: float = 1e-10) -> Branch:
    if m == 0:
        return branch
    factors = 1.0 + m * branch.p_values
    if np.any(np.abs(factors) < 1e-9):
        raise ZeroDivisionError("1 + m p crosses zero along the branch")
    orbits = [rescale_orbit(o, m, newton_tol=newton_tol) for o in branch.orbits]
    rescaled = Branch(
        model=branch.model,
        orbits=orbits,
        lower_boundary=branch.lower_boundary,
        upper_boundary=branch.upper_boundary,
        m_index=m,
        hopf=branch.hopf,
    )
    return rescaled
