"""Verification harness: one function per acceptance criterion (AC-1..AC-9).

The harness builds (or loads from disk) the three benchmark setups:

* symmetric oscillator, unit frequency and frequency 1 + s,
* delayed logistic equation in log coordinates,
* double-well model with its figure-eight separatrix,

then evaluates each criterion at the tolerance stated in the project
acceptance list.  ``run_criteria`` prints one PASS/FAIL line per
criterion and returns machine-readable results.

Artifacts are persisted under the harness root; with ``regen=False``
they must already exist (this is what lets the harness detect tampered
exports: checked values are re-read from branch.csv and cross-checked
against closed forms and recomputed residuals).
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .branches import (
    Branch,
    StepPolicy,
    branch_from_payload,
    branch_payload,
    continue_branch,
    find_equilibria,
    hopf_scan,
    hopf_seed,
    rescale_branch,
    seed_from_planar,
)
from .charts import PlanarChart, branch_curves
from .errors import DdeBranchError, VerificationFailure
from .floquet import (
    adjoint_integrate,
    bilinear_form,
    floquet_report,
    integrate_linear,
    linear_coefficients,
    monodromy,
    variational_forcing_solution,
)
from .geometry import JordanCurve, nesting_check
from .models import ModelDefinition, builtin
from .orbits import (
    OrbitSeed,
    PeriodicOrbit,
    cosine_seed,
    locate_depth,
    orbit_residual,
    solve_orbit,
    validate_orbit,
)
from .stepping import HistorySegment, integrate
from .tables import read_csv, write_csv, write_json
from .utils import parallel_map

__all__ = ["CriterionResult", "AcceptanceContext", "run_criteria", "CRITERIA"]

SQRT3M1_HALF = (math.sqrt(3.0) - 1.0) / 2.0


@dataclass
class CriterionResult:
    criterion: str
    passed: bool
    seconds: float
    details: Dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        summary = self.details.get("summary", "")
        return f"{self.criterion:5s} {status}  ({self.seconds:6.1f}s)  {summary}"


class MissingArtifactError(VerificationFailure):
    pass


class AcceptanceContext:
    """Lazily builds and caches the benchmark branches, charts and orbits."""

    def __init__(self, root: str = "acceptance-out", regen: bool = True):
        self.root = root
        self.regen = regen
        os.makedirs(root, exist_ok=True)
        self._models: Dict[str, ModelDefinition] = {}
        self._branches: Dict[str, Branch] = {}
        self._charts: Dict[str, PlanarChart] = {}
        self._orbit_cache: Dict[str, PeriodicOrbit] = {}

    # -- models ---------------------------------------------------------------

    def model(self, key: str) -> ModelDefinition:
        if key not in self._models:
            if key == "enharmonic-unit":
                self._models[key] = builtin("enharmonic", omega="1")
            elif key == "enharmonic":
                self._models[key] = builtin("enharmonic", omega="1+s")
            elif key == "hutchinson":
                self._models[key] = builtin("hutchinson-log")
            elif key == "qrt":
                self._models[key] = builtin("qrt-doublewell")
            else:
                raise KeyError(key)
        return self._models[key]

    # -- persistence ----------------------------------------------------------

    def _branch_dir(self, key: str) -> str:
        return os.path.join(self.root, key)

    def _save_branch(self, key: str, branch: Branch) -> None:
        d = self._branch_dir(key)
        os.makedirs(d, exist_ok=True)
        write_json(os.path.join(d, "orbits.json"), branch_payload(branch))
        rows = [
            (o.amplitude, o.delay, o.period, o.q, o.depth, o.residual, o.n_index)
            for o in branch.orbits
        ]
        write_csv(os.path.join(d, "branch.csv"), ["a", "r", "p", "q", "depth", "residual", "n_index"], rows)

    def _load_branch(self, key: str, model: ModelDefinition) -> Optional[Branch]:
        path = os.path.join(self._branch_dir(key), "orbits.json")
        if not os.path.exists(path):
            return None
        with open(path, "r", encoding="utf-8") as fh:
            return branch_from_payload(model, json.load(fh))

    def branch_csv_rows(self, key: str):
        path = os.path.join(self._branch_dir(key), "branch.csv")
        if not os.path.exists(path):
            raise MissingArtifactError(f"missing artifact {path} (run with regeneration enabled)")
        return read_csv(path)

    # -- builders ---------------------------------------------------------------

    def branch(self, key: str) -> Branch:
        if key in self._branches:
            return self._branches[key]
        model = self.model(self._model_key_for(key))
        cached = self._load_branch(key, model)
        if cached is not None:
            self._branches[key] = cached
            return cached
        if not self.regen:
            raise MissingArtifactError(f"missing artifact for {key!r} and regeneration is disabled")
        branch = self._build(key, model)
        self._branches[key] = branch
        self._save_branch(key, branch)
        return branch

    def _model_key_for(self, key: str) -> str:
        if key.startswith("qrt"):
            return "qrt"
        return key

    def _build(self, key: str, model: ModelDefinition) -> Branch:
        if key == "enharmonic":
            seed = solve_orbit(model, target_amplitude=1.0, guess=cosine_seed(1.0, 4.0, math.pi / 4.0))
            up = continue_branch(model, seed, +1, amplitude_window=(0.5, 3.0))
            down = continue_branch(model, seed, -1, amplitude_window=(0.5, 3.0))
            return self._merge(model, down, up)
        if key == "hutchinson":
            hopf = hopf_scan(model, 0.0)[0]
            seed = solve_orbit(model, target_amplitude=1e-2, guess=hopf_seed(model, hopf))
            policy = StepPolicy(maximum=0.1)
            up = continue_branch(model, seed, +1, amplitude_window=(1e-6, 1.7), policy=policy)
            down = continue_branch(model, seed, -1, amplitude_window=(1e-6, 1.7), policy=policy)
            merged = self._merge(model, down, up)
            merged.hopf = hopf
            return merged
        if key == "qrt-left":
            hopf = hopf_scan(model, -1.0)[0]
            seed = solve_orbit(model, target_amplitude=-0.99, guess=hopf_seed(model, hopf))
            policy = StepPolicy(maximum=0.04)
            up = continue_branch(model, seed, +1, amplitude_window=(-1 + 1e-6, -0.5), p_max=120.0, policy=policy)
            down = continue_branch(model, seed, -1, amplitude_window=(-1 + 1e-6, -0.5), p_max=120.0, policy=policy)
            merged = self._merge(model, down, up)
            merged.hopf = hopf
            return merged
        if key == "qrt-right":
            hopf = hopf_scan(model, 0.0)[0]
            seed = solve_orbit(model, target_amplitude=1e-2, guess=hopf_seed(model, hopf))
            policy = StepPolicy(maximum=0.04)
            up = continue_branch(model, seed, +1, amplitude_window=(1e-6, 0.5), p_max=120.0, policy=policy)
            down = continue_branch(model, seed, -1, amplitude_window=(1e-6, 0.5), p_max=120.0, policy=policy)
            merged = self._merge(model, down, up)
            merged.hopf = hopf
            return merged
        if key == "qrt-outer":
            seed = solve_orbit(model, target_amplitude=0.6, guess=seed_from_planar(model, 0.6))
            policy = StepPolicy(maximum=0.04)
            down = continue_branch(model, seed, -1, amplitude_window=(0.3, 0.9), p_max=120.0, policy=policy)
            up = continue_branch(model, seed, +1, amplitude_window=(0.3, 0.9), p_max=120.0, policy=policy)
            return self._merge(model, down, up)
        raise KeyError(key)

    @staticmethod
    def _merge(model, down: Branch, up: Branch) -> Branch:
        by_amp = {o.amplitude: o for o in down.orbits + up.orbits}
        return Branch(
            model=model,
            orbits=sorted(by_amp.values(), key=lambda o: o.amplitude),
            lower_boundary=down.lower_boundary,
            upper_boundary=up.upper_boundary,
            homoclinic_tail=down.homoclinic_tail + up.homoclinic_tail,
        )

    def chart(self, key: str) -> PlanarChart:
        if key not in self._charts:
            self._charts[key] = PlanarChart(self.branch(key), 128)
        return self._charts[key]

    def enharmonic_unit_orbits(self) -> List[PeriodicOrbit]:
        key = "enharmonic-unit-triple"
        path = os.path.join(self.root, key + ".json")
        model = self.model("enharmonic-unit")
        if key not in self._orbit_cache:
            if os.path.exists(path):
                with open(path, "r", encoding="utf-8") as fh:
                    payload = json.load(fh)
                self._orbit_cache[key] = [PeriodicOrbit.from_dict(model, d) for d in payload]
            else:
                if not self.regen:
                    raise MissingArtifactError(f"missing artifact {path}")
                orbits = [
                    solve_orbit(model, target_amplitude=a, guess=cosine_seed(a, 4.0, math.pi / 2.0))
                    for a in (0.5, 1.0, 2.0)
                ]
                self._orbit_cache[key] = orbits
                write_json(path, [o.to_dict() for o in orbits])
        return self._orbit_cache[key]

    def hutchinson_r2(self) -> PeriodicOrbit:
        if "hutchinson-r2" not in self._orbit_cache:
            branch = self.branch("hutchinson")
            self._orbit_cache["hutchinson-r2"] = branch.solve_at_delay(2.0)
        return self._orbit_cache["hutchinson-r2"]


# ---------------------------------------------------------------------------
# criteria


def ac1_enharmonic_exactness(ctx: AcceptanceContext) -> CriterionResult:
    """r and p of the symmetric oscillator match the closed forms."""
    t0 = time.perf_counter()
    failures = []

    for orbit in ctx.enharmonic_unit_orbits():
        if abs(orbit.delay - math.pi / 2.0) >= 1e-8:
            failures.append(f"unit omega a={orbit.amplitude}: |r - pi/2| = {abs(orbit.delay - math.pi/2):.3g}")
        if abs(orbit.period - 4.0) >= 1e-8:
            failures.append(f"unit omega a={orbit.amplitude}: |p - 4| = {abs(orbit.period - 4):.3g}")

    branch = ctx.branch("enharmonic")
    header, rows = ctx.branch_csv_rows("enharmonic")
    ia, ir = header.index("a"), header.index("r")
    data = [(row[ia], row[ir]) for row in rows]
    samples = np.linspace(0.5, 3.0, 20)
    worst = 0.0
    for a_target in samples:
        a, r = min(data, key=lambda ar: abs(ar[0] - a_target))
        err = abs(r - math.pi / (2.0 * (1.0 + a * a)))
        worst = max(worst, err)
        if err >= 1e-6:
            failures.append(f"omega 1+s at a={a:.4f}: |r - pi/(2(1+a^2))| = {err:.3g}")

    # residual cross-check from the stored profiles at the stored delays
    res_worst = 0.0
    csv_by_a = {a: r for a, r in data}
    for orbit in branch.orbits:
        r_csv = csv_by_a.get(orbit.amplitude)
        if r_csv is None:
            continue
        check = PeriodicOrbit(
            model=branch.model,
            samples=orbit.samples,
            period=orbit.period,
            delay=float(r_csv),
            amplitude=orbit.amplitude,
            depth=orbit.depth,
            q=orbit.q,
            n_index=orbit.n_index,
            residual=0.0,
        )
        res = orbit_residual(branch.model, check) / check.period
        res_worst = max(res_worst, res)
        if res >= 1e-8:
            failures.append(f"stored profile at a={orbit.amplitude:.4f} violates the equation: residual {res:.3g}")

    seconds = time.perf_counter() - t0
    if seconds >= 30.0:
        failures.append(f"runtime {seconds:.1f}s exceeds 30s")
    return CriterionResult(
        "AC-1",
        not failures,
        seconds,
        {
            "summary": f"max |r - closed form| = {worst:.2e}; profile residual {res_worst:.2e}",
            "failures": failures[:6],
        },
    )


def ac2_enharmonic_chart(ctx: AcceptanceContext) -> CriterionResult:
    """Chart recovers alpha = sqrt(u^2+v^2) and g = Omega(u^2+v^2) u."""
    t0 = time.perf_counter()
    chart = ctx.chart("enharmonic")
    model = ctx.model("enharmonic")

    alpha_err = 0.0
    na = chart.a_grid.size
    rows = range(1, na - 1)
    for j in rows[:: max(1, (na - 2) // 8)]:
        for i in range(0, chart.s_grid.size, 8):
            u, v = chart.U[j, i], chart.V[j, i]
            alpha, _tau = chart.amplitude_at(u, v, seed=(float(chart.s_grid[i]), float(chart.a_grid[j])))
            alpha_err = max(alpha_err, abs(alpha - math.hypot(u, v)))

    interior = slice(1, na - 1)
    U, V = chart.U[interior], chart.V[interior]
    g_exact = (1.0 + U * U + V * V) * U
    g_err = float(np.max(np.abs(chart.g_values[interior] - g_exact)))

    passed = alpha_err < 1e-5 and g_err < 1e-5
    return CriterionResult(
        "AC-2",
        passed,
        time.perf_counter() - t0,
        {"summary": f"alpha err {alpha_err:.2e}, g err {g_err:.2e}"},
    )


def ac3_hutchinson_hopf(ctx: AcceptanceContext) -> CriterionResult:
    """Continuation limit at small amplitude matches the Hopf values."""
    t0 = time.perf_counter()
    branch = ctx.branch("hutchinson")
    r_limit = branch.r_values[0]
    p_limit = branch.p_values[0]
    r_err = abs(r_limit - math.pi / 2.0)
    p_err = abs(p_limit - 4.0)
    hopf_ok = getattr(branch.lower_boundary, "kind", "") == "hopf"
    passed = r_err < 1e-2 and p_err < 1e-2 and hopf_ok
    return CriterionResult(
        "AC-3",
        passed,
        time.perf_counter() - t0,
        {
            "summary": f"r->pi/2 err {r_err:.2e}, p->4 err {p_err:.2e}, boundary {getattr(branch.lower_boundary, 'kind', '?')}",
            "smallest_amplitude": float(branch.amplitudes[0]),
        },
    )


def _attractor_peaks(traj, t_from: float):
    """Refined (t, x) at the trajectory's local maxima past t_from."""
    d = traj.derivs
    t = traj.times
    keep = (t[:-1] >= t_from) & (d[:-1] > 0) & (d[1:] <= 0)
    idx = np.nonzero(keep)[0]
    peaks = []
    for k in idx:
        lo, hi = t[k], t[k + 1]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if traj.deriv(mid) > 0:
                lo = mid
            else:
                hi = mid
        tm = 0.5 * (lo + hi)
        peaks.append((tm, float(traj.value(tm))))
    return peaks


def ac4_hutchinson_sops(ctx: AcceptanceContext) -> CriterionResult:
    """Branch orbit at r=2 agrees with the simulated attractor; stable spectrum."""
    t0 = time.perf_counter()
    model = ctx.model("hutchinson")
    orbit = ctx.hutchinson_r2()

    t_end = 50.0 * orbit.period
    traj = integrate(model, 2.0, HistorySegment.constant(0.1), t_end)
    peaks = _attractor_peaks(traj, t_end - 5.0 * orbit.period)
    amp_sim = float(np.mean([x for _, x in peaks]))
    per_sim = float(np.mean(np.diff([tm for tm, _ in peaks])))

    amp_rel = abs(amp_sim - orbit.amplitude) / abs(orbit.amplitude)
    per_rel = abs(per_sim - orbit.period) / orbit.period

    rep = floquet_report(monodromy(orbit, 64))
    moduli = np.abs(rep.multipliers)
    nontrivial = np.delete(moduli, int(np.argmin(np.abs(rep.multipliers - 1.0))))
    inside = bool(np.all(nontrivial < 1.0))

    passed = amp_rel < 1e-3 and per_rel < 1e-3 and rep.trivial_error < 1e-4 and inside
    return CriterionResult(
        "AC-4",
        passed,
        time.perf_counter() - t0,
        {
            "summary": (
                f"amp rel {amp_rel:.2e}, period rel {per_rel:.2e}, trivial {rep.trivial_error:.2e}, "
                f"max nontrivial |mu| {float(np.max(nontrivial)):.3f}"
            ),
            "orbit": {"a": orbit.amplitude, "p": orbit.period},
            "simulated": {"a": amp_sim, "p": per_sim},
        },
    )


def ac5_qrt_bifurcation_values(ctx: AcceptanceContext) -> CriterionResult:
    """Equilibria/saddle levels and homoclinic amplitude limits with p > 100."""
    t0 = time.perf_counter()
    model = ctx.model("qrt")
    failures = []

    eq = find_equilibria(model)
    for target in (0.0, -1.0, -0.5):
        if min(abs(x - target) for x in eq) > 1e-9:
            failures.append(f"equilibrium {target} not found (got {eq})")
    H = {x: float(model.companion("hamiltonian", x, x)) for x in eq}
    for x in eq:
        expected = 1.0 / 16.0 if abs(x + 0.5) < 1e-6 else 0.0
        if abs(H[x] - expected) >= 1e-12:
            failures.append(f"H({x:.3f},{x:.3f}) = {H[x]!r}, expected {expected}")

    # saddle test: the planar linearization has real +/- eigenvalues there
    for x in eq:
        _, d1f, d2f = model.with_grad(x, x)
        _, d1g, _d2g = (float(v) for v in _companion_grad(model, "g_analytic", x, x))
        det = float(d1g) * float(-d2f) - float(-d1f) ** 2  # Huu Hvv - Huv^2
        is_saddle = det < 0
        if abs(x + 0.5) < 1e-6 and not is_saddle:
            failures.append("level-1/16 equilibrium is not a saddle")
        if abs(x + 0.5) >= 1e-6 and is_saddle:
            failures.append(f"equilibrium {x:.3f} misclassified as saddle")

    targets = {
        "qrt-left": (-0.5, "upper"),
        "qrt-right": (SQRT3M1_HALF, "upper"),
        "qrt-outer": (SQRT3M1_HALF, "lower"),
    }
    p_reached = {}
    limits = {}
    for key, (target, side) in targets.items():
        branch = ctx.branch(key)
        boundary = branch.upper_boundary if side == "upper" else branch.lower_boundary
        if getattr(boundary, "kind", "") != "homoclinic":
            failures.append(f"{key}: {side} boundary classified {getattr(boundary, 'kind', '?')}, expected homoclinic")
            continue
        limits[key] = boundary.limit_amplitude
        p_tail = max((o.period for o in branch.homoclinic_tail), default=0.0)
        p_reached[key] = max(p_tail, boundary.p_reached)
        if abs(boundary.limit_amplitude - target) >= 1e-3:
            failures.append(f"{key}: limit {boundary.limit_amplitude!r} vs {target!r}")
        if p_reached[key] <= 100.0:
            failures.append(f"{key}: period reached only {p_reached[key]:.1f} <= 100")

    return CriterionResult(
        "AC-5",
        not failures,
        time.perf_counter() - t0,
        {
            "summary": f"equilibria {sorted(H)}, p reached "
            + ", ".join(f"{k.split('-')[1]}:{v:.0f}" for k, v in sorted(p_reached.items())),
            "limits": limits,
            "failures": failures[:6],
        },
    )


def _companion_grad(model: ModelDefinition, key: str, u, v):
    from . import expressions as ex

    return ex.eval_program_grad(model.companions[key], u, v)


def _family_curves(ctx: AcceptanceContext, key: str, n_curves: int = 20) -> List[JordanCurve]:
    return branch_curves(ctx.branch(key), n_curves)


def _wrong_model_curve(family: Sequence[JordanCurve]) -> JordanCurve:
    """A deliberately foreign curve scaled to straddle a family member."""
    target = family[len(family) // 2]
    center = target.vertices.mean(axis=0)
    radii = np.linalg.norm(target.vertices - center, axis=1)
    t = np.linspace(0.0, 2.0 * math.pi, 181)[:-1]
    lo, hi = 0.8 * radii.min(), 1.2 * radii.max()
    rr = 0.5 * (hi + lo) + 0.5 * (hi - lo) * np.sin(3.0 * t)
    pts = center + np.column_stack([rr * np.cos(t), rr * np.sin(t)])
    return JordanCurve(pts, amplitude=float("nan"), curve_id="wrong-model")


def ac6_nesting(ctx: AcceptanceContext) -> CriterionResult:
    """20 curves per family pairwise disjoint; a foreign curve crosses."""
    t0 = time.perf_counter()
    failures = []
    counts = {}
    for key in ("enharmonic", "hutchinson", "qrt-right"):
        curves = _family_curves(ctx, key, 20)
        reports = nesting_check(curves)
        bad = [r for r in reports if r.status != "disjoint"]
        counts[key] = len(reports)
        if bad:
            failures.append(f"{key}: {len(bad)} non-disjoint pairs, e.g. {bad[0]}")

        injected = _wrong_model_curve(curves)
        reports2 = nesting_check(list(curves) + [injected], require_simple=False)
        crossing = [r for r in reports2 if r.status == "crossing"]
        if not crossing:
            failures.append(f"{key}: injected wrong-model curve produced no crossing")

    return CriterionResult(
        "AC-6",
        not failures,
        time.perf_counter() - t0,
        {"summary": f"pairs checked {counts}", "failures": failures[:6]},
    )


def ac7_rescaling(ctx: AcceptanceContext) -> CriterionResult:
    """Copies at (1 + m p) r satisfy the equation; |p r| invariant."""
    t0 = time.perf_counter()
    failures = []
    worst_res = 0.0
    worst_prod = 0.0
    for key in ("enharmonic", "hutchinson", "qrt-right"):
        branch = ctx.branch(key)
        for m in (-1, 1):
            copy = rescale_branch(branch, m)
            for orig, resc in zip(branch.orbits, copy.orbits):
                raw = resc.residual / resc.period
                worst_res = max(worst_res, raw)
                if raw >= 1e-8:
                    failures.append(f"{key} m={m} a={orig.amplitude:.4f}: raw residual {raw:.3g}")
                prod_err = abs(abs(resc.period * resc.delay) - abs(orig.period * orig.delay))
                worst_prod = max(worst_prod, prod_err)
                if prod_err >= 1e-12 * max(1.0, abs(orig.period * orig.delay)):
                    failures.append(f"{key} m={m} a={orig.amplitude:.4f}: |p r| drift {prod_err:.3g}")
    return CriterionResult(
        "AC-7",
        not failures,
        time.perf_counter() - t0,
        {"summary": f"worst raw residual {worst_res:.2e}, worst |p r| drift {worst_prod:.2e}", "failures": failures[:6]},
    )


def ac8_conservation(ctx: AcceptanceContext) -> CriterionResult:
    """Bilinear-form constancy, alpha drift, detDG sign, feedback sign."""
    t0 = time.perf_counter()
    failures = []

    # bilinear form along adjoint pairs (both a symmetric and a generic orbit)
    pair_errs = {}
    for key, orbit in (
        ("enharmonic", ctx.branch("enharmonic").orbit_nearest(1.0)),
        ("hutchinson", ctx.hutchinson_r2()),
    ):
        p = orbit.period
        theta = np.linspace(0.0, 1.0, 129)
        psi = np.cos(2.0 * math.pi * theta) + 0.3
        # arbitrary data only gives piecewise-smooth solutions; start both
        # integrations one extra period away so the checked window holds
        # method-of-steps-smoothed (several times differentiable) solutions
        adj = adjoint_integrate(orbit, psi, t_back=-1e-9, terminal_offset=2.0 * p + 1.0, m=2048)
        A_fn, B_fn = linear_coefficients(orbit)
        mesh = np.linspace(-1.0, 0.0, 129)
        y0 = np.sin(math.pi * mesh) + 0.2
        d0 = math.pi * np.cos(math.pi * mesh)
        lin = integrate_linear(A_fn, B_fn, -(p + 1.0) + mesh, y0[:, None], d0[:, None], p, m=2048)

        def phiT_at(t):
            return lambda th: adj.value(t + th)

        def phi_at(t):
            return lambda th: float(lin.value(t + th)[0])

        vals = [bilinear_form(orbit, phiT_at(t), phi_at(t), t) for t in (0.0, 0.37 * p, 0.71 * p, p)]
        scale = max(abs(v) for v in vals)
        err = (max(vals) - min(vals)) / max(scale, 1e-30)
        pair_errs[key] = err
        if err >= 1e-8:
            failures.append(f"{key}: bilinear form drifts by {err:.3g} relative")

    # forced identity: pairing change equals the integral of w * forcing
    orbit = ctx.branch("enharmonic").orbit_nearest(1.0)
    p = orbit.period
    theta = np.linspace(0.0, 1.0, 129)
    adj = adjoint_integrate(orbit, np.cos(2 * math.pi * theta) + 0.3, t_back=-1e-9, terminal_offset=p, m=8192)
    forced = variational_forcing_solution(orbit, m=8192)
    nodes, weights = np.polynomial.legendre.leggauss(96)

    def forced_val(t):
        return float(forced.value(t)[0])

    def kinks2(t):
        return [p - k - t for k in range(0, 5)] + [k - (t - 1.0) for k in range(-1, int(p) + 2)]

    worst_forced = 0.0
    for t_check in (0.4 * p, p):
        lhs = bilinear_form(
            orbit,
            lambda th: adj.value(t_check + th),
            lambda th: forced_val(t_check + th),
            t_check,
            breakpoints=kinks2(t_check),
        )
        lhs0 = bilinear_form(
            orbit,
            lambda th: adj.value(0.0 + th),
            lambda th: forced_val(0.0 + th),
            0.0,
            breakpoints=kinks2(0.0),
        )
        # composite quadrature between the kink times of the adjoint
        pieces = sorted({0.0, t_check} | {p - k for k in range(0, 6) if 0.0 < p - k < t_check})
        rhs = 0.0
        for lo, hi in zip(pieces, pieces[1:]):
            s = lo + 0.5 * (hi - lo) * (nodes + 1.0)
            w = 0.5 * (hi - lo) * weights
            integrand = np.array([adj.value(ss) * float(orbit.xdot(ss)) / orbit.delay for ss in s])
            rhs += float(np.dot(w, integrand))
        err = abs((lhs - lhs0) - rhs) / max(abs(lhs), abs(rhs), 1e-30)
        worst_forced = max(worst_forced, err)
        if err >= 1e-7:
            failures.append(f"forced pairing identity off by {err:.3g} at t={t_check:.2f}")

    # first-integral drift over five planar periods, alpha sign charts
    drifts = {}
    for key in ("enharmonic", "hutchinson", "qrt-right"):
        chart = ctx.chart(key)
        branch = ctx.branch(key)
        # start on the orbit at the middle of the *chart* amplitude range
        # (near-homoclinic orbits sit in the trimmed collar)
        a_mid = 0.5 * (chart.a_grid[0] + chart.a_grid[-1])
        mid = branch.orbit_nearest(float(a_mid))
        start = (float(mid.x(0.3 * mid.period)), float(mid.x(0.3 * mid.period - 1.0)))
        horizon = 5.0 * mid.period * abs(mid.delay)
        out = chart.first_integral_drift(start, horizon, step=min(0.01, horizon / 2000.0))
        drifts[key] = out["max_drift"]
        if out["max_drift"] >= 1e-4:
            failures.append(f"{key}: alpha drift {out['max_drift']:.3g} over 5 planar periods")
        pp = chart.verify_predator_prey()
        if not pp["passed"] or pp["n_negative"] != pp["n_nodes"]:
            failures.append(f"{key}: feedback product nonnegative somewhere ({pp})")
        interior = chart.detDG[1:-1] if chart.a_grid.size > 2 else chart.detDG
        if not (np.all(interior > 0) or np.all(interior < 0)):
            failures.append(f"{key}: detDG changes sign")

    return CriterionResult(
        "AC-8",
        not failures,
        time.perf_counter() - t0,
        {
            "summary": (
                f"pairing drift {max(pair_errs.values()):.2e}, forced identity {worst_forced:.2e}, "
                f"alpha drift max {max(drifts.values()):.2e}"
            ),
            "failures": failures[:6],
        },
    )


def ac9_oscillation_structure(ctx: AcceptanceContext) -> CriterionResult:
    """Simple oscillation, period intervals, parity, depth-position chains."""
    t0 = time.perf_counter()
    failures = []
    checked = 0
    for key in ("enharmonic", "hutchinson", "qrt-left", "qrt-right", "qrt-outer"):
        branch = ctx.branch(key)
        sample = branch.orbits[:: max(1, len(branch.orbits) // 12)] + branch.homoclinic_tail[-2:]
        copies = []
        for m in (-1, 1):
            for o in branch.orbits[:: max(1, len(branch.orbits) // 6)]:
                from .branches import rescale_orbit

                copies.append(rescale_orbit(o, m))
        for orbit in sample + copies:
            checked += 1
            try:
                validate_orbit(orbit)
                locate_depth(orbit)
            except DdeBranchError as exc:
                failures.append(f"{key} a={orbit.amplitude:.5f} p={orbit.period:.4f}: {exc}")
    return CriterionResult(
        "AC-9",
        not failures,
        time.perf_counter() - t0,
        {"summary": f"{checked} orbits checked (branches, tails, copies)", "failures": failures[:6]},
    )


CRITERIA: Dict[str, Callable[[AcceptanceContext], CriterionResult]] = {
    "AC-1": ac1_enharmonic_exactness,
    "AC-2": ac2_enharmonic_chart,
    "AC-3": ac3_hutchinson_hopf,
    "AC-4": ac4_hutchinson_sops,
    "AC-5": ac5_qrt_bifurcation_values,
    "AC-6": ac6_nesting,
    "AC-7": ac7_rescaling,
    "AC-8": ac8_conservation,
    "AC-9": ac9_oscillation_structure,
}


def run_criteria(
    ctx: AcceptanceContext,
    ids: Optional[Sequence[str]] = None,
    *,
    echo: bool = True,
) -> List[CriterionResult]:
    results = []
    for cid, fn in CRITERIA.items():
        if ids and cid not in ids:
            continue
        try:
            result = fn(ctx)
        except MissingArtifactError as exc:
            raise
        except DdeBranchError as exc:
            result = CriterionResult(cid, False, 0.0, {"summary": f"{type(exc).__name__}: {exc}"})
        results.append(result)
        if echo:
            print(result.line(), flush=True)
    return results
