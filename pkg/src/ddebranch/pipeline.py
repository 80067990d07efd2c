"""Pipeline orchestration: certify -> seed -> branch -> floquet -> chart.

Each stage records a timing and a pass/fail entry; a failing stage halts
the stages after it but the manifest is still written (atomically,
last).  All tabular exports use 17 significant digits so reruns of the
same configuration are byte-identical.
"""

from __future__ import annotations

import os
import time
import traceback
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .branches import (
    Branch,
    BoundaryDomainEdge,
    StepPolicy,
    continue_branch,
    find_equilibria,
    hopf_scan,
    hopf_seed,
    rescale_branch,
    seed_from_planar,
)
from .charts import PlanarChart, branch_curves, population_coordinates
from .config import RunConfig
from .errors import ConfigError, DdeBranchError, NumericalError
from .floquet import floquet_report, monodromy
from .geometry import nesting_check
from .models import certify_feedback
from .orbits import PeriodicOrbit, solve_orbit
from .tables import write_csv, write_json, write_json_atomic

__all__ = ["RunManifest", "run_pipeline"]


@dataclass
class RunManifest:
    config_digest: str
    version: str
    stages: List[Dict] = field(default_factory=list)
    artifacts: List[str] = field(default_factory=list)
    checks: List[Dict] = field(default_factory=list)
    failed_stage: Optional[str] = None

    def to_dict(self) -> Dict:
        return {
            "config_digest": self.config_digest,
            "version": self.version,
            "stages": self.stages,
            "artifacts": self.artifacts,
            "checks": self.checks,
            "failed_stage": self.failed_stage,
        }


def _merge_branches(model, down: Branch, up: Branch) -> Branch:
    by_amp = {o.amplitude: o for o in down.orbits + up.orbits}
    merged = Branch(
        model=model,
        orbits=sorted(by_amp.values(), key=lambda o: o.amplitude),
        lower_boundary=down.lower_boundary,
        upper_boundary=up.upper_boundary,
        homoclinic_tail=down.homoclinic_tail + up.homoclinic_tail,
    )
    return merged


def build_branch(config: RunConfig, model) -> Branch:
    """Seed per the configuration and continue in both directions."""
    lo, hi = config.amplitude_window
    policy = StepPolicy(initial=config.initial_step, maximum=config.max_step)

    if config.seed == "hopf":
        if config.equilibrium is not None:
            equilibria = [config.equilibrium]
        else:
            equilibria = find_equilibria(model)
            if not equilibria:
                raise NumericalError("no equilibrium found for the Hopf seed")
        hopfs = []
        for xbar in equilibria:
            hopfs.extend(h for h in hopf_scan(model, xbar) if lo <= xbar <= hi or True)
        if not hopfs:
            raise NumericalError("characteristic equation has no Hopf root")
        inside = [h for h in hopfs if lo < h.equilibrium < hi]
        hopf = min(inside or hopfs, key=lambda h: h.nu)
        eps = config.seed_amplitude - hopf.equilibrium if config.seed_amplitude is not None else 1e-2
        seed_orbit = solve_orbit(
            model,
            target_amplitude=hopf.equilibrium + eps,
            guess=hopf_seed(model, hopf, epsilon=eps, n_modes=config.n_modes),
            newton_tol=config.newton_tol,
            p_max=config.p_max,
        )
    elif config.seed == "planar":
        if config.seed_amplitude is None:
            raise ConfigError("planar seeding needs continuation.seed_amplitude")
        seed_orbit = solve_orbit(
            model,
            target_amplitude=config.seed_amplitude,
            guess=seed_from_planar(model, config.seed_amplitude, n_modes=config.n_modes),
            newton_tol=config.newton_tol,
            p_max=config.p_max,
        )
    elif config.seed.startswith("file:"):
        import json as _json

        with open(config.seed[5:], "r", encoding="utf-8") as fh:
            seed_orbit = PeriodicOrbit.from_dict(model, _json.load(fh))
    else:
        raise ConfigError(f"unknown seed mode {config.seed!r}")

    kwargs = dict(
        amplitude_window=(lo, hi),
        policy=policy,
        newton_tol=config.newton_tol,
        p_max=config.p_max,
    )
    up = continue_branch(model, seed_orbit, +1, **kwargs)
    down = continue_branch(model, seed_orbit, -1, **kwargs)
    branch = _merge_branches(model, down, up)
    if config.seed == "hopf":
        branch.hopf = hopf
    return branch


def _branch_rows(branch: Branch, mu_c: Dict[float, float]):
    rows = []
    for o in branch.orbits:
        rows.append(
            (
                o.amplitude,
                o.delay,
                o.period,
                o.q,
                o.depth,
                o.residual,
                mu_c.get(o.amplitude, float("nan")),
                o.n_index,
                "interior",
            )
        )
    for o in branch.homoclinic_tail:
        rows.append(
            (o.amplitude, o.delay, o.period, o.q, o.depth, o.residual, float("nan"), o.n_index, "tail")
        )
    lowk = getattr(branch.lower_boundary, "kind", "?")
    upk = getattr(branch.upper_boundary, "kind", "?")
    rows.insert(0, (float("nan"),) * 7 + (0, f"boundary-lower:{lowk}"))
    rows.append((float("nan"),) * 7 + (0, f"boundary-upper:{upk}"))
    return rows


def _boundary_dict(b) -> Dict:
    out = {"kind": getattr(b, "kind", "unknown")}
    for key in ("equilibrium", "nu", "r", "limit_amplitude", "p_reached", "amplitude", "diagnostics"):
        if hasattr(b, key):
            value = getattr(b, key)
            out[key] = value if not isinstance(value, (np.floating,)) else float(value)
    return out


def run_pipeline(config: RunConfig) -> RunManifest:
    """Execute the stages in dependency order and write all artifacts."""
    outdir = config.output_dir
    os.makedirs(outdir, exist_ok=True)
    manifest = RunManifest(config_digest=config.digest(), version=__version__)

    state: Dict = {}

    def stage(name, fn):
        if manifest.failed_stage is not None:
            return
        t0 = time.perf_counter()
        try:
            fn()
            manifest.stages.append({"name": name, "seconds": round(time.perf_counter() - t0, 3), "ok": True})
        except DdeBranchError as exc:
            manifest.stages.append(
                {
                    "name": name,
                    "seconds": round(time.perf_counter() - t0, 3),
                    "ok": False,
                    "error": f"{type(exc).__name__}: {exc}",
                }
            )
            manifest.failed_stage = name
        except Exception as exc:  # unexpected: keep the trace for diagnosis
            manifest.stages.append(
                {
                    "name": name,
                    "seconds": round(time.perf_counter() - t0, 3),
                    "ok": False,
                    "error": f"{type(exc).__name__}: {exc}",
                    "trace": traceback.format_exc(limit=8),
                }
            )
            manifest.failed_stage = name

    def emit(path: str):
        manifest.artifacts.append(os.path.relpath(path, outdir))

    def do_certify():
        model = config.build_model()
        report = certify_feedback(model).require()
        state["model"] = model
        manifest.checks.append(
            {
                "check": "certification",
                "passed": True,
                "sign": report.sign,
                "min_abs_d2f": report.min_abs_d2,
            }
        )

    def do_branch():
        branch = build_branch(config, state["model"])
        state["branch"] = branch
        state["copies"] = {0: branch}
        for m in config.m_copies:
            if m == 0:
                continue
            try:
                state["copies"][m] = rescale_branch(branch, m, newton_tol=config.newton_tol)
            except ZeroDivisionError as exc:
                manifest.checks.append({"check": f"rescale m={m}", "passed": False, "error": str(exc)})
        manifest.checks.append(
            {
                "check": "branch",
                "passed": True,
                "orbits": len(branch.orbits),
                "tail": len(branch.homoclinic_tail),
                "lower": _boundary_dict(branch.lower_boundary),
                "upper": _boundary_dict(branch.upper_boundary),
            }
        )

    def do_floquet():
        branch = state["branch"]
        mu_c: Dict[float, float] = {}
        if config.fill_mu_c > 0:
            idx = np.unique(
                np.round(np.linspace(0, len(branch.orbits) - 1, min(config.fill_mu_c, len(branch.orbits)))).astype(int)
            )
            for k in idx:
                orbit = branch.orbits[int(k)]
                rep = floquet_report(monodromy(orbit, config.floquet_basis))
                mu_c[orbit.amplitude] = rep.mu_c
                if rep.trivial_error > 1e-4:
                    manifest.checks.append(
                        {
                            "check": "floquet-trivial",
                            "passed": False,
                            "amplitude": orbit.amplitude,
                            "trivial_error": rep.trivial_error,
                        }
                    )
        state["mu_c"] = mu_c
        if config.orbit_at_delay is not None:
            orbit = branch.solve_at_delay(config.orbit_at_delay, newton_tol=config.newton_tol)
            rep = floquet_report(monodromy(orbit, config.floquet_basis))
            path = os.path.join(outdir, "floquet.json")
            write_json(
                path,
                {
                    "delay": config.orbit_at_delay,
                    "amplitude": orbit.amplitude,
                    "period": orbit.period,
                    "multipliers": [[float(z.real), float(z.imag)] for z in rep.multipliers[:16]],
                    "trivial_error": rep.trivial_error,
                    "mu_c": rep.mu_c,
                    "hyperbolic": rep.hyperbolic,
                },
            )
            emit(path)

    def do_chart():
        branch = state["branch"]
        chart = PlanarChart(branch, config.t_per_period)
        state["chart"] = chart
        pp = chart.verify_predator_prey()
        manifest.checks.append({"check": "predator-prey", **pp})
        manifest.checks.append(
            {
                "check": "detDG-sign",
                "passed": True,
                "min": float(np.min(np.abs(chart.detDG))),
                "sign": int(np.sign(chart.detDG.flat[0])),
            }
        )
        curves = branch_curves(branch, config.n_curves)
        if config.population_coords:
            curves = [population_coordinates(c) for c in curves]
        state["curves"] = curves
        reports = nesting_check(curves)
        bad = [r for r in reports if r.status not in ("disjoint",)]
        manifest.checks.append(
            {
                "check": "nesting",
                "passed": not bad,
                "pairs": len(reports),
                "offending": [(r.i, r.j, r.status) for r in bad][:8],
            }
        )

    def do_export():
        branch = state["branch"]
        path = os.path.join(outdir, "branch.csv")
        write_csv(
            path,
            ["a", "r", "p", "q", "depth", "residual", "mu_c", "n_index", "flag"],
            _branch_rows(branch, state.get("mu_c", {})),
        )
        emit(path)

        payload = {
            "model": {"name": branch.model.name, "f": branch.model.f_text},
            "boundaries": {
                "lower": _boundary_dict(branch.lower_boundary),
                "upper": _boundary_dict(branch.upper_boundary),
            },
            "hopf": None
            if branch.hopf is None
            else {"equilibrium": branch.hopf.equilibrium, "nu": branch.hopf.nu, "r": branch.hopf.r},
            "orbits": [o.to_dict() for o in branch.orbits],
            "tail": [o.to_dict() for o in branch.homoclinic_tail],
        }
        path = os.path.join(outdir, "orbits.json")
        write_json(path, payload)
        emit(path)

        for m, copy in state["copies"].items():
            if m == 0:
                continue
            path = os.path.join(outdir, f"branch_m{m:+d}.csv".replace("+", "p").replace("-", "m"))
            write_csv(
                path,
                ["a", "r", "p", "q", "depth", "residual", "mu_c", "n_index", "flag"],
                _branch_rows(copy, {}),
            )
            emit(path)

        chart = state.get("chart")
        if chart is not None:
            path = os.path.join(outdir, "chart.csv")
            write_csv(path, ["t", "a", "u", "v", "detDG", "g", "alpha_check"], chart.grid_rows())
            emit(path)
        curves = state.get("curves")
        if curves is not None:
            rows = []
            for cid, curve in enumerate(curves):
                for k, (u, v) in enumerate(curve.vertices):
                    rows.append((str(cid), k, u, v, curve.amplitude))
            path = os.path.join(outdir, "curves.csv")
            write_csv(path, ["curve_id", "vertex", "u", "v", "a"], rows)
            emit(path)

    stage("certify", do_certify)
    stage("branch", do_branch)
    stage("floquet", do_floquet)
    stage("chart", do_chart)
    stage("export", do_export)

    manifest_path = os.path.join(outdir, "manifest.json")
    write_json_atomic(manifest_path, manifest.to_dict())
    return manifest
