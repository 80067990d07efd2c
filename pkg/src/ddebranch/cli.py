"""Command-line interface.

Subcommands (exit codes: 0 ok, 1 verification failure, 2 usage/config
error, 3 numerical failure):

  simulate            forward integration to CSV
  orbit               solve one periodic orbit to JSON
  branch              full pipeline (certify -> branch -> floquet -> chart)
  floquet             multiplier report for a stored orbit
  chart               planar-chart exports for stored branch artifacts
  verify              run the acceptance criteria (machine-readable table)
  export-figure-data  tidy CSVs consumed by the figures package
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .acceptance import AcceptanceContext, run_criteria
from .branches import branch_from_payload, rescale_branch
from .charts import PlanarChart, branch_curves, population_coordinates
from .config import load_config, model_from_block
from .errors import ConfigError, DdeBranchError, NumericalError, VerificationFailure
from .floquet import floquet_report, monodromy
from .models import certify_feedback
from .orbits import PeriodicOrbit, solve_orbit
from .pipeline import build_branch, run_pipeline
from .stepping import HistorySegment, integrate
from .tables import write_csv, write_json

USAGE_ERROR = 2
VERIFY_ERROR = 1
NUMERIC_ERROR = 3


def _history_from_flag(text: str, m: int) -> HistorySegment:
    if text.startswith("const:"):
        return HistorySegment.constant(float(text[6:]), m + 1)
    if text.startswith("expr:"):
        return HistorySegment.from_expression(text[5:], m + 1)
    raise ConfigError(f"bad history spec {text!r}; use const:<v> or expr:<text>")


def cmd_simulate(args) -> int:
    config = load_config(args.model_config)
    model = config.build_model()
    certify_feedback(model).require()
    m = args.steps_per_unit
    traj = integrate(model, args.r, _history_from_flag(args.history, m), args.t_end, m=m)
    ts = traj.times
    keep = ts >= 0.0
    ts = ts[keep]
    rows = zip(ts, traj.value(ts), traj.value(ts - 1.0), traj.residual(ts))
    write_csv(args.out, ["t", "x", "x_delayed", "residual"], rows)
    if traj.domain_violation_t is not None:
        print(f"warning: trajectory left the certified domain at t = {traj.domain_violation_t:.6g}")
    print(f"wrote {args.out} ({ts.size} rows, max residual {traj.max_residual():.3g})")
    return 0


def cmd_orbit(args) -> int:
    config = load_config(args.config)
    model = config.build_model()
    certify_feedback(model).require()
    if args.seed == "hopf":
        from .branches import find_equilibria, hopf_scan, hopf_seed

        equilibria = find_equilibria(model)
        hopfs = [h for x in equilibria for h in hopf_scan(model, x)]
        if not hopfs:
            raise NumericalError("no Hopf root available for seeding")
        hopf = min(hopfs, key=lambda h: abs(h.equilibrium - args.amplitude))
        guess = hopf_seed(model, hopf, n_modes=args.n_modes or config.n_modes)
    elif args.seed == "planar":
        from .branches import seed_from_planar

        guess = seed_from_planar(model, args.amplitude, n_modes=args.n_modes or config.n_modes)
    else:
        with open(args.seed, "r", encoding="utf-8") as fh:
            guess = PeriodicOrbit.from_dict(model, json.load(fh))
    orbit = solve_orbit(
        model,
        target_amplitude=args.amplitude,
        guess=guess,
        n_modes=args.n_modes,
        newton_tol=config.newton_tol,
        p_max=config.p_max,
    )
    write_json(args.out, orbit.to_dict())
    print(
        f"orbit a={orbit.amplitude:.9g} p={orbit.period:.9g} r={orbit.delay:.9g} "
        f"residual={orbit.residual:.3g} -> {args.out}"
    )
    return 0


def cmd_branch(args) -> int:
    config = load_config(args.config)
    if args.out:
        config.output_dir = args.out
    manifest = run_pipeline(config)
    ok = manifest.failed_stage is None
    for stage in manifest.stages:
        flag = "ok" if stage.get("ok") else f"FAILED: {stage.get('error', '?')}"
        print(f"stage {stage['name']:8s} {stage['seconds']:7.2f}s  {flag}")
    print(f"manifest: {os.path.join(config.output_dir, 'manifest.json')}")
    return 0 if ok else NUMERIC_ERROR


def cmd_floquet(args) -> int:
    config = load_config(args.config)
    model = config.build_model()
    with open(args.orbit, "r", encoding="utf-8") as fh:
        orbit = PeriodicOrbit.from_dict(model, json.load(fh))
    rep = floquet_report(monodromy(orbit, args.basis))
    payload = {
        "multipliers": [[float(z.real), float(z.imag)] for z in rep.multipliers[:32]],
        "trivial_error": rep.trivial_error,
        "mu_c": rep.mu_c,
        "hyperbolic": rep.hyperbolic,
        "spectral_gap": list(rep.spectral_gap),
        "warning": rep.warning,
    }
    write_json(args.out, payload)
    print(f"trivial error {rep.trivial_error:.3g}, mu_c {rep.mu_c:.6g}, hyperbolic {rep.hyperbolic}")
    return 0


def cmd_chart(args) -> int:
    config = load_config(args.config)
    model = config.build_model()
    with open(args.orbits, "r", encoding="utf-8") as fh:
        branch = branch_from_payload(model, json.load(fh))
    chart = PlanarChart(branch, config.t_per_period)
    outdir = args.out
    os.makedirs(outdir, exist_ok=True)
    write_csv(
        os.path.join(outdir, "chart.csv"),
        ["t", "a", "u", "v", "detDG", "g", "alpha_check"],
        chart.grid_rows(),
    )
    curves = branch_curves(branch, config.n_curves)
    if config.population_coords:
        curves = [population_coordinates(c) for c in curves]
    rows = []
    for cid, curve in enumerate(curves):
        for k, (u, v) in enumerate(curve.vertices):
            rows.append((str(cid), k, u, v, curve.amplitude))
    write_csv(os.path.join(outdir, "curves.csv"), ["curve_id", "vertex", "u", "v", "a"], rows)
    pp = chart.verify_predator_prey()
    print(f"chart: detDG sign {int(np.sign(chart.detDG.flat[0]))}, feedback product max {pp['max']:.3g}")
    return 0


def cmd_verify(args) -> int:
    ctx = AcceptanceContext(args.out, regen=not args.no_regen)
    ids = args.criteria.split(",") if args.criteria else None
    results = run_criteria(ctx, ids)
    table = [
        {"criterion": r.criterion, "passed": r.passed, "seconds": round(r.seconds, 2), **r.details}
        for r in results
    ]
    write_json(os.path.join(args.out, "verify.json"), table)
    n_fail = sum(1 for r in results if not r.passed)
    print(f"{len(results) - n_fail}/{len(results)} criteria passed")
    return 0 if n_fail == 0 else VERIFY_ERROR


def cmd_export_figure_data(args) -> int:
    ctx = AcceptanceContext(args.acceptance_dir, regen=not args.no_regen)
    outdir = args.out
    os.makedirs(outdir, exist_ok=True)

    # family 1: delayed logistic in population coordinates, three copies
    branch = ctx.branch("hutchinson")
    rows = []
    for m in (0, 1, -1):
        copy = branch if m == 0 else rescale_branch(branch, m)
        for orbit in copy.orbits:
            rows.append((math.exp(orbit.amplitude), orbit.delay, orbit.period, m))
    write_csv(os.path.join(outdir, "fig1_branches.csv"), ["a", "r", "p", "m"], rows)

    curves = [population_coordinates(c) for c in branch_curves(branch, args.curves, args.points)]
    crows = []
    for cid, curve in enumerate(curves):
        if curve.amplitude > args.amplitude_cap:
            continue
        for k, (u, v) in enumerate(curve.vertices):
            crows.append((str(cid), k, u, v, curve.amplitude, "0"))
    write_csv(
        os.path.join(outdir, "fig1_curves.csv"),
        ["curve_id", "vertex", "u", "v", "a", "family"],
        crows,
    )

    # family 2: double-well, three cyclicity components
    rows = []
    crows = []
    for fam, key in enumerate(("qrt-left", "qrt-right", "qrt-outer")):
        qbranch = ctx.branch(key)
        for orbit in qbranch.orbits:
            rows.append((orbit.amplitude, orbit.delay, orbit.period, fam))
        for cid, curve in enumerate(branch_curves(qbranch, args.curves, args.points)):
            for k, (u, v) in enumerate(curve.vertices):
                crows.append((f"{fam}:{cid}", k, u, v, curve.amplitude, str(fam)))
    write_csv(os.path.join(outdir, "fig2_branches.csv"), ["a", "r", "p", "family"], rows)
    write_csv(
        os.path.join(outdir, "fig2_curves.csv"),
        ["curve_id", "vertex", "u", "v", "a", "family"],
        crows,
    )
    print(f"figure data written to {outdir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddebranch", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ddebranch {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate the delay equation forward")
    p.add_argument("--model-config", required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--history", required=True, help="const:<v> or expr:<text in u>")
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--steps-per-unit", type=int, default=128)
    p.add_argument("--out", default="traj.csv")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("orbit", help="solve one periodic orbit")
    p.add_argument("--config", required=True)
    p.add_argument("--amplitude", type=float, required=True)
    p.add_argument("--seed", default="hopf", help="hopf | planar | <orbit.json>")
    p.add_argument("--n-modes", type=int, default=None)
    p.add_argument("--out", default="orbit.json")
    p.set_defaults(fn=cmd_orbit)

    p = sub.add_parser("branch", help="run the full pipeline for a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="override output directory")
    p.set_defaults(fn=cmd_branch)

    p = sub.add_parser("floquet", help="multiplier report for a stored orbit")
    p.add_argument("--config", required=True)
    p.add_argument("--orbit", required=True)
    p.add_argument("--basis", type=int, default=64)
    p.add_argument("--out", default="floquet.json")
    p.set_defaults(fn=cmd_floquet)

    p = sub.add_parser("chart", help="planar chart exports from stored artifacts")
    p.add_argument("--config", required=True)
    p.add_argument("--orbits", required=True, help="orbits.json from a branch run")
    p.add_argument("--out", default="chart-out")
    p.set_defaults(fn=cmd_chart)

    p = sub.add_parser("verify", help="run the acceptance criteria")
    p.add_argument("--out", default="acceptance-out")
    p.add_argument("--criteria", default=None, help="comma-separated subset, e.g. AC-1,AC-2")
    p.add_argument("--no-regen", action="store_true", help="fail if artifacts are missing")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("export-figure-data", help="write figure CSVs")
    p.add_argument("--acceptance-dir", default="acceptance-out")
    p.add_argument("--out", default="figure-data")
    p.add_argument("--curves", type=int, default=20)
    p.add_argument("--points", type=int, default=512, help="vertices per curve")
    p.add_argument("--amplitude-cap", type=float, default=5.0)
    p.add_argument("--no-regen", action="store_true")
    p.set_defaults(fn=cmd_export_figure_data)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except VerificationFailure as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return VERIFY_ERROR
    except (NumericalError, DdeBranchError, ArithmeticError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return NUMERIC_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
