#!/usr/bin/env python3
"""Render branch diagrams and phase portraits from exported CSVs.

Usage:
    python figures/render.py --spec figures/specs/fig1.json --out out-dir/

The spec file lists panels; CSV paths inside it are resolved relative
to the spec's directory.  Two panel kinds are supported:

* ``phase_portrait``  -- projected integral curves from a curves CSV,
  one color per family, optionally capped by amplitude.
* ``branch_diagram``  -- delay map r(a); the ``style_by`` column selects
  the line style (time-rescaled copies m = 0/+1/-1 render solid,
  dashed and dotted) or the color (cyclicity component families).

Rendering is read-only and deterministic: rerunning produces identical
curve/component counts (logged to stdout and counts.json).
"""

import argparse
import json
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

M_STYLES = {0: "solid", 1: "dashed", -1: "dotted"}
FAMILY_COLORS = ["tab:blue", "tab:green", "tab:orange", "tab:red", "tab:purple"]


class RenderError(RuntimeError):
    pass


def _load_csv(spec_dir, rel_path, required):
    path = os.path.join(spec_dir, rel_path)
    if not os.path.exists(path):
        raise RenderError(f"input CSV not found: {path}")
    frame = pd.read_csv(path)
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise RenderError(f"{path}: missing columns {missing}")
    return frame


def render_phase_portrait(panel, spec_dir, ax):
    frame = _load_csv(spec_dir, panel["curves_csv"], ["curve_id", "u", "v"])
    if frame.empty:
        raise RenderError(f"{panel['curves_csv']}: no curve data")
    if "family" not in frame.columns:
        frame["family"] = "0"
    frame["family"] = frame["family"].astype(str)
    cap = panel.get("amplitude_cap")
    if cap is not None and "a" in frame.columns:
        frame = frame[frame["a"] < float(cap)]
        if frame.empty:
            raise RenderError("amplitude cap removed every curve")

    families = sorted(frame["family"].unique())
    n_curves = 0
    for fam_idx, family in enumerate(families):
        color = FAMILY_COLORS[fam_idx % len(FAMILY_COLORS)]
        for _, group in frame[frame["family"] == family].groupby("curve_id"):
            closed = pd.concat([group, group.iloc[:1]])
            ax.plot(closed["u"], closed["v"], color=color, linewidth=0.7)
            n_curves += 1
    ax.set_aspect("equal")
    ax.set_xlabel(panel.get("xlabel", "x(t)"))
    ax.set_ylabel(panel.get("ylabel", "x(t-1)"))
    ax.set_title(panel.get("title", ""))
    return {"curves": n_curves, "families": len(families)}


def render_branch_diagram(panel, spec_dir, ax):
    style_by = panel.get("style_by", "m")
    frame = _load_csv(spec_dir, panel["branches_csv"], ["a", "r", style_by])
    if frame.empty:
        raise RenderError(f"{panel['branches_csv']}: no branch data")
    groups = sorted(frame[style_by].unique())
    for idx, key in enumerate(groups):
        part = frame[frame[style_by] == key].sort_values("a")
        if style_by == "m":
            style = M_STYLES.get(int(key), "solid")
            color = "black"
            label = f"m = {int(key):+d}" if key else "m = 0"
        else:
            style = "solid"
            color = FAMILY_COLORS[idx % len(FAMILY_COLORS)]
            label = f"family {int(key)}"
        ax.plot(part["a"], part["r"], linestyle=style, color=color, linewidth=1.0, label=label)
    ax.set_xlabel(panel.get("xlabel", "amplitude a"))
    ax.set_ylabel(panel.get("ylabel", "delay r(a)"))
    ax.set_title(panel.get("title", ""))
    ax.legend(fontsize=7)
    return {"branch_copies": len(groups)}


RENDERERS = {
    "phase_portrait": render_phase_portrait,
    "branch_diagram": render_branch_diagram,
}


def render_spec(spec_path, outdir):
    with open(spec_path, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    spec_dir = os.path.dirname(os.path.abspath(spec_path))
    panels = spec.get("panels")
    if not panels:
        raise RenderError("spec has no panels")
    os.makedirs(outdir, exist_ok=True)

    fig, axes = plt.subplots(1, len(panels), figsize=(5.2 * len(panels), 4.4), dpi=130)
    if len(panels) == 1:
        axes = [axes]
    counts = {}
    for ax, panel in zip(axes, panels):
        kind = panel.get("kind")
        if kind not in RENDERERS:
            raise RenderError(f"unknown panel kind {kind!r}")
        counts[panel.get("name", kind)] = RENDERERS[kind](panel, spec_dir, ax)
    fig.tight_layout()

    name = spec.get("name", os.path.splitext(os.path.basename(spec_path))[0])
    image_path = os.path.join(outdir, f"{name}.png")
    fig.savefig(image_path, metadata={"Software": "figures/render.py"})
    plt.close(fig)

    counts_path = os.path.join(outdir, f"{name}_counts.json")
    with open(counts_path, "w", encoding="utf-8") as fh:
        json.dump(counts, fh, indent=1, sort_keys=True)
        fh.write("\n")
    for panel_name, panel_counts in sorted(counts.items()):
        stats = ", ".join(f"{k}={v}" for k, v in sorted(panel_counts.items()))
        print(f"panel {panel_name}: {stats}")
    return image_path, counts


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--spec", required=True, help="panel spec JSON")
    parser.add_argument("--out", required=True, help="output directory")
    args = parser.parse_args(argv)
    try:
        image, _ = render_spec(args.spec, args.out)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {image}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
