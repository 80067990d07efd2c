import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from ddebranch.cli import main
from ddebranch.tables import read_csv

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def write_config(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return str(path)


ENHARMONIC_UNIT = """
[model]
kind = "enharmonic"
omega = "1"

[continuation]
amplitude_window = [0.5, 1.5]
seed = "planar"
seed_amplitude = 1.0

[floquet]
fill_mu_c = 3

[chart]
curves = 6

[output]
directory = "{out}"
"""


def test_simulate_csv(tmp_path, capsys):
    cfg = write_config(tmp_path, ENHARMONIC_UNIT.format(out=tmp_path / "out"))
    out = tmp_path / "traj.csv"
    rc = main(
        [
            "simulate",
            "--model-config",
            cfg,
            "--r",
            str(math.pi / 2),
            "--history",
            "expr:cos(1.5707963267948966*u)",
            "--t-end",
            "10",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    header, rows = read_csv(str(out))
    assert header == ["t", "x", "x_delayed", "residual"]
    data = np.array(rows, dtype=float)
    assert np.max(np.abs(data[:, 1] - np.cos(math.pi / 2 * data[:, 0]))) < 1e-8
    assert np.max(data[:, 3]) < 1e-5


def test_simulate_determinism(tmp_path):
    cfg = write_config(tmp_path, ENHARMONIC_UNIT.format(out=tmp_path / "out"))
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        assert (
            main(
                [
                    "simulate",
                    "--model-config",
                    cfg,
                    "--r",
                    "1.3",
                    "--history",
                    "const:0.4",
                    "--t-end",
                    "8",
                    "--out",
                    str(out),
                ]
            )
            == 0
        )
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_orbit_subcommand(tmp_path):
    cfg = write_config(tmp_path, ENHARMONIC_UNIT.format(out=tmp_path / "out"))
    out = tmp_path / "orbit.json"
    rc = main(["orbit", "--config", cfg, "--amplitude", "1.0", "--seed", "planar", "--out", str(out)])
    assert rc == 0
    data = json.loads(out.read_text())
    assert data["p"] == pytest.approx(4.0, abs=1e-8)
    assert data["r"] == pytest.approx(math.pi / 2, abs=1e-8)
    assert len(data["profile"]) == 128


def test_pipeline_and_artifacts(tmp_path):
    outdir = tmp_path / "out"
    cfg = write_config(tmp_path, ENHARMONIC_UNIT.format(out=outdir))
    rc = main(["branch", "--config", cfg])
    assert rc == 0
    manifest = json.loads((outdir / "manifest.json").read_text())
    assert manifest["failed_stage"] is None
    for artifact in manifest["artifacts"]:
        assert (outdir / artifact).exists()
    names = {os.path.basename(a) for a in manifest["artifacts"]}
    assert {"branch.csv", "orbits.json", "chart.csv", "curves.csv"} <= names

    header, rows = read_csv(str(outdir / "branch.csv"))
    ia, ir, iflag = header.index("a"), header.index("r"), header.index("flag")
    interior = [row for row in rows if row[iflag] == "interior"]
    for row in interior:
        assert row[ir] == pytest.approx(math.pi / 2, abs=1e-7)

    # floquet on the stored seed orbit
    orbit_json = tmp_path / "orbit.json"
    payload = json.loads((outdir / "orbits.json").read_text())
    orbit_json.write_text(json.dumps(payload["orbits"][0]))
    fl = tmp_path / "floquet.json"
    rc = main(["floquet", "--config", cfg, "--orbit", str(orbit_json), "--basis", "32", "--out", str(fl)])
    assert rc == 0
    rep = json.loads(fl.read_text())
    assert rep["trivial_error"] < 1e-4

    # chart from stored artifacts
    chart_out = tmp_path / "chart-out"
    rc = main(["chart", "--config", cfg, "--orbits", str(outdir / "orbits.json"), "--out", str(chart_out)])
    assert rc == 0
    assert (chart_out / "chart.csv").exists()
    assert (chart_out / "curves.csv").exists()


def test_empty_window_config_error(tmp_path):
    bad = ENHARMONIC_UNIT.format(out=tmp_path / "out").replace("[0.5, 1.5]", "[-1, -1]")
    cfg = write_config(tmp_path, bad)
    rc = main(["branch", "--config", cfg])
    assert rc == 2


def test_missing_config_usage_error(tmp_path):
    rc = main(["branch", "--config", str(tmp_path / "nope.toml")])
    assert rc == 2


def test_verify_no_regen_missing_artifacts(tmp_path):
    rc = main(["verify", "--out", str(tmp_path / "empty"), "--criteria", "AC-1", "--no-regen"])
    assert rc in (1, 2)


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "ddebranch.cli", "--version"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode in (0, 2)
    assert "ddebranch" in proc.stdout + proc.stderr


def test_repo_configs_parse():
    from ddebranch.config import load_config

    for name in ("enharmonic.toml", "hutchinson.toml", "qrt-right.toml"):
        cfg = load_config(os.path.join(CONFIG_DIR, name))
        assert cfg.build_model() is not None
