import csv
import hashlib
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from riswave.cli import main
from riswave.field import read_map_csv
from riswave.metrics import on_axis_focus
from riswave.scene import RisGeometry, medium_from_wavelength

SCEN = Path(__file__).resolve().parents[1] / "scenarios"


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def run(*argv):
    return main([str(a) for a in argv])


def test_beam_steering_symmetric_and_manifest(tmp_path):
    out = tmp_path / "o"
    assert run("beam", "--scenario", SCEN / "focus.yaml", "--out", out, "--kind", "steering",
               "--z-min", 0.1, "--z-max", 1.0, "--nz", 10, "--serial") == 0
    m = read_map_csv(out / "map.csv")
    asym = np.abs(m.intensity - m.intensity[:, ::-1]).sum()
    assert asym < 1e-6 * m.intensity.sum()
    man = json.loads((out / "manifest.json").read_text())
    assert {e["file"] for e in man["outputs"]} == {"map.csv", "phase.csv", "metrics.csv"}
    for e in man["outputs"]:
        assert hashlib.sha256((out / e["file"]).read_bytes()).hexdigest() == e["sha256"]
    assert man["version"] and man["seed"] == 0 and man["subcommand"] == "beam"
    assert "wall_clock_s" in man and man["scenario"].endswith("focus.yaml")


def test_beam_focusing_center_near_f0(tmp_path):
    scen = tmp_path / "f3.yaml"
    scen.write_text("medium: {wavelength: 0.002}\nris: {nx: 256, ny: 256, pitch: 0.001}\n"
                    "incident: {footprint_radius: 0.1, power: 1.0}\nue_position: [0.0, 1.0]\n")
    out = tmp_path / "o"
    assert run("beam", "--scenario", scen, "--out", out, "--kind", "focusing", "--f0", 3,
               "--z-min", 1, "--z-max", 5, "--nz", 41) == 0
    rec = rows(out / "metrics.csv")[0]
    z_pk = float(rec["peak_z"])
    # oracle: on-axis direct summation of the same aperture
    z_direct = on_axis_focus(RisGeometry(256, 256, 1e-3), medium_from_wavelength(2e-3), 0.1, 3.0)[0]
    assert abs(z_pk - z_direct) <= 0.1  # one z-step
    assert abs(z_pk - 3.0) <= 0.1 * 3.0
    assert float(rec["major_radius"]) >= float(rec["minor_radius"]) > 0


def test_unknown_kind_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        run("beam", "--scenario", SCEN / "focus.yaml", "--out", tmp_path, "--kind", "bogus")
    assert info.value.code == 2


def test_missing_parameter_exit_2(tmp_path, capsys):
    assert run("beam", "--scenario", SCEN / "focus.yaml", "--out", tmp_path, "--kind", "focusing") == 2
    assert "--f0" in capsys.readouterr().err


def test_bad_scenario_fails_fast(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("medium:\n  wavelength: 0.002\nris:\n  nx: 0\n  ny: 4\n")
    assert run("heal", "--scenario", bad, "--out", tmp_path / "o") == 2
    err = capsys.readouterr().err
    assert "line 4" in err and "ris.nx" in err
    assert not list((tmp_path / "o").glob("*.csv"))


def test_sweep_resolution_law(tmp_path):
    assert run("sweep-resolution", "--out", tmp_path / "a", "--d-max", 5) == 0
    assert run("sweep-resolution", "--out", tmp_path / "b", "--d-max", 10, "--l-min", 1, "--l-max", 9) == 0
    a = rows(tmp_path / "a" / "resolution.csv")
    b = rows(tmp_path / "b" / "resolution.csv")
    assert float(a[0]["angular_resolution_deg"]) == 90.0
    for r0, r1 in zip(a, a[1:]):
        assert float(r1["radial_resolution_m"]) == float(r0["radial_resolution_m"]) / 2
        assert float(r1["angular_resolution_deg"]) == float(r0["angular_resolution_deg"]) / 2
    # D_max 10 m table is the 5 m table shifted by one level
    for ra, rb in zip(a, b[1:]):
        assert float(rb["radial_resolution_m"]) == float(ra["radial_resolution_m"])
    assert [int(r["scans"]) for r in a] == [2 * int(r["level"]) for r in a]


def test_sweep_footprint_empty_and_infeasible(tmp_path):
    assert run("sweep-footprint", "--scenario", SCEN / "focus.yaml", "--out", tmp_path / "e", "--f0", "") == 0
    lines = (tmp_path / "e" / "footprint.csv").read_text().splitlines()
    assert lines == ["f0_m,target_major_radius_m,footprint_radius_m,status,detail"]
    assert run("sweep-footprint", "--scenario", SCEN / "focus.yaml", "--out", tmp_path / "i",
               "--f0", "2", "--targets", "0.01") == 0
    (rec,) = rows(tmp_path / "i" / "footprint.csv")
    assert rec["status"] == "infeasible" and math.isnan(float(rec["footprint_radius_m"]))


def test_heal_without_obstacles_reports_sentinel(tmp_path):
    out = tmp_path / "o"
    assert run("heal", "--scenario", SCEN / "focus.yaml", "--out", out, "--z-min", 0.1, "--z-max", 0.5,
               "--nz", 5, "--C", 0.05) == 0
    for rec in rows(out / "reconstruction.csv"):
        assert rec["z_b"] == "none"
        assert float(rec["reconstruction_distance_m"]) == pytest.approx(0.1)


def test_localize_outputs_and_failure(tmp_path):
    out = tmp_path / "o"
    assert run("localize", "--scenario", SCEN / "localize.yaml", "--out", out) == 0
    (res,) = rows(out / "result.csv")
    assert res["contains_ue"] == "true" and int(res["scans"]) == 16
    scans = rows(out / "scans.csv")
    assert len(scans) == 16 and [s["phase"] for s in scans].count("range") == 6
    assert run("localize", "--scenario", SCEN / "localize.yaml", "--out", tmp_path / "f",
               "--fov-min", 40, "--fov-max", 60) == 3


def test_serial_reruns_byte_identical(tmp_path):
    args = ["heal", "--scenario", SCEN / "heal.yaml", "--grid-scale", 0.5, "--nz", 30, "--serial"]
    assert run(*args, "--out", tmp_path / "a") == 0
    assert run(*args, "--out", tmp_path / "b") == 0
    names = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    assert len(names) == 6
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["parameters"]["grid_scale"] == 0.5


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "riswave", "sweep-resolution", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "resolution.csv").exists()
