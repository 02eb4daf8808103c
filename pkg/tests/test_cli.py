import csv
import io
import json
import math
import os
import re
import subprocess
import sys
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from intphase.cli import main
from intphase.config import ConfigError, dumps_config, loads_config, parse_config, resolve_axis, with_value
from intphase.report import dumps, fmt

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_simulate_static(capsys):
    code, out, _ = run(["simulate", "--config", str(CONFIGS / "static_clock.toml")], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["metadata"]["package"] == "intphase"
    body = rep["body"]
    assert body["classification"] == "gold_standard_UGR"
    assert body["phi"] == pytest.approx(-0.29421496709011385 + body["differential"]["wp"], rel=1e-9)


def test_simulate_is_byte_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cfg = str(CONFIGS / "mach_zehnder.toml")
    assert main(["simulate", "--config", cfg, "--out", str(a)]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_invalid_config_exit_code(capsys):
    code, _, err = run(["simulate", "--config", str(CONFIGS / "bad_negative_T.toml")], capsys)
    assert code == 2
    assert "geometry.T" in err


def test_missing_config_exit_code(capsys):
    code, _, err = run(["simulate", "--config", "/nonexistent.toml"], capsys)
    assert code == 2 and "cannot read" in err


def test_unknown_key_rejected(tmp_path, capsys):
    p = tmp_path / "c.toml"
    p.write_text('[geometry]\nname = "clock_static"\ndzeta0 = 1.0\nT = 1.0\ncolor = "red"\n')
    code, _, err = run(["simulate", "--config", str(p)], capsys)
    assert code == 2 and "color" in err


def test_custom_dsl_warns_no_reference(capsys):
    code, out, _ = run(["simulate", "--config", str(CONFIGS / "custom_mz.toml")], capsys)
    assert code == 0
    body = json.loads(out)["body"]
    assert body["reference"] is None
    assert any("no closed-form" in w for w in body["warnings"])


def test_sweep_g(capsys):
    code, out, _ = run(["sweep", "--config", str(CONFIGS / "mach_zehnder.toml"), "--axis", "g",
                        "--values", "4.9,9.81,19.6", "--jobs", "1"], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["environment.g", "phi", "phi_ref", "residual"]
    assert len(rows) == 4
    assert all(abs(float(r[1])) < 1e-15 for r in rows[1:])


def test_sweep_parallel_matches_serial(capsys):
    args = ["sweep", "--config", str(CONFIGS / "static_clock.toml"), "--axis", "alpha", "--values", "0,1e-3"]
    _, serial, _ = run(args + ["--jobs", "1"], capsys)
    _, par, _ = run(args + ["--jobs", "2"], capsys)
    assert serial == par
    rows = list(csv.reader(io.StringIO(serial)))[1:]
    assert float(rows[1][1]) / float(rows[0][1]) == pytest.approx(1.001, rel=1e-9)


@pytest.mark.parametrize("extra", [["--axis", "g", "--values", "9.81,abc"],
                                   ["--axis", "colour", "--values", "1"],
                                   ["--axis", "T", "--values", "0.1,-0.1"]])
def test_sweep_invalid_input(extra, capsys):
    code, _, err = run(["sweep", "--config", str(CONFIGS / "mach_zehnder.toml"), "--jobs", "1"] + extra, capsys)
    assert code == 2 and err.startswith("error:")


def test_sensitivity_command(capsys):
    code, out, _ = run(["sensitivity", "--config", str(CONFIGS / "levitated.toml")], capsys)
    assert code == 0
    assert json.loads(out)["body"]["delta_alpha"] == pytest.approx(1.7913645995e-3, abs=1e-12)


def test_sensitivity_needs_block(capsys):
    code, _, _ = run(["sensitivity", "--config", str(CONFIGS / "mach_zehnder.toml")], capsys)
    assert code == 2


def test_classify_command(capsys):
    code, out, _ = run(["classify", "--config", str(CONFIGS / "guided_ai.toml")], capsys)
    assert code == 0
    assert json.loads(out)["body"]["classification"] == "gold_standard_UGR"


def test_export_trajectories(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    assert main(["export-trajectories", "--config", str(CONFIGS / "mach_zehnder.toml"), "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0][:3] == ["t", "z_upper", "z_lower"]
    assert len(rows) == 202
    assert abs(float(rows[-1][-1])) < 1e-15


def test_verify_selected_criteria(capsys):
    code, out, _ = run(["verify", "--criteria", "6"], capsys)
    assert code == 0
    assert re.match(r"criterion +6: PASS", out)


def test_verify_bad_criteria(capsys):
    code, _, _ = run(["verify", "--criteria", "x"], capsys)
    assert code == 2


def test_verify_fault_injection():
    env = dict(os.environ, INTPHASE_QUAD_TOL="1e-3")
    proc = subprocess.run([sys.executable, "-m", "intphase.cli", "verify", "--criteria", "1,3", "--oracle", "off"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 1
    assert re.search(r"criterion +1: FAIL", proc.stdout)
    assert "cannot certify" in proc.stdout
    assert "SKIP" in proc.stdout


# ---------------------------------------------------------------- config and report

def test_config_round_trip():
    for path in CONFIGS.glob("*.toml"):
        if path.name.startswith("bad_"):
            continue
        cfg = loads_config(path.read_text())
        assert loads_config(dumps_config(cfg)) == cfg


@settings(max_examples=40, deadline=None)
@given(T=st.floats(1e-3, 10.0), dz=st.floats(1e-4, 10.0), alpha=st.floats(-1e-2, 1e-2),
       g=st.floats(0.1, 30.0))
def test_config_round_trip_property(T, dz, alpha, g):
    cfg = parse_config({"geometry": {"name": "clock_static", "dzeta0": dz, "T": T},
                        "violation": {"alpha": alpha}, "environment": {"g": g}})
    assert loads_config(dumps_config(cfg)) == cfg


def test_config_alpha_and_beta_b_exclusive():
    with pytest.raises(ConfigError, match="either beta_b or alpha"):
        parse_config({"geometry": {"name": "clock_static", "dzeta0": 1.0, "T": 1.0},
                      "violation": {"alpha": 1e-3, "beta_b": 0.0}})


def test_axis_resolution():
    cfg = loads_config((CONFIGS / "static_clock.toml").read_text())
    assert resolve_axis(cfg, "g") == "environment.g"
    assert resolve_axis(cfg, "T") == "geometry.T"
    assert with_value(cfg, "alpha", 2e-3).violation.alpha == 2e-3
    with pytest.raises(ConfigError):
        resolve_axis(cfg, "geometry.name")


def test_float_formatting():
    assert fmt(-0.0) == "0.0000000000000000e+00"
    assert float(fmt(math.pi)) == math.pi
    assert fmt(float("nan")) == "NaN"
    assert dumps({"b": 1, "a": [0.5, None, True]}) == (
        '{\n  "b": 1,\n  "a": [\n    5.0000000000000000e-01,\n    null,\n    true\n  ]\n}\n')
