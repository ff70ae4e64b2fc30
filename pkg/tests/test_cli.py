import json

import numpy as np
import pytest

from qfpd.cli import main, read_control
from qfpd.errors import ValidationError

SHORT = """
preset = "spin_half"
theta = 0.1
dt = 2.5e-6
horizon = 300
g_r = 1e-5
omega = 10
x0 = [0, 1, 0, 0]
target = [1, 0]
ensemble_size = 20
seed = 5
"""


@pytest.fixture
def cfg_path(tmp_path):
    path = tmp_path / "short.cfg"
    path.write_text(SHORT)
    return path


def optimize(cfg_path, out, *extra):
    return main(["optimize", "--config", str(cfg_path), "--out-dir", str(out), *extra])


def test_optimize_writes_files(cfg_path, tmp_path):
    out = tmp_path / "run"
    assert optimize(cfg_path, out, "--seed", "7") == 0
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,u,fidelity,pop_0,pop_1,trace_drift"
    assert len(lines) == 302
    assert lines[-1].split(",")[1] == "nan"
    controls = read_control(out / "control.csv")
    assert controls.shape == (300,)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["config"]["seed"] == 7
    assert "sigma" in manifest["defaults_used"]
    assert manifest["code_version"]


def test_trajectory_values_round_trip(cfg_path, tmp_path):
    out = tmp_path / "run"
    optimize(cfg_path, out)
    table = np.loadtxt(out / "trajectory.csv", delimiter=",", skiprows=1)
    assert np.allclose(table[:, 3] + table[:, 4] - 1, table[:, 5], atol=1e-15)
    assert table[0, 2] == 0.0


def test_test_command_and_determinism(cfg_path, tmp_path):
    out = tmp_path / "run"
    optimize(cfg_path, out)
    args = ["test", "--config", str(cfg_path), "--control", str(out / "control.csv"),
            "--members", "12", "--seed", "3", "--out-dir"]
    assert main(args + [str(tmp_path / "a")]) == 0
    assert main(args + [str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "ensemble.json").read_bytes()
    assert a == (tmp_path / "b" / "ensemble.json").read_bytes()
    report = json.loads(a)
    assert set(report) == {"n_members", "seed", "mean", "min", "max", "fidelities"}
    assert report["n_members"] == 12 and len(report["fidelities"]) == 12


def test_repeat_and_manifest_replay_are_identical(cfg_path, tmp_path):
    optimize(cfg_path, tmp_path / "a")
    optimize(cfg_path, tmp_path / "b")
    assert main(["optimize", "--config", str(tmp_path / "a" / "manifest.json"), "--out-dir",
                 str(tmp_path / "c")]) == 0
    ref = (tmp_path / "a" / "trajectory.csv").read_bytes()
    for run in ("b", "c"):
        assert (tmp_path / run / "trajectory.csv").read_bytes() == ref
        assert (tmp_path / run / "control.csv").read_bytes() == \
            (tmp_path / "a" / "control.csv").read_bytes()
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mc = json.loads((tmp_path / "c" / "manifest.json").read_text())
    ma.pop("timestamp"), mc.pop("timestamp")
    ma["config"].pop("output_dir"), mc["config"].pop("output_dir")
    mc["defaults_used"] = ma["defaults_used"]
    assert ma == mc


def test_noise_overrides(cfg_path, tmp_path):
    out = tmp_path / "run"
    assert optimize(cfg_path, out, "--sigma", "1e-9", "--g", "2e-6", "--sample-control") == 0
    cfg = json.loads((out / "manifest.json").read_text())["config"]
    assert cfg["sigma"] == 1e-9 and cfg["g"] == [[2e-6]] and cfg["sample_control"] is True


def test_errors_give_nonzero_exit(cfg_path, tmp_path, capsys):
    assert main(["optimize", "--config", str(tmp_path / "none.cfg")]) != 0
    bad = tmp_path / "bad.cfg"
    bad.write_text(SHORT.replace("target = [1, 0]", "target = [1, 0, 0]"))
    assert main(["optimize", "--config", str(bad), "--out-dir", str(tmp_path)]) != 0
    assert "target" in capsys.readouterr().err
    assert main(["test", "--config", str(cfg_path), "--control", str(tmp_path / "x.csv"),
                 "--out-dir", str(tmp_path)]) != 0
    assert main(["optimize", "--config", str(cfg_path), "--sigma", "1e-4", "--out-dir",
                 str(tmp_path / "diverge")]) != 0
    assert "sigma" in capsys.readouterr().err


def test_read_control_validation(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("u\n1.0\nnan\n")
    with pytest.raises(ValidationError):
        read_control(path)
    path.write_text("u\n1.0,2.0\n")
    with pytest.raises(ValidationError):
        read_control(path)


def test_presets(capsys):
    assert main(["presets"]) == 0
    out = capsys.readouterr().out
    assert "spin_half" in out and "lambda_type" in out


def test_oracle_command(capsys):
    assert main(["oracle"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 10
