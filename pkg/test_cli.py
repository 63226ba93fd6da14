"""
End-to-end tests of the gyrolab command line, run in-process.
"""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from lab import GyroLab, run

CONFIGS = Path(__file__).parent / "configs"


def _csv(path):
    lines = Path(path).read_text().splitlines()
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


def test_every_subcommand_is_registered():
    lab = GyroLab()
    assert set(lab.commands) == {
        "simulate", "gc", "compare", "sweep", "verify-field", "verify-identities", "mirror-bounce", "pressure-drift",
    }


def test_print_defaults(capsys):
    assert run(["simulate", "--print-defaults"]) == 0
    text = capsys.readouterr().out
    assert 'model = "uniform"' in text
    assert 'scheme = "boris"' in text
    assert "[params]" in text


def test_simulate_uniform_helix(run_cli, read_manifest, helix):
    code, out = run_cli("simulate", "--config", str(CONFIGS / "uniform.toml"))
    assert code == 0
    header, rows = _csv(out / "trajectory.csv")
    assert header == ["t", "x", "y", "z", "vx", "vy", "vz"]
    data = np.array(rows, dtype=float)
    assert data[0, 0] == 0.0 and data[-1, 0] == 1.0
    assert np.max(np.abs(data[:, 1:4] - helix(data[:, 0], 100.0))) < 1e-4

    manifest = read_manifest(out)
    assert manifest["command"] == "simulate"
    assert manifest["config"]["omega"] == 100.0
    assert manifest["outputs"][0]["path"] == "trajectory.csv"
    assert manifest["results"]["exit_code"] == 0
    assert manifest["results"]["speed_drift"] < 1e-12
    assert "tool_version" in manifest and "system" in manifest


def test_missing_config_file(run_cli, capsys):
    code, _ = run_cli("simulate", "--config", "no/such/file.toml")
    assert code == 2
    assert "no/such/file.toml" in capsys.readouterr().err


def test_unknown_keys_are_rejected(run_cli, capsys, tmp_path):
    config = tmp_path / "bad.toml"
    config.write_text('model = "uniform"\nomgea = 10.0\nstep = 3\n')
    code, out = run_cli("simulate", "--config", str(config))
    assert code == 2
    err = capsys.readouterr().err
    assert "omgea" in err and "step" in err
    assert not (out / "manifest.json").exists()


def test_set_overrides_the_config_file(run_cli, read_manifest):
    code, out = run_cli("simulate", "--config", str(CONFIGS / "uniform.toml"), "--set", "omega=200", "--set", "T=0.1")
    assert code == 0
    config = read_manifest(out)["config"]
    assert config["omega"] == 200.0 and config["T"] == 0.1


def test_output_is_byte_identical_and_reproducible_from_the_manifest(run_cli):
    args = ("simulate", "--config", str(CONFIGS / "toroidal.toml"), "--set", "T=0.2")
    _, first = run_cli(*args, out="first")
    _, second = run_cli(*args, out="second")
    original = (first / "trajectory.csv").read_bytes()
    assert (second / "trajectory.csv").read_bytes() == original

    code, rerun = run_cli("simulate", "--config", str(first / "manifest.json"), out="rerun")
    assert code == 0
    assert (rerun / "trajectory.csv").read_bytes() == original


def test_domain_exit_is_a_numerical_failure(run_cli, read_manifest):
    code, out = run_cli("simulate", "--set", "params.half_width=1", "--set", "v0=[0, 0, 1]", "--set", "T=5")
    assert code == 3
    assert "left the domain" in read_manifest(out)["results"]["error"]


def test_gc_writes_guiding_centre_columns(run_cli):
    code, out = run_cli("gc", "--config", str(CONFIGS / "uniform.toml"))
    assert code == 0
    header, rows = _csv(out / "gc_trajectory.csv")
    assert header == ["t", "Rx", "Ry", "Rz", "h", "mu0"]
    assert len(rows) == 2001
    assert float(rows[-1][3]) == pytest.approx(1.0)
    assert float(rows[0][5]) == pytest.approx(0.5)


def test_compare_without_pressure_leaves_pressure_columns_empty(run_cli, read_manifest):
    code, out = run_cli("compare", "--config", str(CONFIGS / "uniform.toml"), "--set", "T=0.2")
    assert code == 0
    header, rows = _csv(out / "compare.csv")
    assert header == ["t", "err_pos", "mu_inst", "phase_rate", "pressure_lhs", "pressure_rhs"]
    assert rows[-1][4] == "nan" and rows[-1][5] == "nan"
    assert float(rows[-1][2]) == pytest.approx(0.5)
    assert read_manifest(out)["results"]["max_err_pos"] < 1e-9


def test_verify_field(run_cli):
    code, out = run_cli("verify-field", "--model", "screw_pinch", "--n", "50")
    assert code == 0
    header, rows = _csv(out / "verify_field.csv")
    assert header == ["model", "check", "max", "mean", "n", "seed"]
    assert [row[1] for row in rows] == ["divergence", "jacobian", "equilibrium"]


def test_verify_identities(run_cli):
    code, out = run_cli("verify-identities", "--model", "toroidal", "--n", "50", "--fd")
    assert code == 0
    header, rows = _csv(out / "identities.csv")
    assert header == ["identity", "model", "max_residual", "mean_residual", "n"]
    assert len(rows) == 3
    assert all(float(row[2]) < 1e-5 for row in rows)


def test_exact_sweep_passes(run_cli, capsys):
    code, out = run_cli("sweep", "--model", "uniform", "--metric", "moment_drift", "--omegas", "100,200,400",
                        "--T", "0.1", "--set", "grid_points=200", "--set", "gc_steps=1000")
    assert code == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["monotone"] is True
    assert summary["metric"] == "moment_drift"
    header, rows = _csv(out / "sweep.csv")
    assert header == ["omega", "error", "omega_times_error"]
    assert len(rows) == 3


def test_non_monotone_sweep_fails_acceptance(run_cli, read_manifest):
    # one whole gyration at omega = 200, one and a half at 300
    code, out = run_cli("sweep", "--model", "uniform", "--metric", "avg_gyro", "--omegas", "100,200,300",
                        "--T", repr(math.pi / 100), "--set", "grid_points=200", "--set", "gc_steps=1000")
    assert code == 1
    manifest = read_manifest(out)
    assert manifest["results"]["monotone"] is False
    assert "decreases across the sweep" in manifest["results"]["failures"]


def test_pressure_drift_on_constant_pressure(run_cli):
    code, out = run_cli("pressure-drift", "--model", "uniform", "--omegas", "100,200,400", "--T", "0.05",
                        "--set", "grid_points=100", "--set", "gc_steps=200")
    assert code == 0
    _, rows = _csv(out / "pressure.csv")
    assert [float(row[1]) for row in rows] == [0.0, 0.0, 0.0]


def test_pressure_drift_needs_a_pressure_function(run_cli, capsys, tmp_path):
    config = tmp_path / "no_pressure.json"
    config.write_text('{"model": "uniform", "params": {"p0": null}}')
    code, _ = run_cli("pressure-drift", "--config", str(config))
    assert code == 2
    assert "no pressure function" in capsys.readouterr().err


def test_mirror_bounce_rejects_the_loss_cone(run_cli, read_manifest):
    code, out = run_cli("mirror-bounce", "--set", "v0=[0.1, 0.0, 0.99]")
    assert code == 2
    assert "loss cone" in read_manifest(out)["results"]["error"]


def test_version(capsys):
    assert run(["--version"]) == 0
    assert capsys.readouterr().out.strip() == "gyrolab 1.0.0"


def test_unknown_subcommand():
    assert run(["launch"]) == 2


@pytest.mark.slow
def test_slab_sweep_acceptance(run_cli):
    code, _ = run_cli("sweep", "--model", "slab_gradB", "--metric", "first_order_gc", "--workers", "2")
    assert code == 0


@pytest.mark.slow
def test_mirror_bounce_acceptance(run_cli):
    code, out = run_cli("mirror-bounce", "--workers", "2")
    assert code == 0
    assert len(_csv(out / "bounce.csv")[1]) == 2
