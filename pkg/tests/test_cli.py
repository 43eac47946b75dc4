import json

import numpy as np
import pytest

from specinfer.cli import main
from specinfer.io import ColumnarTable, ExperimentConfig, export_plot_data, read_arrays, read_kv
from specinfer.spectral import TransportConstants, WaveGrid, fickian_spectrum


def _run(*argv):
    return main([str(a) for a in argv])


def _series(path, t):
    tab = ColumnarTable.read(path, "series")
    sel = np.isclose(tab.column("t"), t)
    return tab.column("x")[sel], tab.column("c")[sel]


@pytest.fixture
def config(tmp_path):
    cfg = ExperimentConfig({"grid": {"n_modes": 32}, "constants": {"diffusivity": 1e-3}})
    path = tmp_path / "exp.ini"
    cfg.write(path)
    return path


def test_fickian_limit_matches_spectral_evolution(tmp_path, config):
    out = tmp_path / "o"
    assert _run("gen-frade", "--config", config, "--out", out, "--set", "constants.fractional_order=2",
                "--times", 0.0, 0.7) == 0
    wg = WaveGrid(1.0, 32)
    export_plot_data(fickian_spectrum(TransportConstants(1.0, 1e-3, 2.0), wg), "spectrum", out / "fick.tsv")
    assert _run("evolve", "--config", config, "--out", out, "--spectrum", out / "fick.tsv",
                "--times", 0.7, "--name", "fick_evolved.tsv") == 0
    _, ref = _series(out / "solution.tsv", 0.7)
    _, got = _series(out / "fick_evolved.tsv", 0.7)
    np.testing.assert_allclose(got, ref, atol=1e-10)


def test_calibrate_then_predict(tmp_path, config):
    out = tmp_path / "o"
    cfg = ExperimentConfig.load(config)
    cfg.set("constants", "diffusivity", 1e-4)
    cfg.set("calibration", "refine", True)
    cfg.write(config)
    assert _run("gen-frade", "--config", config, "--out", out, "--times", 1.5) == 0
    assert _run("calibrate-map", "--config", config, "--out", out) == 0
    assert _run("evolve", "--config", config, "--out", out, "--times", 1.5) == 0
    _, truth = _series(out / "solution.tsv", 1.5)
    _, pred = _series(out / "evolved.tsv", 1.5)
    assert np.abs(pred - truth).max() < 1e-3 * np.abs(truth).max()
    summary = read_kv(out / "calibration.txt")
    assert summary["config_hash"] == ExperimentConfig.load(config).content_hash
    assert ColumnarTable.read(out / "sensitivity.tsv", "sensitivity").meta["config_hash"] == summary["config_hash"]


def test_check_derivatives_passes(tmp_path, config):
    out = tmp_path / "o"
    assert _run("check-derivatives", "--config", config, "--out", out, "--set", "grid.n_modes=8",
                "--points", 3, "--observations", 12) == 0
    assert read_kv(out / "derivatives.txt")["verdict"] == "PASS"


def test_exit_codes(tmp_path, config, capsys):
    out = tmp_path / "o"
    assert _run("gen-frade", "--config", tmp_path / "missing.ini", "--out", out) == 3
    assert "code=3 type=StorageError" in capsys.readouterr().err
    assert _run("gen-frade", "--config", config, "--out", out, "--set", "grid.bogus=1") == 2
    assert "code=2 type=ConfigError" in capsys.readouterr().err
    rc = _run("upscale", "--config", config, "--out", out, "--set", "highfid.nx=16",
              "--set", "highfid.ny=8", "--set", "highfid.cfl=1.5", "--times", 0.0, 0.05)
    assert rc == 5
    assert "code=5 type=PreconditionError" in capsys.readouterr().err


def test_report_refuses_mixed_hashes(tmp_path, config, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run("gen-frade", "--config", config, "--out", a) == 0
    assert _run("gen-frade", "--config", config, "--out", b, "--set", "constants.diffusivity=0.002") == 0
    mixed = [a / "truth_spectrum.tsv", b / "truth_spectrum.tsv"]
    assert _run("report", "--config", config, "--out", a, *mixed) == 5
    assert "ConsistencyError" in capsys.readouterr().err
    assert _run("report", "--config", config, "--out", a, "--force", *mixed) == 0
    assert read_kv(a / "report.txt")["forced"] == "True"
    assert _run("report", "--config", config, "--out", a) == 0
    assert read_kv(a / "report.txt")["forced"] == "False"


def test_reruns_are_byte_identical(tmp_path, config):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert _run("gen-frade", "--config", config, "--out", d, "--set", "observations.noise=0.01") == 0
        assert _run("calibrate-map", "--config", config, "--out", d, "--set", "observations.noise=0.01") == 0
    for name in ("observations.tsv", "solution.tsv", "map_spectrum.tsv", "calibration.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_output_directory_from_environment(tmp_path, config, monkeypatch):
    target = tmp_path / "env_out"
    monkeypatch.setenv("SPECINFER_OUTPUT_DIR", str(target))
    assert _run("gen-frade", "--config", config) == 0
    assert (target / "observations.tsv").exists()


def test_highfid_pipeline(tmp_path, config):
    out = tmp_path / "o"
    small = ["--set", "highfid.nx=16", "--set", "highfid.ny=8"]
    assert _run("gen-perm", "--config", config, "--out", out, *small) == 0
    arrays, meta = read_arrays(out / "permeability.f2d")
    assert arrays["kappa"].shape == (16, 8)
    assert _run("solve-2d", "--config", config, "--out", out, *small) == 0
    vel, _ = read_arrays(out / "velocity.f2d")
    assert set(vel) == {"ux", "uy", "pressure"}
    assert _run("upscale", "--config", config, "--out", out, *small,
                "--perm", out / "permeability.f2d", "--times", 0.0, 0.1) == 0
    up = ColumnarTable.read(out / "upscaled.tsv", "upscaled")
    assert len(up) == 32
    assert np.all(up.column("stderr") == 0)


def test_interrogate_writes_report(tmp_path, config):
    out = tmp_path / "o"
    args = ["--set", "highfid.nx=16", "--set", "highfid.ny=8", "--set", "interrogation.probes=[1,2]",
            "--set", "interrogation.t_end=0.1", "--set", "interrogation.dt_snap=0.02"]
    assert _run("interrogate", "--config", config, "--out", out, *args, "--set", "highfid.log_variance=0") == 0
    rep = json.loads((out / "assumptions.json").read_text())
    assert rep["shift_invariance"] == "PASS"
    assert (out / "probe_1.tsv").exists() and (out / "cross_mode.tsv").exists()
    assert _run("interrogate", "--config", config, "--out", out, *args, "--workers", 2) == 0
    assert read_kv(out / "assumptions.txt")["shift_invariance"] == "FAIL"
