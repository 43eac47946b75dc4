import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specinfer.calibration.mcmc import Chain
from specinfer.errors import ConfigError, InputShapeError, StorageError
from specinfer.io import (
    ColumnarTable,
    ExperimentConfig,
    export_plot_data,
    read_arrays,
    read_kv,
    spectrum_from_table,
    write_arrays,
    write_kv,
)
from specinfer.io.config import OUTPUT_ENV
from specinfer.spectral import (
    InitialCondition,
    TransportConstants,
    WaveGrid,
    analyze,
    frade_spectrum,
    synthesize,
)

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


# --- columnar tables --------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(finite, finite, finite), min_size=0, max_size=20))
def test_table_round_trip_is_exact(rows):
    data = np.array(rows, dtype=float).reshape(len(rows), 3)
    t = ColumnarTable("coefficients", ("k", "re_c", "im_c"), data, {"time": "0.5"})
    back = ColumnarTable.from_text(t.to_text())
    assert back.schema == "coefficients"
    assert back.meta["time"] == "0.5"
    assert np.array_equal(back.data, data)


def test_table_write_and_read(tmp_path):
    t = ColumnarTable.from_columns("snapshot", {"x": [0.0, 0.5], "c": [1.0, -2.0]})
    p = tmp_path / "s.tsv"
    t.write(p)
    text = p.read_text()
    assert text.startswith("# schema = snapshot\n# units = ")
    back = ColumnarTable.read(p, "snapshot")
    np.testing.assert_array_equal(back.column("c"), [1.0, -2.0])
    with pytest.raises(StorageError):
        ColumnarTable.read(p, "spectrum")
    with pytest.raises(KeyError):
        back.column("y")


@pytest.mark.parametrize("text", [
    "x c\n0 1\n",                                   # no schema
    "# schema = snapshot\n",                        # no column line
    "# schema = snapshot\nx c\n0 1 2\n",             # ragged row
    "# schema = snapshot\nx c\n0 abc\n",             # not a number
    "# schema = snapshot\nx y\n0 1\n",               # wrong columns for the schema
    "# schema = snapshot\nx c\n# late = 1\n0 1\n",   # metadata after header
    "# schema snapshot\nx c\n",                      # malformed metadata
])
def test_malformed_tables_raise_storage_error(text):
    with pytest.raises(StorageError):
        ColumnarTable.from_text(text)


def test_missing_file_is_storage_error(tmp_path):
    with pytest.raises(StorageError):
        ColumnarTable.read(tmp_path / "nope.tsv")


def test_table_shape_checked():
    with pytest.raises(InputShapeError):
        ColumnarTable("snapshot", ("x", "c"), np.zeros((3, 3)))


# --- 2D fields and key-value files ------------------------------------------

def test_field2d_round_trip(tmp_path, rng):
    arrays = {"kappa": rng.random((6, 4)), "uy": rng.standard_normal((6, 5))}
    p = tmp_path / "f.f2d"
    write_arrays(p, arrays, {"seed": 3, "lx": 1.0})
    back, meta = read_arrays(p)
    assert meta["seed"] == "3"
    for k, v in arrays.items():
        assert np.array_equal(back[k], v)


def test_field2d_truncation_detected(tmp_path, rng):
    p = tmp_path / "f.f2d"
    write_arrays(p, {"a": rng.random((4, 4))}, {})
    raw = p.read_bytes()
    p.write_bytes(raw[:-8])
    with pytest.raises(StorageError):
        read_arrays(p)
    p.write_bytes(raw + b"\0")
    with pytest.raises(StorageError):
        read_arrays(p)
    p.write_bytes(b"not a field file\n")
    with pytest.raises(StorageError):
        read_arrays(p)


def test_kv_round_trip(tmp_path):
    p = tmp_path / "r.txt"
    write_kv(p, {"a": 1, "status": "PASS"})
    assert read_kv(p) == {"a": "1", "status": "PASS"}


# --- configuration ----------------------------------------------------------

def test_config_defaults_and_parse():
    cfg = ExperimentConfig.from_text("[grid]\nn_modes = 16\n[interrogation]\nprobes = [1, 2]\n")
    assert cfg.get("grid", "n_modes") == 16
    assert cfg.get("interrogation", "probes") == [1, 2]
    assert cfg.get("constants", "mean_velocity") == 1.0


@pytest.mark.parametrize("text", [
    "[grid]\nbogus = 1\n",
    "[nosuch]\nx = 1\n",
    "[grid]\nn_modes = 1.5\n",
    "[grid]\nn_modes = true\n",
    "[constants]\ndiffusivity = \"a\"\n",
    "[calibration]\nprior = flat\n",
    "[calibration]\nrefine = 1\n",
    "[grid]\ndomain_length = null\n",
    "no section header\n",
])
def test_config_rejects_bad_input(text):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text(text)


def test_config_text_round_trip_and_hash():
    cfg = ExperimentConfig({"constants": {"diffusivity": 0.1}, "grid": {"n_modes": 8}})
    back = ExperimentConfig.from_text(cfg.to_text())
    assert back.as_dict() == cfg.as_dict()
    assert back.content_hash == cfg.content_hash
    assert len(cfg.content_hash) == 16
    other = ExperimentConfig({"constants": {"diffusivity": 0.2}, "grid": {"n_modes": 8}})
    assert other.content_hash != cfg.content_hash
    moved = ExperimentConfig({"constants": {"diffusivity": 0.1}, "grid": {"n_modes": 8},
                              "output": {"directory": "/elsewhere"}})
    assert moved.content_hash == cfg.content_hash


def test_config_override():
    cfg = ExperimentConfig()
    cfg.override("grid.n_modes=12")
    cfg.override("calibration.prior=widened")
    assert cfg.get("grid", "n_modes") == 12
    assert cfg.get("calibration", "prior") == "widened"
    with pytest.raises(ConfigError):
        cfg.override("grid.n_modes")
    with pytest.raises(ConfigError):
        cfg.override("n_modes=3")


def test_config_load_errors(tmp_path):
    with pytest.raises(StorageError):
        ExperimentConfig.load(tmp_path / "missing.ini")


def test_output_directory_env(monkeypatch):
    cfg = ExperimentConfig({"output": {"directory": "here"}})
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    assert cfg.output_directory == "here"
    monkeypatch.setenv(OUTPUT_ENV, "/tmp/there")
    assert cfg.output_directory == "/tmp/there"


# --- plot data --------------------------------------------------------------

def _field():
    wg = WaveGrid(1.0, 16, 64)
    return InitialCondition().on_grid(wg)


def test_export_spectrum_sorted_and_invertible(tmp_path):
    wg = WaveGrid(1.0, 8, 17)
    spec = frade_spectrum(TransportConstants(1.0, 1e-2, 1.5), wg)
    p = tmp_path / "s.tsv"
    t = export_plot_data(spec, "spectrum", p)
    assert np.all(np.diff(t.column("k")) > 0)
    back = spectrum_from_table(ColumnarTable.read(p, "spectrum"), wg)
    assert np.array_equal(back.mu, spec.mu)


def test_export_snapshot_resynthesizes(tmp_path):
    fld = _field()
    p = tmp_path / "snap.tsv"
    export_plot_data(fld, "snapshot", p)
    t = ColumnarTable.read(p, "snapshot")
    again = synthesize(analyze(fld.grid, t.column("c")))
    np.testing.assert_allclose(again, t.column("c"), atol=1e-15)
    np.testing.assert_array_equal(t.column("x"), fld.grid.x)


def test_export_histogram_counts(rng):
    states = rng.random((500, 3))
    ch = Chain(states, np.zeros(500), np.ones(500, bool), 0.1, 0)
    t = export_plot_data(ch, "histogram", bins=10)
    for j in range(3):
        assert t.column("count")[t.column("param") == j].sum() == 500


def test_export_rejects_unknown_kind():
    with pytest.raises(ConfigError):
        export_plot_data(_field(), "contour")
    with pytest.raises(ConfigError):
        export_plot_data(_field(), "histogram")
