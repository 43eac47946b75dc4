"""Plot-ready tables for spectra, solution snapshots, chain histograms and log derivatives."""

from __future__ import annotations

import numpy as np

from ..calibration.mcmc import Chain
from ..errors import ConfigError
from ..interrogation import ModeProbeResult, log_derivative
from ..spectral import OperatorSpectrum, SpectralField, synthesize
from .table import ColumnarTable

PLOT_KINDS = ("spectrum", "snapshot", "coefficients", "histogram", "logderiv")


def spectrum_table(spectrum: OperatorSpectrum, meta=None) -> ColumnarTable:
    ks = spectrum.grid.positive_ks
    mu = spectrum.mu
    return ColumnarTable.from_columns("spectrum", {
        "k": ks, "r": spectrum.radii, "theta": spectrum.arguments,
        "re_mu": mu.real, "im_mu": mu.imag}, meta)


def spectrum_from_table(table: ColumnarTable, grid) -> OperatorSpectrum:
    order = np.argsort(table.column("k"))
    ks = table.column("k")[order]
    if not np.array_equal(ks, grid.positive_ks):
        raise ConfigError(f"spectrum table covers modes {ks.min():g}..{ks.max():g}, "
                          f"grid expects 1..{grid.n_modes}")
    return OperatorSpectrum(grid, table.column("r")[order], table.column("theta")[order])


def snapshot_table(fld: SpectralField, meta=None) -> ColumnarTable:
    meta = dict(meta or {})
    meta.setdefault("time", repr(float(fld.time_stamp)))
    return ColumnarTable.from_columns("snapshot", {"x": fld.grid.x, "c": synthesize(fld)}, meta)


def coefficient_table(fld: SpectralField, meta=None) -> ColumnarTable:
    meta = dict(meta or {})
    meta.setdefault("time", repr(float(fld.time_stamp)))
    c = fld.coefficients
    return ColumnarTable.from_columns("coefficients", {"k": fld.grid.ks, "re_c": c.real, "im_c": c.imag}, meta)


def histogram_table(chain: Chain, bins: int = 20, range_=(0.0, 1.0), meta=None) -> ColumnarTable:
    counts, edges = chain.histograms(bins, range_)
    d = counts.shape[0]
    return ColumnarTable.from_columns("histogram", {
        "param": np.repeat(np.arange(d), bins),
        "bin_lo": np.tile(edges[:-1], d),
        "bin_hi": np.tile(edges[1:], d),
        "count": counts.ravel()}, meta)


def logderiv_table(probe: ModeProbeResult, modes=None, meta=None) -> ColumnarTable:
    """Rows ordered by mode, then time."""
    modes = [probe.probe] if modes is None else list(modes)
    cols = {n: [] for n in ("t", "k", "re_c", "im_c", "re_logderiv", "im_logderiv", "valid")}
    for k in sorted(modes):
        c = probe.coeff(k)
        ld = log_derivative(probe, k)
        cols["t"].append(probe.times)
        cols["k"].append(np.full(len(c), k))
        cols["re_c"].append(c.real)
        cols["im_c"].append(c.imag)
        cols["re_logderiv"].append(ld.values.real)
        cols["im_logderiv"].append(ld.values.imag)
        cols["valid"].append(ld.valid.astype(float))
    meta = dict(meta or {})
    meta.setdefault("probe", str(probe.probe))
    return ColumnarTable.from_columns("probe", {k: np.concatenate(v) for k, v in cols.items()}, meta)


def export_plot_data(result, kind: str, path=None, meta=None, **options) -> ColumnarTable:
    """Build the table for one plot kind and optionally write it to ``path``.

    Raises
    ------
    ConfigError
        For an unknown ``kind`` or a result of the wrong type.
    """
    builders = {
        "spectrum": (OperatorSpectrum, spectrum_table),
        "snapshot": (SpectralField, snapshot_table),
        "coefficients": (SpectralField, coefficient_table),
        "histogram": (Chain, histogram_table),
        "logderiv": (ModeProbeResult, logderiv_table),
    }
    if kind not in builders:
        raise ConfigError(f"unknown plot kind {kind!r}; choose from {PLOT_KINDS}")
    cls, build = builders[kind]
    if not isinstance(result, cls):
        raise ConfigError(f"plot kind {kind!r} needs a {cls.__name__}, got {type(result).__name__}")
    table = build(result, meta=meta, **options)
    if path is not None:
        table.write(path)
    return table
