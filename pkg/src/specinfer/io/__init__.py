"""Persistence formats, experiment configuration and plot-data export."""

from .config import OUTPUT_ENV, ExperimentConfig
from .export import (
    PLOT_KINDS,
    coefficient_table,
    export_plot_data,
    histogram_table,
    logderiv_table,
    snapshot_table,
    spectrum_from_table,
    spectrum_table,
)
from .field2d import read_arrays, write_arrays
from .kv import read_kv, write_kv
from .table import SCHEMAS, ColumnarTable

__all__ = [
    "ColumnarTable", "ExperimentConfig", "OUTPUT_ENV", "PLOT_KINDS", "SCHEMAS",
    "coefficient_table", "export_plot_data", "histogram_table", "logderiv_table",
    "read_arrays", "read_kv", "snapshot_table", "spectrum_from_table", "spectrum_table", "write_arrays", "write_kv",
]
