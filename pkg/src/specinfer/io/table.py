"""Whitespace-separated numeric tables with a ``# key = value`` header.

Floats are written with 17 significant digits, which round-trips every
IEEE double exactly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import InputShapeError, StorageError

FLOAT_FORMAT = "%.17g"

# Documented column layouts. Schemas mapped to ``None`` have run-dependent columns.
SCHEMAS = {
    "spectrum": ("k", "r", "theta", "re_mu", "im_mu"),
    "rescaled": ("k", "r_star", "theta_star", "active"),
    "coefficients": ("k", "re_c", "im_c"),
    "snapshot": ("x", "c"),
    "series": ("t", "x", "c"),
    "observations": ("x", "t", "value"),
    "upscaled": ("t", "x", "mean", "stderr"),
    "sensitivity": ("k", "h_rr", "h_thth", "active"),
    "histogram": ("param", "bin_lo", "bin_hi", "count"),
    "interval": ("param", "lo", "hi", "map", "truth"),
    "probe": ("t", "k", "re_c", "im_c", "re_logderiv", "im_logderiv", "valid"),
    "cross_mode": ("k", "probe", "re_m", "im_m"),
    "steps": ("h", "gradient_error"),
    "chain": None,
}

UNITS = {
    "spectrum": "k: index, r: 1/time, theta: rad, mu: 1/time",
    "rescaled": "dimensionless",
    "coefficients": "k: index, c: concentration",
    "snapshot": "x: length, c: concentration",
    "series": "t: time, x: length, c: concentration",
    "observations": "x: length, t: time, value: concentration",
    "upscaled": "t: time, x: length, mean/stderr: concentration",
    "sensitivity": "k: index, h: misfit per squared rescaled parameter",
    "histogram": "param: index, bins: rescaled parameter, count: samples",
    "interval": "rescaled parameter",
    "probe": "t: time, k: index, c: probe amplitude, logderiv: 1/time, valid: flag",
    "cross_mode": "k/probe: index, m: probe amplitude",
    "steps": "h: rescaled parameter, error: relative",
    "chain": "lp: log density, others: rescaled parameter",
}


@dataclass
class ColumnarTable:
    schema: str
    columns: tuple
    data: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = tuple(str(c) for c in self.columns)
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1 and len(self.columns) == 1:
            data = data[:, None]
        if data.ndim != 2 or data.shape[1] != len(self.columns):
            raise InputShapeError(f"table data of shape {data.shape} does not fit {len(self.columns)} columns")
        expected = SCHEMAS.get(self.schema, None)
        if expected is not None and self.columns != expected:
            raise InputShapeError(f"schema {self.schema!r} expects columns {expected}, got {self.columns}")
        for c in self.columns:
            if not c or any(ch.isspace() for ch in c):
                raise InputShapeError(f"invalid column name {c!r}")
        self.data = data
        self.meta = {str(k): str(v) for k, v in self.meta.items()}

    @classmethod
    def from_columns(cls, schema: str, columns: dict, meta=None) -> ColumnarTable:
        names = tuple(columns)
        data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names]) if names else np.empty((0, 0))
        return cls(schema, names, data, dict(meta or {}))

    def __len__(self):
        return self.data.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.data[:, self.columns.index(name)]
        except ValueError:
            raise KeyError(f"no column {name!r} in {self.columns}") from None

    def to_text(self) -> str:
        lines = [f"# schema = {self.schema}"]
        meta = dict(self.meta)
        if "units" not in meta and self.schema in UNITS:
            meta = {"units": UNITS[self.schema], **meta}
        for k, v in meta.items():
            if k == "schema":
                continue
            if "\n" in k or "\n" in v or "=" in k:
                raise InputShapeError(f"metadata entry {k!r} is not representable")
            lines.append(f"# {k} = {v}")
        lines.append(" ".join(self.columns))
        for row in self.data:
            lines.append(" ".join(FLOAT_FORMAT % v for v in row))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        tmp = f"{path}.tmp"
        try:
            with open(tmp, "w", encoding="ascii", newline="\n") as fh:
                fh.write(self.to_text())
            os.replace(tmp, path)
        except OSError as exc:
            raise StorageError(f"cannot write {path}: {exc}") from exc

    @classmethod
    def from_text(cls, text: str, source: str = "<text>") -> ColumnarTable:
        meta = {}
        header = None
        rows = []
        for n, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            if line.startswith("#"):
                if header is not None:
                    raise StorageError(f"{source}:{n}: metadata after the column line")
                key, sep, value = line[1:].partition("=")
                if not sep:
                    raise StorageError(f"{source}:{n}: expected '# key = value'")
                meta[key.strip()] = value.strip()
            elif header is None:
                header = tuple(line.split())
            else:
                parts = line.split()
                if len(parts) != len(header):
                    raise StorageError(f"{source}:{n}: expected {len(header)} values, got {len(parts)}")
                try:
                    rows.append([float(p) for p in parts])
                except ValueError as exc:
                    raise StorageError(f"{source}:{n}: {exc}") from exc
        if header is None:
            raise StorageError(f"{source}: no column line")
        schema = meta.pop("schema", None)
        if schema is None:
            raise StorageError(f"{source}: missing schema")
        data = np.array(rows, dtype=float).reshape(len(rows), len(header))
        try:
            return cls(schema, header, data, meta)
        except InputShapeError as exc:
            raise StorageError(f"{source}: {exc}") from exc

    @classmethod
    def read(cls, path, schema: str | None = None) -> ColumnarTable:
        try:
            with open(path, encoding="ascii") as fh:
                text = fh.read()
        except (OSError, UnicodeDecodeError) as exc:
            raise StorageError(f"cannot read {path}: {exc}") from exc
        table = cls.from_text(text, str(path))
        if schema is not None and table.schema != schema:
            raise StorageError(f"{path}: expected schema {schema!r}, found {table.schema!r}")
        return table
