"""Experiment configuration: one INI file, typed keys, a content hash.

Values are JSON literals (``0.5``, ``[1, 2, 4]``, ``true``, ``null``);
anything that does not parse as JSON is taken as a bare string. Unknown
sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import copy
import hashlib
import json
import math
import os

from ..errors import ConfigError, StorageError

OUTPUT_ENV = "SPECINFER_OUTPUT_DIR"

# section -> key -> (type, default). A trailing "?" admits null.
SCHEMA = {
    "grid": {
        "domain_length": ("float", 1.0),
        "n_modes": ("int", 64),
        "n_points": ("int?", None),
    },
    "constants": {
        "mean_velocity": ("float", 1.0),
        "diffusivity": ("float", 1e-4),
        "fractional_order": ("float", 1.5),
    },
    "ic": {
        "kind": ("str", "gaussian_bump"),
        "center": ("float?", None),
        "width": ("float?", None),
        "mode": ("int", 1),
    },
    "observations": {
        "layout": ("str", "spatial"),
        "time": ("float", 0.5),
        "n_points": ("int", 64),
        "location": ("float", 0.5),
        "t_end": ("float", 0.5),
        "n_times": ("int", 100),
        "noise": ("float", 0.0),
        "sigma": ("float?", None),
        "seed": ("int", 0),
    },
    "calibration": {
        "gamma_tol": ("float", 1e-2),
        "prior": ("str", "admissible"),
        "start": ("str", "fickian"),
        "refine": ("bool", False),
        "min_modes": ("int", 0),
        "max_iter": ("int", 200),
        "gtol": ("float", 1e-8),
        "canonical_alias": ("bool", True),
    },
    "mcmc": {
        "n_samples": ("int", 10000),
        "burn_in": ("int", 5000),
        "thin": ("int", 1),
        "step_size": ("float?", None),
        "seed": ("int", 0),
        "position_dependent": ("bool", False),
        "jump_prob": ("float", 0.0),
        "bins": ("int", 20),
    },
    "highfid": {
        "nx": ("int", 128),
        "ny": ("int", 128),
        "lx": ("float", 1.0),
        "ly": ("float", 1.0),
        "log_mean": ("float", 0.0),
        "log_variance": ("float", 1.0),
        "corr_x": ("float", 0.1),
        "corr_y": ("float", 0.1),
        "molecular_diffusivity": ("float", 1e-3),
        "target_velocity": ("float", 1.0),
        "limiter": ("str", "mc"),
        "cfl": ("float", 0.4),
        "ensemble_size": ("int", 1),
        "seed": ("int", 0),
        "times": ("list", [0.0, 1.0]),
        "workers": ("int", 1),
    },
    "interrogation": {
        "probes": ("list", [1, 2, 4, 8, 16]),
        "t_end": ("float", 1.0),
        "dt_snap": ("float", 0.005),
        "limiter": ("str", "none"),
        "shift_tol": ("float", 1e-10),
        "time_tol": ("float", 0.01),
        "ensemble_size": ("int", 0),
    },
    "output": {
        "directory": ("str", "out"),
    },
}

CHOICES = {
    ("ic", "kind"): ("gaussian_bump", "single_mode"),
    ("observations", "layout"): ("spatial", "timeseries"),
    ("calibration", "prior"): ("admissible", "unit", "widened"),
    ("calibration", "start"): ("fickian", "second_derivative", "multistart"),
    ("highfid", "limiter"): ("mc", "minmod", "none"),
    ("interrogation", "limiter"): ("mc", "minmod", "none"),
}


def _parse_literal(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text.strip()


def _coerce(section, key, value):
    kind, _ = SCHEMA[section][key]
    where = f"[{section}] {key}"
    if value is None:
        if kind.endswith("?"):
            return None
        raise ConfigError(f"{where} may not be null")
    kind = kind.rstrip("?")
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}")
        value = float(value)
        if math.isnan(value):
            raise ConfigError(f"{where} must not be NaN")
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer, got {value!r}")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false, got {value!r}")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string, got {value!r}")
        allowed = CHOICES.get((section, key))
        if allowed and value not in allowed:
            raise ConfigError(f"{where} must be one of {allowed}, got {value!r}")
        return value
    if kind == "list":
        if not isinstance(value, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{where} must be a list of numbers, got {value!r}")
        return list(value)
    raise AssertionError(kind)


class ExperimentConfig:
    """Validated configuration with every key filled in."""

    def __init__(self, values: dict | None = None):
        self._data = {s: {k: copy.deepcopy(d) for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
        for section, entries in (values or {}).items():
            for key, value in entries.items():
                self.set(section, key, value)

    def set(self, section: str, key: str, value) -> None:
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        self._data[section][key] = _coerce(section, key, value)

    def override(self, assignment: str) -> None:
        """Apply a ``section.key=value`` flag."""
        target, sep, text = assignment.partition("=")
        section, dot, key = target.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {assignment!r} is not of the form section.key=value")
        self.set(section, key, _parse_literal(text))

    def __getitem__(self, section: str) -> dict:
        return self._data[section]

    def get(self, section: str, key: str):
        return self._data[section][key]

    def as_dict(self) -> dict:
        return copy.deepcopy(self._data)

    @property
    def content_hash(self) -> str:
        """SHA-256 prefix over every setting except the output location."""
        data = self.as_dict()
        data.pop("output")
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @property
    def output_directory(self) -> str:
        return os.environ.get(OUTPUT_ENV) or self._data["output"]["directory"]

    def to_text(self) -> str:
        lines = []
        for section, entries in self._data.items():
            lines.append(f"[{section}]")
            for k, v in entries.items():
                lines.append(f"{k} = {json.dumps(v)}")
            lines.append("")
        return "\n".join(lines)

    def write(self, path) -> None:
        try:
            with open(path, "w") as fh:
                fh.write(self.to_text())
        except OSError as exc:
            raise StorageError(f"cannot write {path}: {exc}") from exc

    @classmethod
    def from_text(cls, text: str) -> ExperimentConfig:
        parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        values = {s: {k: _parse_literal(v) for k, v in parser.items(s)} for s in parser.sections()}
        return cls(values)

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise StorageError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text)
