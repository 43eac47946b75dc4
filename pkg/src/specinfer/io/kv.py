"""Flat ``key = value`` text files for reports and run summaries."""

from __future__ import annotations

import os

from ..errors import InputShapeError, StorageError


def write_kv(path, entries: dict) -> None:
    lines = []
    for k, v in entries.items():
        k, v = str(k), str(v)
        if "\n" in k or "\n" in v or "=" in k:
            raise InputShapeError(f"entry {k!r} is not representable")
        lines.append(f"{k} = {v}")
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


def read_kv(path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        k, sep, v = line.partition("=")
        if not sep:
            raise StorageError(f"{path}:{n}: expected 'key = value'")
        out[k.strip()] = v.strip()
    return out
