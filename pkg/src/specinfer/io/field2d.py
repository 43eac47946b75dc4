"""Binary container for 2D arrays: a text header followed by raw little-endian doubles.

Layout::

    specinfer-field2d 1
    key = value            (metadata, one per line)
    array name nx ny       (one line per stored array, in storage order)
    end
    <float64 C-order payloads, concatenated>
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import InputShapeError, StorageError

MAGIC = "specinfer-field2d 1"
_DTYPE = np.dtype("<f8")


def write_arrays(path, arrays: dict, meta: dict | None = None) -> None:
    lines = [MAGIC]
    for k, v in (meta or {}).items():
        k, v = str(k), str(v)
        if "\n" in k or "\n" in v or "=" in k or k.startswith("array") or k == "end":
            raise InputShapeError(f"metadata entry {k!r} is not representable")
        lines.append(f"{k} = {v}")
    payload = []
    for name, a in arrays.items():
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or any(ch.isspace() for ch in name):
            raise InputShapeError(f"array {name!r} must be 2D with a blank-free name")
        lines.append(f"array {name} {a.shape[0]} {a.shape[1]}")
        payload.append(np.ascontiguousarray(a, dtype=_DTYPE).tobytes())
    lines.append("end")
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(("\n".join(lines) + "\n").encode("ascii"))
            for p in payload:
                fh.write(p)
        os.replace(tmp, path)
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


def read_arrays(path):
    """Return ``(arrays, meta)``; arrays keep their storage order."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    pos = 0
    lines = []
    while True:
        nl = raw.find(b"\n", pos)
        if nl < 0:
            raise StorageError(f"{path}: truncated header")
        line = raw[pos:nl].decode("ascii", errors="replace")
        pos = nl + 1
        if line == "end":
            break
        lines.append(line)
    if not lines or lines[0] != MAGIC:
        raise StorageError(f"{path}: not a field2d file")
    meta, shapes = {}, []
    for line in lines[1:]:
        if line.startswith("array "):
            parts = line.split()
            if len(parts) != 4:
                raise StorageError(f"{path}: bad array line {line!r}")
            shapes.append((parts[1], int(parts[2]), int(parts[3])))
        else:
            k, sep, v = line.partition("=")
            if not sep:
                raise StorageError(f"{path}: bad header line {line!r}")
            meta[k.strip()] = v.strip()
    arrays = {}
    for name, nx, ny in shapes:
        nbytes = nx * ny * _DTYPE.itemsize
        if pos + nbytes > len(raw):
            raise StorageError(f"{path}: payload for {name!r} is truncated")
        arrays[name] = np.frombuffer(raw, _DTYPE, nx * ny, pos).reshape(nx, ny).astype(float)
        pos += nbytes
    if pos != len(raw):
        raise StorageError(f"{path}: {len(raw) - pos} trailing bytes")
    return arrays, meta
