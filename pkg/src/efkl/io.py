"""Artifact formats: EFK1 profiles, EFK2 fields, CSV tables, JSON reports.

Binary layouts (little-endian):

* EFK1: b"EFK1", u32 version=1, u32 n, u32 m, f64 L, f64 beta, then n*m f64
  values row-major (node by node).
* EFK2: b"EFK2", u32 version=1, u32 nt, u32 nx, u32 m, f64 T, f64 L,
  f64 beta, then nt*nx*m f64 values with t the slowest index.
"""

import csv
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError

VERSION = 1
_H1 = struct.Struct("<4sIIIdd")
_H2 = struct.Struct("<4sIIIIddd")


@dataclass
class ProfileRecord:
    L: float
    beta: float
    values: np.ndarray

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def m(self):
        return self.values.shape[1]


@dataclass
class FieldRecord:
    T: float
    L: float
    beta: float
    values: np.ndarray


def _read_bytes(path):
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise FileNotFoundError(str(exc)) from exc


def write_efk1(path, profile):
    v = np.ascontiguousarray(profile.values, dtype="<f8")
    n, m = v.shape
    with open(path, "wb") as fh:
        fh.write(_H1.pack(b"EFK1", VERSION, n, m, profile.grid.half_length, profile.beta))
        fh.write(v.tobytes())


def read_efk1(path):
    raw = _read_bytes(path)
    if len(raw) < _H1.size:
        raise FormatError(f"{path}: truncated EFK1 header")
    magic, ver, n, m, L, beta = _H1.unpack_from(raw)
    if magic != b"EFK1":
        raise FormatError(f"{path}: bad magic {magic!r}")
    if ver != VERSION:
        raise FormatError(f"{path}: unsupported version {ver}")
    if len(raw) != _H1.size + 8 * n * m:
        raise FormatError(f"{path}: payload size does not match n={n}, m={m}")
    vals = np.frombuffer(raw, dtype="<f8", offset=_H1.size).reshape(n, m).astype(float)
    return ProfileRecord(L, beta, vals)


def write_efk2(path, fld):
    v = np.ascontiguousarray(fld.values, dtype="<f8")
    nt, nx, m = v.shape
    g = fld.grid
    with open(path, "wb") as fh:
        fh.write(_H2.pack(b"EFK2", VERSION, nt, nx, m, g.T, g.L, fld.beta))
        fh.write(v.tobytes())


def read_efk2(path):
    raw = _read_bytes(path)
    if len(raw) < _H2.size:
        raise FormatError(f"{path}: truncated EFK2 header")
    magic, ver, nt, nx, m, T, L, beta = _H2.unpack_from(raw)
    if magic != b"EFK2":
        raise FormatError(f"{path}: bad magic {magic!r}")
    if ver != VERSION:
        raise FormatError(f"{path}: unsupported version {ver}")
    if len(raw) != _H2.size + 8 * nt * nx * m:
        raise FormatError(f"{path}: payload size does not match the header")
    vals = np.frombuffer(raw, dtype="<f8", offset=_H2.size).reshape(nt, nx, m).astype(float)
    return FieldRecord(T, L, beta, vals)


def write_profile_csv(path, profile):
    header = ["x"] + [f"u_{c + 1}" for c in range(profile.m)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for x, row in zip(profile.x, profile.values):
            w.writerow([repr(float(x))] + [repr(float(v)) for v in row])


def read_profile_csv(path):
    """Returns ``(x, values)``."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FileNotFoundError(str(exc)) from exc
    if not rows or rows[0][:1] != ["x"]:
        raise FormatError(f"{path}: missing 'x,u_1,...' header")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric entry") from exc
    if data.ndim != 2 or data.shape[1] != len(rows[0]):
        raise FormatError(f"{path}: ragged rows")
    return data[:, 0], data[:, 1:]


def write_trace_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "d_minus", "d_plus", "ut_norm"])
        for r in rows:
            w.writerow([repr(float(v)) for v in r])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj):
    """Canonical JSON: sorted keys, fixed indentation, NaN/inf mapped to null."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FileNotFoundError(str(exc)) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc.msg})") from exc
