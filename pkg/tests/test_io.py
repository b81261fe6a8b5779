import json
import struct

import numpy as np
import pytest

from efkl import io
from efkl.errors import FormatError
from efkl.ode1d import Grid1D, Profile1D
from efkl.pde2d import Field2D, Grid2D


@pytest.fixture
def profile(weps):
    g = Grid1D(4.0, 101)
    v = np.column_stack([np.tanh(g.x), 0.3 / np.cosh(g.x)])
    v[0], v[-1] = weps.wells
    return Profile1D(g, v, weps, 1.5)


def test_efk1_round_trip(tmp_path, profile):
    path = tmp_path / "p.efk1"
    io.write_efk1(path, profile)
    raw = path.read_bytes()
    assert raw[:4] == b"EFK1"
    assert struct.unpack_from("<I", raw, 4)[0] == 1
    assert len(raw) == 4 + 3 * 4 + 2 * 8 + 101 * 2 * 8
    rec = io.read_efk1(path)
    assert (rec.n, rec.m, rec.L, rec.beta) == (101, 2, 4.0, 1.5)
    assert np.array_equal(rec.values, profile.values)


def test_efk2_round_trip(tmp_path, weps):
    grid = Grid2D(2.0, 3.0, 101, 103)
    u = np.random.default_rng(1).normal(size=(101, 103, 2))
    u[:, 0], u[:, -1] = weps.wells
    f = Field2D(grid, u, weps, 0.5)
    io.write_efk2(tmp_path / "f.efk2", f)
    rec = io.read_efk2(tmp_path / "f.efk2")
    assert (rec.T, rec.L, rec.beta) == (2.0, 3.0, 0.5)
    assert np.array_equal(rec.values, u)


@pytest.mark.parametrize("mutate", ["magic", "version", "truncate", "short"])
def test_corrupt_binary_is_a_format_error(tmp_path, profile, mutate):
    path = tmp_path / "p.efk1"
    io.write_efk1(path, profile)
    raw = bytearray(path.read_bytes())
    if mutate == "magic":
        raw[:4] = b"EFK9"
    elif mutate == "version":
        raw[4:8] = struct.pack("<I", 7)
    elif mutate == "truncate":
        raw = raw[:-8]
    else:
        raw = raw[:10]
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        io.read_efk1(path)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        io.read_efk1(tmp_path / "nope.efk1")
    with pytest.raises(FileNotFoundError):
        io.read_json(tmp_path / "nope.json")


def test_profile_csv_round_trip(tmp_path, profile):
    io.write_profile_csv(tmp_path / "p.csv", profile)
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "x,u_1,u_2"
    x, vals = io.read_profile_csv(tmp_path / "p.csv")
    assert np.array_equal(x, profile.x) and np.array_equal(vals, profile.values)


def test_profile_csv_errors(tmp_path):
    (tmp_path / "a.csv").write_text("t,u\n1,2\n")
    with pytest.raises(FormatError):
        io.read_profile_csv(tmp_path / "a.csv")
    (tmp_path / "b.csv").write_text("x,u_1\n1,zz\n")
    with pytest.raises(FormatError):
        io.read_profile_csv(tmp_path / "b.csv")


def test_json_is_canonical(tmp_path):
    obj = {"b": np.float64(1.5), "a": [np.int64(2), float("nan")], "c": np.bool_(True)}
    text = io.dumps(obj)
    assert text == io.dumps(dict(reversed(list(obj.items()))))
    assert json.loads(text) == {"a": [2, None], "b": 1.5, "c": True}
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(FormatError):
        io.read_json(tmp_path / "bad.json")
