import json
import struct

import numpy as np
import pytest

from lortz_euler.diagnostics import euler_residual
from lortz_euler.errors import ConfigError, HashMismatch, VersionMismatch
from lortz_euler.fields import ScalarField, VectorField, sample_scalar, sample_vector
from lortz_euler.fileio import (RunFile, export_csv, export_vtk, load_field, parse_runfile,
                                save_field, write_json)
from lortz_euler.geometry import DomainSpec, GridSpec, grid_for


@pytest.fixture
def dom():
    return DomainSpec(epsilon=0.1, m=8, grid=GridSpec(8, 16, 4))


def test_round_trip_bit_identical(tmp_path, dom):
    rng = np.random.default_rng(0)
    v = VectorField(dom, rng.standard_normal((3,) + grid_for(dom).shape), name="u")
    back = load_field(save_field(tmp_path / "u.lfld", v))
    assert back.values.tobytes() == v.values.tobytes()
    assert back.domain.digest() == dom.digest() and back.name == "u"


def test_cut_scalar_keeps_jump(tmp_path, dom):
    shape = grid_for(dom).shape
    f = ScalarField(dom, np.arange(np.prod(shape), dtype=float).reshape(shape),
                    cut=True, jump=np.full(shape, 2.5), name="tau")
    back = load_field(save_field(tmp_path / "t.lfld", f))
    assert back.cut and np.array_equal(back.jump, f.jump)
    assert np.array_equal(back.values, f.values)


def test_s_fastest_layout(tmp_path, dom):
    shape = grid_for(dom).shape
    f = ScalarField(dom, np.arange(np.prod(shape), dtype=float).reshape(shape))
    raw = save_field(tmp_path / "f.lfld", f).read_bytes()
    data = np.frombuffer(raw[-8 * f.values.size:], dtype="<f8")
    assert np.array_equal(data[:shape[0]], f.values[:, 0, 0])


def test_wrong_domain_and_edited_header(tmp_path, dom):
    p = save_field(tmp_path / "u.lfld", sample_vector(dom, lambda x: x))
    with pytest.raises(HashMismatch):
        load_field(p, dom.with_grid(n_s=10))
    raw = bytearray(p.read_bytes())
    struct.pack_into("<I", raw, 20, 10)          # n_s in the header
    edited = tmp_path / "edited.lfld"
    edited.write_bytes(bytes(raw))
    with pytest.raises(HashMismatch):
        load_field(edited, dom.with_grid(n_s=10))
    struct.pack_into("<I", raw, 8, 99)           # format version
    edited.write_bytes(bytes(raw))
    with pytest.raises(VersionMismatch):
        load_field(edited)


def test_residual_unchanged_after_reload(tmp_path, base):
    d = DomainSpec(epsilon=0.0, grid=GridSpec(16, 32, 8))
    u = sample_vector(d, base.u_star)
    H = sample_scalar(d, lambda x: base.bernoulli_poly(np.hypot(x[..., 0], x[..., 1])))
    r0 = euler_residual(u, H)
    u2 = load_field(save_field(tmp_path / "u.lfld", u))
    H2 = load_field(save_field(tmp_path / "H.lfld", H))
    assert euler_residual(u2, H2) == r0


def test_runfile_strict_and_lossless():
    rf = RunFile()
    assert parse_runfile(json.loads(json.dumps(rf.to_dict()))).to_dict() == rf.to_dict()
    with pytest.raises(ConfigError, match="iteration"):
        parse_runfile({"iteration": {"max_iter": 3}})
    with pytest.raises(ConfigError):
        parse_runfile({"domain": {"m": 3}})


def test_vtk_export(tmp_path, dom):
    u = sample_vector(dom, lambda x: x)
    H = sample_scalar(dom, lambda x: x[..., 0])
    text = export_vtk(tmp_path / "s.vtk", u, {"H": H, "T": H}).read_text().splitlines()
    n_s, n_t, n_z = 8, 17, 4
    assert text[0].startswith("# vtk DataFile") and text[3] == "DATASET STRUCTURED_GRID"
    assert text[4] == f"DIMENSIONS {n_s} {n_t} {n_z}"
    n = n_s * n_t * n_z
    pts = np.array([list(map(float, ln.split())) for ln in text[6:6 + n]])
    i = text.index("VECTORS u double")
    vec = np.array([list(map(float, ln.split())) for ln in text[i + 1:i + 1 + n]])
    assert np.array_equal(pts, vec)               # u = x round-trips exactly
    assert "SCALARS H double 1" in text and "SCALARS T double 1" in text


def test_csv_export(tmp_path, dom):
    u = sample_vector(dom, lambda x: x)
    lines = export_csv(tmp_path / "s.csv", u).read_text().splitlines()
    assert lines[0].split(",")[:3] == ["s", "theta", "z_index"]
    assert len(lines) == 1 + 8 * 16 * 4


def test_json_is_strict(tmp_path):
    p = write_json(tmp_path / "r.json", {"a": float("nan"), "b": np.float64(2.0), "c": [np.inf]})
    assert json.loads(p.read_text()) == {"a": None, "b": 2.0, "c": [None]}
