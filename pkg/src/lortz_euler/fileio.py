"""Run files, binary field files and exports.

Field file layout (all little-endian)::

    8s   magic  b"LRTZFLD\\0"
    u4   format version
    u4   components (1 scalar, 3 vector)
    u4   n_s, n_theta, n_z
    16s  domain digest
    u4   flags (bit 0: cut field with a jump block)
    u4   length of the UTF-8 name, then the name
    u4   length of the UTF-8 domain JSON, then the JSON
    f8   values, component by component, s fastest, then theta, then z
    f8   jump block (same layout as a scalar) when flag bit 0 is set
"""
from __future__ import annotations

import csv
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .base_state import Profile
from .errors import ConfigError, HashMismatch, VersionMismatch
from .fields import ScalarField, VectorField
from .geometry import BoundaryShape, DomainSpec, GridSpec, ShapeMode, grid_for
from .iteration import RunConfig

MAGIC = b"LRTZFLD\0"
FORMAT_VERSION = 1
_HEAD = struct.Struct("<8sIIIII16sI")


# ---------------------------------------------------------------------------
# domain <-> JSON


def domain_to_dict(d: DomainSpec) -> dict:
    return {
        "epsilon": d.epsilon,
        "m": d.m,
        "axial_period": d.axial_period,
        "shape": [asdict(md) for md in d.shape.modes],
        "grid": asdict(d.grid),
    }


def domain_from_dict(obj: dict) -> DomainSpec:
    shape = obj.get("shape")
    modes = None
    if shape is not None:
        modes = BoundaryShape(tuple(ShapeMode(**md) for md in shape))
    return DomainSpec(
        epsilon=float(obj.get("epsilon", 0.1)),
        shape=modes,
        m=int(obj.get("m", 8)),
        axial_period=float(obj.get("axial_period", 2.0 * np.pi)),
        grid=GridSpec(**obj.get("grid", {})),
    )


# ---------------------------------------------------------------------------
# run file

_NUM = {"type": "number"}
_INT = {"type": "integer"}

RUNFILE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "profile": {
            "type": "object", "additionalProperties": False,
            "properties": {"coeffs": {"type": "array", "items": _NUM, "minItems": 1},
                           "r_max": _NUM},
        },
        "domain": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "epsilon": _NUM, "m": _INT, "axial_period": _NUM,
                "shape": {"type": "array", "items": {
                    "type": "object", "additionalProperties": False,
                    "required": ["k_theta", "k_z"],
                    "properties": {"k_theta": _INT, "k_z": _INT,
                                   "cos_amp": _NUM, "sin_amp": _NUM}}},
                "grid": {"type": "object", "additionalProperties": False,
                         "properties": {"n_s": _INT, "n_theta": _INT, "n_z": _INT}},
            },
        },
        "iteration": {
            "type": "object", "additionalProperties": False,
            "properties": {"max_iters": _INT, "tol": _NUM, "substeps": _INT,
                           "period_slack": _NUM, "solver_tol": _NUM, "compat_tol": _NUM,
                           "mismatch_factor": _NUM, "diverge_after": _INT, "cadence": _INT},
        },
        "diagnostics": {
            "type": "object", "additionalProperties": False,
            "properties": {"n_orbits": _INT, "euler_residual_max": _NUM,
                           "bernoulli_max": _NUM, "parity_max": _NUM},
        },
        "output": {
            "type": "object", "additionalProperties": False,
            "properties": {"directory": {"type": "string"}, "snapshot_every": _INT},
        },
        "seed": _INT,
    },
}


@dataclass
class Diagnostics:
    n_orbits: int = 50
    euler_residual_max: float = 1e-2
    bernoulli_max: float = 1e-5
    parity_max: float = 1e-7


@dataclass
class RunFile:
    config: RunConfig = field(default_factory=RunConfig)
    diagnostics: Diagnostics = field(default_factory=Diagnostics)
    directory: str = "out"
    snapshot_every: int = 0
    seed: int = 0

    def to_dict(self) -> dict:
        c = self.config
        it = {k: getattr(c, k) for k in RUNFILE_SCHEMA["properties"]["iteration"]["properties"]}
        return {
            "profile": {"coeffs": list(c.profile.coeffs), "r_max": c.profile.r_max},
            "domain": domain_to_dict(c.domain),
            "iteration": it,
            "diagnostics": asdict(self.diagnostics),
            "output": {"directory": self.directory, "snapshot_every": self.snapshot_every},
            "seed": self.seed,
        }


def parse_runfile(obj: dict) -> RunFile:
    """Validate against the strict schema and build the run objects."""
    try:
        jsonschema.validate(obj, RUNFILE_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"cli_io: config error at {where}: {exc.message}") from None
    prof = obj.get("profile", {})
    profile = Profile(tuple(float(c) for c in prof.get("coeffs", (1.0, 1.0))),
                      float(prof.get("r_max", 2.0)))
    domain = domain_from_dict(obj.get("domain", {}))
    cfg = RunConfig(domain=domain, profile=profile, **obj.get("iteration", {}))
    cfg.validate()
    out = obj.get("output", {})
    return RunFile(cfg, Diagnostics(**obj.get("diagnostics", {})),
                   out.get("directory", "out"), int(out.get("snapshot_every", 0)),
                   int(obj.get("seed", 0)))


def load_runfile(path) -> RunFile:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cli_io: {path} is not valid JSON ({exc})") from None
    except OSError as exc:
        raise ConfigError(f"cli_io: cannot read {path} ({exc})") from None
    return parse_runfile(obj)


# ---------------------------------------------------------------------------
# binary fields


def _s_fastest(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.moveaxis(a, (-3, -1), (-1, -3))).astype("<f8")


def _from_s_fastest(buf: np.ndarray, shape) -> np.ndarray:
    n_s, n_t, n_z = shape[-3:]
    a = buf.reshape(shape[:-3] + (n_z, n_t, n_s))
    return np.ascontiguousarray(np.moveaxis(a, (-3, -1), (-1, -3)))


def save_field(path, f) -> Path:
    path = Path(path)
    d = f.domain
    g = d.grid
    vec = isinstance(f, VectorField)
    cut = (not vec) and bool(getattr(f, "cut", False)) and f.jump is not None
    name = (getattr(f, "name", "") or "").encode()
    dom = json.dumps(domain_to_dict(d), sort_keys=True).encode()
    with path.open("wb") as fh:
        fh.write(_HEAD.pack(MAGIC, FORMAT_VERSION, 3 if vec else 1,
                            g.n_s, g.n_theta, g.n_z, d.digest(), int(cut)))
        fh.write(struct.pack("<I", len(name)) + name)
        fh.write(struct.pack("<I", len(dom)) + dom)
        fh.write(_s_fastest(f.values).tobytes())
        if cut:
            jump = np.broadcast_to(np.asarray(f.jump, dtype=float), (g.n_s, g.n_theta, g.n_z))
            fh.write(_s_fastest(jump).tobytes())
    return path


def load_field(path, domain: DomainSpec | None = None):
    """Read a field file; with ``domain`` given, its digest must match."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEAD.size or raw[:8] != MAGIC:
        raise VersionMismatch(f"cli_io: {path} is not a field file")
    magic, ver, ncomp, n_s, n_t, n_z, digest, flags = _HEAD.unpack_from(raw, 0)
    if ver != FORMAT_VERSION:
        raise VersionMismatch(f"cli_io: field format version {ver}, expected {FORMAT_VERSION}")
    off = _HEAD.size
    (ln,) = struct.unpack_from("<I", raw, off)
    name = raw[off + 4: off + 4 + ln].decode()
    off += 4 + ln
    (ld,) = struct.unpack_from("<I", raw, off)
    dom_json = json.loads(raw[off + 4: off + 4 + ld].decode())
    off += 4 + ld
    stored = domain_from_dict(dom_json)
    if stored.digest() != digest:
        raise HashMismatch(f"cli_io: header of {path} is inconsistent with its digest")
    if domain is None:
        domain = stored
    elif domain.digest() != digest:
        raise HashMismatch(
            f"cli_io: {path} was written for a different domain or grid "
            f"(file {n_s}x{n_t}x{n_z}, requested "
            f"{domain.grid.n_s}x{domain.grid.n_theta}x{domain.grid.n_z})")
    shape = ((3,) if ncomp == 3 else ()) + (n_s, n_t, n_z)
    count = int(np.prod(shape))
    vals = np.frombuffer(raw, dtype="<f8", count=count, offset=off)
    vals = _from_s_fastest(vals, shape).astype(float)
    off += 8 * count
    if ncomp == 3:
        return VectorField(domain, vals, name=name)
    if flags & 1:
        jump = np.frombuffer(raw, dtype="<f8", count=count, offset=off)
        jump = _from_s_fastest(jump, shape).astype(float)
        return ScalarField(domain, vals, cut=True, jump=jump, name=name)
    return ScalarField(domain, vals, name=name)


# ---------------------------------------------------------------------------
# exports


def export_vtk(path, u: VectorField, scalars: dict | None = None, title: str = "lortz") -> Path:
    """Legacy ASCII VTK structured grid, points in the order s, theta, z (s fastest).

    The periodic theta direction is closed by repeating the first angle.
    """
    path = Path(path)
    d = u.domain
    g = grid_for(d)
    close = lambda a: np.concatenate([a, a[..., :1, :]], axis=-2)  # noqa: E731
    pts = close(g.points)
    n_s, n_t, n_z = pts.shape[1:]
    order = lambda a: np.moveaxis(a, (-3, -1), (-1, -3)).reshape(a.shape[:-3] + (-1,))  # noqa: E731
    P = order(pts).T
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET STRUCTURED_GRID",
             f"DIMENSIONS {n_s} {n_t} {n_z}", f"POINTS {P.shape[0]} double"]
    lines += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in P]
    lines.append(f"POINT_DATA {P.shape[0]}")
    U = order(close(u.values)).T
    lines.append("VECTORS u double")
    lines += [f"{a:.17g} {b:.17g} {c:.17g}" for a, b, c in U]
    for key, f in (scalars or {}).items():
        vals = order(close(np.asarray(getattr(f, "values", f), dtype=float)))
        lines += [f"SCALARS {key} double 1", "LOOKUP_TABLE default"]
        lines += [f"{v:.17g}" for v in vals]
    path.write_text("\n".join(lines) + "\n")
    return path


def export_csv(path, u: VectorField, scalars: dict | None = None) -> Path:
    path = Path(path)
    g = grid_for(u.domain)
    pts = np.moveaxis(g.points, 0, -1)
    cols = {"s": g.S, "theta": g.TH, "z_index": np.broadcast_to(np.arange(g.n_z), g.shape),
            "x": pts[..., 0], "y": pts[..., 1], "z": pts[..., 2],
            "u_x": u.values[0], "u_y": u.values[1], "u_z": u.values[2]}
    for key, f in (scalars or {}).items():
        cols[key] = np.asarray(getattr(f, "values", f), dtype=float)
    flat = {k: np.broadcast_to(v, g.shape).ravel() for k, v in cols.items()}
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(flat))
        for row in zip(*flat.values()):
            w.writerow([repr(float(x)) for x in row])
    return path


def write_history_csv(path, report) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "delta_sup", "delta_l2", "ratio", "seconds"])
        for i, row in enumerate(zip(report.deltas, report.deltas_l2, report.ratios, report.seconds), 1):
            w.writerow([i] + [repr(float(x)) for x in row])
    return path


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else None
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_json(path, obj) -> Path:
    """Strict JSON (non-finite numbers become ``null``)."""
    path = Path(path)
    path.write_text(json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n")
    return path
