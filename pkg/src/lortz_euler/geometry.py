"""Perturbed periodic cylinder and its straightening coordinate map.

The domain is ``{r < 1 + eps * g(theta, z)}`` with ``z`` periodic. Mapped
coordinates ``(s, theta, z)`` send it to the unit cylinder through

    x = s * (1 + eps * g(theta, z)) * (cos theta, sin theta),    x3 = z.

The radial grid is uniform with a half-cell offset from the axis and its last
node sitting exactly on the wall, ``s_i = (i + 1/2) ds`` with
``ds = 1 / (n_s - 1/2)``. Radial stencils that reach across the axis read the
mirrored node ``(s, theta + pi)``.
"""
from __future__ import annotations

import functools
import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, PointOutsideDomain


@dataclass(frozen=True)
class ShapeMode:
    """One term ``cos(k_theta*theta) * [a cos(k_z*phi) + b sin(k_z*phi)]``
    with ``phi = 2*pi*z/axial_period``."""

    k_theta: int
    k_z: int
    cos_amp: float = 1.0
    sin_amp: float = 0.0


@dataclass(frozen=True)
class BoundaryShape:
    modes: tuple[ShapeMode, ...]

    @classmethod
    def default(cls, m: int) -> "BoundaryShape":
        return cls((ShapeMode(m, 1, 1.0, 0.0),))

    def _terms(self, theta, z, axial_period):
        theta = np.asarray(theta, dtype=float)
        z = np.asarray(z, dtype=float)
        kz0 = 2.0 * np.pi / axial_period
        for mode in self.modes:
            k = mode.k_theta
            q = mode.k_z * kz0
            ct, st = np.cos(k * theta), np.sin(k * theta)
            cz, sz = np.cos(q * z), np.sin(q * z)
            zpart = mode.cos_amp * cz + mode.sin_amp * sz
            zpart_z = q * (-mode.cos_amp * sz + mode.sin_amp * cz)
            zpart_zz = -q * q * zpart
            yield k, ct, st, zpart, zpart_z, zpart_zz

    def evaluate(self, theta, z, axial_period):
        """Return ``(g, g_theta, g_z, g_thth, g_zz, g_thz)``."""
        shape = np.broadcast(np.asarray(theta), np.asarray(z)).shape
        out = [np.zeros(shape) for _ in range(6)]
        for k, ct, st, zp, zp_z, zp_zz in self._terms(theta, z, axial_period):
            out[0] = out[0] + ct * zp
            out[1] = out[1] - k * st * zp
            out[2] = out[2] + ct * zp_z
            out[3] = out[3] - k * k * ct * zp
            out[4] = out[4] + ct * zp_zz
            out[5] = out[5] - k * st * zp_z
        return tuple(out)

    def g(self, theta, z, axial_period):
        return self.evaluate(theta, z, axial_period)[0]

    def max_abs(self) -> float:
        return float(sum(abs(md.cos_amp) + abs(md.sin_amp) for md in self.modes))


@dataclass(frozen=True)
class GridSpec:
    n_s: int = 24
    n_theta: int = 64
    n_z: int = 24


@dataclass(frozen=True)
class DomainSpec:
    """Perturbed periodic cylinder with m-fold and mirror symmetry."""

    epsilon: float = 0.1
    shape: BoundaryShape | None = None
    m: int = 8
    axial_period: float = 2.0 * np.pi
    grid: GridSpec = field(default_factory=GridSpec)

    def __post_init__(self):
        if self.shape is None:
            object.__setattr__(self, "shape", BoundaryShape.default(self.m))
        self.validate()

    def validate(self) -> None:
        if not (self.epsilon >= 0.0 and np.isfinite(self.epsilon)):
            raise ConfigError(f"geometry: epsilon must be >= 0, got {self.epsilon}")
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"geometry: m must be a positive integer, got {self.m}")
        if self.axial_period <= 0:
            raise ConfigError("geometry: axial_period must be positive")
        for mode in self.shape.modes:
            if mode.k_theta < 0 or mode.k_theta % self.m:
                raise ConfigError(
                    f"geometry: shape mode k_theta={mode.k_theta} is not a multiple of m={self.m}"
                )
            if mode.k_z < 0:
                raise ConfigError("geometry: shape mode k_z must be >= 0")
        gs = self.grid
        if gs.n_theta % (2 * self.m):
            raise ConfigError(
                f"geometry: n_theta={gs.n_theta} must be a multiple of 2m={2 * self.m}"
            )
        if gs.n_z % 2 or gs.n_z < 4:
            raise ConfigError("geometry: n_z must be even and >= 4")
        if gs.n_s < 8:
            raise ConfigError("geometry: n_s must be >= 8")
        th = np.linspace(0, 2 * np.pi, 721)
        zz = np.linspace(0, self.axial_period, 361)
        gmin = self.shape.g(th[:, None], zz[None, :], self.axial_period).min()
        if 1.0 + self.epsilon * gmin <= 0.0:
            raise ConfigError("geometry: 1 + eps*g must stay positive (boundary collapses)")

    def radius(self, theta, z):
        """Wall radius ``1 + eps*g(theta, z)``."""
        return 1.0 + self.epsilon * self.shape.g(theta, z, self.axial_period)

    def max_radius(self) -> float:
        return 1.0 + self.epsilon * self.shape.max_abs()

    def with_grid(self, **kw) -> "DomainSpec":
        return DomainSpec(self.epsilon, self.shape, self.m, self.axial_period,
                          GridSpec(**{**asdict(self.grid), **kw}))

    def with_(self, **kw) -> "DomainSpec":
        args = dict(epsilon=self.epsilon, shape=self.shape, m=self.m,
                    axial_period=self.axial_period, grid=self.grid)
        args.update(kw)
        if "m" in kw and "shape" not in kw:
            args["shape"] = None
        return DomainSpec(**args)

    def digest(self) -> bytes:
        """16-byte hash identifying the domain and grid (used in field files)."""
        payload = json.dumps(asdict(self), sort_keys=True, default=float)
        return hashlib.sha256(payload.encode()).digest()[:16]


@dataclass(frozen=True)
class MappedPoint:
    s: float
    theta: float
    z: float


def to_cartesian(p: MappedPoint, d: DomainSpec) -> np.ndarray:
    r = p.s * d.radius(p.theta, p.z)
    return np.array([r * np.cos(p.theta), r * np.sin(p.theta), p.z])


def from_cartesian(x, d: DomainSpec, tol: float = 1e-12) -> MappedPoint:
    """Inverse of :func:`to_cartesian`.

    ``theta`` and ``z`` are read off directly; ``s`` solves
    ``r = s * (1 + eps*g(theta, z))``, which is linear in ``s``.
    """
    x1, x2, x3 = (float(v) for v in x)
    theta = np.arctan2(x2, x1) % (2 * np.pi)
    z = x3 % d.axial_period
    r = np.hypot(x1, x2)
    wall = float(d.radius(theta, z))
    s = r / wall
    if s > 1.0 + tol:
        raise PointOutsideDomain(
            f"geometry: point at r={r:.6g} lies outside the wall radius {wall:.6g}"
        )
    return MappedPoint(min(s, 1.0), float(theta), float(z))


def boundary_normal(theta, z, d: DomainSpec) -> np.ndarray:
    """Outward unit normal of ``r = 1 + eps*g`` (last axis holds components)."""
    theta = np.asarray(theta, dtype=float)
    z = np.asarray(z, dtype=float)
    g, g_t, g_z, *_ = d.shape.evaluate(theta, z, d.axial_period)
    wall = 1.0 + d.epsilon * g
    # grad(r - wall) = e_r - (wall_theta / r) e_theta - wall_z e_z at r = wall
    a_t = -d.epsilon * g_t / wall
    a_z = -d.epsilon * g_z
    c, s = np.cos(theta), np.sin(theta)
    n = np.stack([c - a_t * s, s + a_t * c, a_z * np.ones_like(c)], axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


class Grid:
    """Structured grid over the mapped cube with cached metric arrays.

    Arrays are indexed ``[i_s, j_theta, k_z]``; vector arrays carry a leading
    Cartesian component axis.
    """

    def __init__(self, domain: DomainSpec):
        self.domain = domain
        gs = domain.grid
        self.shape = (gs.n_s, gs.n_theta, gs.n_z)
        self.n_s, self.n_theta, self.n_z = self.shape
        self.ds = 1.0 / (gs.n_s - 0.5)
        self.dtheta = 2 * np.pi / gs.n_theta
        self.dz = domain.axial_period / gs.n_z
        self.s = (np.arange(gs.n_s) + 0.5) * self.ds
        self.s[-1] = 1.0
        self.theta = np.arange(gs.n_theta) * self.dtheta
        self.z = np.arange(gs.n_z) * self.dz

        S, TH, Z = np.meshgrid(self.s, self.theta, self.z, indexing="ij")
        self.S, self.TH, self.Z = S, TH, Z
        eps = domain.epsilon
        g, g_t, g_z, g_tt, g_zz, g_tz = domain.shape.evaluate(TH, Z, domain.axial_period)
        self.R = 1.0 + eps * g
        self.R_t, self.R_z = eps * g_t, eps * g_z
        self.R_tt, self.R_zz, self.R_tz = eps * g_tt, eps * g_zz, eps * g_tz
        self.r = S * self.R
        c, sn = np.cos(TH), np.sin(TH)
        zero, one = np.zeros_like(c), np.ones_like(c)
        self.e_r = np.stack([c, sn, zero])
        self.e_theta = np.stack([-sn, c, zero])
        self.e_z = np.stack([zero, zero, one])
        self.points = np.stack([self.r * c, self.r * sn, Z])

        R = self.R
        self.grad_s = (self.e_r / R - (self.R_t / R**2) * self.e_theta
                       - (S * self.R_z / R) * self.e_z)
        self.grad_theta = self.e_theta / self.r
        self.jacobian = S * R**2
        w_s = np.full(gs.n_s, self.ds)
        w_s[-1] = 0.5 * self.ds
        self.weights = self.jacobian * w_s[:, None, None] * self.dtheta * self.dz

        nb = self.grad_s[:, -1]
        self.normal = nb / np.linalg.norm(nb, axis=0)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def volume(self) -> float:
        return float(self.weights.sum())

    def interior_mask(self, axis_cells: float = 2.0, wall_cells: int = 2) -> np.ndarray:
        """Points outside the axis collar and at least ``wall_cells`` from the wall."""
        keep = (self.s >= axis_cells * self.ds) & (np.arange(self.n_s) < self.n_s - wall_cells)
        return np.broadcast_to(keep[:, None, None], self.shape)


@functools.lru_cache(maxsize=8)
def grid_for(domain: DomainSpec) -> Grid:
    return Grid(domain)
