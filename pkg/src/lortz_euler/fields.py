"""Grid fields and metric-aware differential operators.

Discretization
--------------
* theta, z : Fourier pseudo-spectral (first derivative drops the Nyquist mode).
* s        : centred finite differences of order 4 (default) or 6 on the
  uniform line ``(k + 1/2) ds, k = -n_s .. n_s-1`` that runs straight through
  the axis. A node at ``-s`` is the physical point ``(s, theta + pi)``, so
  Cartesian components are read there without any sign change. Near the wall
  the stencil is shifted inwards (one-sided).

Divergence and curl are written in conservative / covariant form,

    div v  = (1/J) d_a (J v . grad xi^a)
    curl v = (1/J) e_a eps^{abc} d_b (v . e_c)

with ``e_a = dx/dxi^a`` the covariant basis and ``J = s R^2``. Because the
one-dimensional difference operators commute, ``div(curl)`` and
``curl(grad)`` vanish to round-off.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from . import symmetry
from .errors import ConfigError, CutFieldRequiresJump
from .geometry import DomainSpec, grid_for

ODD, EVEN, NONE = "odd", "even", "none"


def fornberg_weights(x0: float, x: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at ``x0``."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    c = np.zeros((n, order + 1))
    c1, c4 = 1.0, x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def radial_matrix(n_s: int, ds: float, order: int = 4, deriv: int = 1) -> np.ndarray:
    """Rows: physical nodes ``i = 0..n_s-1``; columns: extended nodes
    ``k = 0..2 n_s - 1`` (column ``n_s + i`` is node ``i``, column
    ``n_s - 1 - i`` its mirror image across the axis)."""
    width = order + 1 + (deriv - 1)
    half = width // 2
    x = (np.arange(2 * n_s) - n_s + 0.5) * ds
    D = np.zeros((n_s, 2 * n_s))
    for i in range(n_s):
        k = n_s + i
        lo = min(k - half, 2 * n_s - width)
        cols = np.arange(lo, lo + width)
        D[i, cols] = fornberg_weights(x[k], x[cols], deriv)
    return D


def spectral_wavenumbers(n: int, period: float, deriv: int = 1) -> np.ndarray:
    k = np.fft.rfftfreq(n, d=1.0 / n) * (2 * np.pi / period)
    if deriv % 2 and n % 2 == 0:
        k = k.copy()
        k[-1] = 0.0
    return k


def spectral_matrix(n: int, period: float, deriv: int = 1) -> np.ndarray:
    """Dense matrix of the FFT derivative (identical to :func:`_dspec`)."""
    return _dspec(np.eye(n), -1, period, deriv).T


def _dspec(a: np.ndarray, axis: int, period: float, deriv: int = 1) -> np.ndarray:
    n = a.shape[axis]
    k = spectral_wavenumbers(n, period, deriv)
    shape = [1] * a.ndim
    shape[axis] = k.size
    mult = ((1j * k) ** deriv).reshape(shape)
    return np.fft.irfft(np.fft.rfft(a, axis=axis) * mult, n=n, axis=axis)


class Metric:
    """Metric arrays on the extended (through-the-axis) grid.

    Extended arrays have ``2 n_s`` radial entries; entry ``n_s + i`` is node
    ``i``. ``pos`` slices back to the physical nodes.
    """

    def __init__(self, domain: DomainSpec):
        g = grid_for(domain)
        self.grid = g
        n_s = g.n_s
        self.n_s = n_s
        if domain.epsilon and domain.m % 2:
            # R(theta + pi) = R(theta) is what makes the mirrored node a grid node
            th = g.theta
            if not np.allclose(domain.radius(th[:, None], g.z[None, :]),
                               domain.radius(th[:, None] + np.pi, g.z[None, :]), atol=1e-14):
                raise ConfigError("fields: radial stencils across the axis need an even m")
        s_ext = (np.arange(2 * n_s) - n_s + 0.5) * g.ds
        s_ext[-1] = 1.0
        S, TH, Z = np.meshgrid(s_ext, g.theta, g.z, indexing="ij")
        eps = domain.epsilon
        gg, g_t, g_z, *_ = domain.shape.evaluate(TH, Z, domain.axial_period)
        R, R_t, R_z = 1.0 + eps * gg, eps * g_t, eps * g_z
        c, sn = np.cos(TH), np.sin(TH)
        zero, one = np.zeros_like(c), np.ones_like(c)
        e_r = np.stack([c, sn, zero])
        e_th = np.stack([-sn, c, zero])
        e_z = np.stack([zero, zero, one])
        self.J = S * R**2
        # contravariant gradients of the chart coordinates
        self.grad_s = e_r / R - (R_t / R**2) * e_th - (S * R_z / R) * e_z
        self.grad_theta = e_th / (S * R)
        self.grad_z = e_z
        # covariant basis dx/dxi
        self.cov_s = R * e_r
        self.cov_theta = S * R_t * e_r + S * R * e_th
        self.cov_z = S * R_z * e_r + e_z
        self.pos = slice(n_s, 2 * n_s)
        self.shape = g.shape


@functools.lru_cache(maxsize=16)
def metric_for(domain: DomainSpec) -> Metric:
    return Metric(domain)


@functools.lru_cache(maxsize=32)
def _radial(n_s: int, ds: float, order: int, deriv: int = 1) -> np.ndarray:
    return radial_matrix(n_s, ds, order, deriv)


def extend(a: np.ndarray, sign: float = 1.0) -> np.ndarray:
    """Append the mirrored half-line: value at ``-s_i`` is ``a(s_i, theta + pi)``."""
    n_th = a.shape[-2]
    ghost = np.roll(a, -n_th // 2, axis=-2)[..., ::-1, :, :]
    return np.concatenate([sign * ghost, a], axis=-3)


class Calculus:
    """Partial derivatives and vector operators for one domain/grid."""

    def __init__(self, domain: DomainSpec, order: int = 4):
        if order not in (4, 6):
            raise ConfigError("fields: radial order must be 4 or 6")
        self.domain = domain
        self.order = order
        self.metric = metric_for(domain)
        self.grid = self.metric.grid
        g = self.grid
        self.Ds = _radial(g.n_s, g.ds, order)

    # -- partials on raw arrays (trailing axes s, theta, z) --------------
    def d_s_ext(self, a_ext: np.ndarray) -> np.ndarray:
        return np.einsum("ik,...kjl->...ijl", self.Ds, a_ext)

    def d_s(self, a: np.ndarray, sign: float = 1.0) -> np.ndarray:
        return self.d_s_ext(extend(a, sign))

    def d_theta(self, a: np.ndarray, deriv: int = 1) -> np.ndarray:
        return _dspec(a, -2, 2 * np.pi, deriv)

    def d_z(self, a: np.ndarray, deriv: int = 1) -> np.ndarray:
        return _dspec(a, -1, self.domain.axial_period, deriv)

    # -- vector calculus ---------------------------------------------------
    def grad(self, f: np.ndarray) -> np.ndarray:
        M, p = self.metric, self.metric.pos
        return (self.d_s(f) * M.grad_s[:, p] + self.d_theta(f) * M.grad_theta[:, p]
                + self.d_z(f) * M.grad_z[:, p])

    def div(self, v: np.ndarray) -> np.ndarray:
        M, p = self.metric, self.metric.pos
        v_ext = extend(v)
        q_s = M.J * np.einsum("a...,a...->...", v_ext, M.grad_s)
        q_t = M.J[p] * np.einsum("a...,a...->...", v, M.grad_theta[:, p])
        q_z = M.J[p] * v[2]
        return (self.d_s_ext(q_s) + self.d_theta(q_t) + self.d_z(q_z)) / M.J[p]

    def curl(self, v: np.ndarray) -> np.ndarray:
        M, p = self.metric, self.metric.pos
        v_ext = extend(v)
        v_t_ext = np.einsum("a...,a...->...", v_ext, M.cov_theta)
        v_z_ext = np.einsum("a...,a...->...", v_ext, M.cov_z)
        v_s = np.einsum("a...,a...->...", v, M.cov_s[:, p])
        return self.curl_covariant(v_s, v_t_ext, v_z_ext)

    def curl_covariant(self, v_s: np.ndarray, v_t_ext: np.ndarray, v_z_ext: np.ndarray) -> np.ndarray:
        """Cartesian curl from covariant components ``v . e_a``.

        ``v_s`` lives on the grid, the theta and z components on the extended
        radial line (see :func:`extend`; both are even under the extension).
        """
        M, p = self.metric, self.metric.pos
        v_t, v_z = v_t_ext[p], v_z_ext[p]
        F_s = self.d_theta(v_z) - self.d_z(v_t)
        F_t = self.d_z(v_s) - self.d_s_ext(v_z_ext)
        F_z = self.d_s_ext(v_t_ext) - self.d_theta(v_s)
        return (M.cov_s[:, p] * F_s + M.cov_theta[:, p] * F_t + M.cov_z[:, p] * F_z) / M.J[p]


@functools.lru_cache(maxsize=16)
def calculus_for(domain: DomainSpec, order: int = 4) -> Calculus:
    return Calculus(domain, order)


# ---------------------------------------------------------------------------
# field containers


@dataclass(frozen=True, eq=False)
class ScalarField:
    domain: DomainSpec
    values: np.ndarray
    cut: bool = False
    jump: np.ndarray | None = None  # value(theta -> 2pi-) - value(theta = 0+)
    name: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        g = self.domain.grid
        if v.shape != (g.n_s, g.n_theta, g.n_z):
            raise ConfigError(f"fields: scalar shape {v.shape} does not match the grid")
        object.__setattr__(self, "values", v)

    def __add__(self, other):
        return ScalarField(self.domain, self.values + _vals(other))

    def __sub__(self, other):
        return ScalarField(self.domain, self.values - _vals(other))


@dataclass(frozen=True, eq=False)
class VectorField:
    domain: DomainSpec
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        g = self.domain.grid
        if v.shape != (3, g.n_s, g.n_theta, g.n_z):
            raise ConfigError(f"fields: vector shape {v.shape} does not match the grid")
        object.__setattr__(self, "values", v)

    def __add__(self, other):
        return VectorField(self.domain, self.values + _vals(other))

    def __sub__(self, other):
        return VectorField(self.domain, self.values - _vals(other))

    def __mul__(self, c: float):
        return VectorField(self.domain, self.values * c)

    __rmul__ = __mul__


def _vals(x):
    return x.values if hasattr(x, "values") else x


def sample_vector(domain: DomainSpec, fn) -> VectorField:
    """Evaluate ``fn(points)`` with points shaped ``(..., 3)`` on the grid."""
    g = grid_for(domain)
    pts = np.moveaxis(g.points, 0, -1)
    return VectorField(domain, np.moveaxis(np.asarray(fn(pts), dtype=float), -1, 0))


def sample_scalar(domain: DomainSpec, fn) -> ScalarField:
    g = grid_for(domain)
    pts = np.moveaxis(g.points, 0, -1)
    return ScalarField(domain, np.asarray(fn(pts), dtype=float))


# ---------------------------------------------------------------------------
# operators


def gradient(f: ScalarField, order: int = 4, jump: np.ndarray | None = None) -> VectorField:
    """Gradient; cut fields need their jump (a smooth field) across theta = 0."""
    calc = calculus_for(f.domain, order)
    if not f.cut:
        return VectorField(f.domain, calc.grad(f.values))
    J = jump if jump is not None else f.jump
    if J is None:
        raise CutFieldRequiresJump("fields: gradient of a cut field needs its jump across theta=0")
    J = np.broadcast_to(np.asarray(J, dtype=float), f.values.shape)
    chi = calc.grid.TH / (2 * np.pi) - 0.5
    smooth = f.values - J * chi
    out = calc.grad(smooth) + chi * calc.grad(J) + J * calc.grid.grad_theta / (2 * np.pi)
    return VectorField(f.domain, out)


def divergence(v: VectorField, order: int = 4) -> ScalarField:
    return ScalarField(v.domain, calculus_for(v.domain, order).div(v.values))


def curl(v: VectorField, order: int = 4) -> VectorField:
    return VectorField(v.domain, calculus_for(v.domain, order).curl(v.values))


def cross(a, b) -> VectorField:
    return VectorField(a.domain, np.cross(a.values, b.values, axis=0))


def dot(a, b) -> ScalarField:
    return ScalarField(a.domain, np.einsum("a...,a...->...", a.values, b.values))


def reflect(v):
    """Pull-back by the mirror ``R_Pi``: ``(R v)(x) = R v(R x)``."""
    n = v.domain.grid.n_theta
    idx = (-np.arange(n)) % n
    if isinstance(v, VectorField):
        out = v.values[:, :, idx, :] * np.array([1.0, -1.0, 1.0])[:, None, None, None]
        return VectorField(v.domain, out)
    return ScalarField(v.domain, v.values[:, idx, :])


def parity_residual(v, tag: str) -> float:
    """``sup |v + R v|`` for odd, ``sup |v - R v|`` for even fields."""
    r = reflect(v).values
    if tag == ODD:
        return float(np.max(np.abs(v.values + r)))
    if tag == EVEN:
        return float(np.max(np.abs(v.values - r)))
    raise ValueError(f"fields: unknown parity tag {tag!r}")


def parity_project(v, tag: str):
    r = reflect(v).values
    out = 0.5 * (v.values - r) if tag == ODD else 0.5 * (v.values + r)
    return type(v)(v.domain, out)


def rotate(v, k: int, m: int):
    """Pull-back by rotation through ``2 pi k / m``."""
    n = v.domain.grid.n_theta
    if n % m:
        raise ConfigError(f"fields: n_theta={n} is not a multiple of m={m}")
    el = symmetry.Element(k * n // m, False, symmetry.rotation_matrix(2 * np.pi * k / m))
    vec = isinstance(v, VectorField)
    return type(v)(v.domain, symmetry.act(v.values, el, 1, vec))


def symmetrize_mfold(v, m: int):
    """Average of the ``m`` rotated copies (projector onto m-fold symmetric fields)."""
    grp = symmetry.group_for(v.domain.grid.n_theta, m, False)
    vec = isinstance(v, VectorField)
    return type(v)(v.domain, symmetry.project(v.values, grp, 1, vec))


def mfold_residual(v, m: int) -> float:
    return float(np.max(np.abs(rotate(v, 1, m).values - v.values)))


def norm(v, kind: str = "sup") -> float:
    """Discrete norms: ``sup``, ``L2`` (metric volume element) or ``C1``."""
    vals = v.values
    mag2 = np.einsum("a...,a...->...", vals, vals) if isinstance(v, VectorField) else vals**2
    if kind == "sup":
        return float(np.sqrt(mag2.max()))
    if kind == "L2":
        return float(np.sqrt(np.sum(grid_for(v.domain).weights * mag2)))
    if kind == "C1":
        calc = calculus_for(v.domain)
        comps = vals if isinstance(v, VectorField) else vals[None]
        gsum = sum(np.einsum("a...,a...->...", g, g) for g in (calc.grad(c) for c in comps))
        return float(np.sqrt(mag2.max()) + np.sqrt(gsum.max()))
    raise ValueError(f"fields: unknown norm kind {kind!r}")


def inner(a, b) -> float:
    """L2 inner product with the metric volume element."""
    w = grid_for(a.domain).weights
    return float(np.sum(w * np.einsum("a...,a...->...", a.values, b.values)))


def zeros_vector(domain: DomainSpec) -> VectorField:
    g = domain.grid
    return VectorField(domain, np.zeros((3, g.n_s, g.n_theta, g.n_z)))
