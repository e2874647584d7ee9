"""Integral curves of grid vector fields.

Two tracers live here.

``trace_orbit`` follows a single seed in Cartesian space with an adaptive
5(4) Runge-Kutta pair and event location (scipy), which is what the closure
and mirror checks use.

``ThetaSweep`` moves every grid point at once, using the angle as the
independent variable::

    dS/dtheta = V^s / V^theta,   dZ/dtheta = V^z / V^theta,   dt/dtheta = 1 / V^theta

with ``V^a = u . grad xi^a``. All orbits share one lattice of angular
stations, so the field is interpolated to each station plane once per RK4
stage and only a 2-D (s, z) interpolation is done per orbit. This is the
workhorse of the Clebsch step.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .base_state import BaseState
from .errors import LeftDomain, OrbitNotClosed
from .fields import ODD, ScalarField, VectorField, extend, metric_for, parity_residual
from .geometry import DomainSpec, grid_for
from . import symmetry

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# interpolation weights


def trig_weights(x: np.ndarray, n: int, period: float) -> np.ndarray:
    """Periodic band-limited (sinc) interpolation weights, shape ``x.shape + (n,)``.

    For even ``n`` the Nyquist mode is taken as a cosine, so the interpolant
    commutes with reflections of the grid.
    """
    x = np.asarray(x, dtype=float)
    h = period / n
    d = (x[..., None] - h * np.arange(n)) * (TWO_PI / period)  # in radians of one period
    half = 0.5 * d
    sh = np.sin(half)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.sin(n * half) * np.cos(half) / (n * sh)
    hit = np.abs(sh) < 1e-14
    if np.any(hit):
        rows = np.any(hit, axis=-1)
        w[rows] = 0.0
        w[hit] = 1.0
    return w


def lagrange_weights(s: np.ndarray, ds: float, n_s: int, width: int = 6):
    """Lagrange weights on the extended radial line ``(k - n_s + 1/2) ds``.

    Returns ``(cols, w)`` with ``cols`` indices into the extended axis.
    """
    s = np.asarray(s, dtype=float)
    k0 = np.floor(s / ds + n_s - 0.5).astype(int)
    lo = np.clip(k0 - (width // 2 - 1), 0, 2 * n_s - width)
    cols = lo[..., None] + np.arange(width)
    x = (cols - n_s + 0.5) * ds
    w = np.ones(cols.shape)
    for a in range(width):
        for b in range(width):
            if a != b:
                w[..., a] *= (s - x[..., b]) / (x[..., a] - x[..., b])
    return cols, w


class VectorInterpolator:
    """Off-grid evaluation of a grid field: trig in theta and z, 6-point
    Lagrange in s across the axis."""

    def __init__(self, u: VectorField, s_tol: float = 1e-3):
        self.domain = u.domain
        self.grid = grid_for(u.domain)
        self.ext = extend(u.values)  # (3, 2n_s, n_theta, n_z)
        self.s_tol = s_tol

    def mapped(self, s, theta, z):
        g = self.grid
        cols, ws = lagrange_weights(s, g.ds, g.n_s)
        wt = trig_weights(theta, g.n_theta, TWO_PI)
        wz = trig_weights(z, g.n_z, self.domain.axial_period)
        blk = self.ext[:, cols]  # (3, ..., 6, n_theta, n_z)
        return np.einsum("c...kjl,...k,...j,...l->...c", blk, ws, wt, wz)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        d = self.domain
        theta = np.arctan2(x[..., 1], x[..., 0]) % TWO_PI
        z = x[..., 2] % d.axial_period
        s = np.hypot(x[..., 0], x[..., 1]) / d.radius(theta, z)
        if np.any(s > 1.0 + self.s_tol):
            raise LeftDomain(f"fieldline: trajectory left the domain (s={np.max(s):.6g})")
        return self.mapped(np.minimum(s, 1.0), theta, z)


# ---------------------------------------------------------------------------
# Cartesian tracing


@dataclass
class Orbit:
    seed: np.ndarray
    t: np.ndarray
    points: np.ndarray
    period: float
    closure_error: float
    crossings: dict = field(default_factory=dict)
    sol: object = field(default=None, repr=False)

    def at(self, t) -> np.ndarray:
        return self.sol.sol(t)[:3].T


def trace_orbit(u, seed, base: BaseState | None = None, rtol: float = 1e-10,
                atol: float = 1e-12, max_periods: float = 4.0) -> Orbit:
    """Follow ``dX/dt = u(X)`` until the angle about the axis has advanced by 2 pi.

    ``u`` is a :class:`VectorField` or any callable on Cartesian points.
    Raises OrbitNotClosed if no return happens within ``max_periods * T*(0)``.
    """
    base = base or BaseState()
    f = VectorInterpolator(u) if isinstance(u, VectorField) else u
    seed = np.asarray(seed, dtype=float)
    phi0 = float(np.arctan2(seed[1], seed[0]))
    if np.hypot(seed[0], seed[1]) < 1e-12:
        raise OrbitNotClosed("fieldline: seed lies on the axis")

    def rhs(_t, y):
        v = np.asarray(f(y[:3]), dtype=float).reshape(3)
        r2 = y[0] ** 2 + y[1] ** 2
        return np.array([v[0], v[1], v[2], (y[0] * v[1] - y[1] * v[0]) / r2])

    def ret(_t, y):
        return abs(y[3] - phi0) - TWO_PI
    ret.terminal = True

    def half(_t, y):
        return abs(y[3] - phi0) - np.pi

    t_max = max_periods * float(base.period_star(0.0))
    sol = solve_ivp(rhs, (0.0, t_max), np.r_[seed, phi0], method="RK45", rtol=rtol,
                    atol=atol, events=(ret, half), dense_output=True)
    if sol.status != 1 or len(sol.t_events[0]) == 0:
        raise OrbitNotClosed(
            f"fieldline: no return to the seed section within t={t_max:.6g} from {seed.tolist()}")
    T = float(sol.t_events[0][0])
    x_end = sol.y_events[0][0][:3]
    cross = {"start": (0.0, seed.copy()), "return": (T, x_end)}
    if len(sol.t_events[1]):
        cross["half"] = (float(sol.t_events[1][0]), sol.y_events[1][0][:3])
    return Orbit(seed=seed, t=sol.t, points=sol.y[:3].T, period=T,
                 closure_error=float(np.linalg.norm(x_end - seed)), crossings=cross, sol=sol)


@dataclass
class ClosureReport:
    n_orbits: int
    max_closure_error: float
    max_mirror_residual: float
    all_closed: bool
    crossed_both: bool
    periods: np.ndarray


def mirror_residual(orbit: Orbit, n_check: int = 16) -> float:
    """``max |X(t1 + a) - R X(t1 - a)|`` about the opposite-side crossing.

    Seeds are taken on the half-plane theta = 0, so ``t1`` is the crossing of
    theta = pi. Orbits of odd fields are mirror symmetric about it.
    """
    if "half" not in orbit.crossings:
        return np.inf
    t1 = orbit.crossings["half"][0]
    a = np.linspace(0.0, min(t1, orbit.period - t1), n_check)
    fwd = orbit.at(t1 + a)
    bwd = orbit.at(t1 - a) * np.array([1.0, -1.0, 1.0])
    return float(np.max(np.linalg.norm(fwd - bwd, axis=1)))


def random_seeds(domain: DomainSpec, n: int, rng: np.random.Generator,
                 s_range=(0.15, 0.9)) -> np.ndarray:
    """Seeds on the half-plane {theta = 0, x1 > 0}."""
    s = rng.uniform(*s_range, n)
    z = rng.uniform(0.0, domain.axial_period, n)
    r = s * domain.radius(0.0, z)
    return np.stack([r, np.zeros(n), z], axis=1)


def verify_closure(u, n_samples: int = 50, seed: int = 0, base: BaseState | None = None,
                   tol_closure: float = 1e-8, domain: DomainSpec | None = None) -> ClosureReport:
    dom = domain or u.domain
    rng = np.random.default_rng(seed)
    seeds = random_seeds(dom, n_samples, rng)
    errs, mirrors, periods, both = [], [], [], True
    for x0 in seeds:
        orb = trace_orbit(u, x0, base=base)
        errs.append(orb.closure_error)
        mirrors.append(mirror_residual(orb))
        periods.append(orb.period)
        both &= "half" in orb.crossings
    errs = np.array(errs)
    return ClosureReport(n_samples, float(errs.max()), float(np.max(mirrors)),
                         bool(np.all(errs <= tol_closure)), bool(both), np.array(periods))


# ---------------------------------------------------------------------------
# lattice sweep in theta


class ThetaSweep:
    """RK4 in theta for all orbits at once.

    ``substeps`` RK4 steps per angular grid cell; station planes sit on the
    half-step lattice ``l * h / 2`` with ``h = dtheta / substeps``.
    """

    def __init__(self, u: VectorField, substeps: int = 16, s_tol: float = 1e-6):
        d = u.domain
        g = grid_for(d)
        M = metric_for(d)
        p = M.pos
        v = u.values
        Vs = np.einsum("a...,a...->...", v, M.grad_s[:, p])
        Vt = np.einsum("a...,a...->...", v, M.grad_theta[:, p])
        if np.min(Vt) <= 0.0:
            i = np.unravel_index(np.argmin(Vt), Vt.shape)
            raise OrbitNotClosed(
                f"fieldline: angular velocity u.grad(theta)={Vt[i]:.3g} <= 0 at grid index {i}; "
                "orbits do not wind around the axis")
        # A is odd across the axis (grad s flips sign in the mirrored chart)
        self.ext = np.stack([extend(Vs / Vt, -1.0), extend(v[2] / Vt), extend(1.0 / Vt)])
        self.domain, self.grid = d, g
        self.substeps = substeps
        self.h = g.dtheta / substeps
        self.s_tol = s_tol
        self._planes: dict[int, np.ndarray] = {}

    def plane(self, l: int) -> np.ndarray:
        P = self._planes.get(l)
        if P is None:
            w = trig_weights(l * 0.5 * self.h, self.grid.n_theta, TWO_PI)
            P = np.einsum("ckjl,j->ckl", self.ext, w)
            self._planes[l] = P
        return P

    def _rhs(self, l, S, Z):
        g = self.grid
        if np.any(S > 1.0 + self.s_tol):
            raise LeftDomain(f"fieldline: orbit left the domain in the theta sweep (s={S.max():.6g})")
        S = np.minimum(S, 1.0)
        cols, ws = lagrange_weights(S, g.ds, g.n_s)
        wz = trig_weights(Z, g.n_z, self.domain.axial_period)
        P = self.plane(l)
        blk = P[:, cols]  # (3, n, 6, n_z)
        return np.einsum("cnkl,nk,nl->cn", blk, ws, wz)

    def integrate(self, S, Z, l0: int, n_steps: int, direction: int = 1):
        """Advance from station ``l0`` by ``n_steps`` RK4 steps; returns (S, Z, t)."""
        S = np.array(S, dtype=float)
        Z = np.array(Z, dtype=float)
        t = np.zeros_like(S)
        h = direction * self.h
        l = l0
        for _ in range(n_steps):
            k1 = self._rhs(l, S, Z)
            k2 = self._rhs(l + direction, S + 0.5 * h * k1[0], Z + 0.5 * h * k1[1])
            k3 = self._rhs(l + direction, S + 0.5 * h * k2[0], Z + 0.5 * h * k2[1])
            k4 = self._rhs(l + 2 * direction, S + h * k3[0], Z + h * k3[1])
            inc = (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            S, Z, t = S + inc[0], Z + inc[1], t + inc[2]
            l += 2 * direction
        return S, Z, t

    def station(self, j: int) -> int:
        return 2 * self.substeps * j


@dataclass
class WedgeTimes:
    """Travel times on the symmetry wedge of an odd, m-fold symmetric field."""

    t: np.ndarray       # time since the last crossing of theta = 0+, full grid
    T: np.ndarray       # orbit period, full grid
    S_cross: np.ndarray  # radial fraction where each orbit crosses theta = 0 (full grid)


def wedge_sweep(u: VectorField, m: int | None = None, substeps: int = 16) -> WedgeTimes:
    """Travel time and period at every grid point using odd + m-fold symmetry.

    Only the half wedge ``0 <= theta <= pi/m`` is integrated. Each orbit is
    mirror symmetric about the planes theta = 0 and theta = pi/m, so the
    period is ``2 m`` times the time it needs between them.
    """
    d = u.domain
    m = m or d.m
    g = grid_for(d)
    grp = symmetry.group_for(g.n_theta, m, True)
    jw = g.n_theta // (2 * m)
    sw = ThetaSweep(u, substeps)
    n_s, n_z = g.n_s, g.n_z
    tb = np.zeros((n_s, jw + 1, n_z))
    tf = np.zeros((n_s, jw + 1, n_z))
    Sc = np.zeros((n_s, jw + 1, n_z))
    S0 = np.repeat(g.s[:, None], n_z, axis=1).ravel()
    Z0 = np.repeat(g.z[None, :], n_s, axis=0).ravel()
    for j in range(jw + 1):
        l0 = sw.station(j)
        if j > 0:
            Sb, _, t = sw.integrate(S0, Z0, l0, j * substeps, -1)
            tb[:, j] = (-t).reshape(n_s, n_z)
            Sc[:, j] = Sb.reshape(n_s, n_z)
        else:
            Sc[:, j] = S0.reshape(n_s, n_z)
        if j < jw:
            _, _, t = sw.integrate(S0, Z0, l0, (jw - j) * substeps, +1)
            tf[:, j] = t.reshape(n_s, n_z)
    half = tb + tf
    T_w = 2 * m * half
    # t is odd about each mirror plane up to the offset T/m: build the odd part
    # tau_tilde = t - T theta / 2 pi on the wedge and expand it as an odd field.
    th_w = g.theta[: jw + 1][None, :, None]
    tt_w = tb - T_w * th_w / TWO_PI
    T_full = symmetry.expand(T_w, grp, +1, vector=False)
    tt_full = symmetry.expand(tt_w, grp, -1, vector=False)
    Sc_full = symmetry.expand(Sc, grp, +1, vector=False)
    t_full = tt_full + T_full * g.TH / TWO_PI
    return WedgeTimes(t=t_full, T=T_full, S_cross=Sc_full)


def period_field(u: VectorField, m: int | None = None, substeps: int = 16,
                 odd_tol: float = 1e-8) -> ScalarField:
    """Orbit period sampled at every grid point (requires an odd field)."""
    scale = max(float(np.abs(u.values).max()), 1e-300)
    res = parity_residual(u, ODD)
    if res > odd_tol * scale:
        raise OrbitNotClosed(
            f"fieldline: period_field needs an odd field (parity residual {res:.3g}); "
            "closure of orbits is not guaranteed otherwise")
    wt = wedge_sweep(u, m, substeps)
    return ScalarField(u.domain, wt.T, name="T")
