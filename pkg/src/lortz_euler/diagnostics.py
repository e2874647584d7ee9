"""Physics checks for a candidate steady state ``(u, H)``.

Residuals are taken over the grid interior (``Grid.interior_mask``): the
axis collar and the last two radial cells use degraded one-sided stencils,
so including them would hide the interior order of accuracy.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .base_state import BaseState
from .errors import LortzError
from .fields import (ODD, ScalarField, VectorField, calculus_for, mfold_residual,
                     parity_residual)
from .fieldline import VectorInterpolator, random_seeds, trace_orbit
from .geometry import grid_for

log = logging.getLogger(__name__)


def _interior(d, axis_cells: float = 2.0, wall_cells: int = 2):
    return grid_for(d).interior_mask(axis_cells, wall_cells)


def euler_residual(u: VectorField, H: ScalarField, order: int = 4,
                   axis_cells: float = 2.0, wall_cells: int = 2) -> float:
    """``sup |u x curl u - grad H| / sup |grad H|`` over the interior."""
    d = u.domain
    calc = calculus_for(d, order)
    gH = calc.grad(H.values)
    res = np.cross(u.values, calc.curl(u.values), axis=0) - gH
    mask = _interior(d, axis_cells, wall_cells)
    num = np.linalg.norm(res, axis=0)[mask].max()
    den = np.linalg.norm(gH, axis=0)[mask].max()
    return float(num / den) if den > 0 else float("inf")


@dataclass
class FibrationReport:
    monotone: bool
    increasing: bool
    margin: float            # min |dH/ds| / max |dH/ds| outside the collar
    violations: int          # ray segments where dH/ds has the wrong sign
    degenerate: bool


def fibration_check(H: ScalarField, axis_cells: float = 2.0, order: int = 4,
                    degenerate_tol: float = 1e-10) -> FibrationReport:
    """Strict monotonicity of ``H`` along every grid ray ``(theta, z)`` fixed.

    Monotone rays mean the level sets of ``H`` are nested tubes around the axis.
    """
    d = H.domain
    g = grid_for(d)
    dHds = calculus_for(d, order).d_s(H.values)
    keep = g.s > axis_cells * g.ds
    v = dHds[keep]
    top = float(np.abs(v).max())
    if top <= degenerate_tol * max(float(np.abs(H.values).max()), 1.0):
        return FibrationReport(False, False, 0.0, int(v.size), True)
    increasing = float(np.median(v)) > 0
    wrong = (v <= 0) if increasing else (v >= 0)
    margin = float(np.abs(v).min() / top)
    viol = int(wrong.sum())
    return FibrationReport(viol == 0 and margin > 0, increasing, margin, viol, margin <= degenerate_tol)


def _scalar_interpolator(H: ScalarField) -> VectorInterpolator:
    vals = np.zeros((3,) + H.values.shape)
    vals[0] = H.values
    return VectorInterpolator(VectorField(H.domain, vals), s_tol=1e-3)


def bernoulli_on_orbits(u: VectorField, H: ScalarField, n_orbits: int = 50, seed: int = 0,
                        base: BaseState | None = None, n_samples: int = 64,
                        s_range=(0.15, 0.9)) -> float:
    """Largest oscillation of ``H`` along a traced orbit, relative to the range of ``H``."""
    d = u.domain
    rng = np.random.default_rng(seed)
    seeds = random_seeds(d, n_orbits, rng, s_range)
    interp = _scalar_interpolator(H)
    span = float(H.values.max() - H.values.min())
    if span <= 0:
        return 0.0
    worst = 0.0
    for x0 in seeds:
        orb = trace_orbit(u, x0, base=base)
        x = orb.at(np.linspace(0.0, orb.period, n_samples))
        h = interp(x)[..., 0]
        worst = max(worst, float(h.max() - h.min()))
    return worst / span


def cylindrical_components(u: VectorField) -> np.ndarray:
    g = grid_for(u.domain)
    c, s = np.cos(g.TH), np.sin(g.TH)
    ur = c * u.values[0] + s * u.values[1]
    ut = -s * u.values[0] + c * u.values[1]
    return np.stack([ur, ut, u.values[2]])


def theta_mode_energy(u: VectorField) -> np.ndarray:
    """Jacobian-weighted energy of each theta-Fourier mode of ``(u_r, u_theta, u_z)``."""
    g = grid_for(u.domain)
    uc = cylindrical_components(u)
    hat = np.fft.rfft(uc, axis=-2) / g.n_theta
    w = g.weights.sum(axis=1)  # (n_s, n_z) volume weights summed over theta
    e = np.einsum("csjl,sl->j", np.abs(hat) ** 2, w)
    e[1:] *= 2.0
    if g.n_theta % 2 == 0:
        e[-1] *= 0.5
    return e


@dataclass
class SolutionReport:
    euler_residual_rel: float
    div_residual: float
    tangency_residual: float
    bernoulli_orbit_variation: float
    omega_jump: float
    parity_residual: float
    mfold_residual: float
    fibration_monotone: bool
    fibration_margin: float
    mode_ratio: float                       # E(m) / E(0)
    euler_residual_full: float = np.nan     # including collar and wall cells
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, (np.floating, np.bool_)):
                out[k] = v.item()
        return out


def div_residual(u: VectorField, order: int = 4) -> float:
    d = u.domain
    calc = calculus_for(d, order)
    mask = _interior(d)
    dv = np.abs(calc.div(u.values))[mask].max()
    scale = np.linalg.norm(calc.curl(u.values), axis=0)[mask].max()
    return float(dv / scale) if scale > 0 else float(dv)


def tangency_residual(u: VectorField) -> float:
    g = grid_for(u.domain)
    un = np.einsum("a...,a...->...", u.values[:, -1], g.normal)
    return float(np.abs(un).max() / max(np.abs(u.values).max(), 1e-300))


def full_report(u: VectorField, clebsch, d=None, base: BaseState | None = None,
                n_orbits: int = 50, seed: int = 0) -> SolutionReport:
    d = d or u.domain
    notes = []
    H = clebsch.H
    eul = euler_residual(u, H)
    eul_full = euler_residual(u, H, axis_cells=0.0, wall_cells=0)
    try:
        bern = bernoulli_on_orbits(u, H, n_orbits, seed=seed, base=base)
    except LortzError as exc:
        notes.append(f"bernoulli_on_orbits: {exc}")
        bern = float("inf")
    fib = fibration_check(H)
    om_scale = max(float(np.abs(clebsch.omega.values).max()), 1e-300)
    e = theta_mode_energy(u)
    m = d.m
    ratio = float(e[m] / e[0]) if m < e.size and e[0] > 0 else float("nan")
    return SolutionReport(
        euler_residual_rel=eul,
        div_residual=div_residual(u),
        tangency_residual=tangency_residual(u),
        bernoulli_orbit_variation=bern,
        omega_jump=float(clebsch.omega_jump / om_scale),
        parity_residual=parity_residual(u, ODD),
        mfold_residual=mfold_residual(u, m),
        fibration_monotone=fib.monotone,
        fibration_margin=fib.margin,
        mode_ratio=ratio,
        euler_residual_full=eul_full,
        notes=notes,
    )
