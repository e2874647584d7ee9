"""Linear response of one Lortz step about a steady state.

On the straight cylinder the step commutes with rotations, so every
theta-Fourier sector is invariant under the linearized map. Two results live
here.

Axisymmetric sector (exact). For ``u = (Omega + f) r e_theta`` with ``f``
a function of ``q = r^2``, one step returns ``(Omega + L f) r e_theta`` with

    (L f)(q) = [ f(q) (Omega + q Omega_q) / Omega_q  -  f(0) Omega(0) / Omega_q(0) ] / q

(subscripts are q-derivatives). Its eigenfunctions are

    f_lam(q) = c0 / ( (Omega + q Omega_q) / Omega_q - lam q ),   c0 = Omega(0) / Omega_q(0)

for every ``lam`` below ``lam_max = min_q (Omega + q Omega_q) / (q Omega_q)``
(3 for the default profile at the wall). ``lam = 1`` is in the spectrum
(``f = c0 Omega_q / Omega``), and so is every ``lam`` in ``(1, lam_max)``.
The plain fixed-point iteration therefore cannot contract in this sector,
for any m.

Non-axisymmetric sector (numerical). :func:`sector_contraction` estimates
the spectral radius of the linearized step restricted to fields with zero
theta-mean, by power iteration with central differences.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .base_state import BaseState, Profile
from .diagnostics import cylindrical_components
from .divcurl import solver_for
from .fields import EVEN, VectorField, curl, norm, parity_project, sample_vector, symmetrize_mfold
from .geometry import DomainSpec, grid_for
from .iteration import IterationState, RunConfig, step

log = logging.getLogger(__name__)


def _q_funcs(profile: Profile):
    om = profile.poly_q
    return om, om.deriv()


def axisymmetric_lambda_max(profile: Profile, q_wall: float = 1.0, n: int = 2001) -> float:
    """Supremum of the eigenvalues with a regular eigenfunction on ``[0, q_wall]``."""
    om, omq = _q_funcs(profile)
    q = np.linspace(q_wall / n, q_wall, n)
    return float(np.min((om(q) + q * omq(q)) / (q * omq(q))))


def axisymmetric_eigenfunction(profile: Profile, lam: float):
    """``f_lam(q)``, normalized to ``f(0) = 1``; a callable of ``q``."""
    om, omq = _q_funcs(profile)
    c0 = float(om(0.0) / omq(0.0))

    def f(q):
        q = np.asarray(q, dtype=float)
        return c0 / ((om(q) + q * omq(q)) / omq(q) - lam * q)
    return f


def axisymmetric_map(profile: Profile, f, q):
    """The exact linear map ``L f`` at ``q > 0`` (``f`` a callable of ``q``)."""
    om, omq = _q_funcs(profile)
    q = np.asarray(q, dtype=float)
    a = f(q) * (om(q) + q * omq(q)) / omq(q)
    a0 = float(f(0.0)) * float(om(0.0) / omq(0.0))
    return (a - a0) / q


def rotation_field(d: DomainSpec, profile: Profile, f=None) -> VectorField:
    """``(Omega + f) r e_theta`` sampled on the grid (``f`` a callable of ``q``)."""
    def fn(x):
        q = x[..., 0] ** 2 + x[..., 1] ** 2
        om = profile.poly_q(q) + (f(q) if f is not None else 0.0)
        return np.stack([-om * x[..., 1], om * x[..., 0], np.zeros_like(om)], axis=-1)
    return sample_vector(d, fn)


def linear_response(u0: VectorField, v: VectorField, cfg: RunConfig, base: BaseState,
                    h: float = 1e-6) -> VectorField:
    """Central-difference directional derivative of one step at ``u0`` along ``v``."""
    up = step(IterationState(0, u0 + v * h), cfg, base).u
    um = step(IterationState(0, u0 - v * h), cfg, base).u
    return (up - um) * (0.5 / h)


def drop_theta_mean(v: VectorField) -> VectorField:
    """Remove the axisymmetric (theta-mean) part of the cylindrical components."""
    g = grid_for(v.domain)
    c = cylindrical_components(v)
    c = c - c.mean(axis=2, keepdims=True)
    co, sn = np.cos(g.TH), np.sin(g.TH)
    return VectorField(v.domain, np.stack([co * c[0] - sn * c[1], sn * c[0] + co * c[1], c[2]]))


def random_odd_mfold(d: DomainSpec, rng: np.random.Generator, n_modes: int = 2) -> VectorField:
    """Smooth, tangent, divergence-free, odd, m-fold field with zero theta-mean."""
    g = grid_for(d)
    w = np.zeros((3,) + g.shape)
    bump = g.S**2 * (1.0 - g.S**2)
    kz = 2.0 * np.pi / d.axial_period
    for a in range(3):
        for j in range(1, n_modes + 1):
            for l in range(n_modes + 1):
                w[a] += (rng.standard_normal() * bump
                         * np.cos(j * d.m * g.TH + rng.uniform(0, 2 * np.pi))
                         * np.cos(l * kz * g.Z + rng.uniform(0, 2 * np.pi)))
    om = symmetrize_mfold(parity_project(VectorField(d, w), EVEN), d.m)
    v, _ = solver_for(d, "odd").solve(curl(om), check=False)
    v = drop_theta_mean(v)
    return v * (1.0 / norm(v, "sup"))


@dataclass
class SectorReport:
    m: int
    rho: float
    history: list = field(default_factory=list)
    settled: bool = False


def sector_contraction(cfg: RunConfig, n_power: int = 30, seed: int = 0, h: float = 1e-6,
                       settle_tol: float = 0.02) -> SectorReport:
    """Spectral radius of the linearized step on zero-theta-mean fields at ``u*``.

    Requires ``epsilon = 0`` (rotation invariance makes the sector invariant).
    ``rho`` is the geometric mean of the last four power-iteration ratios.
    """
    d = cfg.domain
    if d.epsilon != 0.0:
        raise ValueError("linearization: the sector split needs the straight cylinder (epsilon = 0)")
    base = BaseState(cfg.profile)
    u_star = rotation_field(d, cfg.profile)
    v = random_odd_mfold(d, np.random.default_rng(seed))
    hist = []
    for _ in range(n_power):
        lv = drop_theta_mean(linear_response(u_star, v, cfg, base, h))
        r = norm(lv, "sup")
        hist.append(r)
        if r == 0.0:
            break
        v = lv * (1.0 / r)
    tail = np.asarray(hist[-4:])
    rho = float(np.exp(np.mean(np.log(tail)))) if tail.size and np.all(tail > 0) else 0.0
    settled = bool(tail.size >= 4 and (tail.max() - tail.min()) <= settle_tol * max(rho, 1e-300))
    log.info("sector: m=%d rho=%.4g (settled=%s)", d.m, rho, settled)
    return SectorReport(d.m, rho, hist, settled)
