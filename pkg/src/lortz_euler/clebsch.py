"""Clebsch data of one iteration step: travel time, period, Bernoulli head and
vorticity.

For an odd, m-fold symmetric ``u`` every orbit is closed and winds once
around the axis. With ``t`` the time since the orbit last crossed the cut
half-plane {theta = 0, x1 > 0} and ``T`` its period,

    tau = t - T/2              (odd, jumps by T across the cut)
    H   = script_H(T)
    omega = grad H x grad tau

The gauge constant ``-T/2`` is the one for which ``tau' = tau - (theta - pi)/Omega``
has zero mean over each orbit (orbits are mirror symmetric, ``tau'`` is odd
along them), so both the arclength and the time measure give the same gauge.

``tau`` is differentiated through its smooth part
``tau_tilde = tau - T (theta/2pi - 1/2) = t - T theta / 2pi``:

    grad tau = grad tau_tilde + (theta/2pi - 1/2) grad T + (T/2pi) grad theta

and the middle term drops out of ``grad H x grad tau`` since ``H = H(T)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .base_state import BaseState
from .errors import CutMismatch, GaugeDegenerate
from .fields import ScalarField, VectorField, _dspec, calculus_for, extend, fornberg_weights
from .fieldline import trace_orbit, wedge_sweep
from .geometry import MappedPoint, grid_for

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


def tau_star(p: MappedPoint, base: BaseState, domain=None) -> float:
    """Base travel time ``theta / Omega(r)`` measured from the cut."""
    r = p.s * (domain.radius(p.theta, p.z) if domain is not None else 1.0)
    return float(p.theta / base.profile.omega(r))


@dataclass
class ClebschData:
    tau: ScalarField          # cut field, jump T
    tau_prime: ScalarField    # tau - (theta - pi)/Omega(r), cut field
    tau_tilde: np.ndarray     # smooth odd part t - T theta / 2pi
    T: ScalarField
    H: ScalarField
    omega: VectorField
    cut_mismatch: float       # one-sided d(tau)/dtheta difference at the cut (max)
    cut_estimate: float       # interior truncation estimate used for the check
    omega_jump: float         # |grad H x grad theta| * cut_mismatch, max over the cut


def solve_tau_prime(u: VectorField, base: BaseState, substeps: int = 16):
    """Travel-time perturbation on the cut domain.

    Returns ``(tau_prime, tau, T, tau_tilde)``. ``tau_prime`` jumps by
    ``T - T*(r)`` across the cut.
    """
    d = u.domain
    g = grid_for(d)
    wt = wedge_sweep(u, d.m, substeps)
    T = wt.T
    tau = wt.t - 0.5 * T
    om = base.profile.omega(g.r)
    tau_c = (g.TH - np.pi) / om
    tp = tau - tau_c
    tau_f = ScalarField(d, tau, cut=True, jump=T, name="tau")
    tp_f = ScalarField(d, tp, cut=True, jump=T - TWO_PI / om, name="tau_prime")
    tt = wt.t - T * g.TH / TWO_PI
    return tp_f, tau_f, ScalarField(d, T, name="T"), tt


def assemble_bernoulli(T: ScalarField, base: BaseState, slack: float = 1e-12) -> ScalarField:
    """``H = script_H(T)`` pointwise."""
    lo, hi = base.period_window
    over = max(float(T.values.max()) - hi, lo - float(T.values.min()), 0.0) / hi
    if over > 0:
        log.info("clebsch: periods leave the base window by %.2e (relative); "
                 "using the polynomial continuation", over)
    return ScalarField(T.domain, base.script_H(T.values, slack=slack), name="H")


def _one_sided(n_pts: int, h: float):
    x = np.arange(n_pts) * h
    return fornberg_weights(0.0, x, 1)


def cut_check(tau: np.ndarray, T: np.ndarray, tt: np.ndarray, dtheta: float):
    """Compare one-sided theta derivatives of ``tau`` on both sides of the cut.

    Values past the cut from the left are ``tau(theta_j) + T`` continued to
    ``j = n`` (the cut itself). Returns ``(mismatch, estimate)`` where the
    estimate is the gap between a centred 4th-order and the spectral theta
    derivative of the smooth part in the interior.
    """
    w = _one_sided(5, dtheta)
    right = np.einsum("k,ikl->il", w, tau[:, 0:5])
    left_vals = np.concatenate([tau[:, -4:], (tau[:, 0] + T[:, 0])[:, None]], axis=1)
    left = -np.einsum("k,ikl->il", w, left_vals[:, ::-1])
    mismatch = np.abs(right - left)
    c = fornberg_weights(0.0, np.arange(-2, 3) * dtheta, 1)
    fd = sum(c[q] * np.roll(tt, 2 - q, axis=1) for q in range(5))
    spec = _dspec(tt, -2, TWO_PI)
    est = float(np.max(np.abs(fd - spec)))
    return mismatch, est


def assemble_vorticity(tau_tilde: np.ndarray, T: ScalarField, H: ScalarField,
                       order: int = 6, mismatch_factor: float = 100.0,
                       tau: ScalarField | None = None, base: BaseState | None = None,
                       slack: float = 1e-12):
    """``omega = grad H x grad tau`` from the smooth part of ``tau``.

    With ``base`` given, omega is the discrete curl of the potential
    ``A = H grad tau_tilde + F(T) grad theta`` (``F' = T script_H'/2pi``), so
    that its discrete divergence vanishes to round-off; otherwise the cross
    product of discrete gradients is returned.

    Returns ``(omega, mismatch, estimate, jump)``; raises CutMismatch when the
    one-sided theta derivatives of ``tau`` at the cut disagree by more than
    ``mismatch_factor`` times the interior truncation estimate.
    """
    d = T.domain
    g = grid_for(d)
    calc = calculus_for(d, order)
    gH = calc.grad(H.values)
    if base is None:
        gtau = calc.grad(tau_tilde) + (T.values / TWO_PI) * g.grad_theta
        omega = np.cross(gH, gtau, axis=0)
    else:
        # same radial stencil as the div-curl solver so div(curl) cancels exactly
        calc = calculus_for(d, 4)
        F = base.circulation_potential(T.values, slack=slack)
        H_ext = extend(H.values)
        a_s = H.values * calc.d_s(tau_tilde)
        a_t = H_ext * extend(calc.d_theta(tau_tilde)) + extend(F)
        a_z = H_ext * extend(calc.d_z(tau_tilde))
        omega = calc.curl_covariant(a_s, a_t, a_z)
    tau_vals = tau.values if tau is not None else tau_tilde + T.values * (g.TH / TWO_PI - 0.5)
    mism, est = cut_check(tau_vals, T.values, tau_tilde, g.dtheta)
    scale = max(float(np.abs(tau_vals).max()), 1.0)
    worst = float(mism.max())
    if worst > mismatch_factor * max(est, 1e-13 * scale):
        raise CutMismatch(
            f"clebsch: one-sided d(tau)/dtheta at the cut differ by {worst:.3e}, "
            f"more than {mismatch_factor:g} x the interior estimate {est:.3e}")
    cut_strength = np.linalg.norm(np.cross(gH[:, :, 0], g.grad_theta[:, :, 0], axis=0), axis=0)
    jump = float(np.max(cut_strength * mism))
    return VectorField(d, omega, name="omega"), worst, est, jump


def clebsch_step(u: VectorField, base: BaseState, substeps: int = 16, order: int = 6,
                 period_slack: float = 1e-12, mismatch_factor: float = 100.0) -> ClebschData:
    tp, tau, T, tt = solve_tau_prime(u, base, substeps)
    H = assemble_bernoulli(T, base, slack=period_slack)
    omega, mism, est, jump = assemble_vorticity(tt, T, H, order, mismatch_factor, tau=tau,
                                                base=base, slack=period_slack)
    return ClebschData(tau=tau, tau_prime=tp, tau_tilde=tt, T=T, H=H, omega=omega,
                       cut_mismatch=mism, cut_estimate=est, omega_jump=jump)


def gauge_integral(u, seed, base: BaseState, measure: str = "arclength",
                   min_cells: float = 10.0, n_samples: int = 2001, domain=None):
    """``(integral, length)`` of ``tau'`` over one traversal of the orbit of ``seed``.

    ``seed`` must lie on the cut half-plane. Travel time is measured from the
    seed, ``tau' = t - T/2 - (theta - pi)/Omega(r)``; ``measure`` is
    ``"arclength"`` (|u| dt) or ``"time"`` (dt). Raises GaugeDegenerate for
    orbits shorter than ``min_cells`` grid spacings.
    """
    seed = np.asarray(seed, dtype=float)
    orb = trace_orbit(u, seed, base=base)
    d = domain or getattr(u, "domain", None)
    t = np.linspace(0.0, orb.period, n_samples)
    x = orb.at(t)
    vel = np.asarray(orb.sol.sol(t)[:3].T, dtype=float)
    speed = np.linalg.norm(np.gradient(vel, t, axis=0), axis=1)
    length = float(np.trapz(speed, t))
    if d is not None:
        g = grid_for(d)
        h = min(g.ds, g.dtheta * np.hypot(seed[0], seed[1]), g.dz)
        if length < min_cells * h:
            raise GaugeDegenerate(
                f"clebsch: orbit length {length:.3e} below {min_cells:g} grid spacings")
    r = np.hypot(x[:, 0], x[:, 1])
    theta = np.unwrap(np.arctan2(x[:, 1], x[:, 0]))
    theta = theta - theta[0]
    tp = t - 0.5 * orb.period - (theta - np.pi) / base.profile.omega(r)
    wts = speed if measure == "arclength" else np.ones_like(t)
    return float(np.trapz(tp * wts, t)), length
