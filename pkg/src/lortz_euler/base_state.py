"""Axisymmetric rotating base flow ``u* = Omega(r) r e_theta`` and the
period-pressure map.

``Omega`` is a polynomial in ``q = r**2``, which keeps ``u*`` smooth through
the axis. Every derived radial function (pressure, Bernoulli head, inverse
period) is then also a polynomial in ``q``; the vectorized paths use those
exact antiderivatives while the scalar :meth:`BaseState.pressure_star` runs an
adaptive Gauss-Kronrod quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate, optimize

from .errors import ConfigError, PeriodOutOfRange

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Profile:
    """Rotation rate ``Omega(r) = sum_k coeffs[k] * r**(2k)`` on ``[0, r_max]``."""

    coeffs: tuple[float, ...] = (1.0, 1.0)
    r_max: float = 2.0

    def __post_init__(self):
        if len(self.coeffs) == 0:
            raise ConfigError("base_state: profile needs at least one coefficient")
        if not self.r_max > 0:
            raise ConfigError("base_state: r_max must be positive")

    @property
    def poly_q(self) -> Polynomial:
        return Polynomial(np.asarray(self.coeffs, dtype=float))

    def omega(self, r):
        r = np.asarray(r, dtype=float)
        return self.poly_q(r * r)

    def omega_prime(self, r):
        r = np.asarray(r, dtype=float)
        return 2.0 * r * self.poly_q.deriv()(r * r)

    def omega_second(self, r):
        r = np.asarray(r, dtype=float)
        dq, dqq = self.poly_q.deriv(), self.poly_q.deriv(2)
        return 2.0 * dq(r * r) + 4.0 * r * r * dqq(r * r)


@dataclass(frozen=True)
class HypothesisReport:
    monotone: bool
    sign_constant: bool
    h2: bool
    omega_second_at_0: float
    increasing: bool

    @property
    def h1(self) -> bool:
        return self.monotone and self.sign_constant

    @property
    def passed(self) -> bool:
        return self.h1 and self.h2


def check_hypotheses(p: Profile, n_samples: int = 4001) -> HypothesisReport:
    """Sample ``Omega`` and ``Omega'`` on ``[0, r_max]``; failures are reported."""
    r = np.linspace(0.0, p.r_max, n_samples)
    om = p.omega(r)
    dom = p.omega_prime(r[1:])
    scale = max(np.abs(dom).max(), 1e-300)
    tol = 1e-13 * scale
    increasing = bool(np.all(dom > tol))
    decreasing = bool(np.all(dom < -tol))
    sign_constant = bool(np.all(om > 0) or np.all(om < 0))
    # analytic value; the finite difference is only a guard against typos in coeffs
    o2 = float(p.omega_second(0.0))
    h = 1e-4
    o2_fd = float((p.omega(h) - 2 * p.omega(0.0) + p.omega(-h)) / h**2)
    h2 = abs(o2) > 1e-12 and abs(o2_fd) > 1e-6
    return HypothesisReport(
        monotone=increasing or decreasing,
        sign_constant=sign_constant,
        h2=bool(h2),
        omega_second_at_0=o2,
        increasing=increasing,
    )


class BaseState:
    """Exact radial functions of the base flow for a given profile."""

    def __init__(self, profile: Profile | None = None):
        self.profile = profile or Profile()
        om = self.profile.poly_q
        self._om_q = om
        self._dom_q = om.deriv()
        x = Polynomial([0.0, 1.0])
        # p*(r) = int_0^r rho Omega^2 d rho = 1/2 int_0^q Omega(q')^2 dq'
        self._p_q = 0.5 * (om * om).integ(lbnd=0.0)
        self._h_q = 0.5 * x * om * om + self._p_q
        self._dh_q = self._h_q.deriv()
        t0 = TWO_PI / float(om(0.0))
        t1 = TWO_PI / float(om(self.profile.r_max**2))
        self.period_window = (min(t0, t1), max(t0, t1))

    # -- velocity ---------------------------------------------------------
    def u_star(self, x) -> np.ndarray:
        """``Omega(r) * r * e_theta`` at Cartesian points (last axis = xyz)."""
        x = np.asarray(x, dtype=float)
        om = self.profile.omega(np.hypot(x[..., 0], x[..., 1]))
        return np.stack([-om * x[..., 1], om * x[..., 0], np.zeros_like(om)], axis=-1)

    def vorticity_star(self, r):
        """Axial vorticity ``2 Omega + r Omega'`` of ``u*``."""
        pr = self.profile
        return 2.0 * pr.omega(r) + np.asarray(r) * pr.omega_prime(r)

    # -- pressure and Bernoulli head ----------------------------------------
    def pressure_star(self, r):
        """``int_0^r rho Omega(rho)^2 d rho`` by adaptive quadrature."""
        if np.ndim(r):
            return np.vectorize(self.pressure_star, otypes=[float])(r)
        integrand = lambda rho: rho * float(self.profile.omega(rho)) ** 2  # noqa: E731
        val, _ = integrate.quad(integrand, 0.0, float(r), epsabs=1e-13, epsrel=1e-13, limit=200)
        return val

    def pressure_poly(self, r):
        r = np.asarray(r, dtype=float)
        return self._p_q(r * r)

    def bernoulli_star(self, r):
        """``H*(r) = (r Omega)^2 / 2 + p*(r)``."""
        om = self.profile.omega(r)
        return 0.5 * (np.asarray(r) * om) ** 2 + self.pressure_star(r)

    def bernoulli_poly(self, r):
        r = np.asarray(r, dtype=float)
        return self._h_q(r * r)

    def bernoulli_star_prime(self, r):
        """``H*'(r) = (r Omega' + 2 Omega) r Omega``."""
        r = np.asarray(r, dtype=float)
        om = self.profile.omega(r)
        return (r * self.profile.omega_prime(r) + 2.0 * om) * r * om

    # -- period map -------------------------------------------------------
    def period_star(self, r):
        return TWO_PI / self.profile.omega(r)

    def _check_window(self, T, slack=1e-12):
        T = np.asarray(T, dtype=float)
        lo, hi = self.period_window
        tol = slack * hi
        bad = ~((T >= lo - tol) & (T <= hi + tol))
        if np.any(bad):
            worst = T[bad].flat[0] if T.ndim else float(T)
            raise PeriodOutOfRange(
                f"base_state: period {worst:.12g} outside the base-state window "
                f"[{lo:.12g}, {hi:.12g}]", period=float(worst))

    def _q_of_period(self, T):
        """``q = r*(T)**2`` by Newton iteration on the polynomial ``Omega(q) = 2 pi / T``."""
        T = np.asarray(T, dtype=float)
        target = TWO_PI / T
        om, dom = self._om_q, self._dom_q
        qmax = self.profile.r_max**2
        q = np.clip((target - om(0.0)) / dom(0.5 * qmax), -0.1 * qmax, qmax)
        for _ in range(100):
            step = (om(q) - target) / dom(q)
            q = q - step
            if np.all(np.abs(step) <= 1e-15 * (1.0 + np.abs(q))):
                break
        return q

    def radius_of_period(self, T):
        """Inverse of :meth:`period_star` (scalar root-solve)."""
        if np.ndim(T):
            return np.vectorize(self.radius_of_period, otypes=[float])(T)
        self._check_window(T)
        f = lambda r: float(self.period_star(r)) - float(T)  # noqa: E731
        a, b = 0.0, self.profile.r_max
        fa, fb = f(a), f(b)
        if fa == 0.0:
            return 0.0
        if fb == 0.0:
            return b
        if fa * fb > 0:
            # clipped by the slack in _check_window
            return a if abs(fa) < abs(fb) else b
        return optimize.brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)

    def script_H(self, T, slack: float = 1e-12):
        """Bernoulli head as a function of orbital period, ``H*(r*(T))``.

        ``slack`` widens the admissible window (relative); inside it the
        polynomial in ``q`` is continued past the axis, ``q < 0``.
        """
        self._check_window(T, slack)
        return self._h_q(self._q_of_period(T))

    def script_H_prime(self, T, slack: float = 1e-12):
        """Chain rule ``H*'(r*(T)) r*'(T)`` evaluated in ``q = r^2`` (regular at the axis)."""
        self._check_window(T, slack)
        T = np.asarray(T, dtype=float)
        q = self._q_of_period(T)
        dq_dT = -(TWO_PI / T**2) / self._dom_q(q)
        return self._dh_q(q) * dq_dT

    def circulation_potential(self, T, slack: float = 1e-12, n_nodes: int = 24):
        """``F(T)`` with ``F' = T script_H'(T) / 2 pi`` and ``F = 0`` on the axis.

        In ``q``, ``F(q) = int_0^q H_q'(q') / Omega(q') dq'`` (Gauss-Legendre on a
        polynomial over a non-vanishing polynomial).
        """
        self._check_window(T, slack)
        q = np.asarray(self._q_of_period(T), dtype=float)
        x, w = np.polynomial.legendre.leggauss(n_nodes)
        nodes = 0.5 * (x + 1.0)[(slice(None),) + (None,) * q.ndim] * q
        vals = self._dh_q(nodes) / self._om_q(nodes)
        return 0.5 * q * np.tensordot(w, vals, axes=1)
