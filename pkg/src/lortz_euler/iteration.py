"""The Lortz fixed-point loop and the contraction-versus-m study."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .base_state import BaseState, Profile, check_hypotheses
from .clebsch import ClebschData, clebsch_step
from .divcurl import solver_for
from .errors import ConfigError, DivergenceDetected, LortzError, NotConverged
from .fields import ODD, VectorField, norm, parity_project, sample_vector, symmetrize_mfold
from .geometry import DomainSpec, grid_for

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    domain: DomainSpec = field(default_factory=DomainSpec)
    profile: Profile = field(default_factory=Profile)
    max_iters: int = 50
    tol: float = 1e-9            # on sup |u_N - u_{N-1}|, relative to sup |u*|
    substeps: int = 16           # RK4 steps per angular cell in the orbit sweep
    period_slack: float = 0.05   # relative widening of the period window (continued in q < 0)
    solver_tol: float = 1e-8
    compat_tol: float = 1e-2     # relative div(omega) allowed into the div-curl solve
    mismatch_factor: float = 100.0
    diverge_after: int = 3
    cadence: int = 1             # log every `cadence` steps

    def validate(self):
        if self.max_iters < 1:
            raise ConfigError("iteration: max_iters must be >= 1")
        if not self.tol > self.solver_tol * 1e-3:
            raise ConfigError("iteration: tol must stay above the solver residual floor")
        if self.substeps < 1:
            raise ConfigError("iteration: substeps must be >= 1")


@dataclass
class IterationState:
    n: int
    u: VectorField
    clebsch: ClebschData | None = None
    delta: float = np.inf        # sup norm
    delta_l2: float = np.inf
    ratio: float = np.nan


@dataclass
class ConvergenceReport:
    deltas: list = field(default_factory=list)      # relative sup deltas
    deltas_l2: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    u_star_norm: float = 1.0
    fit_slope: float = np.nan
    fit_r2: float = np.nan

    def fit(self, floor: float = 1e-13):
        """Least-squares line through log(delta_N), skipping round-off-level deltas."""
        d = np.asarray(self.deltas, dtype=float)
        n = np.arange(1, len(d) + 1)
        keep = d > floor
        if keep.sum() < 3:
            return self
        x, y = n[keep], np.log(d[keep])
        A = np.vstack([x, np.ones_like(x)]).T
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        pred = A @ coef
        ss_res = float(np.sum((y - pred) ** 2))
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        self.fit_slope = float(coef[0])
        self.fit_r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
        return self

    def asymptotic_ratio(self, n_last: int = 4, floor: float = 1e-12) -> float:
        r = [q for q, d in zip(self.ratios, self.deltas) if np.isfinite(q) and d > floor]
        r = r[1:][-n_last:] if len(r) > 1 else r
        if not r:
            return float("nan")
        return float(np.exp(np.mean(np.log(r))))

    def to_dict(self) -> dict:
        return {k: (float(v) if isinstance(v, (np.floating, float)) else v)
                for k, v in self.__dict__.items()}


@dataclass
class Solution:
    u: VectorField
    clebsch: ClebschData
    report: ConvergenceReport
    config: RunConfig


def project_symmetric(u: VectorField) -> VectorField:
    return symmetrize_mfold(parity_project(u, ODD), u.domain.m)


def initial_field(cfg: RunConfig, base: BaseState) -> VectorField:
    """``u_0``: the div-curl solution for the base vorticity ``(2 Omega + r Omega') e_z``.

    On the unperturbed cylinder this is ``u*`` itself; on the perturbed one it
    is the closest tangent field with the same vorticity.
    """
    d = cfg.domain
    g = grid_for(d)
    if d.epsilon == 0.0:
        return sample_vector(d, base.u_star)
    om = np.zeros((3,) + g.shape)
    om[2] = base.vorticity_star(g.r)
    u, _ = solver_for(d, "odd").solve(VectorField(d, om), tol=cfg.solver_tol, check=False)
    return u


def step(s: IterationState, cfg: RunConfig, base: BaseState) -> IterationState:
    """One Lortz step: orbits -> (tau, T, H, omega) -> div-curl -> symmetry projection."""
    d = s.u.domain
    cd = clebsch_step(s.u, base, substeps=cfg.substeps, period_slack=cfg.period_slack,
                      mismatch_factor=cfg.mismatch_factor)
    solver = solver_for(d, "odd")
    from .divcurl import check_compatibility
    check_compatibility(cd.omega, cfg.compat_tol)
    u_new, info = solver.solve(cd.omega, tol=cfg.solver_tol, check=False)
    u_new = project_symmetric(u_new)
    diff = u_new - s.u
    delta = norm(diff, "sup")
    ratio = delta / s.delta if np.isfinite(s.delta) and s.delta > 0 else np.nan
    return IterationState(n=s.n + 1, u=u_new, clebsch=cd, delta=delta,
                          delta_l2=norm(diff, "L2"), ratio=ratio)


def run(cfg: RunConfig, u0: VectorField | None = None, raise_on_failure: bool = True) -> Solution:
    cfg.validate()
    hyp = check_hypotheses(cfg.profile)
    if not hyp.passed:
        raise ConfigError(f"iteration: profile fails the base-state hypotheses ({hyp})")
    if cfg.domain.max_radius() > cfg.profile.r_max:
        raise ConfigError("iteration: profile r_max is smaller than the domain radius")
    base = BaseState(cfg.profile)
    d = cfg.domain
    u_ref = norm(sample_vector(d, base.u_star), "sup")
    state = IterationState(0, u0 if u0 is not None else initial_field(cfg, base))
    rep = ConvergenceReport(u_star_norm=u_ref)
    growing = 0
    for _ in range(cfg.max_iters):
        t0 = time.perf_counter()
        try:
            state = step(state, cfg, base)
        except LortzError as exc:
            rep.fit()
            exc.history = rep
            raise
        rel = state.delta / u_ref
        rep.deltas.append(rel)
        rep.deltas_l2.append(state.delta_l2 / u_ref)
        rep.ratios.append(state.ratio)
        rep.seconds.append(time.perf_counter() - t0)
        rep.iterations = state.n
        if state.n % cfg.cadence == 0:
            log.info("step %3d  delta %.3e  ratio %s  (%.1fs)", state.n, rel,
                     f"{state.ratio:.4f}" if np.isfinite(state.ratio) else "  -   ",
                     rep.seconds[-1])
        if rel <= cfg.tol:
            rep.converged = True
            break
        growing = growing + 1 if (np.isfinite(state.ratio) and state.ratio > 1.0) else 0
        if growing >= cfg.diverge_after:
            rep.fit()
            raise DivergenceDetected(
                f"iteration: delta grew for {growing} consecutive steps "
                f"(last {rel:.3e}, ratio {state.ratio:.3f})", history=rep)
    rep.fit()
    sol = Solution(state.u, state.clebsch, rep, cfg)
    if not rep.converged and raise_on_failure:
        err = NotConverged(
            f"iteration: delta {rep.deltas[-1]:.3e} above tol {cfg.tol:.1e} after "
            f"{rep.iterations} steps", history=rep)
        err.solution = sol
        raise err
    return sol


@dataclass
class ContractionReport:
    m_list: list
    rho: dict
    rho_times_m: dict
    reports: dict
    errors: dict

    def ratio(self, m_hi: int, m_lo: int) -> float:
        return self.rho.get(m_hi, np.nan) / self.rho.get(m_lo, np.nan)


def contraction_vs_m(cfg: RunConfig, m_list, theta_per_mode: int = 8) -> ContractionReport:
    """Run the iteration for each ``m`` and record the asymptotic contraction ratio.

    The angular grid is refined to at least ``theta_per_mode * m`` points so the
    wall mode ``cos(m theta)`` stays resolved as ``m`` grows.
    """
    rho, rho_m, reps, errs = {}, {}, {}, {}
    for m in m_list:
        if m % 2:
            log.warning("contraction: m=%d is odd; the wedge argument assumes even m", m)
        try:
            n_theta = max(cfg.domain.grid.n_theta, theta_per_mode * m)
            dm = cfg.domain.with_(m=m, grid=replace(cfg.domain.grid, n_theta=n_theta))
            sol = run(replace(cfg, domain=dm), raise_on_failure=False)
            rep = sol.report
            reps[m] = rep
            r = rep.asymptotic_ratio() if rep.iterations > 1 else float("nan")
            rho[m] = r
            rho_m[m] = r * m
            log.info("contraction: m=%d  rho=%.4g  rho*m=%.4g", m, r, r * m)
        except LortzError as exc:
            errs[m] = f"{type(exc).__name__}: {exc}"
            log.error("contraction: m=%d failed: %s", m, exc)
            rep = getattr(exc, "history", None)
            if rep is not None and rep.iterations > 1:
                # a diverging history still measures the ratio (rho > 1)
                reps[m] = rep
                rho[m] = rep.asymptotic_ratio()
                rho_m[m] = rho[m] * m
    return ContractionReport(list(m_list), rho, rho_m, reps, errs)
