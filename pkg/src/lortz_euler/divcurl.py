"""Div-curl boundary value problem and the harmonic field.

The discrete problem is

    minimize  sum_x w(x) (|curl u - omega|^2 + (div u)^2)

over grid fields ``u`` that are tangent at wall nodes (``u . n = 0`` is
eliminated, not penalized) and that lie in a symmetry class:

* ``"odd"``   -- odd and m-fold symmetric (dihedral group). The harmonic
  field is even, so the problem has no kernel here.
* ``"mfold"`` -- m-fold symmetric only. The one-dimensional harmonic kernel
  is removed by one extra row ``<u, u_H> = 0``.

Restricting to one symmetry class lets the unknowns live on a fundamental
wedge; the full field is ``E c`` with a sparse expansion ``E``. The
reduced normal equations are small enough to factor densely once per
domain (Cholesky), and each solve is then two triangular sweeps plus a few
steps of iterative refinement.
"""
from __future__ import annotations

import functools
import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import symmetry
from .errors import IncompatibleData, SolverDiverged
from .fields import (VectorField, calculus_for, metric_for, _radial,
                     spectral_matrix, divergence, inner)
from .geometry import DomainSpec, grid_for

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# sparse operators on the full grid


class SparseOps:
    """Sparse versions of the :mod:`fields` operators (same discretization)."""

    def __init__(self, domain: DomainSpec, order: int = 4):
        g = grid_for(domain)
        M = metric_for(domain)
        self.grid, self.metric = g, M
        n_s, n_t, n_z = g.shape
        self.N = N = g.size
        I_s, I_t, I_z = sp.identity(n_s), sp.identity(n_t), sp.identity(n_z)
        Dt = sp.csr_matrix(spectral_matrix(n_t, 2 * np.pi))
        Dz = sp.csr_matrix(spectral_matrix(n_z, domain.axial_period))
        self.Dt = sp.kron(sp.kron(I_s, Dt), I_z).tocsr()
        self.Dz = sp.kron(sp.kron(I_s, I_t), Dz).tocsr()
        Ds = sp.csr_matrix(_radial(n_s, g.ds, order))
        self.Ds_ext = sp.kron(sp.kron(Ds, I_t), I_z).tocsr()
        # extension: extended node (k, j, l) <- physical node
        k = np.arange(2 * n_s)
        src_i = np.where(k >= n_s, k - n_s, n_s - 1 - k)
        jj = np.arange(n_t)
        K, Jg, L = np.meshgrid(k, jj, np.arange(n_z), indexing="ij")
        src_j = np.where(K >= n_s, Jg, (Jg + n_t // 2) % n_t)
        src = (src_i[K] * n_t + src_j) * n_z + L
        rows = np.arange(src.size)
        self.X = sp.csr_matrix((np.ones(src.size), (rows, src.ravel())), shape=(src.size, N))

    @staticmethod
    def _diag(a):
        return sp.diags(np.ravel(a))

    def grad(self) -> list[sp.csr_matrix]:
        """Three (N x N) blocks: component a of grad f."""
        M, p = self.metric, self.metric.pos
        Ds = self.Ds_ext @ self.X
        return [(self._diag(M.grad_s[a][p]) @ Ds + self._diag(M.grad_theta[a][p]) @ self.Dt
                 + self._diag(M.grad_z[a][p]) @ self.Dz).tocsr() for a in range(3)]

    def div(self) -> sp.csr_matrix:
        """(N x 3N) divergence."""
        M, p = self.metric, self.metric.pos
        invJ = self._diag(1.0 / M.J[p])
        blocks = []
        for a in range(3):
            b = (self.Ds_ext @ self._diag(M.J * M.grad_s[a]) @ self.X
                 + self.Dt @ self._diag(M.J[p] * M.grad_theta[a][p])
                 + self.Dz @ self._diag(M.J[p] * M.grad_z[a][p]))
            blocks.append(invJ @ b)
        return sp.hstack(blocks).tocsr()

    def curl(self) -> sp.csr_matrix:
        """(3N x 3N) curl."""
        M, p = self.metric, self.metric.pos
        X, D = self.X, self._diag

        def cov(basis, ext):
            if ext:
                return sp.hstack([D(basis[a]) @ X for a in range(3)])
            return sp.hstack([D(basis[a][p]) for a in range(3)])

        vt_ext, vz_ext = cov(M.cov_theta, True), cov(M.cov_z, True)
        vs, vt, vz = cov(M.cov_s, False), cov(M.cov_theta, False), cov(M.cov_z, False)
        F_s = self.Dt @ vz - self.Dz @ vt
        F_t = self.Dz @ vs - self.Ds_ext @ vz_ext
        F_z = self.Ds_ext @ vt_ext - self.Dt @ vs
        invJ = 1.0 / M.J[p]
        rows = [D(M.cov_s[a][p] * invJ) @ F_s + D(M.cov_theta[a][p] * invJ) @ F_t
                + D(M.cov_z[a][p] * invJ) @ F_z for a in range(3)]
        return sp.vstack(rows).tocsr()

    def axis_circulation(self) -> sp.csr_matrix:
        """(n_theta*n_z x 3N): covariant ``u . e_theta`` extrapolated to s = 0.

        It vanishes for fields that are smooth on the axis. The discrete curl
        and div cannot see it, because ``grad theta`` is curl- and div-free on
        a grid that excludes the axis.
        """
        M = self.metric
        g = self.grid
        n_s, n_t, n_z = g.shape
        nodes = np.arange(n_s - 3, n_s + 3)
        x = (nodes - n_s + 0.5) * g.ds
        L = np.array([np.prod([(0.0 - x[b]) / (x[a] - x[b]) for b in range(6) if b != a])
                      for a in range(6)])
        n_line = n_t * n_z
        pick = sp.csr_matrix((np.repeat(L, n_line),
                              (np.tile(np.arange(n_line), 6),
                               (nodes[:, None] * n_line + np.arange(n_line)).ravel())),
                             shape=(n_line, 2 * n_s * n_line))
        return sp.hstack([pick @ self._diag(M.cov_theta[a]) @ self.X for a in range(3)]).tocsr()


    def nyquist(self) -> sp.csr_matrix:
        """Rows extracting the theta- and z-Nyquist amplitudes of every
        Cartesian component, weighted so the squared row norm is the L2 energy
        of that checkerboard."""
        g = self.grid
        n_s, n_t, n_z = g.shape
        w = g.weights
        I_s, I_t, I_z = sp.identity(n_s), sp.identity(n_t), sp.identity(n_z)
        alt_t = sp.csr_matrix(((-1.0) ** np.arange(n_t))[None, :] / n_t)
        alt_z = sp.csr_matrix(((-1.0) ** np.arange(n_z))[None, :] / n_z)
        Nt = sp.kron(sp.kron(I_s, alt_t), I_z)
        Nz = sp.kron(sp.kron(I_s, I_t), alt_z)
        wt = np.sqrt(w.sum(axis=1).ravel())
        wz = np.sqrt(w.sum(axis=2).ravel())
        blocks = []
        for Nop, ww in ((Nt, wt), (Nz, wz)):
            op = sp.diags(ww) @ Nop
            blocks.append(sp.block_diag([op] * 3))
        return sp.vstack(blocks).tocsr()


# ---------------------------------------------------------------------------
# symmetry reduction


@dataclass
class Reduction:
    group: symmetry.Group
    reflect_sign: int
    E: sp.csr_matrix          # (3N x d) vector expansion or (N x d) scalar
    wedge_points: np.ndarray  # flat indices of wedge points
    orbit_size: np.ndarray    # per wedge point
    bases: list               # per wedge point basis (3 x d_p)

    @property
    def dim(self) -> int:
        return self.E.shape[1]


def build_reduction(domain: DomainSpec, dihedral: bool, reflect_sign: int, kind: str,
                    tangent: bool = False) -> Reduction:
    g = grid_for(domain)
    n_s, n_t, n_z = g.shape
    N = g.size
    grp = symmetry.group_for(n_t, domain.m, dihedral)
    wedge = grp.wedge()
    maps = [el.index_map(n_t) for el in grp.elements]
    rows, cols, vals = [], [], []
    wp, osize, bases = [], [], []
    col = 0
    for j in wedge:
        stab = len(grp.stabilizer(j))
        for i in range(n_s):
            for k in range(n_z):
                nrm = g.normal[:, j, k] if (tangent and i == n_s - 1) else None
                B = grp.invariant_basis(j, reflect_sign, kind, nrm)
                dp = B.shape[1]
                wp.append((i * n_t + j) * n_z + k)
                osize.append(grp.order // stab)
                bases.append(B)
                if dp == 0:
                    continue
                seen = set()
                for el, mp in zip(grp.elements, maps):
                    jt = mp[j]
                    if jt in seen:
                        continue
                    seen.add(jt)
                    chi = float(reflect_sign) if el.mirror else 1.0
                    tgt = (i * n_t + jt) * n_z + k
                    if kind == "scalar":
                        rows.append(tgt)
                        cols.append(col)
                        vals.append(chi)
                    else:
                        V = chi * el.matrix @ B
                        for c in range(3):
                            for q in range(dp):
                                if V[c, q] != 0.0:
                                    rows.append(c * N + tgt)
                                    cols.append(col + q)
                                    vals.append(V[c, q])
                col += dp
    n_rows = N if kind == "scalar" else 3 * N
    E = sp.csr_matrix((vals, (rows, cols)), shape=(n_rows, col))
    return Reduction(grp, reflect_sign, E, np.array(wp), np.array(osize), bases)


# ---------------------------------------------------------------------------
# harmonic field


@dataclass
class HarmonicField:
    field: VectorField
    psi: np.ndarray
    normalization: float


def compute_harmonic(d: DomainSpec) -> HarmonicField:
    return _harmonic_cached(d)


@functools.lru_cache(maxsize=8)
def _harmonic_cached(d: DomainSpec) -> HarmonicField:
    g = grid_for(d)
    n_s = g.n_s
    if d.epsilon == 0.0:
        vals = np.zeros((3,) + g.shape)
        vals[2] = 1.0
        nrm = np.sqrt(g.volume())
        return HarmonicField(VectorField(d, vals / nrm), np.zeros(g.shape), nrm)
    ops = SparseOps(d)
    red = build_reduction(d, True, +1, "scalar")
    G = [Ga @ red.E for Ga in ops.grad()]
    Div = ops.div()
    wp = red.wedge_points
    on_wall = (wp // (g.n_theta * g.n_z)) == n_s - 1
    Gstack = sp.vstack(G).tocsr()
    L = (Div[wp] @ Gstack).tocsr()
    nrm = g.normal.reshape(3, -1)[:, (wp % (g.n_theta * g.n_z))]
    Nn = sum(sp.diags(nrm[a]) @ G[a][wp] for a in range(3))
    ez = np.zeros((3,) + g.shape)
    ez[2] = 1.0
    div_ez = divergence(VectorField(d, ez)).values.ravel()[wp]
    A = sp.vstack([L[~on_wall], Nn[on_wall]]).toarray()
    b = np.concatenate([-div_ez[~on_wall], -nrm[2][on_wall]])
    # constants and the Nyquist modes are exact null vectors; min-norm drops them
    c, _, rank, sv = sla.lstsq(A, b, cond=1e-11, lapack_driver="gelsd")
    res = np.linalg.norm(A @ c - b) / max(np.linalg.norm(b), 1e-300)
    log.info("harmonic: rank %d of %d, relative residual %.3e", rank, A.shape[1], res)
    psi = (red.E @ c).reshape(g.shape)
    calc = calculus_for(d)
    vals = ez + calc.grad(psi)
    nrm2 = np.sqrt(np.sum(g.weights * np.einsum("a...,a...->...", vals, vals)))
    vals /= nrm2
    if np.sum(g.weights * vals[2]) < 0:
        vals = -vals
    return HarmonicField(VectorField(d, vals), psi, float(nrm2))


# ---------------------------------------------------------------------------
# div-curl solve


@dataclass
class SolveInfo:
    residual: float           # relative joint residual sqrt(|curl u - w|^2 + |div u|^2)/|w|
    normal_residual: float    # relative residual of the normal equations
    refinements: int
    harmonic_component: float


class DivCurlSolver:
    """Factored least-squares div-curl operator for one domain and symmetry class."""

    def __init__(self, d: DomainSpec, mode: str = "odd", order: int = 4):
        if mode not in ("odd", "mfold"):
            raise ValueError(f"divcurl: unknown mode {mode!r}")
        t0 = time.perf_counter()
        self.domain, self.mode = d, mode
        g = grid_for(d)
        self.grid = g
        N = g.size
        dihedral = mode == "odd"
        red = build_reduction(d, dihedral, -1 if dihedral else +1, "vector", tangent=True)
        self.red = red
        ops = SparseOps(d, order)
        wp = red.wedge_points
        C = ops.curl()
        Dv = ops.div()
        curl_rows = sp.vstack([C[a * N + wp] for a in range(3)]).tocsr()  # (3Nw x 3N)
        Mc = (curl_rows @ red.E).tocsr()
        Md = (Dv[wp] @ red.E).tocsr()
        # output bases: curl of the unknown is even (pseudo-vector), div is odd
        out_sign = +1
        nw = len(wp)
        ang = wp % (g.n_theta * g.n_z) // g.n_z
        w = g.weights.ravel()[wp] * red.orbit_size
        sw = np.sqrt(w)
        P_rows, P_cols, P_vals = [], [], []
        d_keep = []
        r = 0
        basis_cache = {}
        for q in range(nw):
            j = int(ang[q])
            key = ("v", j)
            if key not in basis_cache:
                basis_cache[key] = red.group.invariant_basis(j, out_sign, "vector")
                basis_cache[("s", j)] = red.group.invariant_basis(j, red.reflect_sign, "scalar")
            B = basis_cache[key]
            for col in range(B.shape[1]):
                for a in range(3):
                    if B[a, col] != 0.0:
                        P_rows.append(r)
                        P_cols.append(a * nw + q)
                        P_vals.append(sw[q] * B[a, col])
                r += 1
            if basis_cache[("s", j)].shape[1]:
                d_keep.append(q)
        self.P = sp.csr_matrix((P_vals, (P_rows, P_cols)), shape=(r, 3 * nw))
        self.d_keep = np.array(d_keep, dtype=int)
        self.sw = sw
        # axis regularity rows, one per wedge (theta, z) line
        on_axis = wp < g.n_theta * g.n_z
        line = wp[on_axis]
        reg_w = np.sqrt(red.orbit_size[on_axis] * g.dtheta * g.dz) / g.s[0]
        Mreg = sp.diags(reg_w) @ (ops.axis_circulation()[line] @ red.E)
        extra = [Mreg]
        if mode == "mfold":
            # e_z times a theta- or z-checkerboard is curl- and div-free for
            # spectral first derivatives; those modes are pinned to zero here
            extra.append((ops.nyquist() @ red.E).tocsr())
        self.n_reg = sum(x.shape[0] for x in extra)
        A = sp.vstack([self.P @ Mc, sp.diags(sw[self.d_keep]) @ Md[self.d_keep]] + extra).tocsr()
        self.A = A
        self.harmonic = compute_harmonic(d)
        self.h_row = None
        NE = (A.T @ A).toarray()
        if mode == "mfold":
            hv = (self.harmonic.field.values * g.weights).reshape(-1)
            self.h_row = np.asarray(red.E.T @ hv).ravel()
            NE += np.outer(self.h_row, self.h_row)
        self.NE = NE
        self.red_ok = True
        try:
            self.chol = sla.cho_factor(NE, lower=False, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SolverDiverged(f"divcurl: normal matrix is not positive definite ({exc})") from exc
        self._wp = wp
        log.info("divcurl[%s]: %d unknowns, %d rows, factored in %.1fs",
                 mode, red.dim, A.shape[0], time.perf_counter() - t0)

    @property
    def dim(self) -> int:
        return self.red.dim

    def rhs(self, omega: np.ndarray) -> np.ndarray:
        nw = len(self._wp)
        om = omega.reshape(3, -1)[:, self._wp].reshape(3 * nw)
        return np.concatenate([self.P @ om, np.zeros(len(self.d_keep) + self.n_reg)])

    def solve(self, omega: VectorField, tol: float = 1e-8, max_refine: int = 6,
              check: bool = True) -> tuple[VectorField, SolveInfo]:
        d, g = self.domain, self.grid
        if check:
            check_compatibility(omega)
        b = self.rhs(omega.values)
        Atb = self.A.T @ b
        scale = max(np.linalg.norm(Atb), 1e-300)
        x = sla.cho_solve(self.chol, Atb, check_finite=False)
        nref = 0
        for nref in range(1, max_refine + 1):
            r = Atb - self.NE @ x
            if np.linalg.norm(r) <= 1e-13 * scale:
                break
            x += sla.cho_solve(self.chol, r, check_finite=False)
        ne_res = float(np.linalg.norm(Atb - self.NE @ x) / scale)
        if ne_res > tol:
            raise SolverDiverged(
                f"divcurl: normal-equation residual {ne_res:.3e} above target {tol:.1e}")
        u = (self.red.E @ x).reshape((3,) + g.shape)
        uf = VectorField(d, u)
        hc = inner(uf, self.harmonic.field)
        if hc:
            uf = uf - hc * self.harmonic.field
        ls = float(np.linalg.norm(self.A @ x - b) / max(np.linalg.norm(b), 1e-300))
        return uf, SolveInfo(ls, ne_res, nref, hc)


@functools.lru_cache(maxsize=4)
def solver_for(d: DomainSpec, mode: str = "odd") -> DivCurlSolver:
    return DivCurlSolver(d, mode)


def check_compatibility(omega: VectorField, div_tol: float = 1e-6) -> tuple[float, float]:
    """Relative divergence and net boundary flux of ``omega``.

    Raises IncompatibleData beyond ``div_tol``. Both are measured relative to
    the size of the radial derivative of ``omega`` (sup norm), since truncation
    error of ``div`` scales with it.
    """
    d = omega.domain
    g = grid_for(d)
    scale = max(float(np.abs(omega.values).max()), 1e-300)
    dv = divergence(omega).values
    interior = g.interior_mask()
    rel_div = float(np.abs(dv[interior]).max() / scale) if np.any(interior) else 0.0
    # net flux through the wall: sum over wall nodes of omega . grad s * J dtheta dz
    M = metric_for(d)
    flux_density = np.einsum("a...,a...->...", omega.values[:, -1], M.grad_s[:, M.pos][:, -1])
    flux = float(np.sum(flux_density * M.J[M.pos][-1]) * g.dtheta * g.dz)
    area = float(np.sum(M.J[M.pos][-1]) * g.dtheta * g.dz)
    rel_flux = abs(flux) / (scale * area)
    if rel_div > div_tol or rel_flux > div_tol:
        raise IncompatibleData(
            f"divcurl: omega is not compatible (relative div {rel_div:.3e}, "
            f"relative net flux {rel_flux:.3e}, threshold {div_tol:.1e})")
    return rel_div, rel_flux


def solve_divcurl(omega: VectorField, d: DomainSpec | None = None, h: HarmonicField | None = None,
                  mode: str = "odd", tol: float = 1e-8, check: bool = True) -> VectorField:
    """Tangent, divergence-free ``u`` with ``curl u = omega`` and no harmonic part."""
    d = d or omega.domain
    u, _ = solver_for(d, mode).solve(omega, tol=tol, check=check)
    if h is not None and h.field.domain is not d:
        hc = inner(u, h.field)
        u = u - hc * h.field
    return u
