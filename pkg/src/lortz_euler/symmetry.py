"""Discrete symmetry group of the grid: rotations by 2*pi/m and the mirror
R_Pi : x2 -> -x2 composed with them.

Field values live on the angular grid ``theta_j = j * dtheta``; each group
element acts on the angular index by ``j -> sigma * j + k * n_theta/m`` and
on Cartesian components by an orthogonal matrix. The ``chi`` character
attached to reflections selects odd (-1) or even (+1) fields.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


MIRROR = np.diag([1.0, -1.0, 1.0])


@dataclass(frozen=True)
class Element:
    shift: int          # angular index shift after the optional mirror
    mirror: bool
    matrix: np.ndarray  # Cartesian action

    def index_map(self, n_theta: int) -> np.ndarray:
        j = np.arange(n_theta)
        src = -j if self.mirror else j
        return (src + self.shift) % n_theta


class Group:
    """Cyclic (``dihedral=False``) or dihedral group of order m or 2m."""

    def __init__(self, n_theta: int, m: int, dihedral: bool):
        if n_theta % m:
            raise ConfigError(f"symmetry: n_theta={n_theta} is not a multiple of m={m}")
        if dihedral and n_theta % (2 * m):
            raise ConfigError(f"symmetry: n_theta={n_theta} is not a multiple of 2m={2 * m}")
        self.n_theta, self.m, self.dihedral = n_theta, m, dihedral
        step = n_theta // m
        els = []
        for k in range(m):
            rot = rotation_matrix(2 * np.pi * k / m)
            els.append(Element(k * step, False, rot))
            if dihedral:
                els.append(Element(k * step, True, rot @ MIRROR))
        self.elements = els

    @property
    def order(self) -> int:
        return len(self.elements)

    def wedge(self) -> np.ndarray:
        """Angular indices of a fundamental domain (closed at mirror planes)."""
        if self.dihedral:
            return np.arange(self.n_theta // (2 * self.m) + 1)
        return np.arange(self.n_theta // self.m)

    def chi(self, el: Element, reflect_sign: int) -> float:
        return float(reflect_sign) if el.mirror else 1.0

    def stabilizer(self, j: int) -> list[Element]:
        return [el for el in self.elements if el.index_map(self.n_theta)[j] == j]

    def invariant_basis(self, j: int, reflect_sign: int, kind: str = "vector",
                        normal: np.ndarray | None = None) -> np.ndarray:
        """Orthonormal basis (columns) of values at angular index ``j`` that are
        fixed by the stabilizer, optionally restricted to ``normal``-perp.

        The stabilizer of an off-axis point does not depend on ``s`` or ``z``.
        """
        stab = self.stabilizer(j)
        if kind == "scalar":
            ok = all(self.chi(el, reflect_sign) == 1.0 for el in stab)
            return np.ones((1, 1)) if ok else np.zeros((1, 0))
        proj = sum(self.chi(el, reflect_sign) * el.matrix for el in stab) / len(stab)
        rows = [np.eye(3) - proj]
        if normal is not None:
            rows.append(np.asarray(normal, dtype=float)[None, :])
        from scipy.linalg import null_space
        return null_space(np.vstack(rows), rcond=1e-10)


@functools.lru_cache(maxsize=32)
def group_for(n_theta: int, m: int, dihedral: bool) -> Group:
    return Group(n_theta, m, dihedral)


def act(v: np.ndarray, el: Element, reflect_sign: int, vector: bool) -> np.ndarray:
    """Pull-back ``(g v)(x) = chi * O v(g^-1 x)`` on grid arrays.

    The angular axis is ``-2``; vector arrays carry components on axis 0.
    """
    n = v.shape[-2]
    idx = el.index_map(n)
    out = np.empty_like(v)
    out[..., idx, :] = v
    chi = float(reflect_sign) if el.mirror else 1.0
    if vector:
        out = np.einsum("ab,b...->a...", el.matrix, out)
    return chi * out


def project(v: np.ndarray, group: Group, reflect_sign: int, vector: bool) -> np.ndarray:
    """Average over the group (orthogonal projector onto invariant fields)."""
    acc = np.zeros_like(v, dtype=float)
    for el in group.elements:
        acc += act(v, el, reflect_sign, vector)
    return acc / group.order


def expand(wedge_vals: np.ndarray, group: Group, reflect_sign: int, vector: bool) -> np.ndarray:
    """Fill the full angular grid from values on :meth:`Group.wedge`.

    ``wedge_vals`` has the wedge on axis ``-2``. Input is assumed invariant
    under the stabilizers of its points.
    """
    n = group.n_theta
    w = group.wedge()
    shape = wedge_vals.shape[:-2] + (n,) + wedge_vals.shape[-1:]
    out = np.empty(shape, dtype=float)
    for el in group.elements:
        tgt = el.index_map(n)[w]
        chi = float(reflect_sign) if el.mirror else 1.0
        vals = wedge_vals
        if vector:
            vals = np.einsum("ab,b...->a...", el.matrix, vals)
        out[..., tgt, :] = chi * vals
    return out
