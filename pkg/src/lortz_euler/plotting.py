"""Figures for run reports. Everything renders to files (Agg backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .geometry import grid_for  # noqa: E402

plt.rcParams.update({
    "font.size": 10,
    "axes.titlesize": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 9,
    "figure.dpi": 120,
    "savefig.bbox": "tight",
})


def _closed(a):
    """Append the first angle so pcolor/contour wrap around the axis."""
    return np.concatenate([a, a[:, :1]], axis=1)


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_convergence(report, path, title: str = "") -> Path:
    d = np.asarray(report.deltas, dtype=float)
    n = np.arange(1, d.size + 1)
    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    ax.semilogy(n, d, "o-", ms=3, lw=1, label=r"$\|u_N-u_{N-1}\|_\infty/\|u_*\|_\infty$")
    if len(report.deltas_l2):
        ax.semilogy(n, np.asarray(report.deltas_l2), "s--", ms=2.5, lw=0.8, label="L2")
    if np.isfinite(report.fit_slope):
        ax.semilogy(n, np.exp(report.fit_slope * n) * d[0] / np.exp(report.fit_slope),
                    ":", color="k", lw=0.8,
                    label=f"fit slope {report.fit_slope:.3f}, $R^2$={report.fit_r2:.3f}")
    ax.set_xlabel("iteration $N$")
    ax.set_ylabel("relative step size")
    ax.set_title(title or "Lortz iteration")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_section(field, path, k_z: int = 0, label: str = "", levels: int = 24) -> Path:
    """Filled contours of a scalar on the cross-section ``z = z[k_z]``."""
    g = grid_for(field.domain)
    x = _closed(g.points[0][:, :, k_z])
    y = _closed(g.points[1][:, :, k_z])
    v = _closed(np.asarray(field.values)[:, :, k_z])
    fig, ax = plt.subplots(figsize=(4.2, 3.8))
    cs = ax.contourf(x, y, v, levels=levels, cmap="viridis")
    ax.contour(x, y, v, levels=cs.levels[::3], colors="w", linewidths=0.4)
    ax.plot(x[-1], y[-1], "k-", lw=0.8)
    ax.set_aspect("equal")
    ax.set_xlabel("$x_1$")
    ax.set_ylabel("$x_2$")
    ax.set_title(f"{label or field.name}, $z$ = {g.z[k_z]:.3g}")
    fig.colorbar(cs, ax=ax, shrink=0.85)
    return _save(fig, path)


def plot_orbits(orbits, domain, path, k_z: int = 0) -> Path:
    """Top view of traced orbits over the wall outline at ``z[k_z]``."""
    g = grid_for(domain)
    fig, ax = plt.subplots(figsize=(4.2, 4.0))
    for orb in orbits:
        ax.plot(orb.points[:, 0], orb.points[:, 1], lw=0.6)
    ax.plot(_closed(g.points[0])[-1, :, k_z], _closed(g.points[1])[-1, :, k_z], "k-", lw=0.8)
    ax.set_aspect("equal")
    ax.set_xlabel("$x_1$")
    ax.set_ylabel("$x_2$")
    ax.set_title(f"{len(orbits)} orbits")
    return _save(fig, path)


def plot_contraction(report, path) -> Path:
    ms = [m for m in report.m_list if m in report.rho]
    rho = np.array([report.rho[m] for m in ms])
    fig, ax = plt.subplots(1, 2, figsize=(7.0, 3.0))
    ax[0].loglog(ms, rho, "o-", label=r"$\rho(m)$")
    if len(ms):
        ref = rho[0] * ms[0] / np.asarray(ms, dtype=float)
        ax[0].loglog(ms, ref, "k:", lw=0.8, label=r"$\propto 1/m$")
    ax[0].set_xlabel("$m$")
    ax[0].set_ylabel("asymptotic ratio")
    ax[0].legend(frameon=False)
    ax[1].plot(ms, rho * np.asarray(ms), "s-")
    ax[1].set_xlabel("$m$")
    ax[1].set_ylabel(r"$\rho(m)\,m$")
    fig.tight_layout()
    return _save(fig, path)


def plot_mode_energy(energy, m: int, path) -> Path:
    e = np.asarray(energy, dtype=float)
    k = np.arange(e.size)
    fig, ax = plt.subplots(figsize=(4.8, 3.0))
    ax.semilogy(k, np.maximum(e, 1e-300), ".", color="0.6", label="all modes")
    sel = k % m == 0
    ax.semilogy(k[sel], np.maximum(e[sel], 1e-300), "o", label=f"multiples of m={m}")
    ax.set_xlabel(r"$\theta$ wavenumber")
    ax.set_ylabel("energy")
    ax.set_ylim(bottom=max(e[e > 0].min() if np.any(e > 0) else 1e-30, 1e-30))
    ax.legend(frameon=False)
    return _save(fig, path)
