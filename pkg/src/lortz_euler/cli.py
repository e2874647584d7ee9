"""Command-line interface.

Exit codes: 0 success, 1 physics failure (divergence, non-convergence,
out-of-range periods, residuals above threshold), 2 usage or configuration
error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import __version__
from .base_state import BaseState
from .clebsch import clebsch_step
from .diagnostics import full_report, theta_mode_energy
from .errors import ConfigError, HashMismatch, LortzError, PeriodOutOfRange, VersionMismatch
from .fieldline import mirror_residual, random_seeds, trace_orbit
from .fileio import (RunFile, export_csv, export_vtk, load_field, load_runfile, save_field,
                     write_history_csv, write_json)
from .iteration import ConvergenceReport, contraction_vs_m, run

log = logging.getLogger("lortz_euler")

EXIT_OK, EXIT_PHYSICS, EXIT_USAGE = 0, 1, 2


def _threads(n):
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits
    # asking OpenBLAS for more threads than cores can crash it
    return threadpool_limits(limits=max(1, min(int(n), os.cpu_count() or 1)))


def _outdir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _emit(**kv):
    """One ``key=value`` line per quantity on stdout (the delimited summary)."""
    for k, v in kv.items():
        if isinstance(v, float):
            v = f"{v:.6e}"
        print(f"{k}={v}")


def _save_solution(out: Path, u, cd):
    save_field(out / "u.lfld", u)
    if cd is not None:
        save_field(out / "H.lfld", cd.H)
        save_field(out / "T.lfld", cd.T)
        save_field(out / "tau.lfld", cd.tau)


def _figures(out: Path, report: ConvergenceReport | None, u, cd) -> list[str]:
    from . import plotting
    figs = []
    if report is not None and report.deltas:
        figs.append(plotting.plot_convergence(report, out / "convergence.png"))
    if cd is not None:
        figs.append(plotting.plot_section(cd.H, out / "H_section.png", label="Bernoulli head H"))
        figs.append(plotting.plot_section(cd.T, out / "T_section.png", label="period T"))
    if u is not None:
        figs.append(plotting.plot_mode_energy(theta_mode_energy(u), u.domain.m,
                                              out / "mode_energy.png"))
    return [str(f.name) for f in figs]


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    rf: RunFile = load_runfile(args.config)
    seed = args.seed if args.seed is not None else rf.seed
    out = _outdir(args.out or rf.directory)
    write_json(out / "config.json", rf.to_dict() | {"seed": seed})
    cfg = rf.config
    status, err, sol, hist = "converged", None, None, None
    t0 = time.perf_counter()
    try:
        sol = run(cfg, raise_on_failure=False)
        hist = sol.report
        if not hist.converged:
            status = "not_converged"
    except ConfigError:
        raise
    except PeriodOutOfRange as exc:
        status, err = "PeriodOutOfRange", f"{exc} (period={exc.period!r})"
        hist = getattr(exc, "history", None)
    except LortzError as exc:
        status, err = type(exc).__name__, str(exc)
        hist = getattr(exc, "history", None)
    elapsed = time.perf_counter() - t0

    report = {"version": __version__, "status": status, "error": err, "seconds": elapsed,
              "seed": seed, "config": rf.to_dict()}
    if hist is not None:
        report["convergence"] = hist.to_dict()
        write_history_csv(out / "convergence.csv", hist)
    exit_code = EXIT_OK if status == "converged" else EXIT_PHYSICS
    if sol is not None:
        _save_solution(out, sol.u, sol.clebsch)
        diag = full_report(sol.u, sol.clebsch, base=BaseState(cfg.profile),
                           n_orbits=rf.diagnostics.n_orbits, seed=seed)
        report["diagnostics"] = diag.to_dict()
        th = rf.diagnostics
        over = {
            "euler_residual_rel": diag.euler_residual_rel > th.euler_residual_max,
            "bernoulli_orbit_variation": diag.bernoulli_orbit_variation > th.bernoulli_max,
            "parity_residual": diag.parity_residual > th.parity_max,
        }
        report["thresholds_exceeded"] = [k for k, v in over.items() if v]
        if report["thresholds_exceeded"] and exit_code == EXIT_OK:
            exit_code = EXIT_PHYSICS
        report["figures"] = _figures(out, hist, sol.u, sol.clebsch)
    elif hist is not None:
        report["figures"] = _figures(out, hist, None, None)
    write_json(out / "report.json", report)
    _emit(status=status, steps=(hist.iterations if hist is not None else 0),
          last_delta=(float(hist.deltas[-1]) if hist is not None and hist.deltas else float("nan")),
          seconds=elapsed, report=str(out / "report.json"))
    if err:
        print(f"error: {err}", file=sys.stderr)
    return exit_code


def _parse_seeds(text: str) -> np.ndarray:
    pts = [[float(c) for c in item.split(",")] for item in text.split(";") if item.strip()]
    arr = np.asarray(pts, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ConfigError("cli_io: --points expects 'x,y,z;x,y,z;...'")
    return arr


def cmd_trace(args) -> int:
    u = load_field(args.field)
    d = u.domain
    if args.points:
        seeds = _parse_seeds(args.points)
    else:
        seeds = random_seeds(d, args.n, np.random.default_rng(args.seed or 0))
    orbits, rows = [], []
    print("x,y,z,period,closure_error,mirror_residual")
    for x0 in seeds:
        orb = trace_orbit(u, x0, base=BaseState())
        orbits.append(orb)
        row = [*x0, orb.period, orb.closure_error, mirror_residual(orb)]
        rows.append(row)
        print(",".join(f"{v:.12g}" for v in row))
    if args.out:
        from .plotting import plot_orbits
        out = _outdir(args.out)
        plot_orbits(orbits, d, out / "orbits.png")
        np.savetxt(out / "orbits.csv", np.asarray(rows), delimiter=",",
                   header="x,y,z,period,closure_error,mirror_residual", comments="")
    return EXIT_OK


def cmd_verify(args) -> int:
    src = Path(args.solution)
    u = load_field(src / "u.lfld" if src.is_dir() else src)
    cfg_path = (src / "config.json") if src.is_dir() else None
    rf = load_runfile(cfg_path) if cfg_path is not None and cfg_path.exists() else RunFile()
    if rf.config.domain.digest() != u.domain.digest():
        rf = RunFile(rf.config.__class__(**{**rf.config.__dict__, "domain": u.domain}),
                     rf.diagnostics, rf.directory, rf.snapshot_every, rf.seed)
    base = BaseState(rf.config.profile)
    cd = clebsch_step(u, base, substeps=rf.config.substeps, period_slack=rf.config.period_slack)
    seed = args.seed if args.seed is not None else rf.seed
    diag = full_report(u, cd, base=base, n_orbits=args.n_orbits or rf.diagnostics.n_orbits, seed=seed)
    th = rf.diagnostics
    failed = [k for k, bad in {
        "euler_residual_rel": diag.euler_residual_rel > th.euler_residual_max,
        "bernoulli_orbit_variation": diag.bernoulli_orbit_variation > th.bernoulli_max,
        "parity_residual": diag.parity_residual > th.parity_max,
        "fibration_monotone": not diag.fibration_monotone,
    }.items() if bad]
    rep = diag.to_dict() | {"failed": failed, "seed": seed}
    if args.out:
        out = _outdir(args.out)
        write_json(out / "verify.json", rep)
        _figures(out, None, u, cd)
    _emit(**{k: v for k, v in diag.to_dict().items() if k != "notes"})
    _emit(failed=",".join(failed) or "none")
    return EXIT_PHYSICS if failed else EXIT_OK


def cmd_sweep(args) -> int:
    rf = load_runfile(args.config)
    ms = [int(m) for m in args.m]
    out = _outdir(args.out or rf.directory)
    rep = contraction_vs_m(rf.config, ms)
    payload = {"m": ms, "rho": rep.rho, "rho_times_m": rep.rho_times_m, "errors": rep.errors,
               "histories": {m: r.to_dict() for m, r in rep.reports.items()}}
    if 8 in rep.rho and 16 in rep.rho:
        payload["rho16_over_rho8"] = rep.ratio(16, 8)
    write_json(out / "contraction.json", payload)
    from .plotting import plot_contraction
    plot_contraction(rep, out / "contraction.png")
    for m in ms:
        _emit(**{f"rho_{m}": rep.rho.get(m, float("nan"))})
    return EXIT_OK if not rep.errors else EXIT_PHYSICS


def cmd_export(args) -> int:
    src = Path(args.source)
    u = load_field(src / "u.lfld" if src.is_dir() else src)
    scalars = {}
    if src.is_dir():
        for key in ("H", "T"):
            p = src / f"{key}.lfld"
            if p.exists():
                scalars[key] = load_field(p, u.domain)
    out = Path(args.out) if args.out else (src if src.is_dir() else src.parent) / f"solution.{args.format}"
    if args.format == "vtk":
        export_vtk(out, u, scalars)
    else:
        export_csv(out, u, scalars)
    _emit(written=str(out))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lortz-euler",
                                description="Steady Euler flows by the Lortz iteration.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--threads", type=int, default=None, help="BLAS/LAPACK thread limit")
    p.add_argument("--seed", type=int, default=None, help="seed for randomized diagnostics")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the iteration from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("trace", help="trace orbits of a saved velocity field")
    t.add_argument("field")
    t.add_argument("--points", default=None, help="'x,y,z;x,y,z;...'")
    t.add_argument("--n", type=int, default=10)
    t.add_argument("--out", default=None)
    t.set_defaults(func=cmd_trace)

    v = sub.add_parser("verify", help="diagnostics on a saved solution")
    v.add_argument("solution", help="run directory or u.lfld")
    v.add_argument("--n-orbits", type=int, default=None)
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep-m", help="contraction ratio versus symmetry order")
    s.add_argument("--config", required=True)
    s.add_argument("--m", nargs="+", default=["4", "8", "16"])
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_sweep)

    e = sub.add_parser("export", help="convert saved fields to VTK or CSV")
    e.add_argument("source", help="run directory or a field file")
    e.add_argument("--format", choices=("vtk", "csv"), default="vtk")
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        with _threads(args.threads):
            return args.func(args)
    except (ConfigError, VersionMismatch, HashMismatch, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LortzError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PHYSICS


if __name__ == "__main__":
    sys.exit(main())
