"""Command-line entry point: ``rtlab <subcommand> [options]``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .discrete import Discretization
from .errors import RTLabError
from .experiments import (
    ExperimentConfig,
    certify_instability,
    error_scaling_experiment,
    escape_time_experiment,
    gronwall_property_check,
    mhd_threshold_experiment,
    setup_mode,
)
from .geometry import BOX, LAYER, Geometry
from .initial_data import build_initial_data
from .nonlinear_sim import FieldState, run
from .normal_modes import box_growth_rate, critical_field, max_over_wavenumbers

log = logging.getLogger("rtlab")


def _global(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML run configuration")
    p.add_argument("--out", type=Path, default=Path("rtlab-out"), help="output directory")
    p.add_argument("--threads", type=int, default=None, help="worker threads for independent runs")
    p.add_argument("-v", "--verbose", action="store_true")


def _physics(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", choices=["affine", "exponential", "tanh-step", "tabulated"])
    p.add_argument("--params", type=float, nargs="+", help="profile parameters")
    p.add_argument("--table", help="two-column CSV for a tabulated profile")
    p.add_argument("--height", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--g", type=float)
    p.add_argument("--lam", type=float)


def _grid(p: argparse.ArgumentParser) -> None:
    p.add_argument("--nx", type=int)
    p.add_argument("--nz", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--length", type=float, help="box width")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rtlab", description="Rayleigh-Taylor instability laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("growth", help="growth rate versus wavenumber (CSV)")
    _global(p), _physics(p)
    p.add_argument("--geometry", choices=[LAYER, BOX], default=LAYER)
    p.add_argument("--k", type=float, nargs="+", help="wavenumbers (layer)")
    p.add_argument("--M3", type=float, default=0.0)
    p.add_argument("--n-modes", type=int, default=48, help="vertical basis size")
    p.add_argument("--length", type=float)

    p = sub.add_parser("critical-field", help="critical vertical field and growth table")
    _global(p), _physics(p)
    p.add_argument("--k", type=float, nargs="+")
    p.add_argument("--M3-grid", type=float, nargs="+")
    p.add_argument("--n-modes", type=int, default=48)

    p = sub.add_parser("make-initial-data", help="corrected initial data and residual report")
    _global(p), _physics(p), _grid(p)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--raw", action="store_true", help="skip the corrector")

    p = sub.add_parser("simulate", help="time integration with an energy report")
    _global(p), _physics(p), _grid(p)
    p.add_argument("--mode", choices=["nonlinear", "linear", "linear-mhd"], default="nonlinear")
    p.add_argument("--T", type=float, required=True, help="final time")
    p.add_argument("--init", default="eigen", help="'eigen' or a make-initial-data output directory")
    p.add_argument("--delta", type=float, default=1e-4)
    p.add_argument("--M3", type=float, default=0.0)
    p.add_argument("--every", type=int, default=10, help="report cadence in steps")
    p.add_argument("--snapshots", action="store_true", help="write final fields")

    for name, hlp in (("escape", "escape-time scaling"), ("error-scaling", "nonlinear minus linear scaling"),
                      ("gronwall", "energy-inequality constant"), ("mhd-threshold", "MHD stabilization threshold"),
                      ("certify", "one-shot instability certificate")):
        p = sub.add_parser(name, help=hlp)
        _global(p), _physics(p), _grid(p)
        p.add_argument("--deltas", type=float, nargs="+")
        p.add_argument("--eps0", type=float)
    return ap


def _config(args) -> ExperimentConfig:
    data: dict = {}
    base = None
    if getattr(args, "config", None):
        data = io.load_config(args.config)
        base = str(Path(args.config).resolve().parent)
    cfg = ExperimentConfig.from_dict(data, base)
    over: dict = {}
    prof = dict(cfg.profile)
    if getattr(args, "family", None):
        prof = {"family": args.family, "params": list(args.params or []), "height": prof.get("height", 1.0)}
        if args.table:
            prof["csv"] = args.table
    elif getattr(args, "params", None):
        prof["params"] = list(args.params)
    if getattr(args, "height", None):
        prof["height"] = args.height
    over["profile"] = prof
    for key in ("mu", "g", "lam", "nx", "nz", "dt", "length", "eps0", "tol", "max_iter", "threads"):
        v = getattr(args, key, None)
        if v is not None:
            over[key] = v
    if getattr(args, "deltas", None):
        over["deltas"] = tuple(args.deltas)
    over["out"] = str(args.out)
    return dataclasses.replace(cfg, **over)


def cmd_growth(args, cfg: ExperimentConfig) -> dict:
    prof = cfg.make_profile()
    params = cfg.params(args.M3)
    if args.geometry == BOX:
        geom = Geometry(BOX, args.length or cfg.length, prof.height, cfg.spectral_n, cfg.spectral_n)
        m = box_growth_rate(prof, params, geom)
        rows = [{"k": "", "Lambda": m.rate, "alpha_at_0": m.alpha0, "iterations": m.iterations,
                 "converged": m.converged}]
    else:
        geom = Geometry(LAYER, args.length or 1.0, prof.height, nz=args.n_modes)
        ks = sorted(args.k) if args.k else list(cfg.k_grid)
        res = max_over_wavenumbers(ks, prof, params, geom, M3=args.M3)
        rows = res["table"]
        io.write_json(args.out / "growth_summary.json", {"Lambda_star": res["Lambda_star"], "k_star": res["k_star"]})
    io.write_csv(args.out / "growth.csv", rows, ["k", "Lambda", "alpha_at_0", "iterations", "converged"])
    return {"rows": len(rows)}


def cmd_critical(args, cfg: ExperimentConfig) -> dict:
    prof = cfg.make_profile()
    geom = Geometry(LAYER, 1.0, prof.height, nz=args.n_modes)
    ks = sorted(args.k) if args.k else list(cfg.k_grid)
    rep = critical_field(prof, cfg.lam, ks, geom, cfg.params(), M3_grid=args.M3_grid)
    io.write_json(args.out / "critical_field.json", {"m_star": rep.m_star, "k_star": rep.k_star,
                                                     "threshold_field": rep.threshold_field, "per_k": rep.per_k})
    if rep.table:
        io.write_csv(args.out / "threshold_table.csv", rep.table)
    return {"m_star": rep.m_star}


def _write_state(directory: Path, disc: Discretization, rho, u, q, t: float, prefix: str = "") -> None:
    g = disc.grid
    meta = {"nx": g.nx, "nz": g.nz, "dx": g.dx, "dz": g.dz, "length": g.length, "height": g.height,
            "periodic": g.periodic, "time": t}
    uf, wf = g.unpack(np.asarray(u, dtype=float))
    io.write_field(directory, prefix + "rho", np.asarray(rho, dtype=float).reshape(g.nx, g.nz),
                   {**meta, "location": "cell centers"})
    io.write_field(directory, prefix + "u", uf, {**meta, "location": "x-faces"})
    io.write_field(directory, prefix + "w", wf, {**meta, "location": "z-faces"})
    io.write_field(directory, prefix + "q", np.asarray(q, dtype=float).reshape(g.nx, g.nz),
                   {**meta, "location": "cell centers"})


def cmd_initial(args, cfg: ExperimentConfig) -> dict:
    setup = setup_mode(cfg)
    b = build_initial_data(args.delta, setup.eigen, setup.disc, cfg.tol, cfg.max_iter, correct=not args.raw)
    _write_state(args.out, setup.disc, b.rho0, b.u0, b.q0, 0.0)
    io.write_json(args.out / "residuals.json", {"delta": b.delta, "iterations": b.iterations, "corrected": b.corrected,
                                                "Lambda_grid": setup.eigen.rate, "residuals": b.residuals,
                                                "iterates": b.iterates_log})
    return b.residuals


def _load_state(directory: Path, disc: Discretization) -> FieldState:
    g = disc.grid
    rho, meta = io.read_field(directory, "rho")
    if int(meta["nx"]) != g.nx or int(meta["nz"]) != g.nz:
        raise ValueError("initial data grid does not match the simulation grid")
    u, _ = io.read_field(directory, "u")
    w, _ = io.read_field(directory, "w")
    q, _ = io.read_field(directory, "q")
    return FieldState(0.0, rho.ravel(), g.pack(u, w), q.ravel())


def cmd_simulate(args, cfg: ExperimentConfig) -> dict:
    setup = setup_mode(cfg)
    disc = setup.disc
    if args.init == "eigen":
        if args.mode == "nonlinear":
            s0 = FieldState.from_bundle(build_initial_data(args.delta, setup.eigen, disc, cfg.tol, cfg.max_iter))
        else:
            e = setup.eigen
            s0 = FieldState(0.0, args.delta * e.rho, args.delta * e.u, args.delta * e.q)
    else:
        s0 = _load_state(Path(args.init), disc)
    if args.mode == "linear-mhd":
        disc = Discretization(disc.grid, disc.prof, dataclasses.replace(disc.params, M3=args.M3))
        s0.N = args.M3 * (disc.grid.Z @ s0.u) / setup.eigen.rate
    final, rep = run(disc, s0, args.T, cfg.dt, args.mode, every=args.every, M3=args.M3)
    io.write_csv(args.out / "energy.csv", rep.rows, rep.columns)
    if args.snapshots:
        _write_state(args.out / "snapshots", disc, final.rho, final.u, final.q, final.t, prefix="final_")
    return {"samples": len(rep), "t_final": final.t}


def cmd_escape(args, cfg):
    fit = escape_time_experiment(cfg)
    io.write_csv(args.out / "escape.csv", fit.extra["rows"])
    io.write_json(args.out / "escape.json", fit.as_dict())
    return {"slope": fit.slope, "target": fit.target, "verdict": fit.verdict}


def cmd_error(args, cfg):
    rep = error_scaling_experiment(cfg)
    io.write_csv(args.out / "error_scaling.csv", rep["samples"])
    io.write_json(args.out / "error_scaling.json", {
        "fits": {k: f.as_dict() for k, f in rep["fits"].items()},
        "growth_fits": {k: f.as_dict() for k, f in rep["growth_fits"].items()},
        "bound_constant": {str(k): v for k, v in rep["bound_constant"].items()},
        "Lambda_grid": rep["Lambda_grid"], "verdict": rep["verdict"]})
    return {k: f.slope for k, f in rep["fits"].items()}


def cmd_gronwall(args, cfg):
    rep = gronwall_property_check(cfg)
    io.write_json(args.out / "gronwall.json", rep)
    return rep


def cmd_mhd(args, cfg):
    rep = mhd_threshold_experiment(cfg)
    io.write_csv(args.out / "mhd_threshold.csv", rep["rows"])
    io.write_json(args.out / "mhd_threshold.json", {k: v for k, v in rep.items() if k != "rows"})
    return {"gap": rep["relative_gap"], "verdict": rep["verdict"]}


def cmd_certify(args, cfg):
    cert = certify_instability(cfg)
    io.write_json(args.out / "certificate.json", cert)
    return {"verdict": cert["verdict"]}


COMMANDS = {
    "growth": cmd_growth, "critical-field": cmd_critical, "make-initial-data": cmd_initial,
    "simulate": cmd_simulate, "escape": cmd_escape, "error-scaling": cmd_error, "gronwall": cmd_gronwall,
    "mhd-threshold": cmd_mhd, "certify": cmd_certify,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _config(args)
        args.out.mkdir(parents=True, exist_ok=True)
        summary = COMMANDS[args.command](args, cfg)
    except (RTLabError, ValueError, OSError) as exc:
        print(f"rtlab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    for k, v in summary.items():
        print(f"{k}: {v}")
    if args.command == "certify" and summary.get("verdict") != "PASS":
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
