"""Command-line front end: ``unoriented-ag <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 self-test failure.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .analysis import analyze, loglaw_fit
from .config import ConfigError, RunConfig, load_config
from .energy import ModelError, ModelSpec, energy_general, energy_unoriented, structure_function
from .entropies import (entropy_production, eval_entropy, eval_entropy_dtheta, jin_kohn, parse_entropy, qn_closed_form,
                        qn_density, Qk_closed_form, Qk_density, trig_entropy, entropy_from_lambda,
                        production_oracle_lambda, wedge_identity_check, dirac_test)
from .grid import Grid2D, GridError, dump_csv, rank_one_tensor
from .io import dumps, write_json, write_ppm
from .minimizer import BoundaryCondition, MinimizeConfig, MinimizeError, Stage, minimize
from .ops import SolverError, delta_h, rot, rot_tensor
from .scenarios import SCENARIOS, make_scenario

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_SELFTEST = 0, 2, 3, 4


# -- building blocks from a config ---------------------------------------------------
def build_grid(cfg: RunConfig) -> Grid2D:
    g = cfg.grid
    n = g["n"]
    kind = g.get("mask", "square")
    if kind == "square":
        return Grid2D.square(n, g.get("lo", -1.0), g.get("hi", 1.0), g.get("periodic", False))
    if kind == "disk":
        return Grid2D.disk(n, g.get("radius", 1.0))
    return Grid2D.annulus(n, g.get("inner", 0.2), g.get("radius", 1.0))


def build_field(cfg: RunConfig, grid: Grid2D):
    sc = dict(cfg.scenario)
    name = sc.pop("name", "vortex")
    noise = sc.pop("noise", 0.0)
    if name in ("random", "smooth"):
        sc.setdefault("seed", cfg.seed)
    if name == "from_file":
        v, grid = make_scenario(name, grid, **sc)
    else:
        v = make_scenario(name, grid, **sc)
    if noise:
        rng = np.random.default_rng(cfg.seed)
        v = v * (1 + noise * (rng.standard_normal(v.shape) + 1j * rng.standard_normal(v.shape)))
        v = np.where(grid.mask, v, 0.0)
    return v, grid


def build_schedule(cfg: RunConfig) -> list[Stage]:
    m = cfg.model
    kappa = m.get("kappa", 0.1)
    stages = []
    for e in m["eps"]:
        lam1 = m["lam1"] if "lam1" in m else kappa / e
        stages.append(Stage(eps=e, lam0=m.get("lam0", 0.0), lam1=lam1, max_iter=cfg.minimize.get("max_iter", 200)))
    return stages


def build_model(cfg: RunConfig, stage: Stage) -> ModelSpec:
    m = cfg.model
    return ModelSpec(eps=stage.eps, lam0=stage.lam0, lam1=stage.lam1, kappa=m.get("kappa", 0.1),
                     kappa_s=m.get("kappa_s", 1e-6), hard=m.get("hard", False)).validate()


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "scenario", None):
        cfg.scenario = {**({} if cfg.scenario.get("name") != args.scenario else cfg.scenario), "name": args.scenario}
    if getattr(args, "grid", None):
        cfg.grid["n"] = args.grid
    if getattr(args, "out", None):
        cfg.output["dir"] = args.out
    if getattr(args, "eps", None) is not None:
        cfg.model["eps"] = (args.eps,)
    return cfg


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    return _apply_overrides(cfg, args)


def _emit(obj, cfg: RunConfig, name: str):
    text = dumps(obj)
    print(text)
    out = cfg.output.get("dir")
    if out:
        os.makedirs(out, exist_ok=True)
        write_json(os.path.join(out, name), obj)


# -- self-test ---------------------------------------------------------------------------
def selftest_checks(seed: int = 0):
    """Yield ``(name, value, tolerance)``; a check passes when ``value <= tolerance``."""
    rng = np.random.default_rng(seed)
    z = np.exp(2j * np.pi * rng.random(200))
    w = np.exp(2j * np.pi * rng.random(200))
    yield "wedge identities n=2..20", max(max(wedge_identity_check(n, z, w).values()) for n in range(2, 21)), 1e-12
    th = 2 * np.pi * rng.random(200)
    e = np.exp(1j * th)
    norm_err = max(float(np.max(np.abs(np.linalg.norm(eval_entropy(trig_entropy(n), e), axis=0)
                                       - 2 * np.sqrt(n * n + 1)))) for n in range(-20, 21))
    yield "entropy norm 2 sqrt(n^2+1)", norm_err, 1e-10
    d_err = max(float(np.max(np.abs(np.linalg.norm(eval_entropy_dtheta(trig_entropy(n), th), axis=0)
                                    - 2 * abs(n * n - 1)))) for n in range(-20, 21))
    yield "derivative norm 2|n^2-1|", d_err, 1e-10
    jk = max(float(np.max(np.abs(eval_entropy(trig_entropy(2), e) - 6 * jin_kohn(2, e) - 6j * jin_kohn(1, e)))),
             float(np.max(np.abs(eval_entropy(trig_entropy(-2), e) + 6 * jin_kohn(2, e) - 6j * jin_kohn(1, e)))))
    yield "Jin-Kohn relation", jk, 1e-12
    ups = max(float(np.max(np.abs(eval_entropy(trig_entropy(n), e) - eval_entropy(entropy_from_lambda({n: 2j}), e))))
              for n in range(-9, 10))
    yield "trig entropy = lambda entropy", ups, 1e-13
    res = []
    for n in (24, 48):
        g = Grid2D.square(n, 0.0, 1.0)
        x, y = g.coords()
        u = (1 + 0.3 * x) * np.exp(1j * (x * y + 0.5 * y))
        # curl u = d1 b - d2 a for u = (a, b), by hand
        theta = x * y + 0.5 * y
        amp = 1 + 0.3 * x
        a, b = amp * np.cos(theta), amp * np.sin(theta)
        d1b = 0.3 * np.sin(theta) + amp * np.cos(theta) * y
        d2a = -amp * np.sin(theta) * (x + 0.5)
        err = np.abs(rot(u ** 2, g) - (d1b - d2a) * np.stack([a, b]))[:, g.interior]
        res.append(float(err.max()))
    yield "rot(u^2) = (curl u) u, order", 4.0 - res[0] / res[1] if res[1] > 0 else 0.0, 0.5
    g = Grid2D.square(24, 0.0, 1.0)
    x, y = g.coords()
    u = (1 + 0.3 * x) * np.exp(1j * (x * y + 0.5 * y))
    yield "rot vs tensor form", float(np.max(np.abs(rot(u ** 2, g) - rot_tensor(rank_one_tensor(u), g)))), 1e-10
    v = np.exp(2j * np.pi * rng.random((32, 32)))
    g = Grid2D.square(32)
    qerr = 0.0
    for n in range(3, 34, 2):
        q, ok = qn_density(v, g, (1, 2), n)
        d, _ = delta_h(v, g, (1, 2))
        qerr = max(qerr, float(np.max(np.abs(q - qn_closed_form(d, n))[ok])))
    for k in range(4):
        Q, ok = Qk_density(v, g, (2, -1), k)
        d, _ = delta_h(v, g, (2, -1))
        qerr = max(qerr, float(np.max(np.abs(Q - Qk_closed_form(d, k))[ok])))
    yield "q_n / Q_k closed forms", qerr, 1e-11
    yield "Dirac test on a point mass", dirac_test(np.full(50, np.exp(0.3j))).deficit, 1e-15


def cmd_selftest(args) -> int:
    ok = True
    print(f"{'check':40s} {'value':>12s} {'tol':>10s}  result")
    for name, val, tol in selftest_checks(args.seed or 0):
        good = bool(np.isfinite(val) and val <= tol)
        ok &= good
        print(f"{name:40s} {val:12.3e} {tol:10.1e}  {'PASS' if good else 'FAIL'}")
    return EXIT_OK if ok else EXIT_SELFTEST


# -- subcommands --------------------------------------------------------------------------------
def cmd_energy(args) -> int:
    cfg = _config_from_args(args)
    grid = build_grid(cfg)
    v, grid = build_field(cfg, grid)
    stage = build_schedule(cfg)[0]
    out = {"h": grid.h, "eps": stage.eps,
           "unoriented": energy_unoriented(v, grid, stage.eps).to_dict()}
    if not cfg.model.get("hard", False):
        model = build_model(cfg, stage)
        out["relaxed"] = energy_general(v, grid, model).to_dict()
        out["lam0"], out["lam1"], out["kappa_s"] = model.lam0, model.lam1, model.kappa_s
    _emit(out, cfg, "energy.json")
    return EXIT_OK


def cmd_entropy(args) -> int:
    cfg = _config_from_args(args)
    grid = build_grid(cfg)
    v, grid = build_field(cfg, grid)
    specs = [parse_entropy(args.entropy)] if args.entropy else list(cfg.entropies())
    out = {"h": grid.h, "mode": args.mode, "entropies": []}
    for spec in specs:
        mu = entropy_production(spec, v, grid, args.mode)
        m = mu.mass()
        out["entropies"].append({"entropy": str(spec), "tv": mu.tv(), "mass": [float(np.real(m)), float(np.imag(m))],
                                 "max_abs": mu.max_abs()})
    _emit(out, cfg, "entropy.json")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _config_from_args(args)
    grid = build_grid(cfg)
    v, grid = build_field(cfg, grid)
    reports = analyze(v, grid, cfg.analysis.get("min_sep"), cfg.scenario.get("r_core"))
    out = {"h": grid.h, "singularities": [r.to_dict() for r in reports]}
    _emit(out, cfg, "report.json")
    return EXIT_OK


def cmd_structure(args) -> int:
    cfg = _config_from_args(args)
    grid = build_grid(cfg)
    v, grid = build_field(cfg, grid)
    x, y = grid.coords()
    c = cfg.scenario.get("center", (0.0, 0.0))
    region = grid.mask & ((x - c[0]) ** 2 + (y - c[1]) ** 2 <= args.radius ** 2)
    table = structure_function(v, grid, region, cfg.analysis["steps"])
    out = {"h": grid.h, "region_radius": args.radius, "table": [list(r) for r in table]}
    try:
        out["fit"] = loglaw_fit(table).to_dict()
    except ValueError as exc:
        out["fit_error"] = str(exc)
    _emit(out, cfg, "structure.json")
    return EXIT_OK


def cmd_dump(args) -> int:
    cfg = _config_from_args(args)
    grid = build_grid(cfg)
    v, grid = build_field(cfg, grid)
    out = cfg.output.get("dir") or "."
    os.makedirs(out, exist_ok=True)
    base = cfg.scenario.get("name", "field")
    dump_csv(os.path.join(out, f"{base}.csv"), v, grid)
    write_ppm(os.path.join(out, f"{base}.ppm"), v, grid)
    print(os.path.join(out, f"{base}.csv"))
    return EXIT_OK


def cmd_minimize(args) -> int:
    cfg = _config_from_args(args)
    grid = build_grid(cfg)
    trace, grid = build_field(cfg, grid)
    stages = build_schedule(cfg)
    model = build_model(cfg, stages[0])
    mz = cfg.minimize
    bc_kind = mz.get("bc", "dirichlet")
    if bc_kind == "dirichlet":
        tr = np.where(grid.boundary, trace / np.where(np.abs(trace) > 0, np.abs(trace), 1.0), trace)
        bc = BoundaryCondition("dirichlet", tr)
    else:
        bc = BoundaryCondition(bc_kind)
    if mz.get("init", "random") == "random":
        rng = np.random.default_rng(cfg.seed)
        v0 = np.where(grid.mask, np.exp(2j * np.pi * rng.random(grid.shape)), 0.0)
    else:
        v0 = trace
    if bc_kind == "dirichlet":
        v0 = np.where(grid.boundary, bc.trace, v0)
    out = cfg.output.get("dir")
    mcfg = MinimizeConfig(stages=stages, bc=bc, step=mz.get("step", "armijo"), dt=mz.get("dt", 1e-3),
                          gtol=mz.get("gtol"), snapshot_every=mz.get("snapshot_every", 0), out_dir=out, seed=cfg.seed,
                          entropy_set=tuple(s.n for s in cfg.entropies() if s.kind == "trig"))
    v, diag = minimize(v0, grid, model, mcfg)
    reports = analyze(v, grid, cfg.analysis.get("min_sep"))
    summary = {"h": grid.h, "seed": cfg.seed, "stages": diag.stages,
               "singularities": [r.to_dict() for r in reports]}
    if out:
        dump_csv(os.path.join(out, "final.csv"), v, grid)
        write_ppm(os.path.join(out, "final.ppm"), v, grid)
    _emit(summary, cfg, "final_report.json")
    return EXIT_OK


# -- parser ------------------------------------------------------------------------------------
def _common(p, scenario=True):
    p.add_argument("--config", help="run configuration file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--grid", type=int, help="nodes per axis")
    if scenario:
        p.add_argument("--scenario", choices=SCENARIOS, help="scenario name")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="unoriented-ag", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("selftest", help="run the identity suites")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selftest)
    p = sub.add_parser("energy", help="energy breakdown of a scenario")
    _common(p)
    p.add_argument("--eps", type=float)
    p.set_defaults(func=cmd_energy)
    p = sub.add_parser("entropy", help="entropy productions of a scenario")
    _common(p)
    p.add_argument("--entropy", help="entropy spec, e.g. 'kind=trig n=3'")
    p.add_argument("--mode", choices=("unoriented", "oriented"), default="unoriented")
    p.set_defaults(func=cmd_entropy)
    p = sub.add_parser("minimize", help="run a continuation schedule")
    _common(p)
    p.add_argument("--eps", type=float)
    p.set_defaults(func=cmd_minimize)
    p = sub.add_parser("analyze", help="detect and classify singularities")
    _common(p)
    p.set_defaults(func=cmd_analyze)
    p = sub.add_parser("structure", help="structure function and log-law fit")
    _common(p)
    p.add_argument("--radius", type=float, default=0.5, help="radius of the region around the scenario centre")
    p.set_defaults(func=cmd_structure)
    p = sub.add_parser("dump", help="write a scenario as CSV and PPM")
    _common(p)
    p.set_defaults(func=cmd_dump)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ModelError, GridError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, MinimizeError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
