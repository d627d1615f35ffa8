"""Gradient-flow relaxation of the relaxed energy with continuation stages."""
from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .energy import DiscreteEnergy, ModelSpec, qr_quantities
from .entropies import entropy_production, trig_entropy
from .grid import Grid2D, GridError, dump_csv
from .ops import hminus1_norm, rot


class MinimizeError(RuntimeError):
    """Descent failed; ``state`` holds the last accepted field."""

    def __init__(self, msg, state=None, diagnostics=None):
        super().__init__(msg)
        self.state = state
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class BoundaryCondition:
    """``kind`` is ``"dirichlet"`` (with ``trace``), ``"periodic"`` or ``"free"``."""

    kind: str = "free"
    trace: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("dirichlet", "periodic", "free"):
            raise ValueError(f"unknown boundary condition {self.kind!r}")
        if self.kind == "dirichlet" and self.trace is None:
            raise ValueError("dirichlet boundary condition needs a trace field")


def fixed_nodes(grid: Grid2D, bc: BoundaryCondition) -> np.ndarray:
    if bc.kind == "dirichlet":
        return grid.boundary
    return np.zeros(grid.shape, dtype=bool)


def check_boundary(grid: Grid2D, bc: BoundaryCondition, tol: float = 1e-10) -> None:
    if bc.kind == "periodic" and not grid.periodic:
        raise GridError("periodic boundary condition needs a periodic grid")
    if bc.kind != "periodic" and grid.periodic:
        raise GridError("periodic grid needs the periodic boundary condition")
    if bc.kind == "dirichlet":
        tr = np.asarray(bc.trace)
        if tr.shape != grid.shape:
            raise GridError(f"trace shape {tr.shape} does not match grid {grid.shape}")
        dev = np.abs(np.abs(tr[grid.boundary]) - 1.0)
        if dev.size and dev.max() > tol:
            raise ValueError(f"Dirichlet trace is not unimodular on the boundary (max deviation {dev.max():.2e})")


def apply_boundary(v: np.ndarray, grid: Grid2D, bc: BoundaryCondition) -> np.ndarray:
    """Overwrite the boundary layer with the trace (Dirichlet); identity otherwise."""
    v = np.asarray(v, dtype=complex)
    if bc.kind != "dirichlet":
        return v.copy()
    tr = np.asarray(bc.trace, dtype=complex)
    if tr.shape != grid.shape:
        raise GridError(f"trace shape {tr.shape} does not match grid {grid.shape}")
    return np.where(grid.boundary, tr, v)


@dataclass(frozen=True)
class Stage:
    eps: float
    lam0: float = 0.0
    lam1: float = 0.0
    max_iter: int = 200


def continuation(eps_list, kappa: float = 0.1, lam0: float = 0.0, max_iter: int = 200) -> list[Stage]:
    """Stages with ``lam1 = kappa/eps`` growing as ``eps`` shrinks."""
    return [Stage(eps=e, lam0=lam0, lam1=kappa / e, max_iter=max_iter) for e in eps_list]


@dataclass
class MinimizeConfig:
    """Descent settings.

    Attributes:
        stages: continuation schedule.
        bc: boundary condition.
        step: ``"armijo"`` (backtracking, sufficient decrease factor ``armijo``)
            or ``"fixed"`` (step ``dt``, halved until the energy does not increase).
        dt: initial (or fixed) step for the L2 gradient flow.
        gtol: stop when the L2-gradient Euclidean norm falls below this;
            default ``1e-8 * sqrt(N_nodes)``.
        snapshot_every: write a CSV snapshot every this many iterations (0: never).
        out_dir: directory for snapshots and ``diagnostics.jsonl``.
    """

    stages: list
    bc: BoundaryCondition = field(default_factory=BoundaryCondition)
    step: str = "armijo"
    dt: float = 1e-3
    armijo: float = 0.5
    shrink: float = 0.5
    max_shrinks: int = 60
    gtol: float | None = None
    snapshot_every: int = 0
    out_dir: str | None = None
    seed: int = 0
    entropy_set: tuple = (3, 5)

    def __post_init__(self):
        if not self.stages:
            raise ValueError("schedule must contain at least one stage")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.step not in ("armijo", "fixed"):
            raise ValueError(f"unknown step rule {self.step!r}")
        if not (0 < self.armijo < 1 and 0 < self.shrink < 1):
            raise ValueError("armijo and shrink factors must lie in (0, 1)")


@dataclass
class RunDiagnostics:
    iterations: list = field(default_factory=list)
    stages: list = field(default_factory=list)
    wall_time: float = 0.0
    seed: int = 0

    def stage_energies(self, k: int) -> list[float]:
        return [r["total"] for r in self.iterations if r["stage"] == k]


def _stage_summary(v, grid, model, k, it, converged, entropy_set) -> dict:
    lam0, lam1 = model.lam0, model.lam1
    if max(lam0, lam1) < 1:
        lam0 = 1.0
    Q, R = qr_quantities(v, grid, lam0, lam1)
    rho = rot(v, grid)
    out = {"stage": k, "eps": model.eps, "lam0": model.lam0, "lam1": model.lam1, "iterations": it,
           "converged": converged, "Q": Q, "R": R,
           "rot_l1": float(np.sum(np.hypot(rho[0], rho[1])[grid.mask])) * grid.h ** 2,
           "rot_hm1": hminus1_norm(rho, grid)}
    for n in entropy_set:
        out[f"tv_phi{n}"] = entropy_production(trig_entropy(n), v, grid).tv()
    return out


def minimize(v0: np.ndarray, grid: Grid2D, model: ModelSpec, cfg: MinimizeConfig):
    """Run the schedule; returns ``(v, RunDiagnostics)``.

    Each step moves along the negative L2 gradient ``-G/h^2`` with the
    Dirichlet nodes held fixed.  Within a stage every accepted step lowers the
    energy.
    """
    t_start = time.perf_counter()
    check_boundary(grid, cfg.bc)
    v = apply_boundary(v0, grid, cfg.bc)
    if cfg.bc.kind == "dirichlet" and np.max(np.abs(v - np.asarray(v0, dtype=complex))[grid.mask]) > 1e-12:
        raise ValueError("v0 does not match the Dirichlet data on boundary nodes")
    free = grid.mask & ~fixed_nodes(grid, cfg.bc)
    gtol = cfg.gtol if cfg.gtol is not None else 1e-8 * np.sqrt(grid.mask.sum())
    diag = RunDiagnostics(seed=cfg.seed)
    stream = None
    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
        stream = open(os.path.join(cfg.out_dir, "diagnostics.jsonl"), "w")
    h2 = grid.h ** 2
    try:
        global_it = 0
        for k, st in enumerate(cfg.stages):
            md = model.with_stage(st.eps, st.lam0, st.lam1)
            energy = DiscreteEnergy(grid, md)
            br, G = energy.evaluate(v, want_grad=True)
            E = br.total
            if not np.isfinite(E):
                raise MinimizeError(f"non-finite energy at the start of stage {k}", v, diag)
            t = cfg.dt
            converged = False
            it = 0
            _record(diag, stream, k, it, br, 0.0)
            for it in range(1, st.max_iter + 1):
                d = np.where(free, -G / h2, 0.0)
                gn = float(np.sqrt(np.sum(np.abs(d) ** 2)))
                if gn <= gtol:
                    converged = True
                    it -= 1
                    break
                slope = -gn ** 2 * h2  # <G, d>
                step = t
                for _ in range(cfg.max_shrinks + 1):
                    trial = v + step * d
                    br_t = energy.evaluate(trial)
                    Et = br_t.total
                    if cfg.step == "armijo":
                        ok = np.isfinite(Et) and Et <= E + cfg.armijo * step * slope
                    else:
                        ok = np.isfinite(Et) and Et <= E
                    if ok:
                        break
                    step *= cfg.shrink
                else:
                    raise MinimizeError(
                        f"backtracking failed after {cfg.max_shrinks} shrinks in stage {k}, iteration {it}", v, diag)
                v = trial
                br, G = energy.evaluate(v, want_grad=True)
                E = br.total
                _record(diag, stream, k, it, br, step)
                global_it += 1
                if cfg.snapshot_every and cfg.out_dir and global_it % cfg.snapshot_every == 0:
                    dump_csv(os.path.join(cfg.out_dir, f"snap_{k:02d}_{it:06d}.csv"), v, grid)
                if cfg.step == "armijo":
                    t = step * 2.0 if step == t else step
                else:
                    t = cfg.dt
            summary = _stage_summary(v, grid, md, k, it, converged, cfg.entropy_set)
            summary["energy"] = br.to_dict()
            diag.stages.append(summary)
    finally:
        if stream is not None:
            stream.close()
    diag.wall_time = time.perf_counter() - t_start
    return v, diag


def _record(diag, stream, k, it, br, step):
    row = {"stage": k, "iter": it, **br.to_dict(), "step": step}
    diag.iterations.append(row)
    if stream is not None:
        stream.write(json.dumps({kk: row[kk] for kk in ("iter", "stage", "total", "dirichlet", "potential",
                                                         "rot_l1", "rot_hm1", "step")}) + "\n")
