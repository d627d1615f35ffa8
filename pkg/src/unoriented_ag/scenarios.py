"""Synthetic unoriented fields for experiments and tests."""
from __future__ import annotations

import numpy as np

from .grid import Grid2D, GridError, load_csv

SCENARIOS = ("constant", "vortex", "half_disclination", "dipole", "wall1d", "random", "smooth", "from_file")


def _core_inside(grid: Grid2D, c):
    ox, oy = grid.origin
    i = int(round((c[0] - ox) / grid.h))
    j = int(round((c[1] - oy) / grid.h))
    if not (0 <= i < grid.nx and 0 <= j < grid.ny and grid.mask[j, i]):
        raise GridError(f"core {tuple(c)} lies outside the mask")


def constant(grid: Grid2D, z0: complex = 1.0) -> np.ndarray:
    return np.where(grid.mask, complex(z0), 0.0).astype(complex)


def _core_factor(r, r_core):
    return np.minimum(1.0, r / r_core) if r_core > 0 else np.ones_like(r)


def vortex(grid: Grid2D, center=(0.0, 0.0), r_core: float | None = None) -> np.ndarray:
    """``((x-c)/|x-c|)^2`` with modulus ``min(1, |x-c|/r_core)``; default ``r_core = 4h``."""
    _core_inside(grid, center)
    r_core = 4 * grid.h if r_core is None else r_core
    x, y = grid.coords()
    z = (x - center[0]) + 1j * (y - center[1])
    r = np.abs(z)
    v = np.where(r > 0, (z / np.where(r > 0, r, 1.0)) ** 2, 0.0) * _core_factor(r, r_core)
    return np.where(grid.mask, v, 0.0)


def half_disclination(grid: Grid2D, center=(0.0, 0.0), xi=(0.0, 1.0), r_core: float | None = None) -> np.ndarray:
    """Radial director on ``{(x-c).xi >= 0}``, constant director ``xi^perp`` on the rest.

    The two halves agree on the axis line, so ``v`` is continuous away from ``c``.
    """
    _core_inside(grid, center)
    r_core = 4 * grid.h if r_core is None else r_core
    xi = np.asarray(xi, dtype=float)
    xi = xi / np.linalg.norm(xi)
    x, y = grid.coords()
    z = (x - center[0]) + 1j * (y - center[1])
    r = np.abs(z)
    radial = np.where(r > 0, (z / np.where(r > 0, r, 1.0)) ** 2, 0.0)
    perp = 1j * (xi[0] + 1j * xi[1])
    side = (x - center[0]) * xi[0] + (y - center[1]) * xi[1] >= 0
    v = np.where(side, radial, perp ** 2) * _core_factor(r, r_core)
    return np.where(grid.mask, v, 0.0)


def dipole(grid: Grid2D, a=(-0.25, 0.0), b=(0.25, 0.0), r_core: float | None = None) -> np.ndarray:
    """Product of two half-disclinations with opposite axes; degree 1 at each core."""
    va = half_disclination(grid, a, (0.0, 1.0), r_core)
    vb = half_disclination(grid, b, (0.0, -1.0), r_core)
    return va * vb


def wall1d(grid: Grid2D, theta: float = np.pi / 4, width: float = 0.05, x0: float = 0.0) -> np.ndarray:
    """``u^2`` for ``u = (cos(theta) tanh((x1-x0)/width), sin(theta))``: a modulus dip across ``x1 = x0``."""
    x, _ = grid.coords()
    u = np.cos(theta) * np.tanh((x - x0) / width) + 1j * np.sin(theta)
    return np.where(grid.mask, u ** 2, 0.0)


def random_phases(grid: Grid2D, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.where(grid.mask, np.exp(2j * np.pi * rng.random(grid.shape)), 0.0)


def smooth(grid: Grid2D, seed: int = 0, modes: int = 3, amplitude: float = 1.0) -> np.ndarray:
    """Unimodular ``e^{2 i theta}`` with a random low-mode trigonometric phase; winding 0."""
    rng = np.random.default_rng(seed)
    x, y = grid.coords()
    th = np.zeros(grid.shape)
    for _ in range(modes):
        k = rng.normal(size=2) * 1.5
        th += amplitude / modes * rng.normal() * np.cos(k[0] * x + k[1] * y + rng.uniform(0, 2 * np.pi))
    return np.where(grid.mask, np.exp(2j * th), 0.0)


def perturb(grid: Grid2D, v: np.ndarray, amplitude: float = 0.05, seed: int = 0, modes: int = 6) -> np.ndarray:
    """Multiply ``v`` by ``1 + p`` with ``p`` a random complex low-mode wave of RMS about ``amplitude``.

    The perturbation is analytic, so it is the same function at every resolution.
    """
    rng = np.random.default_rng(seed)
    x, y = grid.coords()
    p = np.zeros(grid.shape, dtype=complex)
    for _ in range(modes):
        k = rng.normal(size=2) * 4.0
        c = (rng.normal() + 1j * rng.normal()) / np.sqrt(2)
        p += c * np.cos(k[0] * x + k[1] * y + rng.uniform(0, 2 * np.pi))
    p *= amplitude * np.sqrt(2.0 / modes)
    return np.where(grid.mask, v * (1 + p), 0.0)


def field_suite(grid: Grid2D) -> list[tuple[str, np.ndarray]]:
    """Twenty fixed analytic fields, defined independently of resolution.

    Ten unimodular smooth phases, five with a modulus dip and five walls.
    """
    x, y = grid.coords()
    out = []
    for s in range(10):
        out.append((f"smooth{s}", smooth(grid, seed=s)))
    for s in range(5):
        rng = np.random.default_rng(100 + s)
        c = rng.uniform(-0.4, 0.4, size=2)
        depth, width = rng.uniform(0.2, 0.6), rng.uniform(0.15, 0.35)
        dip = 1 - depth * np.exp(-((x - c[0]) ** 2 + (y - c[1]) ** 2) / width ** 2)
        out.append((f"dip{s}", smooth(grid, seed=10 + s) * dip))
    for s in range(5):
        th = np.pi * (s + 1) / 7
        out.append((f"wall{s}", wall1d(grid, theta=th, width=0.1 + 0.05 * s, x0=0.1 * (s - 2))))
    return out


def make_scenario(name: str, grid: Grid2D, **params):
    """Build a named scenario on ``grid``; ``from_file`` returns ``(v, grid_from_file)``."""
    if name == "constant":
        return constant(grid, params.get("z0", 1.0))
    if name == "vortex":
        return vortex(grid, params.get("center", (0.0, 0.0)), params.get("r_core"))
    if name == "half_disclination":
        return half_disclination(grid, params.get("center", (0.0, 0.0)), params.get("xi", (0.0, 1.0)),
                                 params.get("r_core"))
    if name == "dipole":
        return dipole(grid, params.get("a", (-0.25, 0.0)), params.get("b", (0.25, 0.0)), params.get("r_core"))
    if name == "wall1d":
        return wall1d(grid, params.get("theta", np.pi / 4), params.get("width", 0.05), params.get("x0", 0.0))
    if name == "random":
        return random_phases(grid, params.get("seed", 0))
    if name == "smooth":
        return smooth(grid, params.get("seed", 0))
    if name == "from_file":
        return load_csv(params["path"])
    raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
