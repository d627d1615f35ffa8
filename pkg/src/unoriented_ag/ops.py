"""Operators specific to unoriented fields ``v = u^2``.

rot (the nonlinear unoriented curl), its tensor form, director lifting,
half-angle phase differences, winding degrees, the Jacobian density and the
H^{-1} norm.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .grid import TAU0, Grid2D, GridError, diff_operators, curl2, fd_gradient, sample_bilinear, shift_field, sqrt_branch


class SolverError(RuntimeError):
    """Iterative solver failed to reach its tolerance."""


class UndersampledLoopError(ValueError):
    """Phase increments along a loop are too large to count the winding reliably."""


# -- rot -----------------------------------------------------------------------
def _curl_div(v: np.ndarray, grid: Grid2D):
    """``(curl v, div v)`` of the real vector field ``(Re v, Im v)``."""
    Dx, Dy = diff_operators(grid)
    flat = v.reshape(grid.size)
    vx = (Dx @ flat).reshape(grid.shape)
    vy = (Dy @ flat).reshape(grid.shape)
    c = vx.imag - vy.real
    d = vx.real + vy.imag
    return c, d


def rot_complex(v: np.ndarray, grid: Grid2D) -> np.ndarray:
    """``rho_1 + i rho_2`` where ``(rho_1, rho_2) = rot v``.

    With ``zeta = curl v + i div v`` and ``vhat = v/|v|`` the defining 2x2
    matrix product collapses to ``(vhat*zeta + conj(zeta)) / 4``.
    """
    v = np.asarray(v, dtype=complex)
    c, d = _curl_div(v, grid)
    zeta = c + 1j * d
    r = np.abs(v)
    live = (r > TAU0) & grid.mask
    vhat = np.where(live, v / np.where(live, r, 1.0), 0.0)
    return np.where(live, (vhat * zeta + np.conj(zeta)) / 4.0, 0.0)


def rot(v: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Unoriented curl, shape ``(2, ny, nx)``; zero where ``|v| <= TAU0``.

    Satisfies ``rot(u^2) = (curl u) u`` for smooth ``u``.
    """
    rho = rot_complex(v, grid)
    return np.stack([rho.real, rho.imag])


def rot_tensor(T: np.ndarray, grid: Grid2D) -> np.ndarray:
    """rot in tensor form: ``T (grad^perp Tr T - 2 (div T)^perp) / (2 Tr T)``.

    ``div T`` is the column-wise divergence and ``w^perp = (-w2, w1)``.  With
    this sign the result equals ``(curl u) u`` for ``T = u (x) u``.
    """
    T11, T12, T22 = T
    tr = T11 + T22
    g11 = fd_gradient(T11, grid)
    g12 = fd_gradient(T12, grid)
    g22 = fd_gradient(T22, grid)
    div1 = g11[0] + g12[1]
    div2 = g12[0] + g22[1]
    gtr = g11 + g22
    w1 = 2 * div2 - gtr[1]
    w2 = -2 * div1 + gtr[0]
    live = (tr > TAU0) & grid.mask
    scale = np.where(live, 1.0 / (2 * np.where(live, tr, 1.0)), 0.0)
    return np.stack([(T11 * w1 + T12 * w2) * scale, (T12 * w1 + T22 * w2) * scale])


# -- director lifting ---------------------------------------------------------------
@dataclass
class LiftResult:
    u: np.ndarray
    lifted: np.ndarray
    excluded: np.ndarray
    wall_edges: int
    wall_length: float


def director_lift(v: np.ndarray, grid: Grid2D, seed: tuple[int, int]) -> LiftResult:
    """Choose ``u = +-sqrt_branch(v)`` node by node, breadth-first from ``seed = (j, i)``.

    Each newly reached node takes the sign closer to its parent.  Nodes with
    ``|v| < TAU0`` are excluded.  Edges joining two lifted nodes whose values
    point in opposite half-planes are counted as sign walls.
    """
    v = np.asarray(v, dtype=complex)
    s = sqrt_branch(v)
    ok = grid.mask & (np.abs(v) >= TAU0)
    j, i = seed
    if not ok[j, i]:
        raise ValueError(f"seed {seed} is not a liftable node")
    sign = kernels.lift_signs(
        np.ascontiguousarray(s.real.ravel()), np.ascontiguousarray(s.imag.ravel()),
        ok.ravel().astype(np.uint8), grid.ravel_index(j, i), grid.nx, grid.ny, grid.periodic,
    ).reshape(grid.shape)
    lifted = sign != 0
    u = np.where(lifted, sign * s, 0.0)
    walls = 0
    for axis in (0, 1):
        a = u
        b = np.roll(u, -1, axis=axis)
        both = lifted & np.roll(lifted, -1, axis=axis)
        if not grid.periodic:
            edge = [slice(None), slice(None)]
            edge[axis] = -1
            both[tuple(edge)] = False
        walls += int(np.count_nonzero(both & ((a * np.conj(b)).real < 0)))
    return LiftResult(u=u, lifted=lifted, excluded=grid.mask & ~ok, wall_edges=walls, wall_length=walls * grid.h)


# -- half-angle differences ------------------------------------------------------------
def delta_h(v: np.ndarray, grid: Grid2D, offset: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """``delta`` in ``(-1, 1]`` with ``v(x+h) = e^{i pi delta} v(x)`` after normalisation.

    Returns ``(delta, valid)``; nodes where either end is below ``TAU0`` are invalid.
    """
    v = np.asarray(v, dtype=complex)
    vs, valid = shift_field(v, grid, offset)
    valid = valid & (np.abs(v) > TAU0) & (np.abs(vs) > TAU0)
    ratio = np.where(valid, vs * np.conj(v), 1.0)
    d = np.angle(ratio) / np.pi
    d = np.where(d <= -1.0, 1.0, d)
    return np.where(valid, d, 0.0), valid


# -- winding ------------------------------------------------------------------------------
@dataclass(frozen=True)
class LoopSpec:
    center: tuple[float, float]
    radius: float
    m: int = 64

    def __post_init__(self):
        if self.m < 16:
            raise ValueError(f"loop needs at least 16 samples, got {self.m}")
        if not self.radius > 0:
            raise ValueError("loop radius must be positive")

    def points(self):
        phi = 2 * np.pi * np.arange(self.m) / self.m
        return self.center[0] + self.radius * np.cos(phi), self.center[1] + self.radius * np.sin(phi), phi


def loop_samples(v: np.ndarray, grid: Grid2D, loop: LoopSpec) -> np.ndarray:
    xs, ys, _ = loop.points()
    vals, ok = sample_bilinear(np.asarray(v, dtype=complex), grid, xs, ys)
    if not ok.all():
        raise GridError(f"loop at {loop.center} radius {loop.radius} leaves the mask")
    if np.any(np.abs(vals) < TAU0):
        raise ValueError("field modulus vanishes on the loop")
    return vals


def winding_degree(v: np.ndarray, grid: Grid2D, loop: LoopSpec) -> int:
    """Integer degree of ``v`` along a sampled circle (counter-clockwise)."""
    vals = loop_samples(v, grid, loop)
    inc = np.angle(np.roll(vals, -1) * np.conj(vals))
    if np.max(np.abs(inc)) >= np.pi / 2:
        raise UndersampledLoopError(
            f"phase step {np.max(np.abs(inc)):.3f} >= pi/2 on loop radius {loop.radius}; raise m (now {loop.m})"
        )
    return int(np.rint(inc.sum() / (2 * np.pi)))


def jacobian_density(v: np.ndarray, grid: Grid2D) -> np.ndarray:
    """``curl2(v ^ grad v)`` with ``(v ^ grad v)_j = v1 dj v2 - v2 dj v1``."""
    v = np.asarray(v, dtype=complex)
    g = fd_gradient(v, grid)
    V = np.stack([(np.conj(v) * g[0]).imag, (np.conj(v) * g[1]).imag])
    return np.where(grid.mask, curl2(V, grid), 0.0)


# -- Poisson / H^{-1} -------------------------------------------------------------------------
@dataclass(frozen=True)
class PoissonSolveConfig:
    """Dirichlet Poisson solve settings.

    ``method`` is ``"cg"`` (matrix-free conjugate gradient) or ``"direct"``
    (cached sparse LU, used by the minimiser for repeated solves).
    """

    tol: float = 1e-10
    max_iter: int = 20000
    method: str = "cg"

    def __post_init__(self):
        if not (0 < self.tol <= 1e-4):
            raise ValueError(f"CG tolerance must lie in (0, 1e-4], got {self.tol}")
        if self.method not in ("cg", "direct"):
            raise ValueError(f"unknown Poisson method {self.method!r}")


def conjugate_gradient(apply_A, b: np.ndarray, tol: float, max_iter: int, x0: np.ndarray | None = None):
    """Plain CG for SPD ``A``; stops on relative residual ``|r|/|b| <= tol``."""
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros_like(b), 0
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - apply_A(x)
    p = r.copy()
    rr = r @ r
    for it in range(1, max_iter + 1):
        Ap = apply_A(p)
        alpha = rr / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rr_new = r @ r
        if np.sqrt(rr_new) <= tol * bnorm:
            return x, it
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise SolverError(f"CG did not reach rtol={tol} in {max_iter} iterations (residual {np.sqrt(rr) / bnorm:.2e})")


@dataclass
class PoissonSolver:
    """``-Delta_h phi = f`` on the mask interior, ``phi = 0`` on boundary nodes.

    Periodic grids use the exact FFT inverse of the periodic 5-point Laplacian
    on the mean-free part of ``f``.
    """

    grid: Grid2D
    cfg: PoissonSolveConfig = field(default_factory=PoissonSolveConfig)

    def __post_init__(self):
        g = self.grid
        if g.periodic:
            kx = np.arange(g.nx)
            ky = np.arange(g.ny)
            lam = (4 * np.sin(np.pi * kx / g.nx)[None, :] ** 2 + 4 * np.sin(np.pi * ky / g.ny)[:, None] ** 2) / g.h ** 2
            lam[0, 0] = np.inf
            self._lam = lam
            return
        unknown = g.interior
        if not unknown.any():
            raise GridError("mask has no interior nodes for the Poisson solve")
        self.unknown = unknown
        key = ("laplacian",)
        if key not in g._cache:
            num = -np.ones(g.shape, dtype=int)
            num[unknown] = np.arange(np.count_nonzero(unknown))
            n = int(unknown.sum())
            rows, cols, vals = [np.arange(n)], [np.arange(n)], [np.full(n, 4.0)]
            jj, ii = np.nonzero(unknown)
            for dj, di in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                nb = num[jj + dj, ii + di]
                sel = nb >= 0
                rows.append(num[jj, ii][sel])
                cols.append(nb[sel])
                vals.append(-np.ones(sel.sum()))
            K = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
            g._cache[key] = K
        self._K = g._cache[key]
        self._lu = None
        if self.cfg.method == "direct":
            lkey = ("laplacian-lu",)
            if lkey not in g._cache:
                g._cache[lkey] = spla.splu(self._K.tocsc())
            self._lu = g._cache[lkey]
        self._last = None

    def solve(self, f: np.ndarray, x0: np.ndarray | None = None) -> np.ndarray:
        g = self.grid
        f = np.asarray(f, dtype=float)
        if g.periodic:
            fh = np.fft.fft2(f - f.mean())
            return np.fft.ifft2(fh / self._lam).real
        b = f[self.unknown] * g.h ** 2
        if self._lu is not None:
            x = self._lu.solve(b)
        else:
            guess = None if x0 is None else x0[self.unknown]
            x, _ = conjugate_gradient(lambda p: self._K @ p, b, self.cfg.tol, self.cfg.max_iter, guess)
        phi = np.zeros(g.shape)
        phi[self.unknown] = x
        return phi


def _edge_energy(phi: np.ndarray, grid: Grid2D) -> float:
    """``||grad phi||^2`` from forward differences on every grid edge (phi zero off the unknowns)."""
    if grid.periodic:
        dx = np.roll(phi, -1, axis=1) - phi
        dy = np.roll(phi, -1, axis=0) - phi
    else:
        dx = np.diff(phi, axis=1)
        dy = np.diff(phi, axis=0)
    return float(np.sum(dx ** 2) + np.sum(dy ** 2))


def hminus1_norm(f: np.ndarray, grid: Grid2D, cfg: PoissonSolveConfig | None = None) -> float:
    """Discrete ``||f||_{H^{-1}} = ||grad phi||_2`` with ``-Delta phi = f``, ``phi = 0`` on the boundary.

    A vector field ``(2, ny, nx)`` is handled componentwise, summed in quadrature.
    """
    f = np.asarray(f, dtype=float)
    solver = PoissonSolver(grid, cfg or PoissonSolveConfig())
    comps = f if f.ndim == 3 else f[None]
    total = 0.0
    for comp in comps:
        comp = np.where(grid.mask, comp, 0.0)
        if not np.any(comp):
            continue
        total += _edge_energy(solver.solve(comp), grid)
    return float(np.sqrt(total))
