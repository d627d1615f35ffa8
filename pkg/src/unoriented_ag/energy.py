"""Discrete energies, their gradient, and regularity diagnostics.

All integrals are node sums times ``h^2`` over the mask.  Gradients follow the
convention ``G = dE/dRe(v) + i dE/dIm(v)`` per node, so that
``dE = sum Re(conj(G) dv)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import TAU0, Grid2D, GridError, diff_operators, shift_field
from .ops import PoissonSolveConfig, PoissonSolver, _curl_div, rot_complex


class ModelError(ValueError):
    """Model parameters violate the admissibility conditions."""


# -- model ---------------------------------------------------------------------
def g_paper(r):
    """``1/(8|v|)`` as a function of ``r = |v|``; zero below the modulus threshold."""
    r = np.asarray(r, dtype=float)
    return np.where(r > TAU0, 1.0 / (8.0 * np.where(r > TAU0, r, 1.0)), 0.0)


def g_paper_dr(r):
    r = np.asarray(r, dtype=float)
    return np.where(r > TAU0, -1.0 / (8.0 * np.where(r > TAU0, r, 1.0) ** 2), 0.0)


def W_paper(r):
    """``(1 - |v|)^2 / 2``."""
    return 0.5 * (1.0 - np.asarray(r, dtype=float)) ** 2


def W_paper_dr(r):
    return np.asarray(r, dtype=float) - 1.0


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of the relaxed energy.

    ``g`` and ``W`` are radial, functions of ``|v|``, with optional derivatives
    ``dg``/``dW`` (needed for gradients).  ``hard`` replaces both rot penalties
    by the constraint ``rot v = 0``, which is then only reported.

    Attributes:
        eps: length scale.
        lam0: weight of the ``L^1`` rot penalty.
        lam1: weight of the ``H^{-1}`` rot penalty (the term is ``lam1/eps ||rot v||^2``).
        kappa: admissibility constant.
        kappa_s: smoothing of ``|rot v|`` in the ``L^1`` term.
    """

    eps: float
    lam0: float = 0.0
    lam1: float = 0.0
    g: Callable | None = None
    dg: Callable | None = None
    W: Callable | None = None
    dW: Callable | None = None
    kappa: float = 0.1
    kappa_s: float = 1e-6
    hard: bool = False
    poisson: PoissonSolveConfig = field(default_factory=lambda: PoissonSolveConfig(method="direct"))

    @property
    def g_fn(self):
        return g_paper if self.g is None else self.g

    @property
    def dg_fn(self):
        return g_paper_dr if self.g is None else self.dg

    @property
    def W_fn(self):
        return W_paper if self.W is None else self.W

    @property
    def dW_fn(self):
        return W_paper_dr if self.W is None else self.dW

    def with_stage(self, eps: float, lam0: float, lam1: float) -> "ModelSpec":
        from dataclasses import replace

        return replace(self, eps=eps, lam0=lam0, lam1=lam1)

    def validate(self) -> "ModelSpec":
        """Check the admissibility conditions on sampled moduli; raise :class:`ModelError` naming the failure."""
        if not self.eps > 0:
            raise ModelError(f"eps must be positive, got {self.eps}")
        if self.lam0 < 0 or self.lam1 < 0:
            raise ModelError("lam0 and lam1 must be nonnegative")
        if not self.kappa > 0:
            raise ModelError("kappa must be positive")
        if not self.kappa_s > 0:
            raise ModelError("kappa_s must be positive")
        near = np.linspace(0.9, 1.1, 41)
        gv = np.asarray(self.g_fn(near), dtype=float)
        if not np.all(np.isfinite(gv)) or np.any(gv < self.kappa):
            raise ModelError(f"condition g >= kappa near the unit circle fails (min g = {np.min(gv):.3g}, kappa = {self.kappa})")
        r = np.linspace(0.0, 3.0, 301)
        Wv = np.asarray(self.W_fn(r), dtype=float)
        t = np.abs(1.0 - r)
        if not np.all(np.isfinite(Wv)) or np.any(Wv < self.kappa * np.minimum(t ** 2, t) - 1e-15):
            raise ModelError("condition W >= kappa min((1-|v|)^2, |1-|v||) fails")
        if not self.hard and max(self.lam0, self.lam1) < self.kappa:
            raise ModelError(f"condition max(lam0, lam1) >= kappa fails ({self.lam0}, {self.lam1} < {self.kappa})")
        return self


def paper_model(eps: float, hard: bool = True, **kw) -> ModelSpec:
    """Default ``g = 1/(8|v|)``, ``W = (1-|v|)^2/2``; hard rot constraint unless weights are given."""
    return ModelSpec(eps=eps, hard=hard, **kw)


# -- breakdown -------------------------------------------------------------------
@dataclass
class EnergyBreakdown:
    dirichlet: float
    potential: float
    rot_l1: float
    rot_hm1: float
    rot_violation_l1: float
    meta: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return self.dirichlet + self.potential + self.rot_l1 + self.rot_hm1

    def to_dict(self) -> dict:
        return {"dirichlet": self.dirichlet, "potential": self.potential, "rot_l1": self.rot_l1,
                "rot_hm1": self.rot_hm1, "total": self.total, "rot_violation_l1": self.rot_violation_l1}


def _grad_parts(v, grid):
    Dx, Dy = diff_operators(grid)
    flat = v.reshape(grid.size)
    return (Dx @ flat).reshape(grid.shape), (Dy @ flat).reshape(grid.shape)


def energy_unoriented(v: np.ndarray, grid: Grid2D, eps: float) -> EnergyBreakdown:
    """``(eps/2) sum |grad v|^2/(4|v|) h^2 + (1/(2 eps)) sum (1-|v|)^2 h^2``; rot is only reported."""
    if not eps > 0:
        raise ModelError(f"eps must be positive, got {eps}")
    v = np.asarray(v, dtype=complex)
    vx, vy = _grad_parts(v, grid)
    r = np.abs(v)
    m = grid.mask
    h2 = grid.h ** 2
    dens = np.where(r > TAU0, (np.abs(vx) ** 2 + np.abs(vy) ** 2) / (4 * np.where(r > TAU0, r, 1.0)), 0.0)
    dir_ = 0.5 * eps * float(np.sum(dens[m])) * h2
    pot = float(np.sum(((1 - r) ** 2)[m])) * h2 / (2 * eps)
    viol = float(np.sum(np.abs(rot_complex(v, grid))[m])) * h2
    return EnergyBreakdown(dir_, pot, 0.0, 0.0, viol, {"eps": eps, "h": grid.h})


# -- evaluator ----------------------------------------------------------------------
class DiscreteEnergy:
    """Energy and exact gradient of the discretized relaxed functional for one grid and model.

    The Poisson solver (cached factorization by default) is shared between
    evaluations.
    """

    def __init__(self, grid: Grid2D, model: ModelSpec):
        self.grid = grid
        self.model = model.validate()
        self.Dx, self.Dy = diff_operators(grid)
        self._solver = None
        if model.lam1 > 0 and not model.hard:
            self._solver = PoissonSolver(grid, model.poisson)
        if model.g is not None and model.dg is None or model.W is not None and model.dW is None:
            self._differentiable = False
        else:
            self._differentiable = True

    def _fields(self, v):
        g = self.grid
        flat = v.reshape(g.size)
        vx = (self.Dx @ flat).reshape(g.shape)
        vy = (self.Dy @ flat).reshape(g.shape)
        r = np.abs(v)
        live = (r > TAU0) & g.mask
        vhat = np.where(live, v / np.where(live, r, 1.0), 0.0)
        zeta = (vx.imag - vy.real) + 1j * (vx.real + vy.imag)
        rho = np.where(live, (vhat * zeta + np.conj(zeta)) / 4.0, 0.0)
        return vx, vy, r, live, vhat, zeta, rho

    def evaluate(self, v: np.ndarray, want_grad: bool = False):
        """Return the breakdown, or ``(breakdown, G)`` when ``want_grad``."""
        if want_grad and not self._differentiable:
            raise ModelError("user g/W given without derivatives; gradient unavailable")
        md, g = self.model, self.grid
        v = np.asarray(v, dtype=complex)
        m = g.mask
        h2 = g.h ** 2
        eps = md.eps
        vx, vy, r, live, vhat, zeta, rho = self._fields(v)
        gv = np.where(m, md.g_fn(r), 0.0)
        grad2 = np.abs(vx) ** 2 + np.abs(vy) ** 2
        dirichlet = eps * float(np.sum((gv * grad2)[m])) * h2
        potential = float(np.sum(md.W_fn(r)[m])) * h2 / eps
        arho = np.abs(rho)
        violation = float(np.sum(arho[m])) * h2
        rot_l1 = rot_hm1 = 0.0
        Grho = np.zeros(g.shape, dtype=complex)
        if not md.hard:
            if md.lam0 > 0:
                smooth = np.sqrt(arho ** 2 + md.kappa_s ** 2)
                rot_l1 = md.lam0 * float(np.sum((smooth - md.kappa_s)[m])) * h2
                Grho += md.lam0 * h2 * rho / smooth
            if md.lam1 > 0:
                phi1 = self._solver.solve(rho.real)
                phi2 = self._solver.solve(rho.imag)
                rot_hm1 = (md.lam1 / eps) * h2 * float(np.sum(rho.real * phi1 + rho.imag * phi2))
                Grho += (md.lam1 / eps) * 2 * h2 * (phi1 + 1j * phi2)
        br = EnergyBreakdown(dirichlet, potential, rot_l1, rot_hm1, violation,
                             {"eps": eps, "lam0": md.lam0, "lam1": md.lam1, "kappa_s": md.kappa_s, "h": g.h})
        if not want_grad:
            return br
        w = np.where(m, h2, 0.0)
        safe_r = np.where(live, r, 1.0)
        # Dirichlet: eps sum w g(|v|) |grad v|^2
        a = 2 * eps * w * gv
        G = self._adj(a * vx, a * vy)
        G += np.where(live, eps * w * grad2 * md.dg_fn(r) * vhat, 0.0)
        # potential
        G += np.where(live, (w / eps) * md.dW_fn(r) * vhat, 0.0)
        # rot terms through rho = (vhat zeta + conj zeta)/4
        if np.any(Grho):
            Grho = np.where(live, Grho, 0.0)
            s = np.where(live, (1j * np.conj(Grho) * zeta * vhat).real / (4 * safe_r), 0.0)
            G += s * 1j * vhat
            P = (np.conj(Grho) * vhat + Grho) / 4
            alpha, beta = P.real, -P.imag
            G += self._adj(beta + 1j * alpha, -alpha + 1j * beta)
        return br, np.where(m, G, 0.0)

    def _adj(self, X, Y):
        g = self.grid
        out = self.Dx.T @ X.reshape(g.size) + self.Dy.T @ Y.reshape(g.size)
        return out.reshape(g.shape)

    def __call__(self, v):
        return self.evaluate(v)


def energy_general(v: np.ndarray, grid: Grid2D, model: ModelSpec) -> EnergyBreakdown:
    return DiscreteEnergy(grid, model).evaluate(v)


def energy_gradient(v: np.ndarray, grid: Grid2D, model: ModelSpec) -> np.ndarray:
    return DiscreteEnergy(grid, model).evaluate(v, want_grad=True)[1]


# -- Q and R ----------------------------------------------------------------------
def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    f = lambda s: np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
    a, b = f(t), f(1.0 - t)
    return a / (a + b)


def chi_qr(r):
    """Smooth cutoff equal to 1 on ``[0.8, 1.25]`` and supported in ``[0.6, 1.6]``."""
    r = np.asarray(r, dtype=float)
    up = _smoothstep((r - 0.6) / 0.2)
    down = _smoothstep((1.6 - r) / 0.35)
    return np.where(r < 1.0, up, down)


def qr_quantities(v: np.ndarray, grid: Grid2D, lam0: float, lam1: float,
                  cfg: PoissonSolveConfig | None = None) -> tuple[float, float]:
    """The quantities ``(Q, R)`` controlling entropy productions."""
    if max(lam0, lam1) < 1:
        raise ModelError(f"normalization needs max(lam0, lam1) >= 1, got ({lam0}, {lam1})")
    from .ops import hminus1_norm

    v = np.asarray(v, dtype=complex)
    m = grid.mask
    h2 = grid.h ** 2
    vx, vy = _grad_parts(v, grid)
    r = np.abs(v)
    chi = chi_qr(r)
    gn = np.sqrt(np.abs(vx) ** 2 + np.abs(vy) ** 2)
    rho = rot_complex(v, grid)
    rot_l1 = float(np.sum(np.abs(rho)[m])) * h2
    rot_h = hminus1_norm(np.stack([rho.real, rho.imag]), grid, cfg)
    Q = (float(np.sum((chi * np.abs(1 - r) * gn)[m])) * h2 + lam0 * rot_l1
         + np.sqrt(lam1) * np.sqrt(float(np.sum(((chi * gn) ** 2)[m])) * h2) * rot_h)
    R = np.sqrt(float(np.sum(((chi * (1 - r)) ** 2)[m])) * h2) + np.sqrt(lam1) * rot_h
    return float(Q), float(R)


# -- Ginzburg-Landau energy and structure functions -----------------------------------
def gl_energy(v: np.ndarray, grid: Grid2D, eta: float, region: np.ndarray) -> float:
    """``(1/2) int |grad v|^2 + (1/(4 eta^2)) int (1 - |v|^2)^2`` over ``region``."""
    region = np.asarray(region, dtype=bool) & grid.mask
    if not region.any():
        raise GridError("empty region")
    vx, vy = _grad_parts(np.asarray(v, dtype=complex), grid)
    h2 = grid.h ** 2
    dens = 0.5 * (np.abs(vx) ** 2 + np.abs(vy) ** 2) + (1 - np.abs(v) ** 2) ** 2 / (4 * eta ** 2)
    return float(np.sum(dens[region])) * h2


AXIS_DIRS = ((1, 0), (0, 1))
DIAG_DIRS = ((1, 1), (1, -1))


def structure_function(v: np.ndarray, grid: Grid2D, region: np.ndarray, steps, directions=("axis", "diagonal")):
    """``S(h) = int_region |v(x+h) - v(x)|^2`` averaged over axis (or diagonal) directions.

    ``steps`` are integer node counts ``s``; axis offsets have ``|h| = s h`` and
    diagonal offsets ``|h| = s sqrt(2) h``.  Returns rows ``(|h|, S)`` sorted
    by ``|h|``.  Every shifted region node must lie in the mask.
    """
    region = np.asarray(region, dtype=bool) & grid.mask
    if not region.any():
        raise GridError("empty region")
    v = np.asarray(v, dtype=complex)
    h2 = grid.h ** 2
    rows = []
    for kind in directions:
        dirs = {"axis": AXIS_DIRS, "diagonal": DIAG_DIRS}[kind]
        for s in steps:
            vals = []
            for dx, dy in dirs:
                off = (s * dx, s * dy)
                vs, valid = shift_field(v, grid, off)
                if np.any(region & ~valid):
                    raise GridError(f"offset {off} moves part of the region outside the mask")
                vals.append(float(np.sum(np.abs(vs - v)[region] ** 2)) * h2)
            length = s * grid.h * np.hypot(dx, dy)
            rows.append((length, float(np.mean(vals))))
    rows.sort()
    return rows
