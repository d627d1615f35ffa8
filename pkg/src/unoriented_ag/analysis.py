"""Zero-state analysis: singularity detection and classification, characteristics, log-law fits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from . import kernels
from .grid import TAU0, Grid2D, GridError, sample_bilinear, sqrt_branch
from .ops import LoopSpec, UndersampledLoopError, winding_degree

TOL_V = 0.15
TOL_ARC_DEG = 10.0
LIP_FACTOR = 4.0


@dataclass
class SingularityReport:
    """A detected defect.

    ``kind`` is ``"vortex"``, ``"half_disclination"`` (with axis ``xi``) or
    ``"unknown"``.  ``plaquette_degree`` is the summed cell winding of the
    cluster; ``degree`` is the loop-confirmed value when the loop fits.
    """

    location: tuple
    degree: int
    kind: str = "unknown"
    xi: tuple | None = None
    residual: float | None = None
    probe_radii: tuple = ()
    plaquette_degree: int = 0
    reliable: bool = True
    n_cells: int = 0
    tolerances: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"location": [float(self.location[0]), float(self.location[1])], "degree": int(self.degree),
                "kind": self.kind, "xi": None if self.xi is None else [float(self.xi[0]), float(self.xi[1])],
                "residual": None if self.residual is None else float(self.residual),
                "probe_radii": [float(r) for r in self.probe_radii], "reliable": self.reliable,
                "plaquette_degree": int(self.plaquette_degree), "tolerances": self.tolerances}


# -- cell windings ---------------------------------------------------------------
def plaquette_windings(v: np.ndarray, grid: Grid2D):
    """Integer winding of ``v`` around each grid cell, shape ``(ny-1, nx-1)``.

    Edge increments are computed once per edge, so the sum over any union of
    cells equals the increment sum along its outer boundary exactly.  Returns
    ``(windings, valid, touching_zero)``: cells with all corners inside the
    mask and nonzero, and cells with a vanishing corner.
    """
    v = np.asarray(v, dtype=complex)
    live = grid.mask & (np.abs(v) > TAU0)
    ex = np.angle(v[:, 1:] * np.conj(v[:, :-1]))
    ey = np.angle(v[1:, :] * np.conj(v[:-1, :]))
    circ = ex[:-1, :] + ey[:, 1:] - ex[1:, :] - ey[:, :-1]
    w = np.rint(circ / (2 * np.pi)).astype(int)
    inmask = grid.mask[:-1, :-1] & grid.mask[1:, :-1] & grid.mask[:-1, 1:] & grid.mask[1:, 1:]
    valid = inmask & live[:-1, :-1] & live[1:, :-1] & live[:-1, 1:] & live[1:, 1:]
    return np.where(valid, w, 0), valid, inmask & ~valid


def _loop_degree(v, grid, center, radius):
    m = max(64, int(math.ceil(8 * math.pi * radius / grid.h)))
    while True:
        try:
            return winding_degree(v, grid, LoopSpec(center, radius, m))
        except UndersampledLoopError:
            if m >= 16384:
                raise
            m *= 2


def detect_singularities(v: np.ndarray, grid: Grid2D, min_sep: float | None = None) -> list[SingularityReport]:
    """Cluster cells of nonzero winding (and cells touching ``v = 0``) within ``min_sep``.

    Each cluster's degree is confirmed by the winding on a circle of radius
    ``3 min_sep``; clusters whose circle leaves the mask, or that lie within
    ``min_sep`` of the mask boundary, are flagged unreliable and keep the cell
    sum.  Zero-degree clusters are dropped.  Sorted by ``|degree|`` then position.
    """
    min_sep = 6 * grid.h if min_sep is None else float(min_sep)
    w, valid, zero = plaquette_windings(v, grid)
    cand = (w != 0) | zero
    jj, ii = np.nonzero(cand)
    if jj.size == 0:
        return []
    ox, oy = grid.origin
    pts = np.column_stack([ox + (ii + 0.5) * grid.h, oy + (jj + 0.5) * grid.h])
    pairs = cKDTree(pts).query_pairs(min_sep, output_type="ndarray")
    n = len(pts)
    adj = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) if len(pairs) else coo_matrix((n, n))
    ncomp, labels = connected_components(adj, directed=False)
    dist = grid.dist_to_boundary()
    reports = []
    for c in range(ncomp):
        sel = labels == c
        wc = w[jj[sel], ii[sel]]
        pdeg = int(wc.sum())
        wt = np.abs(wc).astype(float)
        if wt.sum() == 0:
            wt = np.ones_like(wt)
        loc = tuple((pts[sel] * wt[:, None]).sum(axis=0) / wt.sum())
        reliable = True
        deg = pdeg
        radius = 3 * min_sep
        try:
            deg = _loop_degree(v, grid, loc, radius)
        except (GridError, ValueError):
            reliable = False
        jn = int(round((loc[1] - oy) / grid.h))
        inn = int(round((loc[0] - ox) / grid.h))
        if 0 <= jn < grid.ny and 0 <= inn < grid.nx and dist[jn, inn] < min_sep:
            reliable = False
        if deg == 0:
            continue
        reports.append(SingularityReport(location=loc, degree=deg, plaquette_degree=pdeg, reliable=reliable,
                                         n_cells=int(sel.sum()), probe_radii=(radius,),
                                         tolerances={"min_sep": min_sep, "h": grid.h}))
    reports.sort(key=lambda r: (abs(r.degree), r.location[0], r.location[1]))
    return reports


# -- classification ------------------------------------------------------------------
def _circle(v, grid, center, r, m):
    phi = 2 * np.pi * np.arange(m) / m
    xs = center[0] + r * np.cos(phi)
    ys = center[1] + r * np.sin(phi)
    vals, ok = sample_bilinear(np.asarray(v, dtype=complex), grid, xs, ys)
    if not ok.all():
        raise GridError(f"probe circle of radius {r:.4g} at {center} leaves the mask")
    a = np.abs(vals)
    if np.any(a < TAU0):
        raise ValueError("field vanishes on the probe circle")
    return phi, vals / a


def _longest_run(flags):
    """Start index and length of the longest circular run of True."""
    m = flags.size
    if flags.all():
        return 0, m
    if not flags.any():
        return 0, 0
    start0 = int(np.argmin(flags))  # a False entry; rotate so runs do not wrap
    f = np.roll(flags, -start0)
    best_len, best_start, cur, cur_start = 0, 0, 0, 0
    for k in range(m):
        if f[k]:
            if cur == 0:
                cur_start = k
            cur += 1
            if cur > best_len:
                best_len, best_start = cur, cur_start
        else:
            cur = 0
    return (best_start + start0) % m, best_len


def classify_singularity(v: np.ndarray, grid: Grid2D, report: SingularityReport, r_probe: float,
                         tol_v: float = TOL_V, tol_arc_deg: float = TOL_ARC_DEG, lip_factor: float = LIP_FACTOR,
                         m: int = 720) -> SingularityReport:
    """Fill ``kind``, ``xi`` and ``residual`` from the angular profile on probe circles.

    Vortex: ``|arg(v e^{-2i phi})| <= tol_v`` on circles of radius ``r`` and
    ``r/2``.  Half-disclination: the longest arc where ``|v - e^{2i phi}| <=
    tol_v`` spans a half circle within ``tol_arc_deg``, centred on ``xi``, and
    the other half has Lipschitz constant at most ``lip_factor / r``.
    """
    x0 = report.location
    radii = (r_probe, r_probe / 2)
    degs = [_loop_degree(v, grid, x0, r) for r in radii]
    if len(set(degs)) != 1:
        raise ValueError(f"degrees {degs} differ between probe radii {radii}")
    phi, vals = _circle(v, grid, x0, r_probe, m)
    templ = np.exp(2j * phi)
    tol = {"tol_v": tol_v, "tol_arc_deg": tol_arc_deg, "L_max": lip_factor / r_probe, "h": grid.h}
    out = SingularityReport(**{**report.__dict__})
    out.probe_radii = radii
    out.tolerances = {**report.tolerances, **tol}
    psi_max = max(float(np.max(np.abs(np.angle(vv * np.conj(np.exp(2j * pp))))))
                  for pp, vv in (_circle(v, grid, x0, r, m) for r in radii))
    if psi_max <= tol_v:
        out.kind, out.xi = "vortex", None
        out.residual = float(np.sqrt(np.mean(np.abs(vals - templ) ** 2)))
        return out
    close = np.abs(vals - templ) <= tol_v
    start, length = _longest_run(close)
    arc_deg = 360.0 * length / m
    if abs(arc_deg - 180.0) <= tol_arc_deg:
        mid = 2 * np.pi * (start + (length - 1) / 2.0) / m
        xi = np.array([np.cos(mid), np.sin(mid)])
        rel = (phi - mid + np.pi) % (2 * np.pi) - np.pi
        other = np.abs(rel) > np.pi / 2
        idx = np.nonzero(other)[0]
        nxt = (idx + 1) % m
        pair = other[nxt]
        dq = np.abs(vals[nxt[pair]] - vals[idx[pair]]) / (r_probe * 2 * np.pi / m)
        lip = float(dq.max()) if dq.size else 0.0
        if lip <= lip_factor / r_probe:
            const = -(xi[0] + 1j * xi[1]) ** 2
            tmpl = np.where(other, const, templ)
            out.kind, out.xi = "half_disclination", (float(xi[0]), float(xi[1]))
            out.residual = float(np.sqrt(np.mean(np.abs(vals - tmpl) ** 2)))
            out.tolerances["lipschitz"] = lip
            return out
    out.kind, out.xi = "unknown", None
    out.residual = float(np.sqrt(np.mean(np.abs(vals - templ) ** 2)))
    return out


def auto_probe_radius(grid: Grid2D, report: SingularityReport, others, r_core: float | None = None,
                      cap: float = 0.25) -> float:
    """Largest probe radius below ``cap`` keeping the circle inside the mask and away from other defects."""
    x0 = np.asarray(report.location)
    ox, oy = grid.origin
    j = int(round((x0[1] - oy) / grid.h))
    i = int(round((x0[0] - ox) / grid.h))
    r = min(cap, float(grid.dist_to_boundary()[j, i]) - 3 * grid.h)
    for o in others:
        if o is report:
            continue
        r = min(r, 0.5 * float(np.hypot(*(np.asarray(o.location) - x0))))
    floor = 2 * (r_core if r_core is not None else 4 * grid.h) + 4 * grid.h
    if r < floor:
        raise GridError(f"no admissible probe radius at {tuple(x0)} (max {r:.3g} < {floor:.3g})")
    return r


def analyze(v: np.ndarray, grid: Grid2D, min_sep: float | None = None, r_core: float | None = None):
    """Detect and classify all singularities."""
    reps = detect_singularities(v, grid, min_sep)
    out = []
    for rep in reps:
        try:
            r = auto_probe_radius(grid, rep, reps, r_core)
            out.append(classify_singularity(v, grid, rep, r))
        except (GridError, ValueError):
            rep.reliable = False
            out.append(rep)
    return out


# -- characteristics ------------------------------------------------------------------
@dataclass
class CharacteristicTrace:
    points: np.ndarray
    max_deviation: float
    reasons: tuple
    step: float

    @property
    def reason(self) -> str:
        return "; ".join(self.reasons)


def trace_characteristic(v: np.ndarray, grid: Grid2D, x_start, singularities=(), singular_margin: float | None = None,
                         max_length: float | None = None) -> CharacteristicTrace:
    """March both ways along ``x_start + R sigma(v(x_start))`` with step ``h/2``."""
    v = np.asarray(v, dtype=complex)
    margin = 4 * grid.h if singular_margin is None else float(singular_margin)
    x0, y0 = float(x_start[0]), float(x_start[1])
    val, ok = sample_bilinear(v, grid, np.array([x0]), np.array([y0]))
    if not ok[0]:
        raise GridError(f"start point {x_start} is outside the mask")
    if abs(val[0]) < 0.5:
        raise ValueError(f"|v| = {abs(val[0]):.3g} < 1/2 at the start point")
    sing = np.array([s.location if hasattr(s, "location") else s for s in singularities], dtype=float).reshape(-1, 2)
    if sing.size and np.min(np.hypot(sing[:, 0] - x0, sing[:, 1] - y0)) <= margin:
        raise ValueError("start point is within the singular margin")
    d = sqrt_branch(val[0] / abs(val[0]))
    step = grid.h / 2
    if max_length is None:
        max_length = 2 * grid.h * max(grid.nx, grid.ny)
    max_steps = int(max_length / step)
    vr = np.ascontiguousarray(v.real.ravel())
    vi = np.ascontiguousarray(v.imag.ravel())
    mk = grid.mask.ravel().astype(np.uint8)
    ox, oy = grid.origin
    pts, devs, reasons = [], [], []
    for sgn in (1.0, -1.0):
        ns, dev, why = kernels.march_line(vr, vi, mk, grid.nx, grid.ny, grid.h, ox, oy, x0, y0,
                                          sgn * d.real, sgn * d.imag, step, max_steps,
                                          np.ascontiguousarray(sing), margin)
        s = np.arange(1, ns + 1)
        pts.append(np.column_stack([x0 + sgn * s * step * d.real, y0 + sgn * s * step * d.imag]))
        devs.append(dev)
        reasons.append(kernels.REASON_NAMES[why])
    points = np.vstack([pts[1][::-1], [[x0, y0]], pts[0]])
    return CharacteristicTrace(points=points, max_deviation=float(max(devs)), reasons=tuple(reasons), step=step)


# -- log-law fit -------------------------------------------------------------------------
@dataclass
class LogLawFit:
    """Fits of ``S(h)`` by ``C h^2 ln(1/h)``, ``B h^2`` and ``A h^p``.

    Residuals are RMS relative errors ``S_model/S - 1``.
    """

    C_hat: float
    residual_log: float
    B_hat: float
    residual_quad: float
    A: float
    p: float
    residual_power: float
    spread: float

    @property
    def residual(self) -> float:
        return self.residual_log

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def loglaw_fit(table) -> LogLawFit:
    """Least-squares fits of a structure-function table ``[(|h|, S), ...]``."""
    arr = np.asarray(table, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("table must have rows (|h|, S)")
    hs, S = arr[:, 0], arr[:, 1]
    if np.unique(hs).size < 5:
        raise ValueError("need at least 5 distinct |h| values")
    if hs.max() / hs.min() < 8:
        raise ValueError("|h| values must span a factor of at least 8")
    if np.any(hs >= 1) or np.any(hs <= 0) or np.any(S <= 0):
        raise ValueError("need 0 < |h| < 1 and S > 0")

    def one_param(f):
        # minimise the relative residual: weights 1/S
        a = np.sum(f / S) / np.sum((f / S) ** 2)
        return a, float(np.sqrt(np.mean((a * f / S - 1) ** 2)))

    flog = hs ** 2 * np.log(1 / hs)
    C, rl = one_param(flog)
    B, rq = one_param(hs ** 2)
    M = np.column_stack([np.ones_like(hs), np.log(hs)])
    coef, *_ = np.linalg.lstsq(M, np.log(S), rcond=None)
    if np.linalg.matrix_rank(M) < 2:
        raise ValueError("degenerate design matrix")
    A, p = float(np.exp(coef[0])), float(coef[1])
    rp = float(np.sqrt(np.mean((A * hs ** p / S - 1) ** 2)))
    ratio = S / flog
    return LogLawFit(float(C), rl, float(B), rq, A, p, rp, float(ratio.max() / ratio.min()))


def growth_exponent(etas, values, bounds=(-1.0, 2.0)) -> float:
    """Exponent ``p`` of the best fit ``values ~ A + B eta^{-p}``.

    ``p -> 0`` is the logarithmic limit ``A + B ln(1/eta)``, used at ``p = 0``.
    Logarithmic growth gives ``p`` near zero; a power law ``eta^{-q}`` gives ``q``.
    """
    etas = np.asarray(etas, dtype=float)
    y = np.asarray(values, dtype=float)
    if etas.size < 3 or etas.size != y.size:
        raise ValueError("need at least 3 matching (eta, value) pairs")
    if np.any(etas <= 0):
        raise ValueError("eta values must be positive")

    def sse(p):
        f = np.log(1 / etas) if abs(p) < 1e-9 else etas ** (-p)
        A = np.column_stack([np.ones_like(f), f])
        c, *_ = np.linalg.lstsq(A, y, rcond=None)
        return float(np.sum((A @ c - y) ** 2))

    res = minimize_scalar(sse, bounds=bounds, method="bounded", options={"xatol": 1e-6})
    return float(res.x)
