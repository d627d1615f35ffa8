"""Structured-grid primitives.

Fields are plain numpy arrays indexed ``[j, i]`` (row ``j`` is the y index,
column ``i`` the x index) living on a :class:`Grid2D`.  Vector fields stack
their two components on a leading axis, shape ``(2, ny, nx)``; symmetric
tensor fields stack ``(T11, T12, T22)``, shape ``(3, ny, nx)``.

Values at masked-out nodes are carried along but ignored by every reduction.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.ndimage as ndi
import scipy.sparse as sp
from scipy.signal import fftconvolve

#: modulus below which a field value is treated as zero
TAU0 = 1e-12


class GridError(ValueError):
    """Raised on invalid grid geometry or stencil requests."""


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Node-centred rectangular grid with a domain mask.

    Node ``(j, i)`` sits at ``(origin[0] + i*h, origin[1] + j*h)``.
    """

    nx: int
    ny: int
    h: float
    origin: tuple[float, float] = (0.0, 0.0)
    mask: np.ndarray | None = None
    periodic: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise GridError(f"grid needs at least 3 nodes per axis, got {self.nx}x{self.ny}")
        if not self.h > 0:
            raise GridError(f"spacing must be positive, got {self.h}")
        if self.mask is None:
            m = np.ones((self.ny, self.nx), dtype=bool)
        else:
            m = np.asarray(self.mask, dtype=bool)
            if m.shape != (self.ny, self.nx):
                raise GridError(f"mask shape {m.shape} does not match grid ({self.ny}, {self.nx})")
        if not m.any():
            raise GridError("mask is empty")
        if self.periodic and not m.all():
            raise GridError("periodic grids must use the full rectangle")
        _, ncomp = ndi.label(m)
        if ncomp != 1:
            raise GridError(f"mask must be 4-connected, found {ncomp} components")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    # -- constructors -----------------------------------------------------
    @classmethod
    def square(cls, n: int, lo: float = -1.0, hi: float = 1.0, periodic: bool = False) -> "Grid2D":
        """``n x n`` nodes spanning ``[lo, hi]^2`` (endpoints are nodes)."""
        if periodic:
            h = (hi - lo) / n
        else:
            h = (hi - lo) / (n - 1)
        return cls(n, n, h, (lo, lo), periodic=periodic)

    @classmethod
    def disk(cls, n: int, radius: float = 1.0, center=(0.0, 0.0)) -> "Grid2D":
        """``n x n`` nodes on the bounding square of a disk, masked to the disk."""
        h = 2.0 * radius / (n - 1)
        ox, oy = center[0] - radius, center[1] - radius
        x = ox + h * np.arange(n)
        y = oy + h * np.arange(n)
        X, Y = np.meshgrid(x, y)
        mask = (X - center[0]) ** 2 + (Y - center[1]) ** 2 <= radius ** 2 * (1 + 1e-12)
        return cls(n, n, h, (ox, oy), mask=mask)

    @classmethod
    def annulus(cls, n: int, inner: float, outer: float = 1.0, center=(0.0, 0.0)) -> "Grid2D":
        g = cls.disk(n, outer, center)
        X, Y = g.coords()
        r = np.hypot(X - center[0], Y - center[1])
        return g.with_mask(g.mask & (r >= inner))

    def with_mask(self, mask: np.ndarray) -> "Grid2D":
        return Grid2D(self.nx, self.ny, self.h, self.origin, mask=mask, periodic=self.periodic)

    # -- geometry ---------------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def x(self) -> np.ndarray:
        return self.origin[0] + self.h * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.origin[1] + self.h * np.arange(self.ny)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinate arrays ``(X, Y)`` of shape ``(ny, nx)``."""
        if "coords" not in self._cache:
            X, Y = np.meshgrid(self.x, self.y)
            self._cache["coords"] = (X, Y)
        return self._cache["coords"]

    @property
    def boundary(self) -> np.ndarray:
        """Mask nodes having a masked-out (or off-grid) 4-neighbour."""
        if "boundary" not in self._cache:
            if self.periodic:
                b = np.zeros(self.shape, dtype=bool)
            else:
                padded = np.pad(self.mask, 1, constant_values=False)
                nb_all = (padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:])
                b = self.mask & ~nb_all
            self._cache["boundary"] = b
        return self._cache["boundary"]

    @property
    def interior(self) -> np.ndarray:
        return self.mask & ~self.boundary

    def integrate(self, f: np.ndarray, region: np.ndarray | None = None):
        """Node-sum quadrature ``sum f h^2`` over ``region`` (default: the mask)."""
        region = self.mask if region is None else (region & self.mask)
        return np.sum(np.where(region, f, 0.0)) * self.h ** 2

    def dist_to_boundary(self) -> np.ndarray:
        """Euclidean distance (length units) from each node to the nearest masked-out node."""
        if "dist" not in self._cache:
            if self.periodic:
                d = np.full(self.shape, np.inf)
            else:
                padded = np.pad(self.mask, 1, constant_values=False)
                d = ndi.distance_transform_edt(padded)[1:-1, 1:-1] * self.h
            self._cache["dist"] = d
        return self._cache["dist"]

    def ravel_index(self, j: int, i: int) -> int:
        return j * self.nx + i


# -- branch square root ------------------------------------------------------
def sqrt_branch(z):
    """Square root with argument in ``(-pi/2, pi/2]``: ``sqrt(r) e^{i theta/2}``, ``theta in (-pi, pi]``.

    Unlike ``np.sqrt`` this maps ``-r - 0j`` to ``i sqrt(r)``: the sign of a
    zero imaginary part never selects the branch.
    """
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    theta = np.angle(z)
    theta = np.where(theta <= -np.pi, np.pi, theta)
    theta = np.where((z.imag == 0) & (z.real < 0), np.pi, theta)
    w = np.sqrt(r) * np.exp(0.5j * theta)
    return w[()] if w.ndim == 0 else w


# -- finite differences -------------------------------------------------------
def _axis_operator(grid: Grid2D, axis: int) -> sp.csr_matrix:
    """Sparse first-derivative matrix along ``axis`` (1 = x, 0 = y)."""
    ny, nx = grid.shape
    n_ax = nx if axis == 1 else ny
    idx = np.arange(grid.size).reshape(grid.shape)
    m = grid.mask
    h = grid.h

    def shifted(k):
        """Index array and in-mask flag of the neighbour ``k`` steps along axis."""
        if grid.periodic:
            return np.roll(idx, -k, axis=axis), np.ones_like(m)
        pos = np.arange(n_ax) + k
        valid_pos = (pos >= 0) & (pos < n_ax)
        posc = np.clip(pos, 0, n_ax - 1)
        if axis == 1:
            nb = idx[:, posc]
            ok = m[:, posc] & valid_pos[None, :]
        else:
            nb = idx[posc, :]
            ok = m[posc, :] & valid_pos[:, None]
        return nb, ok

    (p1, ok1), (p2, ok2) = shifted(1), shifted(2)
    (m1, okm1), (m2, okm2) = shifted(-1), shifted(-2)
    rows, cols, vals = [], [], []

    def add(sel, entries):
        r = idx[sel]
        for colarr, w in entries:
            rows.append(r)
            cols.append(colarr[sel] if isinstance(colarr, np.ndarray) else r)
            vals.append(np.full(r.size, w / h))

    central = m & ok1 & okm1
    fwd2 = m & ~central & ok1 & ok2
    bwd2 = m & ~central & ~fwd2 & okm1 & okm2
    fwd1 = m & ~central & ~fwd2 & ~bwd2 & ok1
    bwd1 = m & ~central & ~fwd2 & ~bwd2 & ~fwd1 & okm1
    add(central, [(p1, 0.5), (m1, -0.5)])
    add(fwd2, [(None, -1.5), (p1, 2.0), (p2, -0.5)])
    add(bwd2, [(None, 1.5), (m1, -2.0), (m2, 0.5)])
    add(fwd1, [(None, -1.0), (p1, 1.0)])
    add(bwd1, [(None, 1.0), (m1, -1.0)])
    if rows:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        v = np.concatenate(vals)
    else:
        r = c = np.zeros(0, dtype=int)
        v = np.zeros(0)
    return sp.csr_matrix((v, (r, c)), shape=(grid.size, grid.size))


def diff_operators(grid: Grid2D) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Cached sparse ``(Dx, Dy)``: central in the interior, one-sided second order at the mask boundary."""
    if "D" not in grid._cache:
        grid._cache["D"] = (_axis_operator(grid, 1), _axis_operator(grid, 0))
    return grid._cache["D"]


def _apply(D, f, grid):
    return (D @ np.asarray(f).reshape(grid.size)).reshape(grid.shape)


def fd_gradient(f: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Gradient of a real or complex nodal field, shape ``(2, ny, nx)``; zero off-mask."""
    Dx, Dy = diff_operators(grid)
    return np.stack([_apply(Dx, f, grid), _apply(Dy, f, grid)])


def divergence(V: np.ndarray, grid: Grid2D) -> np.ndarray:
    """``d1 V1 + d2 V2``."""
    Dx, Dy = diff_operators(grid)
    return _apply(Dx, V[0], grid) + _apply(Dy, V[1], grid)


def curl2(V: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Scalar curl ``d1 V2 - d2 V1``."""
    Dx, Dy = diff_operators(grid)
    return _apply(Dx, V[1], grid) - _apply(Dy, V[0], grid)


# -- mollification -------------------------------------------------------------
def mollifier_kernel(eta: float, h: float, kernel: str = "bump") -> np.ndarray:
    """Discrete kernel with support radius ``eta``, normalised to unit discrete mass."""
    R = int(np.floor(eta / h))
    off = np.arange(-R, R + 1) * h
    X, Y = np.meshgrid(off, off)
    s = np.hypot(X, Y) / eta
    inside = s < 1.0
    if kernel == "bump":
        k = np.zeros_like(s)
        k[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    elif kernel == "truncated-gaussian":
        k = np.where(inside, np.exp(-0.5 * (3.0 * s) ** 2), 0.0)
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    return k / k.sum()


def mollify(f: np.ndarray, grid: Grid2D, eta: float, kernel: str = "bump") -> tuple[np.ndarray, np.ndarray]:
    """Convolve with ``rho_eta`` and return ``(f_eta, eroded_mask)``.

    Output is zero outside the eroded mask, i.e. outside the nodes whose whole
    kernel support lies in the domain.
    """
    if eta < 2 * grid.h * (1 - 1e-12):
        raise GridError(f"eta={eta} must be at least 2h={2 * grid.h}")
    K = mollifier_kernel(eta, grid.h, kernel)
    footprint = K > 0
    if grid.periodic:
        eroded = np.ones(grid.shape, dtype=bool)
        R = K.shape[0] // 2
        fp = np.pad(f, R, mode="wrap")
        out = fftconvolve(fp, K, mode="valid")
    else:
        eroded = ndi.binary_erosion(grid.mask, structure=footprint, border_value=0)
        if not eroded.any():
            raise GridError("eroded mask is empty; eta too large for the domain")
        out = fftconvolve(np.where(grid.mask, f, 0.0), K, mode="same")
    if not np.iscomplexobj(f):
        out = out.real
    return np.where(eroded, out, 0.0), eroded


def shift_diff(f: np.ndarray, grid: Grid2D, offset: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """``f(x + offset*h) - f(x)`` with its validity mask (both nodes inside the domain).

    ``offset`` is ``(di, dj)`` in node units along (x, y).
    """
    shifted, valid = shift_field(f, grid, offset)
    return np.where(valid, shifted - f, 0.0), valid


def shift_field(f: np.ndarray, grid: Grid2D, offset: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """``f(x + offset*h)`` and the mask of nodes where it is defined."""
    di, dj = int(offset[0]), int(offset[1])
    if grid.periodic:
        return np.roll(f, (-dj, -di), axis=(0, 1)), np.ones(grid.shape, dtype=bool)
    if abs(di) >= grid.nx or abs(dj) >= grid.ny:
        raise GridError(f"offset {offset} exceeds grid extent")
    out = np.zeros_like(f)
    mshift = np.zeros(grid.shape, dtype=bool)
    ys = slice(max(0, -dj), grid.ny - max(0, dj))
    xs = slice(max(0, -di), grid.nx - max(0, di))
    ys2 = slice(max(0, dj), grid.ny - max(0, -dj))
    xs2 = slice(max(0, di), grid.nx - max(0, -di))
    out[ys, xs] = f[ys2, xs2]
    mshift[ys, xs] = grid.mask[ys2, xs2]
    valid = grid.mask & mshift
    if not valid.any():
        raise GridError(f"offset {offset} leaves no overlap with the mask")
    return out, valid


# -- interpolation ---------------------------------------------------------------
def sample_bilinear(values: np.ndarray, grid: Grid2D, xs, ys) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear samples at physical points and a flag: all four supporting nodes in the mask."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    fx = (xs - grid.origin[0]) / grid.h
    fy = (ys - grid.origin[1]) / grid.h
    i0 = np.floor(fx).astype(int)
    j0 = np.floor(fy).astype(int)
    inside = (i0 >= 0) & (j0 >= 0) & (i0 < grid.nx - 1) & (j0 < grid.ny - 1)
    i0c = np.clip(i0, 0, grid.nx - 2)
    j0c = np.clip(j0, 0, grid.ny - 2)
    tx = fx - i0c
    ty = fy - j0c
    m = grid.mask
    ok = inside & m[j0c, i0c] & m[j0c, i0c + 1] & m[j0c + 1, i0c] & m[j0c + 1, i0c + 1]
    v = ((1 - tx) * (1 - ty) * values[j0c, i0c] + tx * (1 - ty) * values[j0c, i0c + 1]
         + (1 - tx) * ty * values[j0c + 1, i0c] + tx * ty * values[j0c + 1, i0c + 1])
    return v, ok


def resample(values: np.ndarray, src: Grid2D, dst: Grid2D, fill: np.ndarray) -> np.ndarray:
    """Bilinear transfer of a field from ``src`` to the nodes of ``dst``.

    Nodes whose stencil leaves the source mask take their value from ``fill``.
    """
    x, y = dst.coords()
    v, ok = sample_bilinear(np.asarray(values), src, x, y)
    return np.where(dst.mask, np.where(ok, v, fill), 0)


# -- tensor/complex correspondence --------------------------------------------------
def tensor_from_complex(v: np.ndarray, trace: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Symmetric tensor ``(T11, T12, T22)`` with ``T11 - T22 = Re v``, ``2 T12 = Im v``, ``Tr T = trace``."""
    v = np.asarray(v, dtype=complex)
    trace = np.asarray(trace, dtype=float)
    if np.any(trace < np.abs(v) * (1 - rtol) - 1e-300):
        raise ValueError("invalid tensor data: trace must be at least |v| pointwise")
    return np.stack([(trace + v.real) / 2, v.imag / 2, (trace - v.real) / 2])


def complex_from_tensor(T: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`tensor_from_complex`: returns ``(v, trace)``."""
    T11, T12, T22 = T
    return (T11 - T22) + 2j * T12, T11 + T22


def rank_one_tensor(u: np.ndarray) -> np.ndarray:
    """``u (x) u`` for a complex-encoded real vector field ``u``."""
    u = np.asarray(u, dtype=complex)
    return np.stack([u.real ** 2, u.real * u.imag, u.imag ** 2])


# -- field dumps ---------------------------------------------------------------------
def dump_csv(path, v: np.ndarray, grid: Grid2D) -> None:
    """Write ``x,y,re,im,mask`` rows, row-major by y then x, 17 significant digits."""
    X, Y = grid.coords()
    v = np.asarray(v, dtype=complex)
    with open(path, "w", newline="") as fh:
        fh.write("x,y,re,im,mask\n")
        for j in range(grid.ny):
            lines = [
                f"{X[j, i]:.17g},{Y[j, i]:.17g},{v[j, i].real:.17g},{v[j, i].imag:.17g},{int(grid.mask[j, i])}\n"
                for i in range(grid.nx)
            ]
            fh.writelines(lines)


def load_csv(path) -> tuple[np.ndarray, Grid2D]:
    """Read a field dump back into ``(v, grid)``."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [c.strip() for c in header] != ["x", "y", "re", "im", "mask"]:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = np.array([[float(c) for c in row] for row in reader if row])
    xs = np.unique(rows[:, 0])
    ys = np.unique(rows[:, 1])
    nx, ny = xs.size, ys.size
    if nx * ny != rows.shape[0]:
        raise ValueError(f"{path}: {rows.shape[0]} rows do not form a {nx}x{ny} grid")
    h = (xs[-1] - xs[0]) / (nx - 1)
    v = (rows[:, 2] + 1j * rows[:, 3]).reshape(ny, nx)
    mask = rows[:, 4].reshape(ny, nx) > 0.5
    return v, Grid2D(nx, ny, h, (xs[0], ys[0]), mask=mask)
