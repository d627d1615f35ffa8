"""Entropies for unoriented fields and their productions.

An entropy is stored as an :class:`EntropySpec`: either a trigonometric index
``n`` (closed forms) or finitely many Fourier coefficients of ``lambda``,
evaluated through ``Phi(e^{it}) = lambda(t) (-sin t, cos t) - lambda'(t) (cos t, sin t)``.
Values are returned with the vector index first, shape ``(2, ...)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import TAU0, Grid2D, divergence, fd_gradient
from .ops import delta_h

_A = np.array([1.0, -1.0j])  # (1, -i)
_B = np.array([1.0, 1.0j])  # (1, i)


def chi0(r, s: float = 0.49):
    """Smooth cutoff with ``chi0(1) = 1`` and support ``|r - 1| < s``."""
    r = np.asarray(r, dtype=float)
    t = ((r - 1.0) / s) ** 2
    inside = t < 1.0
    safe = np.where(inside, t, 0.0)
    return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe)), 0.0)


def _vec(a, b, za, zb):
    """``za * a + zb * b`` for constant 2-vectors ``a``, ``b``."""
    return np.stack([a[0] * za + b[0] * zb, a[1] * za + b[1] * zb])


def _angle_l(z):
    """Argument in ``(-pi, pi]`` computed in extended precision."""
    zl = np.asarray(z).astype(np.clongdouble)
    th = np.arctan2(zl.imag, zl.real)
    return np.where((zl.imag == 0) & (zl.real < 0), np.pi, th)


def _unit(z):
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    return np.where(r > TAU0, z / np.where(r > TAU0, r, 1.0), 1.0), r


# -- specs ---------------------------------------------------------------------
@dataclass(frozen=True)
class EntropySpec:
    """An entropy given by a trigonometric index or by Fourier coefficients of lambda.

    Attributes:
        kind: ``"trig"`` or ``"lambda"``.
        n: index for ``kind="trig"``.
        coeffs: ``((k, c_k), ...)`` for ``kind="lambda"``.
        cutoff_s: half-width of the cutoff applied off the unit circle.
    """

    kind: str
    n: int | None = None
    coeffs: tuple = field(default=())
    cutoff_s: float = 0.49

    def __post_init__(self):
        if self.kind == "trig":
            if self.n is None:
                raise ValueError("trig entropy needs an index n")
        elif self.kind == "lambda":
            if not self.coeffs:
                raise ValueError("lambda entropy needs at least one coefficient")
        else:
            raise ValueError(f"unknown entropy kind {self.kind!r}")
        if not 0 < self.cutoff_s <= 0.5:
            raise ValueError("cutoff half-width must lie in (0, 0.5]")

    @property
    def is_even(self) -> bool:
        """Whether ``Phi(-z) = Phi(z)``, i.e. the entropy descends to unoriented fields."""
        if self.kind == "trig":
            return self.n % 2 == 1
        return all(k % 2 == 1 or c == 0 for k, c in self.coeffs)

    def lambda_coeffs(self) -> tuple:
        if self.kind == "trig":
            return ((self.n, 2j),)
        return self.coeffs

    def lam(self, theta, order: int = 0):
        """``lambda^{(order)}(theta)`` summed from the coefficients."""
        theta = np.asarray(theta, dtype=float)
        out = np.zeros(theta.shape, dtype=complex)
        for k, c in self.lambda_coeffs():
            out = out + c * (1j * k) ** order * np.exp(1j * k * theta)
        return out

    def __str__(self) -> str:
        return format_entropy(self)


def trig_entropy(n: int, cutoff_s: float = 0.49) -> EntropySpec:
    return EntropySpec("trig", n=int(n), cutoff_s=cutoff_s)


def entropy_from_lambda(coeffs, cutoff_s: float = 0.49) -> EntropySpec:
    """Spec from ``{k: c_k}`` or ``[(k, c_k), ...]``; zero coefficients are dropped."""
    items = coeffs.items() if isinstance(coeffs, dict) else coeffs
    clean = tuple(sorted(((int(k), complex(c)) for k, c in items), key=lambda t: t[0]))
    if not clean:
        raise ValueError("empty coefficient list")
    ks = [k for k, _ in clean]
    if len(set(ks)) != len(ks):
        raise ValueError("repeated Fourier index")
    nonzero = tuple((k, c) for k, c in clean if c != 0) or clean[:1]
    return EntropySpec("lambda", coeffs=nonzero, cutoff_s=cutoff_s)


def parse_entropy(text: str) -> EntropySpec:
    """Parse ``kind=trig n=3`` or ``kind=lambda k=-3:0+2i,1:1``."""
    fields = {}
    for tok in text.split():
        if "=" not in tok:
            raise ValueError(f"bad entropy token {tok!r}")
        key, val = tok.split("=", 1)
        fields[key.strip()] = val.strip()
    kind = fields.pop("kind", None)
    s = float(fields.pop("s", 0.49))
    if kind == "trig":
        n = fields.pop("n", None)
        if n is None:
            raise ValueError("trig entropy needs n=")
        spec = trig_entropy(int(n), s)
    elif kind == "lambda":
        k = fields.pop("k", None)
        if not k:
            raise ValueError("lambda entropy needs k=")
        pairs = []
        for item in k.split(","):
            idx, val = item.split(":")
            pairs.append((int(idx), complex(val.replace("i", "j"))))
        spec = entropy_from_lambda(pairs, s)
    else:
        raise ValueError(f"unknown entropy kind {kind!r}")
    if fields:
        raise ValueError(f"unknown entropy keys: {sorted(fields)}")
    return spec


def _fmt_complex(c: complex) -> str:
    return f"{c.real:.17g}{c.imag:+.17g}i"


def format_entropy(spec: EntropySpec) -> str:
    tail = "" if spec.cutoff_s == 0.49 else f" s={spec.cutoff_s:.17g}"
    if spec.kind == "trig":
        return f"kind=trig n={spec.n}{tail}"
    body = ",".join(f"{k}:{_fmt_complex(c)}" for k, c in spec.coeffs)
    return f"kind=lambda k={body}{tail}"


# -- evaluation ------------------------------------------------------------------
def trig_closed_form(n: int, z):
    """``(n-1) z^{n+1} (1,-i) + (n+1) z^{n-1} (1,i)`` for unit ``z``.

    Powers are formed in extended precision; the result has the input's
    precision (complex128 unless ``z`` is ``clongdouble``).
    """
    z = np.asarray(z)
    out_dtype = np.clongdouble if z.dtype == np.clongdouble else complex
    zl = z.astype(np.clongdouble)
    r = np.abs(zl)
    zl = np.where(r > 0, zl / np.where(r > 0, r, 1), zl)
    val = _vec(_A.astype(np.clongdouble), _B.astype(np.clongdouble), (n - 1) * zl ** (n + 1), (n + 1) * zl ** (n - 1))
    return val.astype(out_dtype)


def trig_half_angle(n: int, w):
    """``Phi^n(sigma(w))`` for odd ``n = 2m+1`` and unit ``w``; no branch cut involved."""
    if n % 2 != 1:
        raise ValueError(f"half-angle form needs odd n, got {n}")
    m = (n - 1) // 2
    w = np.asarray(w, dtype=complex)
    return 2 * _vec(_A, _B, m * w ** (m + 1), (m + 1) * w ** m)


def upsilon(spec: EntropySpec, theta):
    """``lambda(t) (-sin t, cos t) - lambda'(t) (cos t, sin t)``, summed in extended precision."""
    theta = np.asarray(theta, dtype=np.longdouble)
    lam = np.zeros(theta.shape, dtype=np.clongdouble)
    dlam = np.zeros(theta.shape, dtype=np.clongdouble)
    for k, c in spec.lambda_coeffs():
        ek = np.exp(1j * np.longdouble(k) * theta)
        lam += c * ek
        dlam += c * (1j * k) * ek
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([-lam * s - dlam * c, lam * c - dlam * s]).astype(complex)


def upsilon_dtheta(spec: EntropySpec, theta):
    """``d/dtheta`` of :func:`upsilon`: ``-(lambda'' + lambda)(t) (cos t, sin t)``."""
    theta = np.asarray(theta, dtype=float)
    k = spec.lam(theta, 2) + spec.lam(theta)
    return np.stack([-k * np.cos(theta), -k * np.sin(theta)])


def eval_entropy(spec: EntropySpec, z, half_angle: bool = False):
    """Evaluate ``Phi(z)``, or ``Phi(sigma(z))`` when ``half_angle`` is set.

    Off the unit circle the value on ``z/|z|`` is multiplied by the cutoff of
    ``|z|`` (of ``|sigma(z)| = sqrt|z|`` in half-angle mode).
    """
    z = np.asarray(z, dtype=complex)
    zu, r = _unit(z)
    if half_angle:
        if not spec.is_even:
            raise ValueError(f"half-angle evaluation needs an even entropy, got {spec}")
        cut = chi0(np.sqrt(r), spec.cutoff_s)
        if spec.kind == "trig":
            val = trig_half_angle(spec.n, zu)
        else:
            val = upsilon(spec, _angle_l(zu) / 2)
    else:
        cut = chi0(r, spec.cutoff_s)
        if spec.kind == "trig":
            val = trig_closed_form(spec.n, zu)
        else:
            val = upsilon(spec, _angle_l(zu))
    return val * cut


def eval_entropy_dtheta(spec: EntropySpec, theta):
    """Exact ``d/dtheta Phi(e^{i theta})``."""
    theta = np.asarray(theta, dtype=float)
    if spec.kind == "trig":
        n = spec.n
        z = np.exp(1j * theta)
        return 1j * (n * n - 1) * _vec(_A, _B, z ** (n + 1), z ** (n - 1))
    return upsilon_dtheta(spec, theta)


def jin_kohn(which: int, z):
    """Jin-Kohn entropies ``Sigma_1`` and ``Sigma_2`` at unit ``z``, shape ``(2, ...)``."""
    z = np.asarray(z, dtype=complex)
    z1, z2 = z.real, z.imag
    if which == 1:
        return np.stack([z2 * (1 - (2 / 3) * z2 ** 2), z1 * (1 - (2 / 3) * z1 ** 2)])
    if which == 2:
        return (2 / 3) * np.stack([z1 ** 3, -z2 ** 3])
    raise ValueError("which must be 1 or 2")


# -- fields and productions -----------------------------------------------------------
@dataclass
class Measure2D:
    """Node density approximating a distribution; integrals are node sums times ``h^2``."""

    density: np.ndarray
    grid: Grid2D
    support: np.ndarray

    def _region(self, region):
        return self.support if region is None else (self.support & region)

    def mass(self, region: np.ndarray | None = None):
        sel = self._region(region)
        return np.sum(self.density[sel]) * self.grid.h ** 2

    def tv(self, region: np.ndarray | None = None) -> float:
        sel = self._region(region)
        return float(np.sum(np.abs(self.density[sel])) * self.grid.h ** 2)

    def pairing(self, zeta: np.ndarray):
        return np.sum((self.density * zeta)[self.support]) * self.grid.h ** 2

    def max_abs(self, region: np.ndarray | None = None) -> float:
        sel = self._region(region)
        return float(np.max(np.abs(self.density[sel]))) if sel.any() else 0.0


def entropy_field(spec: EntropySpec, v: np.ndarray, grid: Grid2D, mode: str = "unoriented") -> np.ndarray:
    """``Phi(sigma(v))`` (unoriented) or ``Phi(v)`` (oriented) per node, shape ``(2, ny, nx)``."""
    if mode == "unoriented":
        if not spec.is_even:
            raise ValueError(f"entropy {spec} is not even; unoriented mode needs odd n / odd Fourier support")
        out = eval_entropy(spec, v, half_angle=True)
    elif mode == "oriented":
        out = eval_entropy(spec, v, half_angle=False)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return np.where(grid.mask, out, 0.0)


def entropy_production(spec: EntropySpec, v: np.ndarray, grid: Grid2D, mode: str = "unoriented") -> Measure2D:
    """Finite-difference divergence of :func:`entropy_field`."""
    F = entropy_field(spec, v, grid, mode)
    dens = np.where(grid.mask, divergence(F, grid), 0.0)
    return Measure2D(dens, grid, grid.mask.copy())


def _R(theta, grid, grad_theta):
    g = fd_gradient(theta, grid) if grad_theta is None else grad_theta
    return np.cos(theta) * g[0] + np.sin(theta) * g[1]


def production_oracle_lambda(coeffs, theta: np.ndarray, grid: Grid2D, grad_theta=None) -> Measure2D:
    """Closed-form production ``-(lambda'' + lambda)(theta) R[theta]`` for ``v = e^{2 i theta}``.

    ``grad_theta`` may be given analytically; otherwise it is differenced.
    """
    spec = coeffs if isinstance(coeffs, EntropySpec) else entropy_from_lambda(coeffs)
    R = _R(theta, grid, grad_theta)
    dens = -(spec.lam(theta, 2) + spec.lam(theta)) * R
    return Measure2D(np.where(grid.mask, dens, 0.0), grid, grid.mask.copy())


def rot_oracle_theta(theta: np.ndarray, grid: Grid2D, grad_theta=None) -> np.ndarray:
    """``R[theta] (cos theta, sin theta)``, the rot of ``e^{2 i theta}``."""
    R = _R(theta, grid, grad_theta)
    return np.where(grid.mask, np.stack([R * np.cos(theta), R * np.sin(theta)]), 0.0)


# -- wedge identities --------------------------------------------------------------
def wedge(a, b):
    """``a_1 b_2 - a_2 b_1`` over the leading axis."""
    return a[0] * b[1] - a[1] * b[0]


def wedge_identity_check(n: int, z, w) -> dict:
    """Residuals of the three wedge identities for unit ``z``, ``w`` (max abs over samples).

    Inputs are projected onto the circle and both sides are evaluated in
    extended precision, so the residual measures the identity rather than the
    ``O(n eps)`` drift of ``|z^n|`` for float64 samples.
    """
    z = np.asarray(z, dtype=np.clongdouble)
    w = np.asarray(w, dtype=np.clongdouble)
    z = z / np.abs(z)
    w = w / np.abs(w)
    Pz, Pw = trig_closed_form(n, z), trig_closed_form(n, w)
    Mz, Mw = trig_closed_form(-n, z), trig_closed_form(-n, w)
    q = z * np.conj(w)
    r1 = wedge(Pz, Mw) - 2j * ((n + 1) ** 2 * q ** (n - 1) - (n - 1) ** 2 * q ** (n + 1))
    r2 = wedge(Pz, Mz) - 8j * n
    rhs3 = 2j * ((n + 1) ** 2 * np.abs(w ** (n - 1) - z ** (n - 1)) ** 2
                 - (n - 1) ** 2 * np.abs(w ** (n + 1) - z ** (n + 1)) ** 2)
    r3 = wedge(Pz - Pw, Mz - Mw) - rhs3
    return {"pair": float(np.max(np.abs(r1.astype(complex)))), "diagonal": float(np.max(np.abs(r2.astype(complex)))),
            "difference": float(np.max(np.abs(r3.astype(complex))))}


# -- q_n and Q_k --------------------------------------------------------------------
def _unit_pair(v, grid, offset):
    from .grid import shift_field

    d, valid = delta_h(v, grid, offset)
    vs, _ = shift_field(np.asarray(v, dtype=complex), grid, offset)
    a, _ = _unit(v)
    b, _ = _unit(vs)
    return a, b, d, valid


def _q_from_pair(a, b, n):
    DP = trig_half_angle(n, b) - trig_half_angle(n, a)
    DM = trig_half_angle(-n, b) - trig_half_angle(-n, a)
    return (wedge(DP, DM) / (2j * (n - 1) ** 2 * (n + 1) ** 2)).real


def qn_density(v: np.ndarray, grid: Grid2D, offset: tuple[int, int], n: int):
    """``q_n`` from the wedge of ``D_h Phi^{+-n}(sigma(v))``; returns ``(q, valid)``."""
    if n < 3 or n % 2 != 1:
        raise ValueError(f"q_n needs odd n >= 3, got {n}")
    a, b, _, valid = _unit_pair(v, grid, offset)
    return np.where(valid, _q_from_pair(a, b, n), 0.0), valid


def Qk_density(v: np.ndarray, grid: Grid2D, offset: tuple[int, int], k: int):
    """``Q_k = sum_{m=2^k}^{2^{k+1}-1} q_{2m+1}``; returns ``(Q, valid)``."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    a, b, _, valid = _unit_pair(v, grid, offset)
    Q = sum(_q_from_pair(a, b, 2 * m + 1) for m in range(2 ** k, 2 ** (k + 1)))
    return np.where(valid, Q, 0.0), valid


def qn_closed_form(delta, n: int):
    m = (n - 1) // 2
    h = np.pi * np.asarray(delta) / 2
    return np.sin(m * h) ** 2 / m ** 2 - np.sin((m + 1) * h) ** 2 / (m + 1) ** 2


def Qk_closed_form(delta, k: int):
    return np.sin((np.pi / 2) * 2 ** k * np.asarray(delta)) ** 4 / 2 ** (2 * k)


# -- Dirac test ----------------------------------------------------------------------
@dataclass
class DiracReport:
    """Fourier coefficients ``c_k`` (``k = 1..K``) of an empirical measure on the circle."""

    coeffs: np.ndarray
    deficit: float
    residuals: np.ndarray

    def to_dict(self) -> dict:
        return {"coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs],
                "deficit": self.deficit, "residuals": [float(r) for r in self.residuals]}


def dirac_test(samples, K: int = 4) -> DiracReport:
    """``c_k = mean(w^{-k})``, deficit ``1 - |c_1|^2`` and ``r_m = |(1-|c_m|^2) - m^2 (1-|c_1|^2)|``."""
    w = np.asarray(samples, dtype=complex).ravel()
    if w.size == 0:
        raise ValueError("dirac_test needs at least one sample")
    if K < 1:
        raise ValueError("K must be >= 1")
    w, _ = _unit(w)
    ks = np.arange(1, K + 1)
    c = np.array([np.mean(w ** (-k)) for k in ks])
    deficit = float(min(1.0, max(0.0, 1.0 - abs(c[0]) ** 2)))
    res = np.abs((1 - np.abs(c) ** 2) - ks ** 2 * (1 - abs(c[0]) ** 2))
    return DiracReport(coeffs=c, deficit=deficit, residuals=res)
