from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unoriented_ag.analysis import plaquette_windings
from unoriented_ag.grid import Grid2D, GridError, rank_one_tensor
from unoriented_ag.ops import (LoopSpec, PoissonSolveConfig, PoissonSolver, SolverError, UndersampledLoopError,
                               conjugate_gradient, delta_h, director_lift, hminus1_norm, jacobian_density, rot,
                               rot_tensor, winding_degree)
from unoriented_ag.scenarios import half_disclination, smooth, vortex


pytestmark = pytest.mark.filterwarnings("ignore:invalid value:RuntimeWarning")


def _interior_err(a, b, grid):
    return np.max(np.linalg.norm(a - b, axis=0)[grid.interior])


# -- rot --------------------------------------------------------------------------
def test_rot_gradient_director_vanishes():
    g = Grid2D.square(33, 0.5, 1.5)
    x, y = g.coords()
    v = (x + 1j * y) ** 2
    assert np.max(np.abs(rot(v, g))[:, g.interior]) < 1e-10


def test_rot_of_u_eq_ix1():
    g = Grid2D.square(33, -1.0, 1.0)
    x, _ = g.coords()
    v = (-x ** 2).astype(complex)
    exact = np.stack([np.zeros_like(x), x])
    live = g.interior & (np.abs(x) > 1e-9)
    assert np.max(np.linalg.norm(rot(v, g) - exact, axis=0)[live]) < 1e-10


def test_rot_vortex_decays_under_refinement():
    errs = []
    for n in (65, 129):
        g = Grid2D.square(n, -1.0, 1.0)
        x, y = g.coords()
        v = vortex(g, r_core=0.0)
        far = g.interior & (np.hypot(x, y) > 0.3)
        errs.append(np.max(np.linalg.norm(rot(v, g), axis=0)[far]))
    assert errs[1] < errs[0] / 1.8


def test_rot_is_zero_below_threshold():
    g = Grid2D.square(9)
    assert np.all(rot(np.zeros(g.shape, complex), g) == 0)


def test_rot_recovers_curl_times_u_second_order():
    errs = []
    for n in (33, 65, 129):
        g = Grid2D.square(n, 0.0, 1.0)
        x, y = g.coords()
        u = np.exp(1j * (x * y + y / 2)) * (1 + 0.3 * x)
        # curl u for u = (u1, u2): d1 u2 - d2 u1
        ph = x * y + y / 2
        a = 1 + 0.3 * x
        u1, u2 = a * np.cos(ph), a * np.sin(ph)
        d1u2 = 0.3 * np.sin(ph) + a * np.cos(ph) * y
        d2u1 = -a * np.sin(ph) * (x + 0.5)
        exact = (d1u2 - d2u1) * np.stack([u1, u2])
        errs.append(_interior_err(rot(u ** 2, g), exact, g))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8)


def test_rot_tensor_matches_rot(rng):
    g = Grid2D.square(65, -1.0, 1.0)
    v = smooth(g, seed=4)
    u = np.sqrt(v)
    T = rank_one_tensor(u)
    assert _interior_err(rot_tensor(T, g), rot(v, g), g) < 1e-10 + 10 * g.h ** 2


def test_rot_tensor_constant_and_ix1():
    g = Grid2D.square(33, -1.0, 1.0)
    T = rank_one_tensor(np.full(g.shape, np.exp(0.3j)))
    assert np.max(np.abs(rot_tensor(T, g))) < 1e-13
    x, _ = g.coords()
    T = rank_one_tensor(1j * x)
    live = g.interior & (np.abs(x) > 1e-9)
    out = rot_tensor(T, g)
    assert np.max(np.abs(out[0][live])) < 1e-10 and np.max(np.abs(out[1][live] - x[live])) < 1e-10


# -- lifting ---------------------------------------------------------------------
def test_lift_constant():
    g = Grid2D.square(11)
    res = director_lift(np.ones(g.shape, complex), g, (5, 5))
    assert np.all(res.u[g.mask] == 1.0) and res.wall_edges == 0


def _annulus(n=81):
    g0 = Grid2D.square(n, -1.0, 1.0)
    x, y = g0.coords()
    mask = (np.hypot(x, y) >= 0.3) & (np.hypot(x, y) <= 1.0)
    return g0, Grid2D(n, n, g0.h, origin=g0.origin, mask=mask), x + 1j * y


def test_lift_odd_winding_annulus_has_one_cut():
    # e^{i theta} has no continuous square root around the hole
    g0, g, z = _annulus()
    v = np.where(g.mask, z / np.abs(z), 0)
    res = director_lift(v, g, (40, 70))
    assert res.wall_length == pytest.approx(0.7, rel=0.15)


def test_lift_even_winding_annulus_is_continuous():
    g0, g, z = _annulus()
    v = np.where(g.mask, vortex(g0, r_core=0.0), 0)
    assert director_lift(v, g, (40, 70)).wall_edges == 0


def test_lift_exact_square_root():
    g0 = Grid2D.square(41, -1.0, 1.0)
    x, y = g0.coords()
    mask = np.hypot(x - 0.5, y) < 0.4
    g = Grid2D(41, 41, g0.h, origin=g0.origin, mask=mask)
    z = x + 1j * y
    v = np.where(mask, z ** 2 / np.abs(z) ** 2, 0)
    res = director_lift(v, g, (20, 30))
    assert np.max(np.abs(res.u ** 2 - v)[mask]) == pytest.approx(0.0, abs=1e-15)
    target = z / np.abs(z)
    assert np.max(np.abs(res.u - target)[mask]) < 1e-12 or np.max(np.abs(res.u + target)[mask]) < 1e-12
    assert res.wall_edges == 0


def test_lift_reports_excluded_and_bad_seed():
    g = Grid2D.square(11)
    v = np.ones(g.shape, complex)
    v[3, 3] = 0
    res = director_lift(v, g, (5, 5))
    assert res.excluded[3, 3] and not res.lifted[3, 3]
    with pytest.raises(ValueError):
        director_lift(v, g, (3, 3))


# -- delta_h ----------------------------------------------------------------------
def test_delta_h_examples():
    g = Grid2D.square(3)
    v = np.ones(g.shape, complex)
    d, ok = delta_h(v, g, (1, 0))
    assert np.all(d[ok] == 0)
    v[:, 1] = 1j
    d, _ = delta_h(v, g, (1, 0))
    assert d[1, 0] == pytest.approx(0.5)
    v[:, 1] = -1
    d, _ = delta_h(v, g, (1, 0))
    assert d[1, 0] == 1.0


def test_delta_h_antisymmetric(rng):
    g = Grid2D.square(20)
    v = np.exp(1j * rng.uniform(-3, 3, g.shape))
    d1, ok1 = delta_h(v, g, (1, 0))
    d2, ok2 = delta_h(v, g, (-1, 0))
    a, b = d1[:, :-1], d2[:, 1:]
    sel = ok1[:, :-1] & ok2[:, 1:] & (a != 1.0)
    assert np.allclose(a[sel], -b[sel], atol=1e-14)


# -- winding ----------------------------------------------------------------------
def test_winding_examples():
    g = Grid2D.disk(129)
    assert winding_degree(np.ones(g.shape, complex), g, LoopSpec((0, 0), 0.5)) == 0
    v = vortex(g, center=(0.1, -0.1))
    assert winding_degree(v, g, LoopSpec((0.1, -0.1), 0.5)) == 2
    v = half_disclination(g)
    assert winding_degree(v, g, LoopSpec((0, 0), 0.5, m=256)) == 1


def test_winding_radius_invariance():
    g = Grid2D.disk(129)
    v = vortex(g)
    assert {winding_degree(v, g, LoopSpec((0, 0), r, m=128)) for r in (0.2, 0.4, 0.8)} == {2}


def test_winding_errors():
    g = Grid2D.disk(65)
    with pytest.raises(ValueError):
        LoopSpec((0, 0), 0.5, m=8)
    with pytest.raises(GridError):
        winding_degree(vortex(g), g, LoopSpec((0, 0), 2.0))
    x, y = g.coords()
    v = np.exp(1j * 20 * np.arctan2(y, x)) * g.mask
    with pytest.raises(UndersampledLoopError):
        winding_degree(v, g, LoopSpec((0, 0), 0.5, m=16))


# -- Jacobian ------------------------------------------------------------------------
def test_jacobian_smooth_vanishes_under_refinement():
    vals = []
    for n in (33, 65):
        g = Grid2D.square(n, 0.0, 1.0)
        x, y = g.coords()
        v = np.exp(1j * (np.sin(2 * x) + y ** 2))
        vals.append(np.max(np.abs(jacobian_density(v, g))[g.interior]))
    assert vals[1] < vals[0] / 1.8 or vals[1] < 1e-10


@pytest.mark.parametrize("make, degree", [(vortex, 2), (half_disclination, 1)])
def test_jacobian_integrates_to_degree(make, degree):
    g = Grid2D.disk(257)
    x, y = g.coords()
    J = jacobian_density(make(g), g)
    inside = np.hypot(x, y) < 0.5
    assert g.integrate(np.where(inside, J, 0)) == pytest.approx(2 * np.pi * degree, rel=0.05)


def test_plaquette_stokes_identity():
    g = Grid2D.disk(129)
    w = plaquette_windings(vortex(g, center=(0.2, 0.1)), g)
    total = w[0] if isinstance(w, tuple) else w
    assert int(np.rint(np.sum(total))) == 2


# -- H^{-1} -------------------------------------------------------------------------
def test_hminus1_eigenfunction():
    g = Grid2D.square(129, 0.0, 1.0)
    x, y = g.coords()
    f = np.sin(np.pi * x) * np.sin(np.pi * y)
    assert hminus1_norm(f, g) == pytest.approx(1 / (2 * np.sqrt(2) * np.pi), rel=0.01)


def test_hminus1_zero_and_linear():
    g = Grid2D.square(33, 0.0, 1.0)
    assert hminus1_norm(np.zeros(g.shape), g) == 0.0
    x, y = g.coords()
    f = x * (1 - y) + np.cos(3 * x)
    assert hminus1_norm(2 * f, g) == pytest.approx(2 * hminus1_norm(f, g), rel=1e-9)
    assert hminus1_norm(-f, g) == pytest.approx(hminus1_norm(f, g), rel=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_hminus1_subadditive(seed):
    g = Grid2D.square(17, 0.0, 1.0)
    r = np.random.default_rng(seed)
    f, k = r.normal(size=g.shape), r.normal(size=g.shape)
    assert hminus1_norm(f + k, g) <= hminus1_norm(f, g) + hminus1_norm(k, g) + 1e-8


def test_direct_and_cg_agree():
    g = Grid2D.disk(41)
    f = np.where(g.mask, 1.0, 0.0)
    a = PoissonSolver(g, PoissonSolveConfig(method="direct")).solve(f)
    b = PoissonSolver(g, PoissonSolveConfig(tol=1e-12)).solve(f)
    assert np.max(np.abs(a - b)) < 1e-9


def test_poisson_config_validation():
    with pytest.raises(ValueError):
        PoissonSolveConfig(tol=1e-2)
    with pytest.raises(ValueError):
        PoissonSolveConfig(tol=0)
    with pytest.raises(ValueError):
        PoissonSolveConfig(method="multigrid")


def test_cg_non_convergence():
    A = np.diag(np.linspace(1, 1e6, 200))
    with pytest.raises(SolverError):
        conjugate_gradient(lambda p: A @ p, np.ones(200), 1e-12, 3)
