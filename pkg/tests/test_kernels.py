from __future__ import annotations

import numpy as np
import pytest

from unoriented_ag import _kernels_py, kernels
from unoriented_ag.grid import Grid2D, sqrt_branch
from unoriented_ag.scenarios import random_phases, smooth, vortex

_kernels_c = pytest.importorskip("unoriented_ag._kernels", reason="compiled kernels not built")


def _lift_args(g, v, seed):
    s = sqrt_branch(v)
    ok = (g.mask & (np.abs(v) > 0)).ravel().astype(np.uint8)
    return (np.ascontiguousarray(s.real.ravel()), np.ascontiguousarray(s.imag.ravel()), ok,
            g.ravel_index(*seed), g.nx, g.ny, g.periodic)


def test_backend_selected():
    assert kernels.BACKEND == "cython"


@pytest.mark.parametrize("make", [lambda g: smooth(g, seed=1), vortex, lambda g: random_phases(g, seed=2)])
@pytest.mark.parametrize("periodic", [False, True])
def test_lift_signs_agree(make, periodic):
    g = Grid2D.square(40, -1.0, 1.0, periodic=periodic) if periodic else Grid2D.disk(41)
    a = _lift_args(g, make(g) if not periodic else random_phases(g, seed=5), (20, 20))
    assert np.array_equal(np.asarray(_kernels_py.lift_signs(*a)), np.asarray(_kernels_c.lift_signs(*a)))


@pytest.mark.parametrize("start, direction", [((0.3, 0.4), (0.6, 0.8)), ((-0.2, 0.1), (1.0, 0.0)),
                                              ((0.0, -0.5), (0.0, -1.0))])
def test_march_line_agrees(start, direction):
    g = Grid2D.disk(129)
    v = vortex(g)
    sing = np.zeros((1, 2))
    args = (np.ascontiguousarray(v.real.ravel()), np.ascontiguousarray(v.imag.ravel()),
            g.mask.ravel().astype(np.uint8), g.nx, g.ny, g.h, g.origin[0], g.origin[1],
            start[0], start[1], direction[0], direction[1], g.h / 2, 2000, sing, 4 * g.h)
    a, b = _kernels_py.march_line(*args), _kernels_c.march_line(*args)
    assert a[0] == b[0] and a[2] == b[2]
    assert a[1] == pytest.approx(b[1], abs=1e-12)


def test_pure_python_fallback_selected_by_env():
    import os
    import subprocess
    import sys

    code = ("from unoriented_ag import kernels; from unoriented_ag.grid import Grid2D; "
            "from unoriented_ag.ops import director_lift; from unoriented_ag.scenarios import vortex; "
            "g = Grid2D.disk(21); r = director_lift(vortex(g), g, (10, 15)); print(kernels.BACKEND, r.lifted.sum())")
    env = {**os.environ, "UNORIENTED_AG_PURE": "1"}
    res = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env)
    assert res.returncode == 0, res.stderr
    backend, n = res.stdout.split()
    assert backend == "python" and int(n) > 0
