"""Compare the compiled loop kernels with the pure-Python fallback.

Usage::

    python benchmarks/bench_kernels.py [--n 256] [--repeat 3]

Prints the best wall time of each backend and the speedup, after checking
that both return identical results.
"""
from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from unoriented_ag import _kernels_py
from unoriented_ag.grid import Grid2D, sqrt_branch
from unoriented_ag.scenarios import smooth, vortex

try:
    from unoriented_ag import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None


def lift_args(n: int):
    g = Grid2D.disk(n)
    s = sqrt_branch(smooth(g, seed=1))
    ok = (g.mask & (np.abs(s) > 0)).ravel().astype(np.uint8)
    seed = g.ravel_index(n // 2, n // 2)
    return (np.ascontiguousarray(s.real.ravel()), np.ascontiguousarray(s.imag.ravel()), ok, seed, g.nx, g.ny, False)


def march_args(n: int):
    g = Grid2D.disk(n)
    v = vortex(g)
    sing = np.zeros((1, 2))
    return (np.ascontiguousarray(v.real.ravel()), np.ascontiguousarray(v.imag.ravel()),
            g.mask.ravel().astype(np.uint8), g.nx, g.ny, g.h, g.origin[0], g.origin[1],
            0.1, 0.05, 0.8944271909999159, 0.4472135954999579, g.h / 2, 10 * n, sing, 4 * g.h)


def best_time(fn, args, repeat: int) -> float:
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=256, help="grid nodes per side")
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    if _kernels_c is None:
        print("compiled kernels not available; build with `pip install --no-build-isolation -e .`")
        return 1
    print(f"{'kernel':<12}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}")
    for name, make in (("lift_signs", lift_args), ("march_line", march_args)):
        a = make(args.n)
        ref = getattr(_kernels_py, name)(*a)
        fast = getattr(_kernels_c, name)(*a)
        if name == "lift_signs":
            same = np.array_equal(np.asarray(ref), np.asarray(fast))
        else:
            same = ref[0] == fast[0] and ref[2] == fast[2] and abs(ref[1] - fast[1]) <= 1e-12
        if not same:
            print(f"{name}: backends disagree")
            return 1
        tp = best_time(getattr(_kernels_py, name), a, args.repeat)
        tc = best_time(getattr(_kernels_c, name), a, args.repeat)
        print(f"{name:<12}{tp:>12.4f}{tc:>12.5f}{tp / tc:>10.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
