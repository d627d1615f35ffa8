"""Pure-Python reference versions of the loop kernels in ``_kernels.pyx``.

Signatures and results match the compiled module exactly; these are used
when the extension is not built (or ``UNORIENTED_AG_PURE=1``).
"""
from collections import deque
import math

import numpy as np

REASON_BOUNDARY = 0
REASON_SINGULAR = 1
REASON_MAX_LENGTH = 2


def lift_signs(sr, si, ok, seed, nx, ny, periodic):
    """Breadth-first sign selection for a square-root field.

    ``sr + i si`` are branch square roots on the flattened grid, ``ok`` flags
    liftable nodes.  Returns int8 signs (0 where unreached).
    """
    n = nx * ny
    sign = np.zeros(n, dtype=np.int8)
    if not ok[seed]:
        return sign
    sr = sr.tolist()
    si = si.tolist()
    okl = ok.tolist()
    sg = [0] * n
    sg[seed] = 1
    queue = deque([seed])
    while queue:
        k = queue.popleft()
        j, i = divmod(k, nx)
        ur = sg[k] * sr[k]
        ui = sg[k] * si[k]
        for dj, di in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            jj, ii = j + dj, i + di
            if periodic:
                jj %= ny
                ii %= nx
            elif jj < 0 or jj >= ny or ii < 0 or ii >= nx:
                continue
            q = jj * nx + ii
            if sg[q] != 0 or not okl[q]:
                continue
            # choose the sign closer to the parent: Re(u_parent * conj(cand)) >= 0
            dot = ur * sr[q] + ui * si[q]
            sg[q] = 1 if dot >= 0 else -1
            queue.append(q)
    sign[:] = sg
    return sign


def _bilinear(vr, vi, mask, nx, ny, fx, fy):
    i0 = math.floor(fx)
    j0 = math.floor(fy)
    if i0 < 0 or j0 < 0 or i0 >= nx - 1 or j0 >= ny - 1:
        return False, 0.0, 0.0
    k = j0 * nx + i0
    if not (mask[k] and mask[k + 1] and mask[k + nx] and mask[k + nx + 1]):
        return False, 0.0, 0.0
    tx = fx - i0
    ty = fy - j0
    w00 = (1 - tx) * (1 - ty)
    w10 = tx * (1 - ty)
    w01 = (1 - tx) * ty
    w11 = tx * ty
    re = w00 * vr[k] + w10 * vr[k + 1] + w01 * vr[k + nx] + w11 * vr[k + nx + 1]
    im = w00 * vi[k] + w10 * vi[k + 1] + w01 * vi[k + nx] + w11 * vi[k + nx + 1]
    return True, re, im


def march_line(vr, vi, mask, nx, ny, h, ox, oy, x0, y0, dx, dy, step, max_steps, sing, margin):
    """March from ``(x0, y0)`` along ``(dx, dy)`` in steps of ``step``.

    Returns ``(n_steps, max_deviation, reason)``: the number of accepted
    points after the start, the largest ``|v(x_t) - v(x0)|`` seen, and why the
    march stopped.
    """
    vr = vr.tolist()
    vi = vi.tolist()
    mask = mask.tolist()
    sing = [tuple(p) for p in np.asarray(sing, dtype=float).reshape(-1, 2)]
    m2 = margin * margin
    ok, r0, i0 = _bilinear(vr, vi, mask, nx, ny, (x0 - ox) / h, (y0 - oy) / h)
    if not ok:
        return 0, 0.0, REASON_BOUNDARY
    maxdev = 0.0
    for s in range(1, max_steps + 1):
        x = x0 + s * step * dx
        y = y0 + s * step * dy
        for px, py in sing:
            if (x - px) ** 2 + (y - py) ** 2 < m2:
                return s - 1, maxdev, REASON_SINGULAR
        ok, re, im = _bilinear(vr, vi, mask, nx, ny, (x - ox) / h, (y - oy) / h)
        if not ok:
            return s - 1, maxdev, REASON_BOUNDARY
        d = math.hypot(re - r0, im - i0)
        if d > maxdev:
            maxdev = d
    return max_steps, maxdev, REASON_MAX_LENGTH
