# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled loop kernels: breadth-first director lifting and characteristic marching."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, sqrt

cnp.import_array()

REASON_BOUNDARY = 0
REASON_SINGULAR = 1
REASON_MAX_LENGTH = 2


def lift_signs(double[::1] sr, double[::1] si, ok_in, Py_ssize_t seed, Py_ssize_t nx, Py_ssize_t ny, bint periodic):
    cdef Py_ssize_t n = nx * ny
    cdef cnp.uint8_t[::1] ok = np.ascontiguousarray(ok_in, dtype=np.uint8)
    sign_arr = np.zeros(n, dtype=np.int8)
    cdef cnp.int8_t[::1] sg = sign_arr
    if not ok[seed]:
        return sign_arr
    cdef Py_ssize_t[::1] queue = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t head = 0, tail = 0, k, q, j, i, jj, ii, d
    cdef int dj[4]
    cdef int di[4]
    dj[0] = 0; di[0] = 1
    dj[1] = 0; di[1] = -1
    dj[2] = 1; di[2] = 0
    dj[3] = -1; di[3] = 0
    cdef double ur, ui, dot
    sg[seed] = 1
    queue[tail] = seed
    tail += 1
    while head < tail:
        k = queue[head]
        head += 1
        j = k // nx
        i = k - j * nx
        ur = sg[k] * sr[k]
        ui = sg[k] * si[k]
        for d in range(4):
            jj = j + dj[d]
            ii = i + di[d]
            if periodic:
                jj = (jj + ny) % ny
                ii = (ii + nx) % nx
            elif jj < 0 or jj >= ny or ii < 0 or ii >= nx:
                continue
            q = jj * nx + ii
            if sg[q] != 0 or not ok[q]:
                continue
            dot = ur * sr[q] + ui * si[q]
            sg[q] = 1 if dot >= 0 else -1
            queue[tail] = q
            tail += 1
    return sign_arr


cdef inline bint _bilinear(double[::1] vr, double[::1] vi, cnp.uint8_t[::1] mask,
                           Py_ssize_t nx, Py_ssize_t ny, double fx, double fy,
                           double* re, double* im) nogil:
    cdef double fi = floor(fx), fj = floor(fy)
    cdef Py_ssize_t i0 = <Py_ssize_t>fi, j0 = <Py_ssize_t>fj, k
    if fi < 0 or fj < 0 or i0 >= nx - 1 or j0 >= ny - 1:
        return False
    k = j0 * nx + i0
    if not (mask[k] and mask[k + 1] and mask[k + nx] and mask[k + nx + 1]):
        return False
    cdef double tx = fx - i0, ty = fy - j0
    cdef double w00 = (1 - tx) * (1 - ty), w10 = tx * (1 - ty)
    cdef double w01 = (1 - tx) * ty, w11 = tx * ty
    re[0] = w00 * vr[k] + w10 * vr[k + 1] + w01 * vr[k + nx] + w11 * vr[k + nx + 1]
    im[0] = w00 * vi[k] + w10 * vi[k + 1] + w01 * vi[k + nx] + w11 * vi[k + nx + 1]
    return True


def march_line(double[::1] vr, double[::1] vi, mask_in, Py_ssize_t nx, Py_ssize_t ny,
               double h, double ox, double oy, double x0, double y0, double dx, double dy,
               double step, Py_ssize_t max_steps, sing_in, double margin):
    cdef cnp.uint8_t[::1] mask = np.ascontiguousarray(mask_in, dtype=np.uint8)
    cdef double[:, ::1] sing = np.ascontiguousarray(np.asarray(sing_in, dtype=float).reshape(-1, 2))
    cdef Py_ssize_t nsing = sing.shape[0], s, p
    cdef double m2 = margin * margin, r0, i0, re, im, x, y, d, maxdev = 0.0, ddx, ddy
    if not _bilinear(vr, vi, mask, nx, ny, (x0 - ox) / h, (y0 - oy) / h, &r0, &i0):
        return 0, 0.0, REASON_BOUNDARY
    for s in range(1, max_steps + 1):
        x = x0 + s * step * dx
        y = y0 + s * step * dy
        for p in range(nsing):
            ddx = x - sing[p, 0]
            ddy = y - sing[p, 1]
            if ddx * ddx + ddy * ddy < m2:
                return s - 1, maxdev, REASON_SINGULAR
        if not _bilinear(vr, vi, mask, nx, ny, (x - ox) / h, (y - oy) / h, &re, &im):
            return s - 1, maxdev, REASON_BOUNDARY
        d = sqrt((re - r0) * (re - r0) + (im - i0) * (im - i0))
        if d > maxdev:
            maxdev = d
    return max_steps, maxdev, REASON_MAX_LENGTH
