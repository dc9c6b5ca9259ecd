# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Contract identical to ``_kernels_py``.

Loops run without the GIL so scans processed on worker threads overlap.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, sqrt, fabs, atan2, isfinite, INFINITY, M_PI

cnp.import_array()

NAME = "cython"


def azimuths_filled(const double[:, ::1] xyz):
    # numpy's vectorised arctan2 rather than libm atan2: the two differ in
    # the last ulp, and both backends must bin points into the same columns
    cdef Py_ssize_t n = xyz.shape[0], i
    cdef double x, y, th, prev = 0.0
    cdef Py_ssize_t n_bad = 0
    arr = np.asarray(xyz)
    with np.errstate(invalid="ignore"):
        theta_arr = np.arctan2(arr[:, 1], arr[:, 0]) * (180.0 / np.pi)
    cdef double[::1] theta = theta_arr
    with nogil:
        for i in range(n):
            x = xyz[i, 0]
            y = xyz[i, 1]
            th = theta[i]
            if (x == 0.0 and y == 0.0) or not isfinite(th):
                theta[i] = prev
                n_bad += 1
                continue
            if th < 0.0:
                th += 360.0
            if th >= 360.0:
                th = 0.0
            theta[i] = th
            prev = th
    return theta_arr, n_bad


def ring_fold(const double[::1] theta, double t):
    cdef Py_ssize_t n = theta.shape[0], i
    rings_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] rings = rings_arr
    cdef cnp.int64_t j = 0
    cdef double d
    with nogil:
        for i in range(1, n):
            d = theta[i] - theta[i - 1]
            if not (d >= 0.0 and fabs(d) <= t):
                j += 1
            rings[i] = j
    return rings_arr


def scatter_min(const cnp.int64_t[::1] v, const cnp.int64_t[::1] u, const double[::1] rng,
                const cnp.uint8_t[::1] valid, Py_ssize_t height, Py_ssize_t width):
    cdef Py_ssize_t n = v.shape[0], i, p
    cdef cnp.int64_t o
    owner_arr = np.full(height * width, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] owner = owner_arr
    with nogil:
        for i in range(n):
            if not valid[i]:
                continue
            p = v[i] * width + u[i]
            o = owner[p]
            if o < 0 or rng[i] < rng[o]:
                owner[p] = i
    return owner_arr


def rasterize(const double[:, ::1] xyz, intensity, labels, const cnp.int64_t[::1] v,
              const cnp.int64_t[::1] u, Py_ssize_t height, Py_ssize_t width):
    cdef Py_ssize_t n = xyz.shape[0], i, p, r, c
    cdef cnp.int64_t o
    cdef double x, y, z, d
    cdef bint has_int = intensity is not None, has_lab = labels is not None
    cdef const double[::1] inten
    cdef const cnp.int64_t[::1] lab
    if has_int:
        inten = intensity
    if has_lab:
        lab = labels
    owner_arr = np.full(height * width, -1, dtype=np.int64)
    rng_arr = np.empty(n, dtype=np.float64)
    data_arr = np.zeros((height, width, 8), dtype=np.float64)
    cdef cnp.int64_t[::1] owner = owner_arr
    cdef double[::1] rng = rng_arr
    cdef double[:, :, ::1] data = data_arr
    with nogil:
        for i in range(n):
            x = xyz[i, 0]
            y = xyz[i, 1]
            z = xyz[i, 2]
            d = sqrt(x * x + y * y + z * z)
            rng[i] = d
            if not (isfinite(d) and d > 0.0):
                continue
            p = v[i] * width + u[i]
            o = owner[p]
            if o < 0 or d < rng[o]:
                owner[p] = i
        for p in range(height * width):
            o = owner[p]
            if o < 0:
                continue
            r = p // width
            c = p - r * width
            data[r, c, 0] = rng[o]
            data[r, c, 1] = xyz[o, 0]
            data[r, c, 2] = xyz[o, 1]
            data[r, c, 3] = xyz[o, 2]
            if has_int:
                data[r, c, 4] = inten[o]
            data[r, c, 5] = 1.0
            if has_lab:
                data[r, c, 6] = <double>lab[o]
    return owner_arr, data_arr


def skew_points(const double[:, ::1] xyz, const double[::1] alpha, phi, vel, bint inverse):
    cdef Py_ssize_t n = xyz.shape[0], i
    cdef double p0 = phi[0], p1 = phi[1], p2 = phi[2]
    cdef double v0 = vel[0], v1 = vel[1], v2 = vel[2]
    cdef double al, k0, k1, k2, th2, th, a, b, x, y, z, c0, c1, c2, d0, d1, d2
    out_arr = np.empty((n, 3), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(n):
            al = alpha[i]
            k0 = al * p0
            k1 = al * p1
            k2 = al * p2
            th2 = k0 * k0 + k1 * k1 + k2 * k2
            th = sqrt(th2)
            if th < 1e-8:
                a = 1.0 - th2 / 6.0
                b = 0.5 - th2 / 24.0
            else:
                a = sin(th) / th
                b = (1.0 - cos(th)) / (th * th)
            if inverse:
                x = xyz[i, 0]
                y = xyz[i, 1]
                z = xyz[i, 2]
            else:
                x = xyz[i, 0] - al * v0
                y = xyz[i, 1] - al * v1
                z = xyz[i, 2] - al * v2
            c0 = k1 * z - k2 * y
            c1 = k2 * x - k0 * z
            c2 = k0 * y - k1 * x
            d0 = k1 * c2 - k2 * c1
            d1 = k2 * c0 - k0 * c2
            d2 = k0 * c1 - k1 * c0
            if inverse:
                out[i, 0] = x + a * c0 + b * d0 + al * v0
                out[i, 1] = y + a * c1 + b * d1 + al * v1
                out[i, 2] = z + a * c2 + b * d2 + al * v2
            else:
                out[i, 0] = x - a * c0 + b * d0
                out[i, 1] = y - a * c1 + b * d1
                out[i, 2] = z - a * c2 + b * d2
    return out_arr


def knni_fill(const double[:, :, ::1] data, const cnp.uint8_t[:, ::1] mask, Py_ssize_t range_ch,
              value_chs, Py_ssize_t half, bint wrap, bint want_mean):
    cdef Py_ssize_t h = data.shape[0], w = data.shape[1]
    cdef cnp.int64_t[::1] vch = np.ascontiguousarray(value_chs, dtype=np.int64)
    cdef Py_ssize_t c = vch.shape[0]
    cdef Py_ssize_t r, col, s, q, ch, step
    cdef double br
    cdef cnp.int64_t cnt
    best_arr = np.full((h, w), -1, dtype=np.int64)
    left_arr = np.full((h, w), -1, dtype=np.int64)
    right_arr = np.full((h, w), -1, dtype=np.int64)
    count_arr = np.zeros((h, w), dtype=np.int64)
    if want_mean:
        mean_arr = np.zeros((h, w, c), dtype=np.float64)
    else:
        mean_arr = np.zeros((1, 1, 1), dtype=np.float64)
    cdef cnp.int64_t[:, ::1] best = best_arr
    cdef cnp.int64_t[:, ::1] left = left_arr
    cdef cnp.int64_t[:, ::1] right = right_arr
    cdef cnp.int64_t[:, ::1] count = count_arr
    cdef double[:, :, ::1] mean = mean_arr
    with nogil:
        for r in range(h):
            for col in range(w):
                if mask[r, col]:
                    continue
                br = INFINITY
                cnt = 0
                for s in range(-half, half + 1):
                    if s == 0:
                        continue
                    q = col + s
                    if wrap:
                        q = q % w
                        if q < 0:
                            q += w
                    elif q < 0 or q >= w:
                        continue
                    if not mask[r, q]:
                        continue
                    cnt += 1
                    if data[r, q, range_ch] < br:
                        br = data[r, q, range_ch]
                        best[r, col] = q
                    if want_mean:
                        for ch in range(c):
                            mean[r, col, ch] += data[r, q, vch[ch]]
                count[r, col] = cnt
                if want_mean and cnt > 0:
                    for ch in range(c):
                        mean[r, col, ch] /= cnt
                for step in range(1, half + 1):
                    q = col - step
                    if wrap:
                        q = q % w
                        if q < 0:
                            q += w
                    elif q < 0:
                        break
                    if mask[r, q]:
                        left[r, col] = q
                        break
                for step in range(1, half + 1):
                    q = col + step
                    if wrap:
                        q = q % w
                    elif q >= w:
                        break
                    if mask[r, q]:
                        right[r, col] = q
                        break
    if not want_mean:
        mean_arr = np.zeros((0, 0, 0), dtype=np.float64)
    return best_arr, left_arr, right_arr, count_arr, mean_arr


def nla_assign(const double[::1] point_range, const cnp.int64_t[::1] v, const cnp.int64_t[::1] u,
               const double[:, ::1] img_range, const cnp.uint8_t[:, ::1] mask,
               const cnp.int64_t[:, ::1] labels, Py_ssize_t half, bint wrap):
    cdef Py_ssize_t n = point_range.shape[0], h = img_range.shape[0], w = img_range.shape[1]
    cdef Py_ssize_t i, dv, du, row, col
    cdef double bd, d
    out_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    with nogil:
        for i in range(n):
            bd = INFINITY
            out[i] = labels[v[i], u[i]]
            for dv in range(-half, half + 1):
                row = v[i] + dv
                if row < 0 or row >= h:
                    continue
                for du in range(-half, half + 1):
                    col = u[i] + du
                    if wrap:
                        col = col % w
                        if col < 0:
                            col += w
                    elif col < 0 or col >= w:
                        continue
                    if not mask[row, col]:
                        continue
                    d = fabs(img_range[row, col] - point_range[i])
                    if d < bd:
                        bd = d
                        out[i] = labels[row, col]
    return out_arr
