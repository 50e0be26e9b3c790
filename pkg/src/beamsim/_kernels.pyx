# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled geometry kernels; mirrors _kernels_py.py exactly.

Keep every formula and its operation order in lockstep with the numpy
implementation so the two lanes agree to rounding.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport atan, fabs, log10, sqrt

cnp.import_array()

DEF PI = 3.141592653589793

VIRTUAL_SOURCE_RANGE = 80.0
cdef double _VIRTUAL_RANGE = 80.0


cdef inline double _far_cutoff(double w, double h) nogil:
    cdef double m = w if w > h else h
    return 0.5 * sqrt(w * w + h * h) + m


cdef inline double _pt_seg_2d(double px, double py, double ax, double ay,
                              double bx, double by) nogil:
    cdef double abx = bx - ax
    cdef double aby = by - ay
    cdef double denom = abx * abx + aby * aby
    cdef double t = 0.0
    if denom > 0.0:
        t = ((px - ax) * abx + (py - ay) * aby) / denom
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    cdef double dx = px - (ax + t * abx)
    cdef double dy = py - (ay + t * aby)
    return sqrt(dx * dx + dy * dy)


cdef inline double _pt_seg_3d(double px, double py, double pz,
                              double ax, double ay, double az,
                              double bx, double by, double bz) nogil:
    cdef double abx = bx - ax
    cdef double aby = by - ay
    cdef double abz = bz - az
    cdef double denom = abx * abx + aby * aby + abz * abz
    cdef double t = 0.0
    if denom > 0.0:
        t = ((px - ax) * abx + (py - ay) * aby + (pz - az) * abz) / denom
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    cdef double dx = px - (ax + t * abx)
    cdef double dy = py - (ay + t * aby)
    cdef double dz = pz - (az + t * abz)
    return sqrt(dx * dx + dy * dy + dz * dz)


cdef inline double _fresnel(double sign, double excess, double lam) nogil:
    cdef double rad = excess if excess > 0.0 else 0.0
    rad = rad * (PI / lam)
    return atan(sign * 0.5 * PI * sqrt(rad)) / PI


cdef inline void _frame(double txx, double txy, double rxx, double rxy,
                        double cx, double cy,
                        double* nx, double* ny, double* wx, double* wy) nogil:
    cdef double mx = 0.5 * (txx + rxx)
    cdef double my = 0.5 * (txy + rxy)
    cdef double ax = mx - cx
    cdef double ay = my - cy
    cdef double nn = sqrt(ax * ax + ay * ay)
    cdef double dx, dy, dn
    if nn < 1e-9:
        dx = rxx - txx
        dy = rxy - txy
        dn = sqrt(dx * dx + dy * dy)
        if dn > 1e-12:
            ax = dx / dn
            ay = dy / dn
        else:
            ax = 1.0
            ay = 0.0
        nn = 1.0
    nx[0] = ax / nn
    ny[0] = ay / nn
    wx[0] = -ny[0]
    wy[0] = nx[0]


def blockage_loss_los(tx, rx, center, double w, double h, double lam):
    """See _kernels_py.blockage_loss_los."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] txa = np.ascontiguousarray(tx, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] rxa = np.ascontiguousarray(rx, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] c = np.ascontiguousarray(center, dtype=np.float64)
    cdef Py_ssize_t n = txa.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n, dtype=np.float64)
    cdef double cx = c[0], cy = c[1], cz = c[2]
    cdef double cutoff = _far_cutoff(w, h)
    cdef Py_ssize_t i
    cdef double t2x, t2y, tz, r2x, r2y, rz
    cdef double nx, ny, wx, wy, dxx, dyy, plane_len, denom, alpha, xx, xy
    cdef double e1x, e1y, e2x, e2y
    cdef double d_top, d1, d2, ex_w1, ex_w2, dist_e1, dist_e2
    cdef double s_w1, s_w2, f_w, s0, z_top, z_bot, d_side
    cdef double ex_h1, ex_h2, z_star, dist_t, dist_b, s_h1, s_h2, f_h
    cdef double arg, bl
    cdef bint parallel, between, crosses_w, crosses_h

    with nogil:
        for i in range(n):
            t2x = txa[i, 0]; t2y = txa[i, 1]; tz = txa[i, 2]
            r2x = rxa[i, 0]; r2y = rxa[i, 1]; rz = rxa[i, 2]
            if _pt_seg_3d(cx, cy, cz, t2x, t2y, tz, r2x, r2y, rz) > cutoff:
                continue
            _frame(t2x, t2y, r2x, r2y, cx, cy, &nx, &ny, &wx, &wy)

            dxx = r2x - t2x
            dyy = r2y - t2y
            plane_len = sqrt(dxx * dxx + dyy * dyy)
            denom = dxx * nx + dyy * ny
            parallel = fabs(denom) < 1e-12
            alpha = 0.0
            if not parallel:
                alpha = ((cx - t2x) * nx + (cy - t2y) * ny) / denom
            if parallel:
                continue
            xx = t2x + alpha * dxx
            xy = t2y + alpha * dyy

            e1x = cx - 0.5 * w * wx
            e1y = cy - 0.5 * w * wy
            e2x = cx + 0.5 * w * wx
            e2y = cy + 0.5 * w * wy

            between = (alpha > 0.0) and (alpha < 1.0)
            crosses_w = between and (fabs((xx - cx) * wx + (xy - cy) * wy) <= 0.5 * w)

            d_top = plane_len
            d1 = sqrt((e1x - t2x) ** 2 + (e1y - t2y) ** 2)
            d2 = sqrt((e1x - r2x) ** 2 + (e1y - r2y) ** 2)
            ex_w1 = d1 + d2 - d_top
            d1 = sqrt((e2x - t2x) ** 2 + (e2y - t2y) ** 2)
            d2 = sqrt((e2x - r2x) ** 2 + (e2y - r2y) ** 2)
            ex_w2 = d1 + d2 - d_top

            if crosses_w:
                s_w1 = 1.0
                s_w2 = 1.0
            else:
                dist_e1 = _pt_seg_2d(e1x, e1y, t2x, t2y, r2x, r2y)
                dist_e2 = _pt_seg_2d(e2x, e2y, t2x, t2y, r2x, r2y)
                if dist_e1 <= dist_e2:
                    s_w1 = -1.0; s_w2 = 1.0
                else:
                    s_w1 = 1.0; s_w2 = -1.0
            f_w = _fresnel(s_w1, ex_w1, lam) + _fresnel(s_w2, ex_w2, lam)

            s0 = alpha * plane_len
            z_top = cz + 0.5 * h
            z_bot = cz - 0.5 * h
            d_side = sqrt(plane_len * plane_len + (rz - tz) ** 2)
            d1 = sqrt(s0 * s0 + (z_top - tz) ** 2)
            d2 = sqrt((plane_len - s0) ** 2 + (z_top - rz) ** 2)
            ex_h1 = d1 + d2 - d_side
            d1 = sqrt(s0 * s0 + (z_bot - tz) ** 2)
            d2 = sqrt((plane_len - s0) ** 2 + (z_bot - rz) ** 2)
            ex_h2 = d1 + d2 - d_side

            z_star = tz + alpha * (rz - tz)
            crosses_h = between and (z_star >= z_bot) and (z_star <= z_top)
            if crosses_h:
                s_h1 = 1.0
                s_h2 = 1.0
            else:
                dist_t = _pt_seg_2d(s0, z_top, 0.0, tz, plane_len, rz)
                dist_b = _pt_seg_2d(s0, z_bot, 0.0, tz, plane_len, rz)
                if dist_t <= dist_b:
                    s_h1 = -1.0; s_h2 = 1.0
                else:
                    s_h1 = 1.0; s_h2 = -1.0
            f_h = _fresnel(s_h1, ex_h1, lam) + _fresnel(s_h2, ex_h2, lam)

            arg = 1.0 - f_h * f_w
            if arg < 1e-15:
                arg = 1e-15
            bl = -20.0 * log10(arg)
            if bl < 0.0:
                bl = 0.0
            out[i] = bl
    return out


def blockage_loss_nlos(rx, dirs, center, double w, double h, double lam):
    """See _kernels_py.blockage_loss_nlos."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] rxa = np.ascontiguousarray(rx, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] da = np.ascontiguousarray(dirs, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] c = np.ascontiguousarray(center, dtype=np.float64)
    cdef Py_ssize_t n = rxa.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n, dtype=np.float64)
    cdef double cx = c[0], cy = c[1], cz = c[2]
    cdef double cutoff = _far_cutoff(w, h)
    cdef Py_ssize_t i
    cdef double t2x, t2y, tz, r2x, r2y, rz
    cdef double nx, ny, wx, wy, dxx, dyy, plane_len, denom, alpha, xx, xy
    cdef double e1x, e1y, e2x, e2y
    cdef double dp_top, d1_w1, d1_w2, ex_w1, ex_w2, dist_e1, dist_e2
    cdef double s_w1, s_w2, f_w, s0, z_top, z_bot, z_star, dp_side
    cdef double d1_h1, d1_h2, ex_h1, ex_h2, dist_t, dist_b, s_h1, s_h2, f_h
    cdef double arg, bl
    cdef bint parallel, between, crosses_w, crosses_h

    with nogil:
        for i in range(n):
            r2x = rxa[i, 0]; r2y = rxa[i, 1]; rz = rxa[i, 2]
            t2x = r2x + _VIRTUAL_RANGE * da[i, 0]
            t2y = r2y + _VIRTUAL_RANGE * da[i, 1]
            tz = rz + _VIRTUAL_RANGE * da[i, 2]
            if _pt_seg_3d(cx, cy, cz, t2x, t2y, tz, r2x, r2y, rz) > cutoff:
                continue
            _frame(t2x, t2y, r2x, r2y, cx, cy, &nx, &ny, &wx, &wy)

            dxx = r2x - t2x
            dyy = r2y - t2y
            plane_len = sqrt(dxx * dxx + dyy * dyy)
            denom = dxx * nx + dyy * ny
            parallel = fabs(denom) < 1e-12
            if parallel:
                continue
            alpha = ((cx - t2x) * nx + (cy - t2y) * ny) / denom
            if alpha >= 1.0:
                continue
            xx = t2x + alpha * dxx
            xy = t2y + alpha * dyy

            e1x = cx - 0.5 * w * wx
            e1y = cy - 0.5 * w * wy
            e2x = cx + 0.5 * w * wx
            e2y = cy + 0.5 * w * wy

            between = (alpha > 0.0) and (alpha < 1.0)
            crosses_w = between and (fabs((xx - cx) * wx + (xy - cy) * wy) <= 0.5 * w)

            dp_top = sqrt((xx - r2x) ** 2 + (xy - r2y) ** 2)
            d1_w1 = sqrt((e1x - r2x) ** 2 + (e1y - r2y) ** 2)
            d1_w2 = sqrt((e2x - r2x) ** 2 + (e2y - r2y) ** 2)
            ex_w1 = d1_w1 - dp_top
            ex_w2 = d1_w2 - dp_top

            if crosses_w:
                s_w1 = 1.0
                s_w2 = 1.0
            else:
                dist_e1 = _pt_seg_2d(e1x, e1y, t2x, t2y, r2x, r2y)
                dist_e2 = _pt_seg_2d(e2x, e2y, t2x, t2y, r2x, r2y)
                if dist_e1 <= dist_e2:
                    s_w1 = -1.0; s_w2 = 1.0
                else:
                    s_w1 = 1.0; s_w2 = -1.0
            f_w = _fresnel(s_w1, ex_w1, lam) + _fresnel(s_w2, ex_w2, lam)

            s0 = alpha * plane_len
            z_top = cz + 0.5 * h
            z_bot = cz - 0.5 * h
            z_star = tz + alpha * (rz - tz)
            dp_side = sqrt((plane_len - s0) ** 2 + (z_star - rz) ** 2)
            d1_h1 = sqrt((plane_len - s0) ** 2 + (z_top - rz) ** 2)
            d1_h2 = sqrt((plane_len - s0) ** 2 + (z_bot - rz) ** 2)
            ex_h1 = d1_h1 - dp_side
            ex_h2 = d1_h2 - dp_side

            crosses_h = between and (z_star >= z_bot) and (z_star <= z_top)
            if crosses_h:
                s_h1 = 1.0
                s_h2 = 1.0
            else:
                dist_t = _pt_seg_2d(s0, z_top, 0.0, tz, plane_len, rz)
                dist_b = _pt_seg_2d(s0, z_bot, 0.0, tz, plane_len, rz)
                if dist_t <= dist_b:
                    s_h1 = -1.0; s_h2 = 1.0
                else:
                    s_h1 = 1.0; s_h2 = -1.0
            f_h = _fresnel(s_h1, ex_h1, lam) + _fresnel(s_h2, ex_h2, lam)

            arg = 1.0 - f_h * f_w
            if arg < 1e-15:
                arg = 1e-15
            bl = -20.0 * log10(arg)
            if bl < 0.0:
                bl = 0.0
            out[i] = bl
    return out


def gt_intersect(tx, rx, center, double w, double h):
    """See _kernels_py.gt_intersect."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] txa = np.ascontiguousarray(tx, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] rxa = np.ascontiguousarray(rx, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] c = np.ascontiguousarray(center, dtype=np.float64)
    cdef Py_ssize_t n = txa.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.zeros(n, dtype=np.uint8)
    cdef double cx = c[0], cy = c[1], cz = c[2]
    cdef Py_ssize_t i
    cdef double nx, ny, wx, wy, dxx, dyy, denom, alpha, px, py, pz

    with nogil:
        for i in range(n):
            _frame(txa[i, 0], txa[i, 1], rxa[i, 0], rxa[i, 1], cx, cy,
                   &nx, &ny, &wx, &wy)
            dxx = rxa[i, 0] - txa[i, 0]
            dyy = rxa[i, 1] - txa[i, 1]
            denom = dxx * nx + dyy * ny
            if fabs(denom) < 1e-12:
                continue
            alpha = ((cx - txa[i, 0]) * nx + (cy - txa[i, 1]) * ny) / denom
            if alpha <= 0.0 or alpha >= 1.0:
                continue
            px = txa[i, 0] + alpha * dxx
            py = txa[i, 1] + alpha * dyy
            pz = txa[i, 2] + alpha * (rxa[i, 2] - txa[i, 2])
            if (fabs((px - cx) * wx + (py - cy) * wy) <= 0.5 * w
                    and fabs(pz - cz) <= 0.5 * h):
                out[i] = 1
    return out
