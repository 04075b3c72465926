# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops; the reference semantics live in ``_fallback.py``."""

import numpy as np
from libc.math cimport sqrt, floor, sin, cos


cdef inline double _bilinear(const double[:, ::1] v, double x0, double hx, double t0, double ht,
                             double x, double t) nogil:
    cdef Py_ssize_t m = v.shape[0]
    cdef Py_ssize_t n = v.shape[1]
    cdef double fx = (x - x0) / hx
    cdef double ft = (t - t0) / ht
    cdef Py_ssize_t i = <Py_ssize_t> floor(fx)
    cdef Py_ssize_t j = <Py_ssize_t> floor(ft)
    if i < 0:
        i = 0
    if i > m - 2:
        i = m - 2
    if j < 0:
        j = 0
    if j > n - 2:
        j = n - 2
    cdef double px = fx - i
    cdef double pt = ft - j
    return (v[i, j] * (1 - px) * (1 - pt) + v[i + 1, j] * px * (1 - pt)
            + v[i, j + 1] * (1 - px) * pt + v[i + 1, j + 1] * px * pt)


def rk4_char_grid(values, double x0, double hx, double t0, double ht, double a, double b,
                  double step, Py_ssize_t nmax, double lo, double hi):
    cdef const double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    out_arr = np.empty(nmax + 1)
    cdef double[::1] out = out_arr
    cdef double x1 = x0 + hx * (v.shape[0] - 1)
    cdef double tol = 1e-12 * max(1.0, abs(x1 - x0))
    cdef double s = a, t = b, s_next, t_next, k1, k2, k3, k4
    cdef Py_ssize_t count = 1
    cdef Py_ssize_t it
    out[0] = b
    with nogil:
        for it in range(nmax):
            s_next = s + step
            if s_next < x0 - tol or s_next > x1 + tol:
                break
            k1 = _bilinear(v, x0, hx, t0, ht, s, t)
            k2 = _bilinear(v, x0, hx, t0, ht, s + 0.5 * step, t + 0.5 * step * k1)
            k3 = _bilinear(v, x0, hx, t0, ht, s + 0.5 * step, t + 0.5 * step * k2)
            k4 = _bilinear(v, x0, hx, t0, ht, s_next, t + step * k3)
            t_next = t + step * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            if t_next < lo or t_next > hi:
                break
            out[count] = t_next
            count += 1
            s = s_next
            t = t_next
    return out_arr[:count].copy()


cdef inline void _geo_rhs(double c11, double c21, double c22, double h,
                          double* st, double* k) nogil:
    cdef double c = cos(st[3])
    cdef double s = sin(st[3])
    cdef double a = c * c11 + s * c21
    cdef double b = s * c22
    k[0] = a
    k[1] = b
    k[2] = -st[0] * b
    k[3] = -h


def rk4_geodesic_const(double c11, double c21, double c22, hnodes, double x0, double y0,
                       double t0, double th0, double step, Py_ssize_t n):
    cdef const double[::1] hn = np.ascontiguousarray(hnodes, dtype=np.float64)
    out_arr = np.empty((n + 1, 4))
    cdef double[:, ::1] out = out_arr
    cdef double st[4]
    cdef double tmp[4]
    cdef double k1[4]
    cdef double k2[4]
    cdef double k3[4]
    cdef double k4[4]
    cdef Py_ssize_t k, q
    st[0] = x0
    st[1] = y0
    st[2] = t0
    st[3] = th0
    for q in range(4):
        out[0, q] = st[q]
    with nogil:
        for k in range(n):
            _geo_rhs(c11, c21, c22, hn[2 * k], st, k1)
            for q in range(4):
                tmp[q] = st[q] + 0.5 * step * k1[q]
            _geo_rhs(c11, c21, c22, hn[2 * k + 1], tmp, k2)
            for q in range(4):
                tmp[q] = st[q] + 0.5 * step * k2[q]
            _geo_rhs(c11, c21, c22, hn[2 * k + 1], tmp, k3)
            for q in range(4):
                tmp[q] = st[q] + step * k3[q]
            _geo_rhs(c11, c21, c22, hn[2 * k + 2], tmp, k4)
            for q in range(4):
                st[q] = st[q] + step * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]) / 6.0
                out[k + 1, q] = st[q]
    return out_arr


def tgraph_energy_grad(v_in, xs_in, ys_in, fv_in, double eps, weights_in):
    cdef const double[:, ::1] v = np.ascontiguousarray(v_in, dtype=np.float64)
    cdef const double[::1] xs = np.ascontiguousarray(xs_in, dtype=np.float64)
    cdef const double[::1] ys = np.ascontiguousarray(ys_in, dtype=np.float64)
    cdef const double[:, ::1] fv = np.ascontiguousarray(np.broadcast_to(fv_in, np.shape(v_in)), dtype=np.float64)
    cdef const double[:, ::1] w = np.ascontiguousarray(weights_in, dtype=np.float64)
    cdef Py_ssize_t m = v.shape[0]
    cdef Py_ssize_t n = v.shape[1]
    cdef double hx = xs[1] - xs[0]
    cdef double hy = ys[1] - ys[0]
    cdef double half = 0.5 * hx * hy
    grad_arr = np.empty((m, n))
    cdef double[:, ::1] grad = grad_arr
    cdef double energy = 0.0
    cdef double px, py, phi, qx, qy
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(m):
            for j in range(n):
                grad[i, j] = w[i, j] * fv[i, j]
                energy += w[i, j] * fv[i, j] * v[i, j]
        for i in range(m - 1):
            for j in range(n - 1):
                # lower-left node, forward differences
                px = (v[i + 1, j] - v[i, j]) / hx - ys[j]
                py = (v[i, j + 1] - v[i, j]) / hy + xs[i]
                phi = sqrt(px * px + py * py + eps * eps)
                energy += half * phi
                if phi > 0:
                    qx = half * px / phi / hx
                    qy = half * py / phi / hy
                    grad[i + 1, j] += qx
                    grad[i, j + 1] += qy
                    grad[i, j] -= qx + qy
                # upper-right node, backward differences
                px = (v[i + 1, j + 1] - v[i, j + 1]) / hx - ys[j + 1]
                py = (v[i + 1, j + 1] - v[i + 1, j]) / hy + xs[i + 1]
                phi = sqrt(px * px + py * py + eps * eps)
                energy += half * phi
                if phi > 0:
                    qx = half * px / phi / hx
                    qy = half * py / phi / hy
                    grad[i + 1, j + 1] += qx + qy
                    grad[i, j + 1] -= qx
                    grad[i + 1, j] -= qy
    return energy, grad_arr


def intrinsic_area_grad(u_in, double hx, double ht, g_in, yg_in):
    cdef const double[:, ::1] u = np.ascontiguousarray(u_in, dtype=np.float64)
    cdef const double[:, :, :, ::1] g = np.ascontiguousarray(g_in, dtype=np.float64)
    cdef const double[:, :, :, ::1] yg = np.ascontiguousarray(yg_in, dtype=np.float64)
    cdef Py_ssize_t m = u.shape[0]
    cdef Py_ssize_t n = u.shape[1]
    grad_arr = np.zeros((m, n))
    cdef double[:, ::1] grad = grad_arr
    cdef double tri = 0.5 * hx * ht
    cdef double energy = 0.0
    cdef double a, b, c, d, uc, ux, ut, W, root, M, K1, du, dux, dut
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(m - 1):
            for j in range(n - 1):
                a = u[i, j]
                b = u[i + 1, j]
                c = u[i, j + 1]
                d = u[i + 1, j + 1]
                # triangle (a, b, c)
                uc = (a + b + c) / 3.0
                ux = (b - a) / hx
                ut = (c - a) / ht
                W = ux + uc * ut
                root = sqrt(g[2, 0, i, j] * W * W + 2.0 * g[1, 0, i, j] * W + g[0, 0, i, j])
                energy += root
                M = (g[2, 0, i, j] * W + g[1, 0, i, j]) / root
                K1 = (yg[2, 0, i, j] * W * W + 2.0 * yg[1, 0, i, j] * W + yg[0, 0, i, j]) / (2.0 * root)
                du = tri * (K1 + M * ut) / 3.0
                dux = tri * M / hx
                dut = tri * M * uc / ht
                grad[i, j] += du - dux - dut
                grad[i + 1, j] += du + dux
                grad[i, j + 1] += du + dut
                # triangle (b, c, d)
                uc = (b + c + d) / 3.0
                ux = (d - c) / hx
                ut = (d - b) / ht
                W = ux + uc * ut
                root = sqrt(g[2, 1, i, j] * W * W + 2.0 * g[1, 1, i, j] * W + g[0, 1, i, j])
                energy += root
                M = (g[2, 1, i, j] * W + g[1, 1, i, j]) / root
                K1 = (yg[2, 1, i, j] * W * W + 2.0 * yg[1, 1, i, j] * W + yg[0, 1, i, j]) / (2.0 * root)
                du = tri * (K1 + M * ut) / 3.0
                dux = tri * M / hx
                dut = tri * M * uc / ht
                grad[i + 1, j] += du - dut
                grad[i, j + 1] += du - dux
                grad[i + 1, j + 1] += du + dux + dut
    return energy * tri, grad_arr
