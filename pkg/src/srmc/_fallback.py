"""Pure-Python/numpy versions of the hot kernels in ``_kernels.pyx``.

Signatures and results match the compiled module; see :mod:`srmc.kernels`.
"""

import math

import numpy as np


def _bilinear(values, x0, hx, t0, ht, x, t):
    m, n = values.shape
    fx = (x - x0) / hx
    ft = (t - t0) / ht
    i = min(max(int(math.floor(fx)), 0), m - 2)
    j = min(max(int(math.floor(ft)), 0), n - 2)
    px = fx - i
    pt = ft - j
    return (
        values[i, j] * (1 - px) * (1 - pt)
        + values[i + 1, j] * px * (1 - pt)
        + values[i, j + 1] * (1 - px) * pt
        + values[i + 1, j + 1] * px * pt
    )


def rk4_char_grid(values, x0, hx, t0, ht, a, b, step, nmax, lo, hi):
    """RK4 for ``t' = u(s, t)`` with bilinear ``u``; stops before leaving ``[lo, hi]`` in t
    or the x-range of the grid.  Returns the t samples (length <= nmax + 1)."""
    values = np.asarray(values, dtype=float)
    x1 = x0 + hx * (values.shape[0] - 1)
    tol = 1e-12 * max(1.0, abs(x1 - x0))
    out = [b]
    s, t = a, b
    for _ in range(nmax):
        s_next = s + step
        if s_next < x0 - tol or s_next > x1 + tol:
            break
        k1 = _bilinear(values, x0, hx, t0, ht, s, t)
        k2 = _bilinear(values, x0, hx, t0, ht, s + 0.5 * step, t + 0.5 * step * k1)
        k3 = _bilinear(values, x0, hx, t0, ht, s + 0.5 * step, t + 0.5 * step * k2)
        k4 = _bilinear(values, x0, hx, t0, ht, s_next, t + step * k3)
        t_next = t + step * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if t_next < lo or t_next > hi:
            break
        out.append(t_next)
        s, t = s_next, t_next
    return np.array(out)


def _geo_rhs(c11, c21, c22, h, state):
    x, y, t, th = state
    c, s = math.cos(th), math.sin(th)
    a = c * c11 + s * c21
    b = s * c22
    return (a, b, -x * b, -h)


def rk4_geodesic_const(c11, c21, c22, hnodes, x0, y0, t0, th0, step, n):
    """RK4 for a curvature-``h`` geodesic of a constant metric.

    ``(c11, c21, c22)`` are the orthonormal-frame coefficients ``e1 = c11 X``,
    ``e2 = c21 X + c22 Y``; ``hnodes[2k]`` is ``h`` at ``s_k`` and
    ``hnodes[2k+1]`` at the half step.  Returns an ``(n+1, 4)`` array of
    ``(x, y, t, theta)``.
    """
    out = np.empty((n + 1, 4))
    state = (x0, y0, t0, th0)
    out[0] = state
    for k in range(n):
        h0, hm, h1 = hnodes[2 * k], hnodes[2 * k + 1], hnodes[2 * k + 2]
        k1 = _geo_rhs(c11, c21, c22, h0, state)
        s2 = tuple(p + 0.5 * step * q for p, q in zip(state, k1))
        k2 = _geo_rhs(c11, c21, c22, hm, s2)
        s3 = tuple(p + 0.5 * step * q for p, q in zip(state, k2))
        k3 = _geo_rhs(c11, c21, c22, hm, s3)
        s4 = tuple(p + step * q for p, q in zip(state, k3))
        k4 = _geo_rhs(c11, c21, c22, h1, s4)
        state = tuple(
            p + step * (q1 + 2.0 * q2 + 2.0 * q3 + q4) / 6.0 for p, q1, q2, q3, q4 in zip(state, k1, k2, k3, k4)
        )
        out[k + 1] = state
    return out


def tgraph_energy_grad(v, xs, ys, fv, eps, weights):
    """Energy of a grid t-graph and its nodal gradient.

    Each cell contributes half its area at its lower-left node, using forward
    differences along its bottom and left edges, and half at its upper-right
    node, using backward differences along its top and right edges.  The
    ``f v`` term uses the nodal ``weights`` (trapezoid).
    """
    v = np.asarray(v, dtype=float)
    hx = xs[1] - xs[0]
    hy = ys[1] - ys[0]
    half = 0.5 * hx * hy
    a, b, c, d = v[:-1, :-1], v[1:, :-1], v[:-1, 1:], v[1:, 1:]
    grad = np.asarray(weights * fv, dtype=float) * np.ones_like(v)
    energy = float(np.sum(weights * fv * v))
    for dx, dy, x, y, lower in (
        ((b - a) / hx, (c - a) / hy, xs[:-1, None], ys[None, :-1], True),
        ((d - c) / hx, (d - b) / hy, xs[1:, None], ys[None, 1:], False),
    ):
        px = dx - y
        py = dy + x
        phi = np.sqrt(px * px + py * py + eps * eps)
        energy += half * float(np.sum(phi))
        safe = np.where(phi > 0, phi, 1.0)
        qx = half * px / safe / hx
        qy = half * py / safe / hy
        if lower:
            grad[1:, :-1] += qx
            grad[:-1, 1:] += qy
            grad[:-1, :-1] -= qx + qy
        else:
            grad[1:, 1:] += qx + qy
            grad[:-1, 1:] -= qx
            grad[1:, :-1] -= qy
    return energy, grad


def intrinsic_area_grad(u, hx, ht, g, yg):
    """Area of a grid intrinsic graph on the two-triangle split of each cell, and its gradient.

    Cell ``(i, j)`` with corners ``a = u[i, j]``, ``b = u[i+1, j]``,
    ``c = u[i, j+1]`` and ``d = u[i+1, j+1]`` is split into ``(a, b, c)`` and
    ``(b, c, d)``; on each the graph is linear and the area element is taken at
    the centroid.  ``g``/``yg`` hold ``(g11, g12, g22)`` and their ``Y``
    derivatives at the embedded centroids, shape ``(3, 2, m-1, n-1)``.
    """
    u = np.asarray(u, dtype=float)
    a, b, c, d = u[:-1, :-1], u[1:, :-1], u[:-1, 1:], u[1:, 1:]
    tri = 0.5 * hx * ht
    grad = np.zeros_like(u)
    energy = 0.0
    parts = (
        ((a + b + c) / 3.0, (b - a) / hx, (c - a) / ht),
        ((b + c + d) / 3.0, (d - c) / hx, (d - b) / ht),
    )
    for k, (uc, ux, ut) in enumerate(parts):
        g11, g12, g22 = g[0, k], g[1, k], g[2, k]
        W = ux + uc * ut
        root = np.sqrt(g22 * W * W + 2.0 * g12 * W + g11)
        energy += float(np.sum(root))
        M = (g22 * W + g12) / root
        K1 = (yg[2, k] * W * W + 2.0 * yg[1, k] * W + yg[0, k]) / (2.0 * root)
        du = tri * (K1 + M * ut) / 3.0
        dux = tri * M / hx
        dut = tri * M * uc / ht
        if k == 0:
            grad[:-1, :-1] += du - dux - dut
            grad[1:, :-1] += du + dux
            grad[:-1, 1:] += du + dut
        else:
            grad[1:, :-1] += du - dut
            grad[:-1, 1:] += du - dux
            grad[1:, 1:] += du + dux + dut
    return energy * tri, grad
