"""nabla-geodesics of prescribed curvature and their comparison with characteristic curves.

A unit-speed horizontal curve is a ``nabla``-geodesic of curvature ``h`` when
``nabla_g' g' + h j(g') = 0`` with the unit rotation ``j = J/|J|``.  Writing
``g' = cos(theta) e1 + sin(theta) e2`` in the Gram-Schmidt frame of ``{X, Y}``
this becomes ``theta' = -h - w12(g')`` with ``w12(V) = <nabla_V e1, e2>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from . import kernels
from .chart import ChartPoint, MetricField, det_g, frame_connection_arrays, jrot_coeffs, j_tau_matrices
from .fields import ScalarField
from .foliation import arclength, integrate_characteristic, mean_curvature_along
from .graph import GraphFunction, _area_element_from


@dataclass
class HorizontalCurve:
    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    theta: np.ndarray | None
    h: np.ndarray
    step: float

    @property
    def points(self):
        return np.stack([self.x, self.y, self.t], axis=1)

    def __len__(self):
        return len(self.s)


def horizontal_curve_from_points(points, step, h) -> HorizontalCurve:
    """Wrap sampled positions (no angle information) for residual checks."""
    P = np.asarray(points, dtype=float)
    s = step * np.arange(len(P))
    h = np.broadcast_to(np.asarray(h, dtype=float), (len(P),)).copy()
    return HorizontalCurve(s, P[:, 0], P[:, 1], P[:, 2], None, h, float(step))


def orthonormal_coeffs(g11, g12, g22):
    """``(c11, c21, c22)`` with ``e1 = c11 X`` and ``e2 = c21 X + c22 Y`` (Gram-Schmidt from X)."""
    s = np.sqrt(det_g(g11, g12, g22) / g11)
    return 1.0 / np.sqrt(g11), -g12 / (g11 * s), 1.0 / s


def _curvature_function(h):
    if isinstance(h, ScalarField):
        return lambda s: np.broadcast_to(h.evaluate({"s": s, "x": 0.0, "y": 0.0, "t": 0.0}), np.shape(s))
    if callable(h):
        return lambda s: np.broadcast_to(np.asarray(h(s), dtype=float), np.shape(s))
    if isinstance(h, str):
        return _curvature_function(ScalarField(h, ("s",)))
    value = float(h)
    return lambda s: np.full(np.shape(s), value)


def _general_rhs(G: MetricField, state, hval):
    x, y, t, th = state
    g, xg, yg = G.values_and_frame_derivs(x, y, t)
    g11, g12, g22 = (float(v) for v in g)
    c11, c21, c22 = orthonormal_coeffs(g11, g12, g22)
    c, s = math.cos(th), math.sin(th)
    a = c * c11 + s * c21
    b = s * c22
    conn = frame_connection_arrays(g, xg, yg)
    # w12(V) = c11 <nabla_V X, e2> and <Y, e2> = 1/c22 while <X, e2> = 0
    w12 = c11 * (a * conn[0, 0, 1] + b * conn[1, 0, 1]) / c22
    return (a, b, -x * b, -hval - w12)


def integrate_geodesic(
    G: MetricField,
    start: ChartPoint,
    theta0: float,
    h=0.0,
    length: float = 1.0,
    step: float = 1e-3,
) -> HorizontalCurve:
    """RK4 on ``(x, y, t, theta)`` over arclength ``[0, length]``.

    ``h`` is a number, a callable of arclength, or a :class:`ScalarField` in ``s``.
    Constant metrics go through the compiled kernel.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    n = max(1, int(round(length / step)))
    step = length / n if length > 0 else step
    hfun = _curvature_function(h)
    s = step * np.arange(n + 1)
    if G.is_constant:
        g = [float(v) for v in G.values(start.x, start.y, start.t)]
        c11, c21, c22 = orthonormal_coeffs(*g)
        hnodes = np.array(hfun(0.5 * step * np.arange(2 * n + 1)), dtype=float)
        out = kernels.rk4_geodesic_const(c11, c21, c22, hnodes, start.x, start.y, start.t, theta0, step, n)
    else:
        out = np.empty((n + 1, 4))
        state = (start.x, start.y, start.t, theta0)
        out[0] = state
        half = hfun(0.5 * step * np.arange(2 * n + 1))
        for k in range(n):
            k1 = _general_rhs(G, state, half[2 * k])
            k2 = _general_rhs(G, tuple(p + 0.5 * step * q for p, q in zip(state, k1)), half[2 * k + 1])
            k3 = _general_rhs(G, tuple(p + 0.5 * step * q for p, q in zip(state, k2)), half[2 * k + 1])
            k4 = _general_rhs(G, tuple(p + step * q for p, q in zip(state, k3)), half[2 * k + 2])
            state = tuple(p + step * (q1 + 2 * q2 + 2 * q3 + q4) / 6.0 for p, q1, q2, q3, q4 in zip(state, k1, k2, k3, k4))
            out[k + 1] = state
    return HorizontalCurve(s, out[:, 0], out[:, 1], out[:, 2], out[:, 3], np.asarray(hfun(s), dtype=float), float(step))


def tangent_coeffs(curve: HorizontalCurve, G: MetricField):
    """Frame coefficients ``(a, b)`` of ``cos(theta) e1 + sin(theta) e2`` at every sample."""
    if curve.theta is None:
        raise ValueError("curve carries no angle samples")
    g = G.values(curve.x, curve.y, curve.t)
    c11, c21, c22 = orthonormal_coeffs(*g)
    c, s = np.cos(curve.theta), np.sin(curve.theta)
    return c * c11 + s * c21, s * c22


def geodesic_residual_vectors(curve: HorizontalCurve, G: MetricField):
    """Frame coefficients of ``P(nabla_V V)/|V|^2 + h j(V)/|V|`` at interior samples.

    ``V`` and ``V'`` are central differences of the positions only; ``P``
    removes the tangential part, so for unit-speed curves this is
    ``nabla_V V + h j(V)``.  Returns ``(vectors (2, n-2), metric (3, n-2), V (2, n-2))``.
    """
    if len(curve) < 3:
        raise ValueError("residual needs at least 3 samples")
    P = curve.points
    d = curve.step
    V = (P[2:] - P[:-2]) / (2.0 * d)
    A = (P[2:] - 2.0 * P[1:-1] + P[:-2]) / (d * d)
    mid = P[1:-1]
    g, xg, yg = G.values_and_frame_derivs(mid[:, 0], mid[:, 1], mid[:, 2])
    conn = frame_connection_arrays(g, xg, yg)
    v = V[:, :2]  # horizontal frame coefficients are (x', y')
    acc = A[:, :2] + np.einsum("ni,nj,nijk->nk", v, v, conn)
    g11, g12, g22 = g
    vv = g11 * v[:, 0] ** 2 + 2 * g12 * v[:, 0] * v[:, 1] + g22 * v[:, 1] ** 2
    av = g11 * acc[:, 0] * v[:, 0] + g12 * (acc[:, 0] * v[:, 1] + acc[:, 1] * v[:, 0]) + g22 * acc[:, 1] * v[:, 1]
    normal = acc - (av / vv)[:, None] * v
    speed = np.sqrt(vv)
    ja, jb = jrot_coeffs(g11, g12, g22, v[:, 0], v[:, 1])
    h = curve.h[1:-1]
    res = normal / vv[:, None] + (h / speed)[:, None] * np.stack([ja, jb], axis=1)
    return res.T, g, v.T


def geodesic_residual(curve: HorizontalCurve, G: MetricField):
    """g-norms of :func:`geodesic_residual_vectors` at interior samples."""
    res, (g11, g12, g22), _ = geodesic_residual_vectors(curve, G)
    return np.sqrt(g11 * res[0] ** 2 + 2 * g12 * res[0] * res[1] + g22 * res[1] ** 2)


def curvature_from_residual(curve: HorizontalCurve, G: MetricField):
    """Geodesic curvature recovered by feeding ``h = 0`` to the residual: ``-<r, j(V)>/|V|``."""
    probe = HorizontalCurve(curve.s, curve.x, curve.y, curve.t, curve.theta, np.zeros(len(curve)), curve.step)
    res, (g11, g12, g22), v = geodesic_residual_vectors(probe, G)
    ja, jb = jrot_coeffs(g11, g12, g22, v[0], v[1])
    speed = np.sqrt(g11 * v[0] ** 2 + 2 * g12 * v[0] * v[1] + g22 * v[1] ** 2)
    return -(g11 * res[0] * ja + g12 * (res[0] * jb + res[1] * ja) + g22 * res[1] * jb) / speed


def subriemannian_check(curve: HorizontalCurve, G: MetricField, stride: int = 1, fd_step: float = 1e-5):
    """``d h/ds - g(tau(g'), g')`` at every ``stride``-th sample (unit-speed curves)."""
    idx = np.arange(0, len(curve), stride)
    dh = np.gradient(curve.h, curve.step, edge_order=2 if len(curve) > 2 else 1)[idx]
    P = curve.points
    V = np.gradient(P, curve.step, axis=0, edge_order=2 if len(curve) > 2 else 1)
    out = np.empty(len(idx))
    for n, i in enumerate(idx):
        p = ChartPoint(*P[i])
        _, tau = j_tau_matrices(G, p, fd_step)
        coeffs = np.array([V[i, 0], V[i, 1], 0.0])
        tv = tau @ coeffs
        gf = G.frame_gram(p)
        out[n] = dh[n] - coeffs @ gf @ tv
    return out


@dataclass
class CompareReport:
    sup_distance: float
    length: float
    max_curvature_gap: float | None
    sigma: np.ndarray
    characteristic: np.ndarray
    geodesic: HorizontalCurve
    H: np.ndarray


def compare_with_characteristic(
    u: GraphFunction,
    G: MetricField,
    f,
    q: tuple[float, float],
    length: float = 1.0,
    step: float = 1e-3,
    window: int | None = None,
    domain=None,
) -> CompareReport:
    """Integrate the characteristic through ``q`` and the curvature-``H`` geodesic with its initial data.

    Distances are compared at equal arclength; ``max_curvature_gap`` is
    ``max |H - f|`` along the characteristic (``None`` if ``f`` is None).
    """
    domain = domain or u.domain
    a, b = q
    curve = integrate_characteristic(u, a, b, (a, domain.x1), step, domain)
    if len(curve) < 5:
        raise ValueError("characteristic curve too short to compare")
    H = mean_curvature_along(u, G, curve, window)
    sigma = arclength(curve, u, G)
    keep = int(np.searchsorted(sigma, length - 1e-12)) + 1
    keep = max(5, min(keep, len(curve)))
    sigma, H, lifted = sigma[:keep], H[:keep], curve.lifted[:keep]
    L = min(length, float(sigma[-1]))

    val, ux, ut = u.evaluate(a, b)
    p0 = ChartPoint(*(float(c) for c in lifted[0]))
    g11, g12, g22 = (float(v) for v in G.values(p0.x, p0.y, p0.t))
    W = ux + val * ut
    norm = float(_area_element_from(W, g11, g12, g22))
    za, zb = 1.0 / norm, W / norm
    c11, c21, c22 = orthonormal_coeffs(g11, g12, g22)
    # <Z, e1> and <Z, e2> in the metric
    cos_t = (g11 * za + g12 * zb) * c11
    sin_t = g11 * za * c21 + g12 * (za * c22 + zb * c21) + g22 * zb * c22
    theta0 = math.atan2(sin_t, cos_t)

    hspline = CubicSpline(sigma, H)
    geo = integrate_geodesic(G, p0, theta0, lambda s: hspline(np.clip(s, 0.0, sigma[-1])), L, step)
    char_at = CubicSpline(sigma, lifted, axis=0)(geo.s)
    dist = np.linalg.norm(char_at - geo.points, axis=1)
    gap = None
    if f is not None:
        from .variation import _curvature_values

        fv = np.broadcast_to(_curvature_values(f, lifted[:, 0], lifted[:, 1], lifted[:, 2]), H.shape)
        gap = float(np.max(np.abs(H - fv)))
    return CompareReport(float(dist.max()), L, gap, sigma, lifted, geo, H)
