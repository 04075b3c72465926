"""Intrinsic graphs over the vertical plane ``y = 0`` and their pointwise geometry.

A function ``u(x, t)`` on a rectangle ``D`` defines the surface

    Phi(x, t) = (x, u, t - x u)

whose coordinate tangents are ``E1 = X + u_x Y - u T`` and ``E2 = u_t Y + T``.
All geometric functions take ``x`` and ``t`` as floats or broadcastable arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .chart import (
    ChartPoint,
    HorizontalVec,
    MetricError,
    MetricField,
    det_g,
    frame_connection_arrays,
    jrot_coeffs,
)
from .fields import ScalarField


class DomainError(ValueError):
    """A parameter point lies outside the graph domain."""


@dataclass(frozen=True)
class GraphDomain:
    x0: float
    x1: float
    t0: float
    t1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.t0 < self.t1):
            raise ValueError(f"degenerate domain {self}")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.t1 - self.t0)

    def contains(self, x, t, tol: float = 1e-12):
        return (
            (x >= self.x0 - tol) & (x <= self.x1 + tol) & (t >= self.t0 - tol) & (t <= self.t1 + tol)
        )

    def require(self, x, t):
        if not np.all(self.contains(np.asarray(x), np.asarray(t))):
            raise DomainError(f"point outside {self}")

    def grid(self, m: int, n: int):
        """Node coordinates ``(xs, ts)`` of an ``m x n`` grid including the boundary."""
        return np.linspace(self.x0, self.x1, m), np.linspace(self.t0, self.t1, n)


class GraphFunction:
    """Interface: ``evaluate(x, t) -> (u, u_x, u_t)``."""

    smooth = True
    domain: GraphDomain | None = None

    def evaluate(self, x, t):
        raise NotImplementedError

    def __call__(self, x, t):
        return self.evaluate(x, t)[0]

    def plus(self, other: "GraphFunction", scale: float = 1.0) -> "GraphFunction":
        return Combination(self, other, scale)


class ExprGraph(GraphFunction):
    """Expression-backed ``u(x, t)`` with exact first partials."""

    def __init__(self, source, domain: GraphDomain | None = None, lipschitz: float | None = None):
        self.field = source if isinstance(source, ScalarField) else ScalarField(source, ("x", "t"))
        self.domain = domain
        self.lipschitz = lipschitz

    def __repr__(self):
        return f"ExprGraph({self.field.source!r})"

    def evaluate(self, x, t):
        value, grad = self.field.eval_with_grad({"x": x, "t": t})
        return value, grad[0], grad[1]


class Combination(GraphFunction):
    """``u + scale * v``."""

    def __init__(self, u: GraphFunction, v: GraphFunction, scale: float):
        self.u, self.v, self.scale = u, v, scale
        self.smooth = u.smooth and v.smooth
        self.domain = u.domain

    def evaluate(self, x, t):
        a = self.u.evaluate(x, t)
        b = self.v.evaluate(x, t)
        return tuple(p + self.scale * q for p, q in zip(a, b))


class GridGraph(GraphFunction):
    """Grid-backed ``u`` sampled at ``values[i, j] = u(xs[i], ts[j])``.

    ``method="linear"`` is bilinear (Lipschitz, partials constant along their own
    variable in each cell); ``method="cubic"`` is a C^2 tensor spline used where
    curvature is needed from grid data.
    """

    def __init__(self, values, domain: GraphDomain, method: str = "linear", lipschitz: float | None = None):
        values = np.ascontiguousarray(values, dtype=float)
        if values.ndim != 2 or min(values.shape) < 2:
            raise ValueError("grid needs at least 2 x 2 samples")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid values must be finite")
        if method not in ("linear", "cubic"):
            raise ValueError(f"unknown interpolation {method!r}")
        self.values = values
        self.domain = domain
        self.method = method
        self.smooth = method == "cubic"
        self.xs, self.ts = domain.grid(*values.shape)
        self.hx = self.xs[1] - self.xs[0]
        self.ht = self.ts[1] - self.ts[0]
        self.lipschitz = self.estimate_lipschitz() if lipschitz is None else lipschitz
        if method == "cubic":
            k = min(3, values.shape[0] - 1, values.shape[1] - 1)
            self._spline = RectBivariateSpline(self.xs, self.ts, values, kx=k, ky=k, s=0)

    def __repr__(self):
        return f"GridGraph(shape={self.values.shape}, {self.domain}, method={self.method!r})"

    def estimate_lipschitz(self) -> float:
        dx = np.abs(np.diff(self.values, axis=0)).max() / self.hx
        dt = np.abs(np.diff(self.values, axis=1)).max() / self.ht
        return float(np.hypot(dx, dt))

    def with_method(self, method: str) -> "GridGraph":
        return GridGraph(self.values, self.domain, method)

    def cell_index(self, x, t):
        """Cell indices (clipped) and local coordinates in ``[0, 1]``."""
        fx = (np.asarray(x, dtype=float) - self.domain.x0) / self.hx
        ft = (np.asarray(t, dtype=float) - self.domain.t0) / self.ht
        i = np.clip(np.floor(fx).astype(int), 0, self.values.shape[0] - 2)
        j = np.clip(np.floor(ft).astype(int), 0, self.values.shape[1] - 2)
        return i, j, fx - i, ft - j

    def on_cell_edge(self, x, t, tol: float = 1e-12):
        _, _, px, pt = self.cell_index(x, t)
        return (np.abs(px - np.round(px)) < tol) | (np.abs(pt - np.round(pt)) < tol)

    def evaluate(self, x, t):
        if self.method == "cubic":
            x = np.asarray(x, dtype=float)
            t = np.asarray(t, dtype=float)
            u = self._spline.ev(x, t)
            ux = self._spline.ev(x, t, dx=1)
            ut = self._spline.ev(x, t, dy=1)
            if u.ndim == 0:
                return float(u), float(ux), float(ut)
            return u, ux, ut
        i, j, px, pt = self.cell_index(x, t)
        v = self.values
        a, b, c, d = v[i, j], v[i + 1, j], v[i, j + 1], v[i + 1, j + 1]
        u = a * (1 - px) * (1 - pt) + b * px * (1 - pt) + c * (1 - px) * pt + d * px * pt
        ux = ((b - a) * (1 - pt) + (d - c) * pt) / self.hx
        ut = ((c - a) * (1 - px) + (d - b) * px) / self.ht
        if np.ndim(u) == 0:
            return float(u), float(ux), float(ut)
        return u, ux, ut


class BumpFunction(GraphFunction):
    """Smooth compactly supported ``amp * b((x-cx)/wx) * b((t-ct)/wt)``, ``b(r) = exp(1 - 1/(1-r^2))``."""

    def __init__(self, cx, ct, wx, wt, amp=1.0):
        self.cx, self.ct, self.wx, self.wt, self.amp = cx, ct, wx, wt, amp

    def __repr__(self):
        return f"BumpFunction({self.cx}, {self.ct}, {self.wx}, {self.wt}, amp={self.amp})"

    @staticmethod
    def _profile(r):
        r = np.asarray(r, dtype=float)
        inside = np.abs(r) < 1.0
        q = np.where(inside, 1.0 - r * r, 1.0)
        b = np.where(inside, np.exp(1.0 - 1.0 / q), 0.0)
        db = np.where(inside, b * (-2.0 * r) / (q * q), 0.0)
        return b, db

    def support(self):
        return GraphDomain(self.cx - self.wx, self.cx + self.wx, self.ct - self.wt, self.ct + self.wt)

    def evaluate(self, x, t):
        bx, dbx = self._profile((np.asarray(x) - self.cx) / self.wx)
        bt, dbt = self._profile((np.asarray(t) - self.ct) / self.wt)
        u = self.amp * bx * bt
        ux = self.amp * dbx * bt / self.wx
        ut = self.amp * bx * dbt / self.wt
        if np.ndim(u) == 0:
            return float(u), float(ux), float(ut)
        return u, ux, ut


def as_graph(source, domain: GraphDomain | None = None) -> GraphFunction:
    if isinstance(source, GraphFunction):
        return source
    return ExprGraph(source, domain)


def embed(u: GraphFunction, x, t, domain: GraphDomain | None = None):
    """Chart coordinates ``(x, u, t - x u)`` of the graph point over ``(x, t)``."""
    dom = domain or u.domain
    if dom is not None:
        dom.require(x, t)
    val = u(x, t)
    return np.stack(np.broadcast_arrays(np.asarray(x, dtype=float), val, t - x * val))


def embed_point(u: GraphFunction, x: float, t: float, domain: GraphDomain | None = None) -> ChartPoint:
    return ChartPoint(*(float(c) for c in embed(u, x, t, domain)))


@dataclass(frozen=True)
class Tangents:
    """Coordinate and frame components of ``E1`` and ``E2``."""

    e1: np.ndarray
    e2: np.ndarray
    e1_frame: np.ndarray
    e2_frame: np.ndarray
    one_sided: bool = False


def tangents(u: GraphFunction, x, t, domain: GraphDomain | None = None) -> Tangents:
    dom = domain or u.domain
    if dom is not None:
        dom.require(x, t)
    val, ux, ut = u.evaluate(x, t)
    e1 = np.stack(np.broadcast_arrays(1.0, ux, -val - x * ux)).astype(float)
    e2 = np.stack(np.broadcast_arrays(0.0, ut, 1.0 - x * ut)).astype(float)
    e1f = np.stack(np.broadcast_arrays(1.0, ux, -val)).astype(float)
    e2f = np.stack(np.broadcast_arrays(0.0, ut, 1.0)).astype(float)
    one_sided = bool(np.any(u.on_cell_edge(x, t))) if isinstance(u, GridGraph) and u.method == "linear" else False
    return Tangents(e1, e2, e1f, e2f, one_sided)


def char_slope(u: GraphFunction, x, t):
    """``W = u_x + u u_t``, the Y-coefficient of ``X + W Y``."""
    val, ux, ut = u.evaluate(x, t)
    return ux + val * ut


def _metric_at(u, x, t, G: MetricField):
    val, ux, ut = u.evaluate(x, t)
    g = G.values(x, val, t - x * val)
    return val, ux, ut, g


def _area_element_from(W, g11, g12, g22):
    rad = g22 * W * W + 2.0 * g12 * W + g11
    if np.any(rad <= 0):
        raise MetricError("negative area radicand: metric not positive definite")
    return np.sqrt(rad)


def area_element(u: GraphFunction, x, t, G: MetricField):
    """``(g22 W^2 + 2 g12 W + g11)^(1/2)`` with the metric at the embedded point."""
    val, ux, ut, (g11, g12, g22) = _metric_at(u, x, t, G)
    return _area_element_from(ux + val * ut, g11, g12, g22)


def unit_z(u: GraphFunction, x, t, G: MetricField) -> HorizontalVec:
    """Unit characteristic direction ``(X + W Y)/|X + W Y|``."""
    val, ux, ut, g = _metric_at(u, x, t, G)
    W = ux + val * ut
    norm = _area_element_from(W, *g)
    return HorizontalVec(_base(x, val, t), 1.0 / norm, W / norm)


def nu_h(u: GraphFunction, x, t, G: MetricField) -> HorizontalVec:
    """Horizontal unit normal ``-j(Z)``."""
    z = unit_z(u, x, t, G)
    val = u(x, t)
    g = G.values(x, val, t - x * val)
    ja, jb = jrot_coeffs(*g, z.a, z.b)
    return HorizontalVec(z.base, -ja, -jb)


def _base(x, val, t):
    if np.ndim(val) == 0 and np.ndim(x) == 0 and np.ndim(t) == 0:
        return ChartPoint(float(x), float(val), float(t - x * val))
    return None


def _normal_covector(u, x, t):
    val, ux, ut = u.evaluate(x, t)
    # frame-component cross product e1 x e2 with e1 = (1, ux, -u), e2 = (0, ut, 1)
    return val, ux, ut, np.stack(np.broadcast_arrays(ux + val * ut, -1.0, ut)).astype(float)


def n_h_norm(u: GraphFunction, x, t, G: MetricField):
    """``|N_h|`` for the g-unit normal ``N`` of the embedded graph."""
    val, _, _, n = _normal_covector(u, x, t)
    g11, g12, g22 = G.values(x, val, t - x * val)
    det = det_g(g11, g12, g22)
    # horizontal block of G_frame^{-1} applied to the covector
    hh = (g22 * n[0] ** 2 - 2.0 * g12 * n[0] * n[1] + g11 * n[1] ** 2) / det
    full = hh + n[2] ** 2
    if np.any(full <= 0):
        raise MetricError("degenerate tangent plane")
    return np.sqrt(hh / full)


def normal_vector(u: GraphFunction, x, t, G: MetricField):
    """Frame coefficients of the unit normal ``N``, oriented so ``<N, nu_h> >= 0``."""
    val, _, _, n = _normal_covector(u, x, t)
    g11, g12, g22 = G.values(x, val, t - x * val)
    det = det_g(g11, g12, g22)
    a = (g22 * n[0] - g12 * n[1]) / det
    b = (-g12 * n[0] + g11 * n[1]) / det
    c = n[2]
    norm = np.sqrt(a * n[0] + b * n[1] + c * n[2])
    a, b, c = a / norm, b / norm, c / norm
    nu = nu_h(u, x, t, G)
    sign = np.where(g11 * a * nu.a + g12 * (a * nu.b + b * nu.a) + g22 * b * nu.b >= 0, 1.0, -1.0)
    return sign * a, sign * b, sign * c


def riemannian_area_element(u: GraphFunction, x, t, G: MetricField):
    """``|E1 ^ E2|`` for the extended metric."""
    val, _, _, n = _normal_covector(u, x, t)
    g11, g12, g22 = G.values(x, val, t - x * val)
    det = det_g(g11, g12, g22)
    dual = (g22 * n[0] ** 2 - 2.0 * g12 * n[0] * n[1] + g11 * n[1] ** 2) / det + n[2] ** 2
    return np.sqrt(det * dual)


def zx_check(u: GraphFunction, x, t, G: MetricField):
    """Residual of the unit-norm identity for ``Z`` written through ``<Z,X>``, ``<Z,Y>``.

    Checks ``1 = det(G)^{-1} (g22 <Z,X>^2 - 2 g12 <Z,X><Z,Y> + g11 <Z,Y>^2)`` and
    that ``<Z,X>`` equals the ``+`` root of the quadratic it solves.  Raises if
    ``<Z,Y>^2 >= g22`` (``Z`` parallel to ``Y``).
    """
    val, ux, ut, (g11, g12, g22) = _metric_at(u, x, t, G)
    W = ux + val * ut
    norm = _area_element_from(W, g11, g12, g22)
    a, b = 1.0 / norm, W / norm
    zx = g11 * a + g12 * b
    zy = g12 * a + g22 * b
    if np.any(zy * zy >= g22):
        raise ValueError("Z collinear with Y: not an intrinsic graph")
    det = det_g(g11, g12, g22)
    identity = np.abs(1.0 - (g22 * zx * zx - 2.0 * g12 * zx * zy + g11 * zy * zy) / det)
    root = (g12 * zy + np.sqrt(det * (g22 - zy * zy))) / g22
    return np.maximum(identity, np.abs(zx - root))


def connection_at(G: MetricField, x, y, t):
    g, xg, yg = G.values_and_frame_derivs(x, y, t)
    return g, frame_connection_arrays(g, xg, yg)


def _z_coeffs(u, x, t, G):
    val, ux, ut, g = _metric_at(u, x, t, G)
    W = ux + val * ut
    norm = _area_element_from(W, *g)
    return np.stack([1.0 / norm, W / norm]), norm, val


def mean_curvature_at(u: GraphFunction, x, t, G: MetricField, delta: float = 1e-4):
    """``H = <nabla_Z Z, nu_h>`` at parameter points, for smooth ``u``.

    ``Z`` is differentiated along the parameter direction ``(1, u)`` (image of
    ``X + W Y`` under the parameterization) by central differences of the
    automatically differentiated coefficients.
    """
    if not u.smooth:
        raise ValueError("pointwise curvature needs a smooth (expression or cubic) graph")
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    z, norm, val = _z_coeffs(u, x, t, G)
    zp, _, _ = _z_coeffs(u, x + delta, t + val * delta, G)
    zm, _, _ = _z_coeffs(u, x - delta, t - val * delta, G)
    dz = (zp - zm) / (2.0 * delta)
    return _curvature_from(z, dz / norm, G, x, val, t)


def _curvature_from(z, zdot, G, x, val, t):
    """``<nabla_Z Z, -j(Z)>`` given ``Z`` and its derivative ``Z(z)`` along ``Z``."""
    g, conn = connection_at(G, x, val, t - x * val)
    za, zb = z
    acc = np.stack(
        [
            zdot[0] + np.einsum("...i,...j,...ij->...", np.stack([za, zb], -1), np.stack([za, zb], -1), conn[..., 0]),
            zdot[1] + np.einsum("...i,...j,...ij->...", np.stack([za, zb], -1), np.stack([za, zb], -1), conn[..., 1]),
        ]
    )
    g11, g12, g22 = g
    ja, jb = jrot_coeffs(g11, g12, g22, za, zb)
    na, nb = -ja, -jb
    return g11 * acc[0] * na + g12 * (acc[0] * nb + acc[1] * na) + g22 * acc[1] * nb
