"""Area functional of intrinsic graphs, its first variation and oracles.

The prescribed-curvature functional is ``A(u) - V_f(u)`` where ``V_f`` has
derivative ``int_D f det(G) v``.  Its first variation along ``v`` is

    int_D K v + M (v_x + u v_t + v u_t)

with ``K = K1 - f det(G)``.  The metric derivative entering ``K1`` is the
derivative along ``Y`` because ``dPhi/du = Y`` for ``Phi = (x, u, t - x u)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .chart import MetricField, det_g
from .fields import ScalarField
from .graph import (
    GraphDomain,
    GraphFunction,
    _area_element_from,
    mean_curvature_at,
)


@dataclass(frozen=True)
class Quadrature:
    """Tensor rule on an ``m x n`` grid of cells: Gauss-Legendre or midpoint."""

    rule: str = "gauss"
    order: int = 4
    m: int = 64
    n: int = 64

    def __post_init__(self):
        if self.rule not in ("gauss", "midpoint"):
            raise ValueError(f"unknown rule {self.rule!r}")
        if self.m < 1 or self.n < 1 or self.order < 1:
            raise ValueError("resolution and order must be positive")

    def nodes(self, domain: GraphDomain):
        """Flattened nodes ``(x, t)`` and weights; weights sum to the domain area."""
        return _nodes(self, domain)


@lru_cache(maxsize=32)
def _nodes(quad: Quadrature, domain: GraphDomain):
    if quad.rule == "midpoint":
        ref, w = np.array([0.0]), np.array([2.0])
    else:
        ref, w = np.polynomial.legendre.leggauss(quad.order)
    xs, wx = _tensor_1d(domain.x0, domain.x1, quad.m, ref, w)
    ts, wt = _tensor_1d(domain.t0, domain.t1, quad.n, ref, w)
    X, T = np.meshgrid(xs, ts, indexing="ij")
    W = np.outer(wx, wt)
    for arr in (X, T, W):
        arr.setflags(write=False)
    return X, T, W


def _tensor_1d(a, b, cells, ref, w):
    edges = np.linspace(a, b, cells + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * ref[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


DEFAULT_QUAD = Quadrature()


def _integrate(values, weights):
    # numpy's contiguous sum is a fixed-order pairwise reduction
    return float(np.sum(np.ascontiguousarray(values * weights)))


def as_curvature(f):
    """Prescribed curvature as given, with DSL strings parsed into a :class:`ScalarField`."""
    if isinstance(f, str):
        return ScalarField(f, ("x", "y", "t", "s"))
    return f


def _curvature_values(f, x, y, t):
    f = as_curvature(f)
    if f is None:
        return 0.0
    if isinstance(f, ScalarField):
        return f.evaluate({"x": x, "y": y, "t": t, "s": 0.0})
    if callable(f):
        return f(x, y, t)
    return float(f)


def area(u: GraphFunction, G: MetricField, domain: GraphDomain, quad: Quadrature = DEFAULT_QUAD) -> float:
    """Quadrature of ``(g22 W^2 + 2 g12 W + g11)^(1/2)`` over ``domain``."""
    X, T, Wq = quad.nodes(domain)
    val, ux, ut = u.evaluate(X, T)
    g = G.values(X, val, T - X * val)
    return _integrate(_area_element_from(ux + val * ut, *g), Wq)


def coefficients(u: GraphFunction, x, t, G: MetricField, f=None):
    """``(K1, M, K)`` at parameter points ``(x, t)``."""
    val, ux, ut = u.evaluate(x, t)
    return _coefficients(val, ux, ut, x, t, G, f)


def _coefficients(val, ux, ut, x, t, G, f):
    y, tt = val, t - x * val
    g, _, yg = G.values_and_frame_derivs(x, y, tt)
    W = ux + val * ut
    root = _area_element_from(W, *g)
    K1 = (yg[2] * W * W + 2.0 * yg[1] * W + yg[0]) / (2.0 * root)
    M = (g[2] * W + g[1]) / root
    K = K1 - _curvature_values(f, x, y, tt) * det_g(*g)
    return K1, M, K


def _require_compact(v: GraphFunction, domain: GraphDomain, tol: float):
    s = np.linspace(0.0, 1.0, 65)
    xs = domain.x0 + (domain.x1 - domain.x0) * s
    ts = domain.t0 + (domain.t1 - domain.t0) * s
    edges = [
        v(xs, np.full_like(xs, domain.t0)),
        v(xs, np.full_like(xs, domain.t1)),
        v(np.full_like(ts, domain.x0), ts),
        v(np.full_like(ts, domain.x1), ts),
    ]
    worst = max(float(np.max(np.abs(e))) for e in edges)
    if worst > tol:
        raise ValueError(f"test function does not vanish on the boundary (max {worst:.3e})")


def integration_region(v: GraphFunction, domain: GraphDomain) -> GraphDomain | None:
    """``domain`` clipped to the support box of ``v`` when it has one (``None`` if disjoint).

    Integrands of variations vanish off the support, so integrating only there
    is exact and lets the quadrature cells resolve the test function.
    """
    if not hasattr(v, "support"):
        return domain
    box = v.support()
    x0, x1 = max(domain.x0, box.x0), min(domain.x1, box.x1)
    t0, t1 = max(domain.t0, box.t0), min(domain.t1, box.t1)
    if x1 <= x0 or t1 <= t0:
        return None
    return GraphDomain(x0, x1, t0, t1)


def first_variation(
    u: GraphFunction,
    v: GraphFunction,
    f,
    G: MetricField,
    domain: GraphDomain,
    quad: Quadrature = DEFAULT_QUAD,
    support_tol: float = 1e-12,
) -> float:
    """``int_D K v + M (v_x + u v_t + v u_t)``."""
    _require_compact(v, domain, support_tol)
    region = integration_region(v, domain)
    if region is None:
        return 0.0
    X, T, Wq = quad.nodes(region)
    val, ux, ut = u.evaluate(X, T)
    vv, vx, vt = v.evaluate(X, T)
    _, M, K = _coefficients(val, ux, ut, X, T, G, f)
    return _integrate(K * vv + M * (vx + val * vt + vv * ut), Wq)


def volume_derivative(
    f,
    G: MetricField,
    v: GraphFunction,
    domain: GraphDomain,
    quad: Quadrature = DEFAULT_QUAD,
    u: GraphFunction | None = None,
) -> float:
    """``int_D f det(G) v`` with ``f`` and ``G`` at the graph of ``u`` (zero graph by default)."""
    region = integration_region(v, domain)
    if region is None:
        return 0.0
    X, T, Wq = quad.nodes(region)
    val = u(X, T) if u is not None else np.zeros_like(X)
    y, tt = val, T - X * val
    g = G.values(X, y, tt)
    return _integrate(_curvature_values(f, X, y, tt) * det_g(*g) * v(X, T), Wq)


def fd_variation_oracle(
    u: GraphFunction,
    v: GraphFunction,
    f,
    G: MetricField,
    domain: GraphDomain,
    quad: Quadrature = DEFAULT_QUAD,
    h: float = 1e-4,
) -> float:
    """Central difference of the area along ``u + s v`` minus the volume derivative."""
    region = integration_region(v, domain)
    if region is None:
        return 0.0
    # the two areas agree off the support of v
    plus = area(u.plus(v, h), G, region, quad)
    minus = area(u.plus(v, -h), G, region, quad)
    return (plus - minus) / (2.0 * h) - volume_derivative(f, G, v, domain, quad, u)


def geometric_first_variation(
    u: GraphFunction,
    phi: GraphFunction,
    f,
    G: MetricField,
    domain: GraphDomain,
    quad: Quadrature = DEFAULT_QUAD,
    volume_weight: str = "det",
    delta: float = 1e-4,
) -> float:
    """First variation along ``U = phi Y`` written through the mean curvature.

    Computes ``-int (H - f) |N_h| g(U, nu_h) dSigma``.  With ``nu_h = -j(Z)`` one
    has ``g(Y, nu_h) |N_h| dSigma = -sqrt(det G) dx dt``; the overall minus sign
    makes this agree with :func:`first_variation` (both differentiate ``A - V_f``).
    ``volume_weight="det"`` pairs ``f`` with ``det G`` like ``K``; ``"sqrt_det"``
    uses the Riemannian volume density instead.
    """
    if volume_weight not in ("det", "sqrt_det"):
        raise ValueError(f"unknown volume weight {volume_weight!r}")
    region = integration_region(phi, domain)
    if region is None:
        return 0.0
    X, T, Wq = quad.nodes(region)
    H = mean_curvature_at(u, X, T, G, delta)
    val = u(X, T)
    y, tt = val, T - X * val
    g11, g12, g22 = G.values(X, y, tt)
    sq = np.sqrt(det_g(g11, g12, g22))
    fv = _curvature_values(f, X, y, tt)
    if volume_weight == "det":
        fv = fv * sq  # f det G = (f sqrt(det G)) sqrt(det G)
    # g(Y, nu_h) times area element equals -sqrt(det G)
    integrand = (H - fv) * sq * phi(X, T)
    return _integrate(integrand, Wq)


@dataclass(frozen=True)
class VariationReport:
    value: float
    oracle: float
    abs_gap: float
    rel_gap: float

    @classmethod
    def build(cls, value: float, oracle: float) -> "VariationReport":
        gap = abs(value - oracle)
        scale = max(abs(value), abs(oracle))
        return cls(value, oracle, gap, gap / scale if scale > 0 else 0.0)

    def within(self, abs_tol: float, rel_tol: float) -> bool:
        return self.abs_gap <= max(abs_tol, rel_tol * max(abs(self.value), abs(self.oracle)))


def variation_report(u, v, f, G, domain, quad: Quadrature = DEFAULT_QUAD, h: float = 1e-4) -> VariationReport:
    return VariationReport.build(
        first_variation(u, v, f, G, domain, quad),
        fd_variation_oracle(u, v, f, G, domain, quad, h),
    )
