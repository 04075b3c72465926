"""Darboux chart, horizontal frame and the connections built from a metric.

The chart is fixed: contact form ``w = dt + x dy`` with horizontal frame
``X = d/dx``, ``Y = d/dy - x d/dt`` and Reeb field ``T = d/dt``, so that
``[X, Y] = -T``.  A :class:`MetricField` prescribes the Gram matrix of
``{X, Y}``; ``T`` is unit and orthogonal to the horizontal plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ScalarField, as_field

CHART_VARS = ("x", "y", "t")


class MetricError(ValueError):
    """The horizontal metric is singular or not positive definite."""


@dataclass(frozen=True)
class ChartPoint:
    x: float
    y: float
    t: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.x, self.y, self.t])):
            raise ValueError("chart coordinates must be finite")

    def as_array(self):
        return np.array([self.x, self.y, self.t], dtype=float)


@dataclass(frozen=True)
class HorizontalVec:
    """``a X + b Y`` at ``base``; ``a`` and ``b`` may be arrays."""

    base: ChartPoint
    a: float
    b: float

    def coords(self):
        return np.array([self.a, self.b, -self.base.x * self.b])


def frame_at(p: ChartPoint):
    """Coordinate components of ``X``, ``Y`` and ``T`` at ``p``."""
    return (
        np.array([1.0, 0.0, 0.0]),
        np.array([0.0, 1.0, -p.x]),
        np.array([0.0, 0.0, 1.0]),
    )


def contact_form(p: ChartPoint):
    """Components of ``w = dt + x dy`` on ``(d/dx, d/dy, d/dt)``."""
    return np.array([0.0, p.x, 1.0])


def _frame_jacobians():
    # d(component)/d(coordinate) of X, Y, T; only Y depends on x
    jx = np.zeros((3, 3))
    jy = np.zeros((3, 3))
    jy[2, 0] = -1.0
    jt = np.zeros((3, 3))
    return jx, jy, jt


def bracket_xy(p: ChartPoint):
    """``[X, Y]`` at ``p`` obtained by differentiating the frame components."""
    X, Y, _ = frame_at(p)
    jx, jy, _ = _frame_jacobians()
    return jy @ X - jx @ Y


def coord_to_frame(x, v):
    """Frame coefficients ``(a, b, c)`` of a coordinate vector ``v`` at abscissa ``x``."""
    v = np.asarray(v, dtype=float)
    return np.stack([v[0], v[1], v[2] + x * v[1]])


def frame_to_coord(x, c):
    c = np.asarray(c, dtype=float)
    return np.stack([c[0], c[1], c[2] - x * c[1]])


class MetricField:
    """Horizontal metric ``G = [[g11, g12], [g12, g22]]`` on the chart."""

    def __init__(self, g11, g12, g22, name: str | None = None):
        self.g11 = as_field(g11, CHART_VARS)
        self.g12 = as_field(g12, CHART_VARS)
        self.g22 = as_field(g22, CHART_VARS)
        self.name = name

    @classmethod
    def heisenberg(cls):
        return cls(1.0, 0.0, 1.0, name="heisenberg")

    @classmethod
    def from_config(cls, cfg):
        """Build from ``"heisenberg"`` or a mapping/sequence of three expressions."""
        if isinstance(cfg, MetricField):
            return cfg
        if isinstance(cfg, str):
            if cfg == "heisenberg":
                return cls.heisenberg()
            raise ValueError(f"unknown metric preset {cfg!r}")
        if isinstance(cfg, dict):
            if "preset" in cfg:
                return cls.from_config(cfg["preset"])
            return cls(cfg["g11"], cfg["g12"], cfg["g22"])
        g11, g12, g22 = cfg
        return cls(g11, g12, g22)

    def __repr__(self):
        if self.name:
            return f"MetricField.{self.name}()"
        return f"MetricField({self.g11.source!r}, {self.g12.source!r}, {self.g22.source!r})"

    def to_config(self):
        if self.name == "heisenberg":
            return "heisenberg"
        return {"g11": self.g11.source, "g12": self.g12.source, "g22": self.g22.source}

    @property
    def is_constant(self) -> bool:
        return self.g11.is_constant and self.g12.is_constant and self.g22.is_constant

    def values(self, x, y, t, check=True):
        """``(g11, g12, g22)`` at the given points (broadcast)."""
        point = {"x": x, "y": y, "t": t}
        g = tuple(np.asarray(f.evaluate(point), dtype=float) for f in (self.g11, self.g12, self.g22))
        shape = np.broadcast_shapes(*(np.shape(v) for v in (x, y, t)))
        g = tuple(np.broadcast_to(v, shape) for v in g)
        if check:
            _check_spd(*g)
        return g

    def values_and_frame_derivs(self, x, y, t, check=True):
        """Metric entries with their derivatives along ``X`` and ``Y``.

        Returns three arrays of shape ``(3, ...)``: ``g``, ``X(g)``, ``Y(g)``
        stacked over ``(g11, g12, g22)``.
        """
        point = {"x": x, "y": y, "t": t}
        shape = np.broadcast_shapes(*(np.shape(v) for v in (x, y, t)))
        g = np.empty((3,) + shape)
        xg = np.empty((3,) + shape)
        yg = np.empty((3,) + shape)
        for k, f in enumerate((self.g11, self.g12, self.g22)):
            value, grad = f.eval_with_grad(point)
            g[k] = value
            xg[k] = grad[0]
            yg[k] = grad[1] - x * grad[2]
        if check:
            _check_spd(g[0], g[1], g[2])
        return g, xg, yg

    def gram(self, p: ChartPoint):
        g11, g12, g22 = (float(v) for v in self.values(p.x, p.y, p.t))
        return np.array([[g11, g12], [g12, g22]])

    def frame_gram(self, p: ChartPoint):
        """Gram matrix of ``{X, Y, T}`` for the extended Riemannian metric."""
        out = np.eye(3)
        out[:2, :2] = self.gram(p)
        return out

    def coord_metric(self, x, y, t):
        """Components of the extended metric on ``(d/dx, d/dy, d/dt)``."""
        g11, g12, g22 = (float(v) for v in self.values(x, y, t))
        fr = np.array([[g11, g12, 0.0], [g12, g22, 0.0], [0.0, 0.0, 1.0]])
        # columns: frame components of d/dx, d/dy = Y + xT, d/dt = T
        B = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, x, 1.0]])
        return B.T @ fr @ B


def _check_spd(g11, g12, g22):
    det = g11 * g22 - g12 * g12
    if not (np.all(g11 > 0) and np.all(det > 0)):
        raise MetricError("horizontal metric is not positive definite")


def det_g(g11, g12, g22):
    return g11 * g22 - g12 * g12


def inner(u: HorizontalVec, v: HorizontalVec, G: MetricField):
    if u.base != v.base:
        raise ValueError("vectors live at different base points")
    p = u.base
    g11, g12, g22 = G.values(p.x, p.y, p.t)
    return float(g11 * u.a * v.a + g12 * (u.a * v.b + u.b * v.a) + g22 * u.b * v.b)


def j_coeffs(g11, g12, g22, a, b):
    """Frame coefficients of ``J(aX + bY)``.

    ``J`` is fixed by ``2<J(v), w> = -<[v, w], T>`` and ``[X, Y] = -T``, so
    ``<J(v), X> = -b/2`` and ``<J(v), Y> = a/2``.
    """
    det = det_g(g11, g12, g22)
    if np.any(det <= 0):
        raise MetricError("singular horizontal metric")
    cx, cy = -0.5 * b, 0.5 * a
    return (g22 * cx - g12 * cy) / det, (-g12 * cx + g11 * cy) / det


def jrot_coeffs(g11, g12, g22, a, b):
    """Unit rotation ``j = J/|J|`` applied to ``aX + bY``; ``|j(v)| = |v|``."""
    ja, jb = j_coeffs(g11, g12, g22, a, b)
    scale = 2.0 * np.sqrt(det_g(g11, g12, g22))
    return scale * ja, scale * jb


def j_apply(G: MetricField, v: HorizontalVec) -> HorizontalVec:
    p = v.base
    ja, jb = j_coeffs(*G.values(p.x, p.y, p.t, check=False), v.a, v.b)
    return HorizontalVec(p, float(ja), float(jb))


def j_unit(G: MetricField, v: HorizontalVec) -> HorizontalVec:
    p = v.base
    ja, jb = jrot_coeffs(*G.values(p.x, p.y, p.t, check=False), v.a, v.b)
    return HorizontalVec(p, float(ja), float(jb))


def levi_civita_coord(G: MetricField, p: ChartPoint, h: float = 1e-5):
    """Christoffel symbols ``out[k, i, j]`` of the extended metric in coordinates.

    Metric derivatives are central differences with step ``h``.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    base = p.as_array()
    g = G.coord_metric(*base)
    dg = np.empty((3, 3, 3))  # dg[l, i, j] = d_l g_ij
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = h
        dg[axis] = (G.coord_metric(*(base + e)) - G.coord_metric(*(base - e))) / (2.0 * h)
    ginv = np.linalg.inv(g)
    # lowered[i, j, l] = d_i g_jl + d_j g_il - d_l g_ij
    lowered = dg + dg.transpose(1, 0, 2) - dg.transpose(1, 2, 0)
    return 0.5 * np.einsum("kl,ijl->kij", ginv, lowered)


def dt_endomorphism(G: MetricField, p: ChartPoint, h: float = 1e-5):
    """Matrix of ``v -> D_v T`` on frame coefficients ``(X, Y, T)``."""
    gamma = levi_civita_coord(G, p, h)
    # (D_v T)^k = v^i Gamma^k_{i t} in coordinates; compose with frame changes
    to_coord = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -p.x, 1.0]])
    to_frame = np.linalg.inv(to_coord)
    return to_frame @ gamma[:, :, 2] @ to_coord


def j_tau_matrices(G: MetricField, p: ChartPoint, h: float = 1e-5):
    """Antisymmetric (``J``) and symmetric (``tau``) parts of ``D T`` in the frame."""
    m = dt_endomorphism(G, p, h)
    gf = G.frame_gram(p)
    lowered = gf @ m  # lowered[j, i] = <E_j, D_{E_i} T>
    gf_inv = np.linalg.inv(gf)
    sym = 0.5 * (lowered + lowered.T)
    anti = 0.5 * (lowered - lowered.T)
    # <J(E_i), E_j> = anti[j, i]
    return gf_inv @ anti, gf_inv @ sym


def tau_apply(G: MetricField, v, h: float = 1e-5, base: ChartPoint | None = None):
    """``tau(v)`` as a horizontal vector.

    ``v`` is a :class:`HorizontalVec` or a frame-coefficient triple ``(a, b, c)``
    on ``X, Y, T`` at ``base`` (so ``tau(T)`` can be asked for directly).
    """
    if isinstance(v, HorizontalVec):
        base, coeffs = v.base, np.array([v.a, v.b, 0.0])
    else:
        coeffs = np.asarray(v, dtype=float)
    _, tau = j_tau_matrices(G, base, h)
    out = tau @ coeffs
    return HorizontalVec(base, float(out[0]), float(out[1]))


def heisenberg_christoffels(p: ChartPoint):
    """Closed-form coordinate Christoffels of the standard Heisenberg metric.

    The coordinate metric is ``[[1, 0, 0], [0, 1 + x^2, x], [0, x, 1]]``.
    """
    x = p.x
    out = np.zeros((3, 3, 3))
    # Only d_x g_yy = 2x and d_x g_yt = 1 are nonzero.
    out[0, 1, 1] = -x
    out[0, 1, 2] = out[0, 2, 1] = -0.5
    out[1, 0, 1] = out[1, 1, 0] = 0.5 * x
    out[1, 0, 2] = out[1, 2, 0] = 0.5
    out[2, 0, 1] = out[2, 1, 0] = 0.5 * (1.0 - x * x)
    out[2, 0, 2] = out[2, 2, 0] = -0.5 * x
    return out


@dataclass(frozen=True)
class FrameConnection:
    """``coeffs[i, j, k]`` with ``nabla_{E_i} E_j = sum_k coeffs[i, j, k] E_k``, ``E = (X, Y)``."""

    base: ChartPoint
    coeffs: np.ndarray

    def covariant_derivative(self, u, v, dv):
        """``nabla_U V`` given ``U = u``, ``V = v`` and the derivative ``dv = U(v)`` of V's coefficients."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return np.asarray(dv, dtype=float) + np.einsum("i,j,ijk->k", u, v, self.coeffs)


def frame_connection_arrays(g, xg, yg):
    """Horizontal ``nabla`` coefficients from metric values and frame derivatives.

    ``g``, ``xg``, ``yg`` are ``(3, ...)`` stacks as returned by
    :meth:`MetricField.values_and_frame_derivs`.  On horizontal frame fields the
    torsion and the bracket ``[X, Y] = -T`` pair to zero against horizontal
    vectors, so Koszul reduces to frame derivatives of the ``g_ij``.
    Returns ``(..., 2, 2, 2)`` indexed ``[i, j, k]``.
    """
    def mat(s):
        a, b, c = s
        return np.stack([np.stack([a, b], -1), np.stack([b, c], -1)], -2)

    G = mat(g)
    dG = np.stack([mat(xg), mat(yg)], -3)  # dG[..., i, j, k] = E_i g_jk
    lowered = 0.5 * (
        dG
        + np.einsum("...jki->...ijk", dG)
        - np.einsum("...kij->...ijk", dG)
    )
    return np.einsum("...kl,...ijl->...ijk", np.linalg.inv(G), lowered)


def nabla_frame(G: MetricField, p: ChartPoint) -> FrameConnection:
    g, xg, yg = G.values_and_frame_derivs(p.x, p.y, p.t)
    return FrameConnection(p, frame_connection_arrays(g, xg, yg))


def metric_compatibility_residual(G: MetricField, p: ChartPoint, h: float = 1e-5):
    """Max over frame fields of ``|E_i<E_j,E_k> - <nabla E_j,E_k> - <E_j,nabla E_k>|``.

    ``E_i<E_j,E_k>`` is taken by central differences along the frame direction,
    independently of the automatic derivatives used by :func:`nabla_frame`.
    """
    conn = nabla_frame(G, p).coeffs
    gram = G.gram(p)
    X, Y, _ = frame_at(p)
    worst = 0.0
    for i, d in enumerate((X, Y)):
        base = p.as_array()
        plus = G.gram(ChartPoint(*(base + h * d)))
        minus = G.gram(ChartPoint(*(base - h * d)))
        deriv = (plus - minus) / (2.0 * h)
        for j in range(2):
            for k in range(2):
                rhs = conn[i, j] @ gram[:, k] + conn[i, k] @ gram[:, j]
                worst = max(worst, abs(deriv[j, k] - rhs))
    return worst


def nabla_t_residual(G: MetricField, p: ChartPoint, h: float = 1e-5):
    """Size of ``nabla T`` recovered from the Levi-Civita connection.

    ``nabla_U T = D_U T - J(U) - tau(U)`` with ``J`` taken from the bracket
    relation (not from ``D``), so this checks that the antisymmetric part of
    ``D T`` is the bracket ``J`` and that ``D T`` has no ``T`` component.
    """
    m = dt_endomorphism(G, p, h)
    _, tau = j_tau_matrices(G, p, h)
    g11, g12, g22 = G.values(p.x, p.y, p.t)
    worst = float(np.max(np.abs(m[:, 2])))  # D_T T
    for a, b in ((1.0, 0.0), (0.0, 1.0)):
        ja, jb = j_coeffs(g11, g12, g22, a, b)
        v = np.array([a, b, 0.0])
        resid = m @ v - np.array([ja, jb, 0.0]) - tau @ v
        worst = max(worst, float(np.max(np.abs(resid))))
    return worst


def orientation_check(G: MetricField, p: ChartPoint, v: HorizontalVec):
    """``(w ^ dw)(v, J(v), T)``; positive for every nonzero horizontal ``v``."""
    if v.a == 0 and v.b == 0:
        raise ValueError("orientation of the zero vector is undefined")
    jv = j_apply(G, HorizontalVec(p, v.a, v.b))
    _, _, T = frame_at(p)
    A = HorizontalVec(p, v.a, v.b).coords()
    B = jv.coords()
    # w ^ dw = dt ^ dx ^ dy; evaluate as a determinant on (t, x, y) components
    rows = np.array([[w[2], w[0], w[1]] for w in (A, B, T)])
    return float(np.linalg.det(rows))
