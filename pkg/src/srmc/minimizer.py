"""Gradient descent for prescribed-curvature intrinsic graphs and for the t-graph functional.

Both solvers work on a :class:`GridField` with frozen (Dirichlet) boundary
values.  Every iteration evaluates the full discrete gradient and updates all
interior nodes at once, so results do not depend on thread counts.  Steps
start from a Barzilai-Borwein estimate and are accepted only after Armijo
backtracking, which keeps the energy history non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .chart import MetricField, det_g
from .fields import ScalarField
from .graph import GraphDomain, GridGraph
from .variation import Quadrature, _curvature_values, _integrate, as_curvature

ARMIJO = 1e-4
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass
class GridField:
    """Samples ``values[i, j]`` at ``(xs[i], ys[j])`` on a uniform ``m x n`` grid.

    ``axes`` names the coordinates: ``("x", "t")`` for intrinsic graphs over the
    vertical plane and ``("x", "y")`` for t-graphs.
    """

    values: np.ndarray
    bounds: tuple[float, float, float, float]
    axes: tuple[str, str] = ("x", "t")

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float)
        if self.values.ndim != 2 or min(self.values.shape) < 3:
            raise ValueError("a grid field needs at least 3 x 3 samples")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")
        x0, x1, y0, y1 = (float(b) for b in self.bounds)
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"empty bounds {self.bounds}")
        self.bounds = (x0, x1, y0, y1)
        self.axes = tuple(self.axes)

    @classmethod
    def from_function(cls, fn, bounds, shape, axes=("x", "t"), interior=None):
        """Sample ``fn(x, y)`` on the grid; ``interior`` (a number) overwrites the interior."""
        xs = np.linspace(bounds[0], bounds[1], shape[0])
        ys = np.linspace(bounds[2], bounds[3], shape[1])
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        vals = np.broadcast_to(np.asarray(fn(X, Y), dtype=float), X.shape).copy()
        if interior is not None:
            vals[1:-1, 1:-1] = interior
        return cls(vals, bounds, axes)

    @property
    def shape(self):
        return self.values.shape

    @property
    def xs(self):
        return np.linspace(self.bounds[0], self.bounds[1], self.shape[0])

    @property
    def ys(self):
        return np.linspace(self.bounds[2], self.bounds[3], self.shape[1])

    @property
    def spacing(self):
        return (
            (self.bounds[1] - self.bounds[0]) / (self.shape[0] - 1),
            (self.bounds[3] - self.bounds[2]) / (self.shape[1] - 1),
        )

    @property
    def domain(self) -> GraphDomain:
        return GraphDomain(*self.bounds)

    def mesh(self):
        return np.meshgrid(self.xs, self.ys, indexing="ij")

    def interior_mask(self):
        mask = np.zeros(self.shape, dtype=bool)
        mask[1:-1, 1:-1] = True
        return mask

    def with_interior(self, z) -> "GridField":
        vals = self.values.copy()
        vals[1:-1, 1:-1] = np.reshape(z, (self.shape[0] - 2, self.shape[1] - 2))
        return GridField(vals, self.bounds, self.axes)

    def trapezoid_weights(self):
        hx, hy = self.spacing
        w = np.full(self.shape, hx * hy)
        w[0, :] *= 0.5
        w[-1, :] *= 0.5
        w[:, 0] *= 0.5
        w[:, -1] *= 0.5
        return w

    def as_graph(self, method: str = "linear") -> GridGraph:
        return GridGraph(self.values, self.domain, method)


@dataclass
class StageReport:
    eps: float | None
    energies: list
    iterations: int
    converged: bool


@dataclass
class SolveReport:
    """Outcome of a descent run; ``stages`` has one entry per regularization level."""

    stages: list = field(default_factory=list)
    residual: float = float("nan")
    message: str = ""  # stop reason of the last stage: "gtol", "stall" or "budget"

    @property
    def energy_history(self) -> np.ndarray:
        return np.concatenate([np.asarray(s.energies) for s in self.stages]) if self.stages else np.zeros(0)

    @property
    def iterations(self) -> int:
        return sum(s.iterations for s in self.stages)

    @property
    def converged(self) -> bool:
        return bool(self.stages) and all(s.converged for s in self.stages)

    @property
    def eps_schedule(self):
        return [s.eps for s in self.stages if s.eps is not None]

    def monotone(self, slack: float = 0.0) -> bool:
        """Energy non-increasing within every stage."""
        return all(np.all(np.diff(np.asarray(s.energies)) <= slack) for s in self.stages)


# ---------------------------------------------------------------------------
# intrinsic graphs


def _centroids(field: GridField):
    """Parameters and ``u`` at the centroids of the two triangles of each cell, shape ``(2, m-1, n-1)``."""
    hx, ht = field.spacing
    u = field.values
    x = field.xs[:-1, None]
    t = field.ys[None, :-1]
    xc = np.stack(np.broadcast_arrays(x + hx / 3.0, x + 2.0 * hx / 3.0))
    tc = np.stack(np.broadcast_arrays(t + ht / 3.0, t + 2.0 * ht / 3.0))
    a, b, c, d = u[:-1, :-1], u[1:, :-1], u[:-1, 1:], u[1:, 1:]
    uc = np.stack([(a + b + c) / 3.0, (b + c + d) / 3.0])
    return xc, tc, uc


def _volume_density(f, G: MetricField, x, w, t):
    """``f det(G)`` at ``Phi_w(x, t) = (x, w, t - x w)``."""
    y, tt = w, t - x * w
    g = G.values(x, y, tt)
    return _curvature_values(f, x, y, tt) * det_g(*g)


def _volume(f, G: MetricField, x, t, u):
    """``int_0^u f det(G)(x, w, t - x w) dw`` by 8-point Gauss-Legendre."""
    if f is None or (not callable(f) and not isinstance(f, ScalarField) and float(f) == 0.0):
        return np.zeros_like(u)
    if _is_constant(f) and G.is_constant:
        return _volume_density(f, G, x, 0.0 * u, t) * u
    half = 0.5 * u
    total = np.zeros_like(u)
    for node, weight in zip(_GL_NODES, _GL_WEIGHTS):
        total += weight * _volume_density(f, G, x, half * (1.0 + node), t)
    return total * half


def _is_constant(f) -> bool:
    if f is None:
        return True
    if isinstance(f, ScalarField):
        return f.is_constant
    return not callable(f)


def energy_intrinsic(field: GridField, G: MetricField, f=None, quad: Quadrature | None = None) -> float:
    """Area of the graph minus the signed volume pairing ``int_D int_0^u f det(G)``.

    With ``quad=None`` this is the discrete energy minimized by
    :func:`minimize_intrinsic` (linear on the two triangles of each cell,
    centroid rule).  A :class:`Quadrature` instead integrates the bilinear
    interpolant of the samples.
    """
    f = as_curvature(f)
    if quad is None:
        return energy_intrinsic_grad(field, G, f)[0]
    from .variation import area

    u = field.as_graph("linear")
    X, T, Wq = quad.nodes(field.domain)
    val, _, _ = u.evaluate(X, T)
    return area(u, G, field.domain, quad) - _integrate(_volume(f, G, X, T, val), Wq)


def energy_intrinsic_grad(field: GridField, G: MetricField, f=None):
    """Discrete energy and its gradient with respect to every node value."""
    f = as_curvature(f)
    hx, ht = field.spacing
    xc, tc, uc = _centroids(field)
    yc, tt = uc, tc - xc * uc
    g, _, yg = G.values_and_frame_derivs(xc, yc, tt)
    area, grad = kernels.intrinsic_area_grad(field.values, hx, ht, g, yg)
    tri = 0.5 * hx * ht
    vol = _volume(f, G, xc, tc, uc)
    energy = area - tri * float(np.sum(vol))
    if f is not None:
        dens = np.broadcast_to(_volume_density(f, G, xc, uc, tc), uc.shape) * (tri / 3.0)
        lower, upper = dens[0], dens[1]
        grad[:-1, :-1] -= lower
        grad[1:, :-1] -= lower + upper
        grad[:-1, 1:] -= lower + upper
        grad[1:, 1:] -= upper
    return energy, grad


# ---------------------------------------------------------------------------
# t-graphs


def _tgraph_f(field: GridField, f):
    f = as_curvature(f)
    if f is None:
        return np.zeros(field.shape)
    if isinstance(f, ScalarField):
        if "t" in f.expr.variables():
            raise ValueError("the t-graph volume term needs f independent of t")
        X, Y = field.mesh()
        return np.broadcast_to(f.evaluate({"x": X, "y": Y, "t": 0.0, "s": 0.0}), field.shape)
    if callable(f):
        X, Y = field.mesh()
        return np.broadcast_to(np.asarray(f(X, Y), dtype=float), field.shape)
    return np.full(field.shape, float(f))


def energy_tgraph_grad(field: GridField, f=None, eps: float = 0.0):
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return kernels.tgraph_energy_grad(field.values, field.xs, field.ys, _tgraph_f(field, f), float(eps), field.trapezoid_weights())


def energy_tgraph(field: GridField, f=None, eps: float = 0.0) -> float:
    """``int sqrt(|grad v + (-y, x)|^2 + eps^2) + int f v`` on the grid.

    Half of each cell uses forward differences at its lower-left node and the
    other half backward differences at its upper-right node; ``f v`` uses the
    trapezoid rule.
    """
    return energy_tgraph_grad(field, f, eps)[0]


# ---------------------------------------------------------------------------
# descent


def _descend(fun, z0, steps: int, gtol: float, scale: float, rate: float | None):
    """Armijo-backtracked gradient descent with Barzilai-Borwein trial steps.

    ``fun(z) -> (energy, gradient)``; convergence when ``max|g| / scale <= gtol``.
    Also stops after 50 accepted steps whose energy gain is below round-off.
    Returns ``(z, energies, iterations, reason)`` with reason ``"gtol"``,
    ``"stall"`` or ``"budget"``.
    """
    z = np.array(z0, dtype=float)
    E, g = fun(z)
    energies = [E]
    gmax = np.abs(g).max() if g.size else 0.0
    alpha = rate if rate is not None else 0.1 * scale / max(gmax, 1e-300)
    converged = gmax / scale <= gtol
    it = 0
    flat = 0
    while not converged and it < steps and flat < 50:
        gg = float(g @ g)
        trial = alpha
        for _ in range(60):
            z_new = z - trial * g
            E_new, g_new = fun(z_new)
            if E_new <= E - ARMIJO * trial * gg:
                break
            trial *= 0.5
        else:
            break  # no acceptable step: stalled
        flat = flat + 1 if E_new >= E - 4 * np.finfo(float).eps * abs(E) else 0
        s = z_new - z
        y = g_new - g
        z, E, g = z_new, E_new, g_new
        energies.append(E)
        it += 1
        sy = float(s @ y)
        alpha = float(s @ s) / sy if sy > 0 else 2.0 * trial
        converged = np.abs(g).max() / scale <= gtol
    reason = "gtol" if converged else ("stall" if flat >= 50 or it < steps else "budget")
    return z, energies, it, reason


def _accept(reason: str, residual: float, rtol: float) -> bool:
    # a round-off stall counts as converged when the weak residual is small
    return reason == "gtol" or (reason == "stall" and residual <= rtol)


def bump_family(field: GridField, per_axis: int = 3, width: float = 0.45):
    """Smooth bumps centered on an interior lattice, sampled at the nodes (boundary = 0)."""
    from .graph import BumpFunction

    x0, x1, y0, y1 = field.bounds
    X, Y = field.mesh()
    out = []
    for cx in np.linspace(x0, x1, per_axis + 2)[1:-1]:
        for cy in np.linspace(y0, y1, per_axis + 2)[1:-1]:
            b = BumpFunction(cx, cy, width * (x1 - x0) / 2, width * (y1 - y0) / 2)
            v = b(X, Y)
            v[~field.interior_mask()] = 0.0
            out.append(v)
    return out


def el_residual(field: GridField, grad, bumps=None) -> float:
    """``max |<grad, v>| / ||v||_L2`` over test bumps: the discrete first variation per unit test norm."""
    bumps = bump_family(field) if bumps is None else bumps
    w = field.trapezoid_weights()
    best = 0.0
    for v in bumps:
        norm = float(np.sqrt(np.sum(w * v * v)))
        if norm > 0:
            best = max(best, abs(float(np.sum(grad * v))) / norm)
    return best


def minimize_intrinsic(
    field: GridField,
    G: MetricField,
    f=None,
    steps: int = 20000,
    gtol: float = 1e-5,
    rate: float | None = None,
    rtol: float = 1e-4,
):
    """Descend the discrete prescribed-curvature energy from ``field``'s interior values.

    Returns the last accepted iterate (the lowest energy seen) and a
    :class:`SolveReport`.  ``converged`` needs ``max|grad| <= gtol`` per unit
    cell area, or a round-off stall with residual ``<= rtol``.
    """
    f = as_curvature(f)
    mask = field.interior_mask()
    hx, ht = field.spacing

    def fun(z):
        trial = field.with_interior(z)
        E, g = energy_intrinsic_grad(trial, G, f)
        return E, g[mask]

    z, energies, it, reason = _descend(fun, field.values[mask], steps, gtol, hx * ht, rate)
    out = field.with_interior(z)
    _, grad = energy_intrinsic_grad(out, G, f)
    grad[~mask] = 0.0
    residual = el_residual(out, grad)
    report = SolveReport([StageReport(None, energies, it, _accept(reason, residual, rtol))], residual, reason)
    return out, report


def minimize_tgraph(
    field: GridField,
    f=None,
    eps_schedule=(1e-1, 1e-2, 1e-3),
    steps: int = 20000,
    gtol: float = 1e-5,
    rtol: float = 1e-4,
):
    """Descent with eps-continuation; each stage starts from the previous stage's result."""
    eps_schedule = [float(e) for e in eps_schedule]
    if not eps_schedule or min(eps_schedule) <= 0:
        raise ValueError("eps schedule must be positive")
    if any(b >= a for a, b in zip(eps_schedule, eps_schedule[1:])):
        raise ValueError("eps schedule must be strictly decreasing")
    f = as_curvature(f)
    mask = field.interior_mask()
    hx, hy = field.spacing
    report = SolveReport()
    current = field
    for eps in eps_schedule:

        def fun(z, eps=eps):
            E, g = energy_tgraph_grad(current.with_interior(z), f, eps)
            return E, g[mask]

        z, energies, it, reason = _descend(fun, current.values[mask], steps, gtol, hx * hy, None)
        current = current.with_interior(z)
        _, grad = energy_tgraph_grad(current, f, eps)
        grad[~mask] = 0.0
        residual = el_residual(current, grad)
        report.stages.append(StageReport(eps, energies, it, _accept(reason, residual, rtol)))
        report.message = reason
    report.residual = residual
    return current, report


def plane_field(alpha: float, c: float, bounds, shape, beta: float = 0.0, axes=("x", "t"), interior=None) -> GridField:
    """Samples of ``c + alpha * first + beta * second`` (boundary data for plane tests)."""
    return GridField.from_function(lambda X, Y: c + alpha * X + beta * Y, bounds, shape, axes, interior)
