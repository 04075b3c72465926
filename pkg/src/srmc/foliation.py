"""Characteristic curves of intrinsic graphs and the foliations they form.

In parameters a characteristic curve is ``s -> (s, t(s))`` with
``t'(s) = u(s, t(s))``; its lift ``Gamma(s) = Phi(s, t(s))`` has tangent
``X + W Y`` and is therefore horizontal.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import savgol_filter

from . import kernels
from .chart import MetricField
from .graph import (
    DomainError,
    GraphDomain,
    GraphFunction,
    GridGraph,
    _area_element_from,
    _curvature_from,
    embed,
)


def max_workers() -> int:
    """Thread cap from ``SRMC_THREADS`` (default 1)."""
    import os

    try:
        return max(1, int(os.environ.get("SRMC_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class CharCurve:
    """Samples ``(s_i, t(s_i))`` on a uniform grid and their lift to the graph."""

    s: np.ndarray
    t: np.ndarray
    a: float
    b: float
    step: float
    lifted: np.ndarray = field(repr=False)
    complete: bool = True

    def __len__(self):
        return len(self.s)

    @property
    def start_index(self) -> int:
        return int(round((self.a - self.s[0]) / self.step))


def _rk4_scalar(u: GraphFunction, a, b, step, nmax, domain: GraphDomain):
    x0, x1 = domain.x0, domain.x1
    tol = 1e-12 * max(1.0, x1 - x0)
    out = [b]
    s, t = a, b
    for _ in range(nmax):
        s_next = s + step
        if s_next < x0 - tol or s_next > x1 + tol:
            break
        k1 = u(s, t)
        k2 = u(s + 0.5 * step, t + 0.5 * step * k1)
        k3 = u(s + 0.5 * step, t + 0.5 * step * k2)
        k4 = u(s_next, t + step * k3)
        t_next = t + step * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if t_next < domain.t0 or t_next > domain.t1:
            break
        out.append(t_next)
        s, t = s_next, t_next
    return np.array(out, dtype=float)


def _march(u, a, b, step, nmax, domain):
    if isinstance(u, GridGraph) and u.method == "linear":
        return kernels.rk4_char_grid(
            u.values, u.domain.x0, u.hx, u.domain.t0, u.ht, a, b, step, nmax, domain.t0, domain.t1
        )
    return _rk4_scalar(u, a, b, step, nmax, domain)


def integrate_characteristic(
    u: GraphFunction,
    a: float,
    b: float,
    s_range: tuple[float, float],
    step: float = 1e-3,
    domain: GraphDomain | None = None,
) -> CharCurve:
    """Classical RK4 from ``(a, b)`` over ``s_range`` (which should contain ``a``).

    The curve is truncated, and flagged incomplete, where it would leave the domain.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    domain = domain or u.domain
    if domain is None:
        raise ValueError("a domain is required")
    if not domain.contains(a, b):
        raise DomainError(f"initial point ({a}, {b}) outside {domain}")
    lo, hi = min(s_range), max(s_range)
    n_fwd = max(0, int(math.floor((hi - a) / step + 1e-9)))
    n_bwd = max(0, int(math.floor((a - lo) / step + 1e-9)))
    fwd = _march(u, a, b, step, n_fwd, domain)
    bwd = _march(u, a, b, -step, n_bwd, domain)
    t = np.concatenate([bwd[:0:-1], fwd])
    k0 = len(bwd) - 1
    s = a + step * (np.arange(len(t)) - k0)
    complete = len(fwd) == n_fwd + 1 and len(bwd) == n_bwd + 1
    lifted = embed(u, s, t, domain).T.copy()
    return CharCurve(s, t, float(a), float(b), float(step), lifted, complete)


def ode_residual(curve: CharCurve, u: GraphFunction):
    """``|t'_H - u(s, t_H)|`` at step midpoints of the cubic Hermite dense output.

    Since ``x' = 1`` this is also the ``T`` component of the lifted tangent
    ``x'X + (x'u_x + t'u_t)Y + (t' - u x')T``.
    """
    s, t, h = curve.s, curve.t, curve.step
    if len(s) < 2:
        return np.zeros(0)
    f = u(s, t)
    t0, t1, f0, f1 = t[:-1], t[1:], f[:-1], f[1:]
    mid = s[:-1] + 0.5 * h
    t_mid = 0.5 * (t0 + t1) + h * (f0 - f1) / 8.0
    dt_mid = 1.5 * (t1 - t0) / h - 0.25 * (f0 + f1)
    return np.abs(dt_mid - u(mid, t_mid))


def horizontality_residual(curve: CharCurve, u: GraphFunction) -> float:
    res = ode_residual(curve, u)
    return float(res.max()) if len(res) else 0.0


@dataclass
class FoliationFamily:
    eps: np.ndarray
    curves: list
    s: np.ndarray
    t: np.ndarray  # t[k, i] = t_{eps_k}(s_i) on the common window
    dt_deps: np.ndarray

    def min_gap(self) -> float:
        """Smallest ``t_{eps_{k+1}} - t_{eps_k}`` over the window (positive = no crossing)."""
        if len(self.eps) < 2:
            return math.inf
        return float(np.min(np.diff(self.t, axis=0)))


def foliate_family(
    u: GraphFunction,
    a: float,
    b: float,
    eps_list,
    s_range: tuple[float, float],
    step: float = 1e-3,
    domain: GraphDomain | None = None,
) -> FoliationFamily:
    """Curves through ``(a, b + eps)`` restricted to their common ``s`` window.

    ``dt_deps`` is the central difference over the (sorted) eps grid,
    one-sided at its ends.
    """
    eps = np.sort(np.asarray(eps_list, dtype=float))
    if len(eps) < 2:
        raise ValueError("a family needs at least two members")

    def run(e):
        return integrate_characteristic(u, a, b + e, s_range, step, domain)

    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        curves = list(pool.map(run, eps))
    lo = max(-c.start_index for c in curves)
    hi = min(len(c) - 1 - c.start_index for c in curves)
    if hi + (-lo) < 0 or hi < 0:
        raise ValueError("family members share no common window")
    rows = [c.t[c.start_index + lo : c.start_index + hi + 1] for c in curves]
    T = np.vstack(rows)
    s = a + step * np.arange(lo, hi + 1)
    dt = np.gradient(T, eps, axis=0, edge_order=1)
    return FoliationFamily(eps, curves, s, T, dt)


def _z_along(u, G, s, t):
    val, ux, ut = u.evaluate(s, t)
    y, tt = val, t - s * val
    g = G.values(s, y, tt)
    W = ux + val * ut
    norm = _area_element_from(W, *g)
    return np.stack([1.0 / norm, W / norm]), norm, val


def mean_curvature_along(u: GraphFunction, G: MetricField, curve: CharCurve, window: int | None = None):
    """``H = <nabla_Z Z, nu_h>`` at each sample of ``curve``.

    ``Z``'s frame coefficients are differentiated in ``s`` by second-order
    central differences, or by a cubic Savitzky-Golay fit over ``window``
    samples (required for bilinear grid data, whose ``Z`` jumps across cells).
    """
    if len(curve) < 3:
        raise ValueError("curve needs at least 3 samples")
    if isinstance(u, GridGraph) and u.method == "linear" and window is None:
        raise ValueError("bilinear grid data needs a smoothing window")
    z, norm, val = _z_along(u, G, curve.s, curve.t)
    if window is None:
        dz = np.gradient(z, curve.step, axis=1, edge_order=2)
    else:
        w = window if window % 2 else window + 1
        w = min(w, len(curve) if len(curve) % 2 else len(curve) - 1)
        dz = savgol_filter(z, w, min(3, w - 1), deriv=1, delta=curve.step, axis=1)
    return _curvature_from(z, dz / norm, G, curve.s, val, curve.t)


def arclength(curve: CharCurve, u: GraphFunction, G: MetricField):
    """Cumulative length of the lifted curve (``|Gamma'| = |X + W Y|``), trapezoid rule."""
    _, norm, _ = _z_along(u, G, curve.s, curve.t)
    out = np.zeros(len(curve))
    out[1:] = np.cumsum(0.5 * (norm[1:] + norm[:-1]) * curve.step)
    return out


@dataclass(frozen=True)
class SmoothnessReport:
    second_derivative_jump: float
    geodesic_residual: float
    curvature: str
    samples: int


def smoothness_report(curve: CharCurve, u: GraphFunction, G: MetricField, f=None, window=None) -> SmoothnessReport:
    """Discrete C^2 diagnostics of the lifted curve.

    ``second_derivative_jump`` is the largest change of the second difference
    of the lift between adjacent stencils; ``geodesic_residual`` is the largest
    ``nabla``-geodesic residual with curvature ``f`` (or the curve's own ``H``
    when ``f`` is None).
    """
    from .geodesics import geodesic_residual, horizontal_curve_from_points

    P = curve.lifted
    d2 = (P[2:] - 2.0 * P[1:-1] + P[:-2]) / curve.step**2
    jump = float(np.max(np.abs(np.diff(d2, axis=0)))) if len(d2) > 1 else 0.0
    if f is None:
        h = mean_curvature_along(u, G, curve, window)
        label = "H"
    else:
        from .variation import _curvature_values

        h = np.broadcast_to(_curvature_values(f, P[:, 0], P[:, 1], P[:, 2]), (len(curve),)).astype(float)
        label = "f"
    hc = horizontal_curve_from_points(P, curve.step, h)
    res = geodesic_residual(hc, G)
    return SmoothnessReport(jump, float(np.max(res)) if len(res) else 0.0, label, len(curve))
