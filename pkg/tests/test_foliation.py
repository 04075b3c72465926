import math

import numpy as np
import pytest

from srmc.chart import MetricField
from srmc.foliation import (
    foliate_family,
    horizontality_residual,
    integrate_characteristic,
    max_workers,
    mean_curvature_along,
    ode_residual,
    smoothness_report,
)
from srmc.geodesics import curvature_from_residual, horizontal_curve_from_points
from srmc.graph import DomainError, ExprGraph, GraphDomain, GridGraph

H = MetricField.heisenberg()
D = GraphDomain(0.0, 1.0, 0.0, 3.0)


def test_constant_field_is_integrated_exactly():
    c, b = 0.7, 0.2
    curve = integrate_characteristic(ExprGraph(str(c), D), 0.0, b, (0.0, 1.0))
    assert np.max(np.abs(curve.t - (b + c * curve.s))) <= 1e-12
    assert curve.complete and len(curve) == 1001


def test_exponential_case():
    curve = integrate_characteristic(ExprGraph("t", D), 0.0, 1.0, (0.0, 1.0), step=1e-3)
    assert curve.s[-1] == pytest.approx(1.0, abs=1e-12)
    assert abs(curve.t[-1] - math.e) <= 1e-8
    assert np.max(np.abs(curve.t - np.exp(curve.s))) <= 1e-8


def test_zero_field_lifts_to_horizontal_line():
    b = 0.4
    curve = integrate_characteristic(ExprGraph("0", D), 0.5, b, (0.0, 1.0))
    np.testing.assert_array_equal(curve.t, b)
    np.testing.assert_allclose(curve.lifted, np.stack([curve.s, 0 * curve.s, b + 0 * curve.s], 1), atol=1e-15)
    assert curve.s[curve.start_index] == 0.5


def test_curves_run_backward_and_stop_at_the_boundary():
    curve = integrate_characteristic(ExprGraph("t", D), 0.5, 2.0, (0.0, 1.0))
    assert curve.s[0] == pytest.approx(0.0) and not curve.complete
    assert curve.t.max() <= D.t1
    assert np.max(np.abs(curve.t - 2.0 * np.exp(curve.s - 0.5))) <= 1e-8


def test_integration_errors():
    u = ExprGraph("t", D)
    with pytest.raises(ValueError):
        integrate_characteristic(u, 0.0, 1.0, (0, 1), step=0.0)
    with pytest.raises(DomainError):
        integrate_characteristic(u, 0.0, 5.0, (0, 1))


def test_rk4_is_fourth_order():
    u = ExprGraph("t", D)
    errs = [abs(integrate_characteristic(u, 0.0, 1.0, (0, 1), step=h).t[-1] - math.e) for h in (0.1, 0.05, 0.025)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(14 < r < 18 for r in ratios), ratios


@pytest.mark.parametrize("src", ["t", "sin(3*x)*t", "0.5 - abs(t - 1)"])
def test_lifted_curves_are_horizontal(src):
    u = ExprGraph(src, D)
    curve = integrate_characteristic(u, 0.2, 1.0, (0.0, 1.0))
    assert horizontality_residual(curve, u) <= 1e-8
    assert len(ode_residual(curve, u)) == len(curve) - 1


def test_translation_invariant_family():
    fam = foliate_family(ExprGraph("0", D), 0.0, 1.0, [0.0, 0.1, 0.2], (0.0, 1.0))
    np.testing.assert_allclose(fam.dt_deps, 1.0, atol=1e-12)
    assert fam.min_gap() == pytest.approx(0.1)


def test_variational_equation_for_exponential_field():
    a = 0.1
    fam = foliate_family(ExprGraph("t", D), a, 1.0, [-1e-3, 0.0, 1e-3], (0.1, 0.9))
    assert np.max(np.abs(fam.dt_deps[1] - np.exp(fam.s - a))) <= 1e-6


def _lipschitz_cases():
    rng = np.random.default_rng(9)
    xs, ts = D.grid(21, 31)
    rough = 0.4 * rng.standard_normal((21, 31)) + np.sin(ts)[None, :]
    return [
        ExprGraph("t", D),
        ExprGraph("abs(x - 0.5) + 0.3*t", D),
        ExprGraph("0.5*sin(3*t) - abs(t - 1.5)", D),
        GridGraph(rough, D),
        GridGraph(np.abs(xs[:, None] - 0.3) - 0.5 * np.abs(ts[None, :] - 1.2), D),
    ]


@pytest.mark.parametrize("k", range(5))
def test_family_is_monotone_for_lipschitz_fields(k):
    u = _lipschitz_cases()[k]
    fam = foliate_family(u, 0.5, 1.0, np.linspace(-0.05, 0.05, 11), (0.0, 1.0))
    assert np.all(fam.dt_deps > 0)
    assert fam.min_gap() > 0


def test_family_needs_two_members():
    with pytest.raises(ValueError):
        foliate_family(ExprGraph("0", D), 0.5, 1.0, [0.0], (0.0, 1.0))


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("SRMC_THREADS", "3")
    assert max_workers() == 3
    monkeypatch.setenv("SRMC_THREADS", "junk")
    assert max_workers() >= 1


@pytest.mark.parametrize("src", ["0", "1.2", "0.8*x", "-1.5*x + 0.4"])
def test_planes_have_zero_curvature(src):
    u = ExprGraph(src, GraphDomain(0.0, 1.0, -3.0, 3.0))
    curve = integrate_characteristic(u, 0.0, 0.1, (0.0, 1.0))
    assert np.max(np.abs(mean_curvature_along(u, H, curve))) <= 1e-8


def test_curvature_matches_geodesic_residual_inversion():
    u = ExprGraph("t", D)
    curve = integrate_characteristic(u, 0.0, 0.5, (0.0, 1.0))
    Hs = mean_curvature_along(u, H, curve)
    # closed form for u = t along the curve: H = -t / (1 + t^2)^(3/2)
    np.testing.assert_allclose(Hs, -curve.t / (1 + curve.t**2) ** 1.5, atol=1e-6)
    inverted = curvature_from_residual(horizontal_curve_from_points(curve.lifted, curve.step, 0.0), H)
    assert np.max(np.abs(inverted - Hs[1:-1])) <= 1e-4


def test_grid_curvature_needs_a_window():
    dom = GraphDomain(0, 1, 0, 1)
    xs, ts = dom.grid(9, 9)
    g = GridGraph(0.2 + 0.0 * xs[:, None] * ts[None, :], dom)
    curve = integrate_characteristic(g, 0.0, 0.5, (0.0, 1.0), step=1e-2)
    with pytest.raises(ValueError):
        mean_curvature_along(g, H, curve)
    assert np.max(np.abs(mean_curvature_along(g, H, curve, window=11))) <= 1e-10
    with pytest.raises(ValueError):
        mean_curvature_along(g, H, integrate_characteristic(g, 1.0, 0.5, (1.0, 1.0)), window=11)


def test_smoothness_report():
    u = ExprGraph("0.6*x", D)
    rep = smoothness_report(integrate_characteristic(u, 0.0, 1.0, (0.0, 1.0)), u, H, f=0.0)
    assert rep.geodesic_residual <= 1e-6 and rep.second_derivative_jump <= 1e-6
    assert rep.curvature == "f"
    u = ExprGraph("t", D)
    rep = smoothness_report(integrate_characteristic(u, 0.0, 1.0, (0.0, 1.0)), u, H)
    assert rep.curvature == "H" and rep.samples == 1001
    assert np.isfinite(rep.geodesic_residual)
