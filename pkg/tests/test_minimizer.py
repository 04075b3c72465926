import math

import numpy as np
import pytest

from srmc.chart import MetricField
from srmc.fields import ScalarField
from srmc.geodesics import compare_with_characteristic, geodesic_residual
from srmc.minimizer import (
    GridField,
    bump_family,
    el_residual,
    energy_intrinsic,
    energy_intrinsic_grad,
    energy_tgraph,
    energy_tgraph_grad,
    minimize_intrinsic,
    minimize_tgraph,
    plane_field,
)
from srmc.variation import Quadrature

H = MetricField.heisenberg()
GENERAL = MetricField("2 + 0.3*sin(x)*cos(t)", "0.2*tanh(y)", "1.5 + 0.2*cos(x + y)")
UNIT = (0.0, 1.0, 0.0, 1.0)
SQUARE12 = (1.0, 2.0, 1.0, 2.0)


def _cylinder(X, T):
    # vertical cylinder of radius 2: H = +1/2 in the Heisenberg metric
    return np.sqrt(4.0 - (X - 0.5) ** 2) - 1.5


def _w_zero(X, T):
    # u_x + u u_t = 0: characteristics are straight, H = 0
    return T / (X + 1.0)


def test_grid_field_validation():
    with pytest.raises(ValueError):
        GridField(np.zeros((2, 5)), UNIT)
    with pytest.raises(ValueError):
        GridField(np.zeros((4, 4)), (0, 0, 0, 1))
    with pytest.raises(ValueError):
        GridField(np.full((4, 4), np.nan), UNIT)
    fld = GridField(np.zeros((5, 9)), (0, 1, 0, 2))
    assert fld.spacing == (0.25, 0.25)
    assert fld.trapezoid_weights().sum() == pytest.approx(2.0)
    assert fld.interior_mask().sum() == 3 * 7


def test_intrinsic_energy_examples():
    zero = GridField(np.zeros((9, 9)), UNIT)
    assert energy_intrinsic(zero, H) == pytest.approx(1.0, abs=1e-14)
    assert energy_intrinsic(zero, H, f=1.0) == pytest.approx(1.0, abs=1e-14)
    for alpha in (0.5, 1.0, 2.0):
        fld = plane_field(alpha, 0.3, (0, 2, 0, 1), (17, 9))
        assert energy_intrinsic(fld, H) == pytest.approx(math.sqrt(1 + alpha**2) * 2, abs=1e-8)
        assert energy_intrinsic(fld, H, quad=Quadrature()) == pytest.approx(math.sqrt(1 + alpha**2) * 2, abs=1e-8)


def test_volume_term_is_the_signed_pairing():
    # f det G constant: the volume pairing is f det G times the integral of u
    fld = GridField.from_function(lambda X, T: 0.2 + 0 * X, UNIT, (9, 9))
    G = MetricField(2, 0, 2)
    assert energy_intrinsic(fld, G, f=0.5) == pytest.approx(energy_intrinsic(fld, G) - 0.5 * 4 * 0.2, abs=1e-13)
    fld = GridField.from_function(lambda X, T: -0.2 + 0 * X, UNIT, (9, 9))
    assert energy_intrinsic(fld, G, f=0.5) == pytest.approx(energy_intrinsic(fld, G) + 0.5 * 4 * 0.2, abs=1e-13)


@pytest.mark.parametrize(
    "G, f",
    [(H, None), (H, 0.5), (GENERAL, "0.3 + x*y - 0.2*t")],
    ids=["heis", "heis-f", "general"],
)
def test_intrinsic_gradient_matches_finite_differences(G, f):
    rng = np.random.default_rng(11)
    fld = GridField.from_function(lambda X, T: 0.3 * np.sin(2 * X + T) + 0.2 * X * T, UNIT, (13, 11))
    fld.values[1:-1, 1:-1] += 0.05 * rng.standard_normal((11, 9))
    _, grad = energy_intrinsic_grad(fld, G, f)
    h = 1e-6
    for _ in range(10):
        i, j = rng.integers(1, 12), rng.integers(1, 10)
        up, dn = fld.values.copy(), fld.values.copy()
        up[i, j] += h
        dn[i, j] -= h
        fd = (energy_intrinsic(GridField(up, UNIT), G, f) - energy_intrinsic(GridField(dn, UNIT), G, f)) / (2 * h)
        assert abs(fd - grad[i, j]) <= 1e-5 * abs(grad[i, j])


def test_tgraph_energy_closed_form():
    fld = GridField(np.zeros((129, 129)), UNIT, axes=("x", "y"))
    exact = (math.sqrt(2) + math.asinh(1)) / 3
    assert exact == pytest.approx(0.7652, abs=1e-4)
    assert abs(energy_tgraph(fld) - exact) <= 2e-3


def test_tgraph_energy_asymptotics_and_shift():
    fld = GridField.from_function(lambda X, Y: np.sin(X * Y), UNIT, (33, 33), axes=("x", "y"))
    base = energy_tgraph(fld)
    for eps in (1e2, 1e3, 1e4):
        assert abs(energy_tgraph(fld, eps=eps) - eps) <= base
    c = 0.37
    shifted = GridField(fld.values + c, UNIT, axes=("x", "y"))
    assert energy_tgraph(shifted, f=1.0) - energy_tgraph(fld, f=1.0) == pytest.approx(c, abs=1e-13)


def test_tgraph_rejects_t_dependent_curvature_and_negative_eps():
    fld = GridField(np.zeros((5, 5)), UNIT, axes=("x", "y"))
    with pytest.raises(ValueError):
        energy_tgraph(fld, f=ScalarField("t", ("x", "y", "t", "s")))
    with pytest.raises(ValueError):
        energy_tgraph(fld, eps=-1.0)


def test_tgraph_gradient_matches_finite_differences():
    rng = np.random.default_rng(12)
    fld = GridField(rng.standard_normal((11, 13)) * 0.2, SQUARE12, axes=("x", "y"))
    _, grad = energy_tgraph_grad(fld, 0.5, 1e-2)
    h = 1e-6
    for _ in range(10):
        i, j = rng.integers(0, 11), rng.integers(0, 13)
        up, dn = fld.values.copy(), fld.values.copy()
        up[i, j] += h
        dn[i, j] -= h
        fd = (energy_tgraph(GridField(up, SQUARE12), 0.5, 1e-2) - energy_tgraph(GridField(dn, SQUARE12), 0.5, 1e-2)) / (2 * h)
        assert abs(fd - grad[i, j]) <= 1e-5 * abs(grad[i, j])


def test_intrinsic_plane_recovery():
    start = plane_field(0.7, 0.1, UNIT, (33, 33), interior=0.0)
    out, rep = minimize_intrinsic(start, H)
    exact = plane_field(0.7, 0.1, UNIT, (33, 33))
    assert np.max(np.abs(out.values - exact.values)) <= 1e-3
    assert rep.converged and rep.monotone()
    # boundary ring frozen bit for bit
    ring = ~start.interior_mask()
    assert np.array_equal(out.values[ring], start.values[ring])


def test_constant_is_a_fixed_point():
    start = plane_field(0.0, 0.4, UNIT, (17, 17))
    out, rep = minimize_intrinsic(start, H)
    assert np.max(np.abs(out.values - 0.4)) <= 1e-6
    assert rep.converged


def test_intrinsic_with_curvature_has_small_residual():
    start = plane_field(0.0, 0.0, UNIT, (33, 33))
    out, rep = minimize_intrinsic(start, H, f=0.5)
    assert rep.residual <= 1e-3
    assert rep.monotone()
    assert np.all(np.diff(rep.energy_history) <= 0)


def test_cylinder_boundary_data_is_recovered():
    start = GridField.from_function(_cylinder, UNIT, (33, 33), interior=0.0)
    out, rep = minimize_intrinsic(start, H, f=0.5)
    exact = GridField.from_function(_cylinder, UNIT, (33, 33))
    assert rep.converged
    assert np.max(np.abs(out.values - exact.values)) <= 1e-4


def test_tgraph_plane_recovery():
    plane = dict(alpha=0.3, c=0.2, beta=-0.1, axes=("x", "y"))
    start = plane_field(bounds=SQUARE12, shape=(65, 65), interior=0.0, **plane)
    out, rep = minimize_tgraph(start)
    exact = plane_field(bounds=SQUARE12, shape=(65, 65), **plane)
    assert np.max(np.abs(out.values - exact.values)) <= 1e-3
    assert rep.monotone()
    assert rep.eps_schedule == [1e-1, 1e-2, 1e-3]
    assert len(rep.energy_history) == sum(len(s.energies) for s in rep.stages)


def test_tgraph_mesh_refinement():
    plane = dict(alpha=0.3, c=0.2, beta=-0.1, axes=("x", "y"))
    errors = []
    for n in (17, 33, 65):
        start = plane_field(bounds=SQUARE12, shape=(n, n), interior=0.0, **plane)
        out, _ = minimize_tgraph(start)
        errors.append(np.max(np.abs(out.values - plane_field(bounds=SQUARE12, shape=(n, n), **plane).values)))
    assert errors[0] / errors[1] >= 2 and errors[1] / errors[2] >= 2, errors


def test_tgraph_zero_boundary():
    start = GridField(np.zeros((33, 33)), SQUARE12, axes=("x", "y"))
    out, rep = minimize_tgraph(start)
    assert rep.residual <= 1e-3 and rep.monotone()
    assert np.all(out.values[0] == 0) and np.all(out.values[:, -1] == 0)


def test_eps_schedule_validation():
    start = GridField(np.zeros((5, 5)), SQUARE12, axes=("x", "y"))
    for bad in ((1e-2, 1e-1), (1e-1, 1e-1), (1e-1, 0.0), ()):
        with pytest.raises(ValueError):
            minimize_tgraph(start, eps_schedule=bad)


def test_budget_exhaustion_is_flagged():
    start = plane_field(0.7, 0.1, UNIT, (17, 17), interior=0.0)
    _, rep = minimize_intrinsic(start, H, steps=3)
    assert rep.message == "budget" and not rep.converged and rep.iterations == 3


def test_residual_vanishes_for_zero_gradient():
    fld = GridField(np.zeros((9, 9)), UNIT)
    assert el_residual(fld, np.zeros((9, 9))) == 0.0
    assert len(bump_family(fld)) == 9
    assert all(np.all(v[~fld.interior_mask()] == 0) for v in bump_family(fld))


@pytest.mark.parametrize("fn, f", [(_w_zero, 0.0), (_cylinder, 0.5)], ids=["H=0", "H=1/2"])
def test_end_to_end_characteristics_are_geodesics_of_curvature_f(fn, f):
    start = GridField.from_function(fn, UNIT, (33, 33), interior=0.0)
    out, rep = minimize_intrinsic(start, H, f=f)
    assert rep.converged
    u = out.as_graph("cubic")
    for b in np.linspace(0.2, 0.8, 5):
        cmp = compare_with_characteristic(u, H, f, (0.1, b), length=1.0)
        assert cmp.max_curvature_gap <= 5e-2
        assert cmp.sup_distance <= 5e-2
        assert np.max(geodesic_residual(cmp.geodesic, H)) <= 5e-2
