import math

import numpy as np
import pytest

from pinnwave.exceptions import ConfigurationError, ContractViolation
from pinnwave.quadrature import (SWEEP_SETTINGS, box_domain, build_sets, default_counts, midpoint_grid,
                                 midpoint_integrate, quadrature_error_bound, read_points_csv, sets_from_counts,
                                 uniform_sets, uniform_total, write_points_csv)


@pytest.fixture
def box():
    return box_domain([-0.5, -0.5], [0.5, 0.5], 0.5)


def test_interior_grid_by_hand(box):
    sets = build_sets(box, 2, 2, 2)
    pts, ww = sets.stratum('interior')
    assert pts.shape == (8, 3)
    np.testing.assert_allclose(ww, 0.0625)
    np.testing.assert_allclose(pts[0], [-0.25, -0.25, 0.125])


def test_initial_grid_by_hand(box):
    pts, ww = build_sets(box, 2, 2, 2).stratum('initial')
    assert pts.shape == (4, 3)
    np.testing.assert_allclose(ww, 0.25)
    np.testing.assert_allclose(np.abs(pts[:, :2]), 0.25)
    assert np.all(pts[:, 2] == 0.)


def test_boundary_weights_sum(box):
    pts, ww = build_sets(box, 3, 3, 3).stratum('boundary')
    assert box.boundary_measure == pytest.approx(4.)
    assert float(np.sum(ww)) == pytest.approx(2.)
    on_face = np.isclose(np.abs(pts[:, 0]), 0.5) | np.isclose(np.abs(pts[:, 1]), 0.5)
    assert np.all(on_face)


@pytest.mark.parametrize('coeffs', [[1., 0., 0., 0.], [0.3, -2., 1.5, 4.], [-1., 0.5, 3., -0.25]])
def test_midpoint_exact_for_affine(coeffs):
    box = box_domain([-1., 0.], [2., 0.5], 0.7)
    sets = build_sets(box, [3, 4, 5], [2, 3, 4], [5, 2])
    a, b = coeffs[0], np.array(coeffs[1:])

    def affine(pts):
        return a+pts@b

    center = np.array([0.5, 0.25, 0.35])
    pts, ww = sets.stratum('interior')
    assert midpoint_integrate(affine(pts), ww) == pytest.approx(3.*0.5*0.7*affine(center), abs=1e-12)
    pts, ww = sets.stratum('initial')
    assert midpoint_integrate(affine(pts), ww) == pytest.approx(3.*0.5*affine(np.array([0.5, 0.25, 0.])), abs=1e-12)
    pts, ww = sets.stratum('boundary')
    edges = [3., 0.5]
    for i in range(2):
        for value in [box.lower[i], box.upper[i]]:
            face = pts[:, i] == value
            centroid = center.copy()
            centroid[i] = value
            exact = edges[1-i]*0.7*affine(centroid)
            assert midpoint_integrate(affine(pts[face]), ww[face]) == pytest.approx(exact, abs=1e-12)


def test_uniform_counts(box):
    sets = uniform_sets(box, 4)
    assert sets.counts() == {'M_PDE': 64, 'M_s': 64, 'M_t': 16, 'M_total': 144}


def test_settings_totals():
    totals = [uniform_total(2, n) for n in SWEEP_SETTINGS]
    assert totals == [144, 396, 832, 1500, 4500, 10000, 18750]


def test_default_counts_roundtrip(box):
    sets = sets_from_counts(box, {'total': 832})
    assert sets.total == 832
    assert default_counts(18750)['interior'] == [25, 25, 25]


def test_default_counts_irregular():
    with pytest.raises(ConfigurationError):
        default_counts(145)


@pytest.mark.parametrize('cells', [[0, 2, 2], [2, 2], [1.5, 2, 2]])
def test_invalid_cells(box, cells):
    with pytest.raises(ConfigurationError):
        build_sets(box, cells, 2, 2)


def test_constant_integrand():
    pts, ww = midpoint_grid([0., 0.], [1., 1.], [5, 7])
    assert midpoint_integrate(np.ones(pts.shape[0]), ww) == pytest.approx(1., abs=1e-14)


def test_square_four_midpoints():
    pts, ww = midpoint_grid([0.], [1.], [4])
    assert midpoint_integrate(pts[:, 0]**2, ww) == pytest.approx(0.328125, abs=1e-15)
    assert quadrature_error_bound(1./24., 2., 4, 1) == pytest.approx(1./3.-0.328125)


def test_integrate_shape_mismatch():
    with pytest.raises(ContractViolation):
        midpoint_integrate(np.ones(3), np.ones(4))


@pytest.mark.parametrize('dim', [1, 2, 3])
def test_convergence_order(dim):
    '''Midpoint error decays as M^(-2/dim) for smooth integrands'''
    exact = (2.*math.sin(0.5))**dim
    Ms, errors = [], []
    for n in [4, 8, 16, 32]:
        pts, ww = midpoint_grid([-0.5]*dim, [0.5]*dim, [n]*dim)
        values = np.prod(np.cos(pts), axis=1)
        Ms.append(pts.shape[0])
        errors.append(abs(midpoint_integrate(values, ww)-exact))
    slope = np.polyfit(np.log(Ms), np.log(errors), 1)[0]
    assert slope == pytest.approx(-2./dim, abs=0.1)


def test_quadrature_error_bound_examples():
    assert quadrature_error_bound(1., 1., 16, 2) == pytest.approx(0.0625)
    assert quadrature_error_bound(1., 1., 64, 4)/quadrature_error_bound(1., 1., 16, 4) == pytest.approx(0.5)


def test_refined_sets(box):
    sets = uniform_sets(box, 3).refined(2)
    assert sets.m_pde == 6**3


def test_points_csv(tmp_path, box):
    sets = uniform_sets(box, 2)
    fname = str(tmp_path/'points.csv')
    write_points_csv(sets, fname)
    back = read_points_csv(box, fname)
    assert back.counts() == sets.counts()
    np.testing.assert_allclose(back.stratum('boundary')[0], sets.stratum('boundary')[0])
    with pytest.raises(ContractViolation):
        back.refined(2)


def test_box_geometry(box):
    assert box.diameter == pytest.approx(math.sqrt(2.))
    assert box.space_time_inradius == pytest.approx(0.25)
    assert box.scaled(2.).diameter == pytest.approx(2.*math.sqrt(2.))
