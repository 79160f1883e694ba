import math
import os

import numpy as np
import pytest
from scipy.integrate import quad

from pinnwave.exceptions import ContractViolation, Unsupported
from pinnwave.metrics import (evaluate_metrics, metric_cells, metric_report, pointwise_error_field, solution_field,
                              total_error_h1, total_error_l2, write_solution_fields)
from pinnwave.problems import semilinear_power_problem
from pinnwave.quadrature import uniform_sets
from pinnwave.utils import read_csv


def time_profile(damped, which):
    def g(t):
        method = damped.exact.value if which == 'value' else damped.exact.dt
        return float(method(np.zeros((1, 2)), np.array([t]))[0])
    return g


def test_exact_solution_zero_error(damped):
    report = evaluate_metrics(damped.exact, damped, cells=6)
    assert report.l2_error == 0. and report.h1_quantity == 0.


def test_zero_net_l2(zero_net, damped):
    g = time_profile(damped, 'value')
    i_t, _ = quad(lambda t: g(t)**2, 0., 0.5)
    assert total_error_l2(zero_net, damped, cells=40) == pytest.approx(math.sqrt(i_t/4.), rel=2e-3)


def test_zero_net_h1(zero_net, damped):
    g1 = time_profile(damped, 'dt')
    i_dt, _ = quad(lambda t: g1(t)**2, 0., 0.5)
    l2_part, dt_part, total = total_error_h1(zero_net, damped, cells=40)
    assert dt_part == pytest.approx(i_dt/4., rel=5e-3)
    assert total == pytest.approx(l2_part+dt_part)
    assert total >= l2_part


def test_report_values(small_net, damped, small_sets):
    report = evaluate_metrics(small_net, damped, sets=small_sets)
    assert report.h1_error**2 == pytest.approx(report.h1_quantity)
    assert report.h1_quantity >= report.l2_error**2
    assert metric_report.from_dict(report.to_dict()).to_dict() == report.to_dict()


def test_metric_cells(damped):
    sets = uniform_sets(damped.box, 2)
    assert metric_cells(damped, sets) == [4*c for c in sets.cells['interior']]
    assert metric_cells(damped, cells=[3, 4, 5]) == [3, 4, 5]
    with pytest.raises(ContractViolation):
        metric_cells(damped, cells=[3, 4])
    with pytest.raises(ContractViolation):
        metric_cells(damped)


def test_field_shapes(small_net, damped):
    fields, axes = solution_field(small_net, damped, 0.25, nodes=5)
    assert set(fields.keys()) == {'pinn', 'exact', 'abs_error'}
    assert fields['pinn'].shape == (5, 5)
    assert len(axes) == 2 and axes[0][0] == -0.5
    np.testing.assert_allclose(fields['abs_error'], np.abs(fields['pinn']-fields['exact']))


def test_time_outside_horizon(small_net, damped):
    with pytest.raises(ContractViolation):
        solution_field(small_net, damped, 0.75, nodes=5)
    with pytest.raises(ContractViolation):
        solution_field(small_net, damped, -0.1, nodes=5)


def test_pointwise_error_needs_exact(small_net):
    with pytest.raises(Unsupported):
        pointwise_error_field(small_net, semilinear_power_problem(1), 0., nodes=5)


def test_pointwise_error_initial_slice(damped):
    field, _ = pointwise_error_field(damped.exact, damped, 0., nodes=7)
    assert np.max(field) == 0.


def test_field_files(small_net, damped, tmp_path):
    written = write_solution_fields(small_net, damped, str(tmp_path), nodes=5)
    assert len(written) == 9
    assert os.path.basename(written[0]) == 'field_pinn_t0.csv'
    header, rows = read_csv(written[0])
    assert header[0] == 'x1' and len(header) == 6
    assert len(rows) == 5
    assert float(rows[0][0]) == -0.5
