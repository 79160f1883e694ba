import math

import mpmath
import pytest

from pinnwave.exceptions import ConfigurationError, HypothesisViolation
from pinnwave.theory import (RATE_HEADER, apriori_sizes, lambda_beta, q1_residual_bounds, q1_widths, rate_curves,
                             theory_inputs, weight_growth_exponent, write_rate_table)
from pinnwave.utils import read_csv


def inputs(**kwargs):
    settings = dict(d=2, k=4, n=2, N=6, delta=1., T=0.5, box_lower=[-1, -1], box_upper=[1, 1],
                    sobolev_seminorm=1., w_norms=1.)
    settings.update(kwargs)
    return theory_inputs(**settings)


def test_widths_golden():
    assert q1_widths(inputs()) == (338, 19440)


def test_widths_grow_with_N():
    w1, w2 = q1_widths(inputs(N=8))
    assert w1 > 338 and w2 > 19440


def test_grid_parameter_floor():
    with pytest.raises(HypothesisViolation):
        q1_widths(inputs(N=5))


@pytest.mark.parametrize('settings', [{'k': 3}, {'n': 1}, {'delta': 0.}, {'gamma': 0.9, 'd': 2}])
def test_hypotheses(settings):
    with pytest.raises(HypothesisViolation):
        inputs(**settings)


def test_invalid_box():
    with pytest.raises(ConfigurationError):
        inputs(box_lower=[1, -1], box_upper=[1, 1])
    with pytest.raises(ConfigurationError):
        theory_inputs.from_dict(dict(inputs().to_dict(), depth=3))


def test_lambda_zero():
    lam, beta, c0 = lambda_beta(inputs(d=1, box_lower=[-1], box_upper=[1]), 0)
    assert float(lam) == pytest.approx(18.)
    assert beta > 0 and c0 > 0


def test_beta_inverse_in_delta():
    _, beta1, _ = lambda_beta(inputs(delta=1.), 1)
    _, beta2, _ = lambda_beta(inputs(delta=2.), 1)
    assert float(beta1/beta2) == pytest.approx(2.)


def test_lambda_needs_norms():
    with pytest.raises(HypothesisViolation):
        lambda_beta(inputs(sobolev_seminorm=None), 1)
    with pytest.raises(ConfigurationError):
        lambda_beta(inputs(), 3)


def test_pde_bound_linear_undamped():
    ii = inputs()
    out = q1_residual_bounds(ii, a_linf=0.)
    lam2, _, c2 = lambda_beta(ii, 2)
    expected = (c2+mpmath.sqrt(2))*lam2*mpmath.mpf(6)**(-3)
    assert out['pde'] == pytest.approx(float(expected), rel=1e-12)
    assert q1_residual_bounds(ii, a_linf=1.)['pde'] > out['pde']
    parts = [out[kk] for kk in ['pde', 's_u', 's_ut', 'u0', 'u1', 'grad']]
    assert out['generalization'] == pytest.approx(math.fsum(parts))


def test_semilinear_needs_gn_constant():
    with pytest.raises(HypothesisViolation):
        q1_residual_bounds(inputs(gamma=0.25))
    with_gn = q1_residual_bounds(inputs(gamma=0.25, gn_constant=1.))
    assert with_gn['pde'] > q1_residual_bounds(inputs(), a_linf=0.)['pde']


def test_weight_growth_exponent():
    assert weight_growth_exponent(inputs()) == pytest.approx(max(25, 30)/2.)


def test_rates():
    rows = rate_curves(inputs(), [6, 10, 100, 10**6, 10**7])
    for row in rows:
        assert row['generalization_rate'] > 0 and row['training_rate'] > 0
    assert all(b['generalization_rate'] < a['generalization_rate'] for a, b in zip(rows[1:-1], rows[2:]))
    assert all(b['training_rate'] < a['training_rate'] for a, b in zip(rows[:-1], rows[1:]))
    slope = math.log10(rows[-1]['generalization_rate']/rows[-2]['generalization_rate'])
    assert abs(slope+3.) < 0.2
    assert rows[0]['M_PDE'] == 6**3 and rows[0]['M_s'] == 4*36 and rows[0]['M_t'] == 36


def test_rates_counts_per_row():
    with pytest.raises(ConfigurationError):
        rate_curves(inputs(), [6, 7], m_counts=[(10, 10, 10)])


def test_rate_table_file(tmp_path):
    fname = str(tmp_path/'rates.csv')
    write_rate_table(rate_curves(inputs(), [6, 7, 8]), fname)
    header, rows = read_csv(fname)
    assert header == RATE_HEADER
    assert len(rows) == 3
    with open(fname) as f:
        assert f.read().strip().splitlines()[-1].startswith('# training_rate')


def test_apriori_eta_threshold():
    with pytest.raises(HypothesisViolation):
        apriori_sizes(0.1, 1, 146)
    with pytest.raises(HypothesisViolation):
        apriori_sizes(1.5, 1, 200)
    plan = apriori_sizes(0.1, 1, 147)
    assert plan.eta == 146


def test_apriori_below_hypothesis():
    assert apriori_sizes(0.5, 1, 147).below_hypothesis
    plan = apriori_sizes(1e-3, 1, 147)
    assert not plan.below_hypothesis
    assert 999 < float(plan.N) <= 1001


def test_apriori_sizes_grow():
    coarse = apriori_sizes(1e-2, 1, 147).to_dict()
    fine = apriori_sizes(1e-4, 1, 147).to_dict()
    for key in ['N', 'M_PDE', 'M_t', 'M_s', 'R_min', 'W_min']:
        assert fine['log10_values'][key] > coarse['log10_values'][key]
    assert fine['W_min_over_C'] == pytest.approx(float(mpmath.mpf(10)**8))


def test_apriori_depth():
    assert apriori_sizes(0.1, 1, 147).l_min == 3
    assert apriori_sizes(0.1, 1, 147, r=100.).l_min == 5
