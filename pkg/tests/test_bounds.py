import math
from types import SimpleNamespace

import mpmath
import numpy as np
import pytest

from pinnwave.bounds import (certify, constant_ledger, geometry_constants, gronwall_factor, hat_c, lemma_constants,
                             poincare_constant, posterior_bound, residual_bound, sampled_cn_norm, trace_constant)
from pinnwave.exceptions import BoundUnavailable, ContractViolation
from pinnwave.network import activation_norm_table, architecture
from pinnwave.problems import semilinear_power_problem
from pinnwave.quadrature import box_domain
from pinnwave.residuals import COMPONENTS, training_error, training_error_report

ZERO_U = {0: 0., 1: 0., 2: 0., 3: 0.}


def unit_ledger(c_pw, trace=1.):
    consts = {'c1': 1., 'c2': 1., 'c3': 1., 'c4': 1., 'c5': 1.}
    return constant_ledger(c_pw, trace, 0., consts, 1., geometry_constants(), 'empirical', {})


def fake_sets(m_pde, m_s, m_t):
    return SimpleNamespace(m_pde=m_pde, m_s=m_s, m_t=m_t)


def zero_report(sets):
    return training_error_report({kk: 0. for kk in COMPONENTS}, {'M_PDE': sets.m_pde, 'M_s': sets.m_s, 'M_t': sets.m_t})


def test_poincare_constant(damped):
    assert poincare_constant(damped.box) == pytest.approx(math.sqrt(2.)/math.pi, abs=1e-12)
    assert poincare_constant(box_domain([0.], [1.], 1.)) == pytest.approx(1./math.pi, abs=1e-12)
    assert poincare_constant(damped.box.scaled(3.)) == pytest.approx(3.*poincare_constant(damped.box))


def test_trace_constant(damped):
    assert trace_constant(damped.box) == pytest.approx(math.sqrt(24.), abs=1e-12)
    assert trace_constant(box_domain([0., 0.], [1., 1.], 1.)) == pytest.approx(3.722, abs=1e-3)
    longer = box_domain([-0.5, -0.5], [0.5, 0.5], 0.8)
    assert trace_constant(longer) >= trace_constant(box_domain([-0.5, -0.5], [0.5, 0.5], 0.6))


def test_hat_c(damped):
    assert hat_c(damped, 1., 1.) == 0.
    problem = semilinear_power_problem(1)
    c, r = problem.growth
    assert hat_c(problem, 1., 0.5) == pytest.approx(c*1.25)
    # Linear in c
    assert hat_c(problem, 1., 0.5)/c == pytest.approx(1.25)


def test_gronwall_factor_damped_geometry(damped):
    c_pw = poincare_constant(damped.box)
    expected = 0.5*math.exp(0.5*(1.+math.pi**2/math.sqrt(2.)))
    assert float(gronwall_factor(0.5, c_pw)) == pytest.approx(expected, rel=1e-12)
    # 0.5 e^(0.5 (1 + pi^2/sqrt 2)) = 27.012, so 26.99 for this geometry would be an arithmetic slip
    assert float(gronwall_factor(0.5, c_pw)) == pytest.approx(27.01, abs=0.01)
    assert gronwall_factor(0.5, c_pw, 1.) > gronwall_factor(0.5, c_pw)


def test_c1_closed_form(damped):
    arch = architecture([2, 1, 1], weight_bound=1.)
    act = activation_norm_table('tanh', 4, [1.]*5)
    consts = lemma_constants(arch, act, damped, geometry_constants(), poincare_constant(damped.box), u_norms=ZERO_U)
    L, d, W = 2, 1, 2
    expected = 8*mpmath.mpf(16)**(2*L)*mpmath.mpf(d+1)**12*(mpmath.e**2*3**4*mpmath.mpf(W)**3)**(6*L)
    assert float(consts['c1']/expected) == pytest.approx(1., rel=1e-12)
    assert float(consts['c3']/consts['c1']) == pytest.approx(1.)


def test_c3_scales_with_dimension(damped):
    arch = architecture([3, 4, 1], weight_bound=1.)
    act = activation_norm_table('tanh', 4, [1.]*5)
    consts = lemma_constants(arch, act, damped, geometry_constants(), poincare_constant(damped.box), u_norms=ZERO_U)
    assert float(consts['c3']/consts['c1']) == pytest.approx(2.)
    assert all(consts[kk] > 0 for kk in ['c1', 'c2', 'c3', 'c4', 'c5'])


def test_lemma_constants_need_u_norms():
    problem = semilinear_power_problem(1)
    problem.exact = None
    arch = architecture([3, 4, 1], weight_bound=1.)
    act = activation_norm_table('tanh', 4, [1.]*5)
    with pytest.raises(BoundUnavailable):
        lemma_constants(arch, act, problem, geometry_constants(), 0.45, u_norms={0: 1.})


def test_geometry_constants_positive():
    with pytest.raises(BoundUnavailable):
        geometry_constants(c_omega=0.)


def test_zero_errors_vanishing_bound(damped):
    ledger = unit_ledger(poincare_constant(damped.box))
    values = []
    for m in [10**2, 10**6, 10**12]:
        sets = fake_sets(m, m, m)
        values.append(posterior_bound(zero_report(sets), sets, ledger, damped.box).bound_value)
    assert values[0] > values[1] > values[2]
    assert values[2] < 1e-2


def test_bound_monotone_in_counts(damped):
    ledger = unit_ledger(poincare_constant(damped.box))
    base = fake_sets(100, 100, 100)
    report = training_error_report({kk: 1e-3 for kk in COMPONENTS}, {'M_PDE': 100, 'M_s': 100, 'M_t': 100})
    reference = posterior_bound(report, base, ledger, damped.box)
    for sets in [fake_sets(1000, 100, 100), fake_sets(100, 1000, 100), fake_sets(100, 100, 1000)]:
        rr = training_error_report(report.components, {'M_PDE': sets.m_pde, 'M_s': sets.m_s, 'M_t': sets.m_t})
        assert posterior_bound(rr, sets, ledger, damped.box).bound_value <= reference.bound_value
    assert reference.bound_value == pytest.approx(float(reference.c_of_m*reference.gronwall))
    assert all(vv >= 0 for vv in reference.breakdown.values())


def test_counts_mismatch(damped):
    ledger = unit_ledger(poincare_constant(damped.box))
    with pytest.raises(ContractViolation):
        posterior_bound(zero_report(fake_sets(10, 10, 10)), fake_sets(10, 10, 11), ledger, damped.box)


def test_residual_bound(damped):
    c_pw = poincare_constant(damped.box)
    ledger = unit_ledger(c_pw)
    zeros = {kk: 0. for kk in ['pde', 's_ut', 'u0', 'u1', 'grad']}
    assert residual_bound(zeros, ledger, damped.box, 1.) == 0.
    small = {kk: 1e-3 for kk in zeros}
    value = residual_bound(small, ledger, damped.box, 1.)
    bracket = 3e-6+2.*math.sqrt(0.5*4.)*1e-3+2./c_pw**2*1e-6
    assert value == pytest.approx(bracket*0.5*math.exp(0.5*(1.+math.pi**2/math.sqrt(2.))), rel=1e-10)
    for kk in zeros:
        bigger = dict(small)
        bigger[kk] = 2e-3
        assert residual_bound(bigger, ledger, damped.box, 1.) > value


def test_sampled_norm_constant():
    field = np.full((7, 9), -2.5)
    assert sampled_cn_norm(field, [0.1, 0.2], 0) == 2.5
    assert sampled_cn_norm(field, [0.1, 0.2], 2) == pytest.approx(2.5)


def test_sampled_norm_sine():
    x = np.linspace(-0.5, 0.5, 401)
    norm = sampled_cn_norm(np.sin(math.pi*x), [x[1]-x[0]], 2)
    assert norm == pytest.approx(math.pi**2, rel=1e-2)
    coarse = sampled_cn_norm(np.sin(math.pi*x[::2]), [2.*(x[1]-x[0])], 2)
    assert abs(coarse-norm)/norm < 0.02


def test_sampled_norm_order():
    with pytest.raises(ContractViolation):
        sampled_cn_norm(np.zeros((5, 5)), [0.1, 0.1], 3)


def test_certify_small_net(small_net, damped, small_sets):
    report = training_error(small_net, small_sets, damped)
    out = certify(small_net, damped, small_sets, report, mode='both', nodes=7)
    assert set(out.keys()) == {'lemma', 'empirical'}
    empirical = out['empirical']['bound']
    assert empirical.norm_source == 'empirical'
    assert math.isfinite(empirical.log10_bound)
    assert out['lemma']['ledger'].to_dict()['rigorous']
    assert not out['empirical']['ledger'].to_dict()['rigorous']
    assert out['lemma']['bound'].log10_bound >= empirical.log10_bound


def test_certify_unknown_mode(small_net, damped, small_sets):
    report = training_error(small_net, small_sets, damped)
    with pytest.raises(ContractViolation):
        certify(small_net, damped, small_sets, report, mode='exact')
