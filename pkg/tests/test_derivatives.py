import numpy as np
import pytest

from pinnwave.derivatives import eval_jet, eval_jets, fd_check, loss_gradient, training_loss_and_gradient
from pinnwave.exceptions import ContractViolation
from pinnwave.network import architecture, init_params, mlp_params
from pinnwave.quadrature import collocation_sets, uniform_sets
from pinnwave.residuals import training_error


def test_identity_net_jet_at_zero(identity_net):
    jj = eval_jet(identity_net, [0.])
    assert jj.value == 0.
    assert jj.dt == pytest.approx(1.)
    assert jj.dtt == pytest.approx(0.)


def test_identity_net_second_derivative(identity_net):
    h = np.tanh(0.5)
    assert eval_jet(identity_net, [0.5]).dtt == pytest.approx(-2.*h*(1.-h*h), abs=1e-12)
    assert eval_jet(identity_net, [0.5]).dtt == pytest.approx(-0.726862, abs=1e-6)


def test_zero_net_jet(zero_net):
    jj = eval_jet(zero_net, [0.1, 0.2, 0.3])
    assert jj.value == 0. and jj.dt == 0. and jj.dtt == 0. and jj.laplacian == 0.
    assert jj.grad_x == [0., 0.]


def test_eval_jet_rejects_batches(small_net):
    with pytest.raises(ContractViolation):
        eval_jet(small_net, np.zeros((2, 3)))


def test_batch_matches_single_points(small_net):
    pts = np.random.default_rng(1).uniform(-0.5, 0.5, size=(6, 3))
    batch = eval_jets(small_net, pts)
    for i in range(6):
        single = eval_jet(small_net, pts[i])
        assert batch.value[i] == pytest.approx(single.value, abs=1e-14)
        assert batch.laplacian[i] == pytest.approx(single.laplacian, abs=1e-12)


@pytest.mark.parametrize('seed', range(100))
def test_jets_match_finite_differences(seed):
    rng = np.random.default_rng(100+seed)
    arch = architecture.from_hidden(2, [8, 8])
    params = init_params(arch, seed=seed)
    report = fd_check(params, rng.uniform(-0.5, 0.5, size=3), h=1e-4)
    assert report.max_rel_error <= 1e-6


def test_exact_solution_jets_match_finite_differences(damped):
    pt = np.array([0.1, -0.2, 0.3])
    jj = eval_jet(damped.exact, pt)
    h = 1e-4
    for j in range(3):
        step = np.zeros(3)
        step[j] = h
        vals = damped.exact.jets(np.stack([pt+step, pt, pt-step])).value
        fd2 = (vals[0]-2.*vals[1]+vals[2])/h**2
        if j == 2:
            assert jj.dtt == pytest.approx(fd2, abs=1e-6)
        else:
            assert jj.grad_x[j] == pytest.approx((vals[0]-vals[2])/(2.*h), abs=1e-7)


def test_loss_gradient_matches_finite_differences(damped):
    arch = architecture.from_hidden(2, [4, 4])
    params = init_params(arch, seed=5)
    sets = uniform_sets(damped.box, 2)
    report = fd_check(params, sets, h=1e-5, problem=damped)
    assert report.max_rel_error <= 1e-5


def test_loss_matches_training_error(small_net, small_sets, damped):
    loss, grad = training_loss_and_gradient(small_net, small_sets, damped)
    assert loss == pytest.approx(training_error(small_net, small_sets, damped).total_squared, rel=1e-12)
    assert grad.shape == (small_net.arch.n_parameters,)


def test_empty_sets_give_zero_gradient(small_net, damped):
    empty = (np.zeros((0, 3)), np.zeros(0))
    sets = collocation_sets(damped.box, empty, empty, empty)
    grads = loss_gradient(small_net, sets, damped)
    assert np.all(grads.flatten() == 0.)


def _stacked_average(first, second):
    '''Network of twice the width computing (first+second)/2'''
    w1 = np.vstack([first.weights[0], second.weights[0]])
    b1 = np.concatenate([first.biases[0], second.biases[0]])
    h1, h2 = first.weights[1].shape
    w2 = np.zeros((2*h1, 2*h2))
    w2[:h1, :h2] = first.weights[1]
    w2[h1:, h2:] = second.weights[1]
    b2 = np.concatenate([first.biases[1], second.biases[1]])
    w3 = 0.5*np.hstack([first.weights[2], second.weights[2]])
    b3 = 0.5*(first.biases[2]+second.biases[2])
    arch = architecture([first.arch.widths[0], 2*h1, 2*h2, 1])
    return mlp_params(arch, [w1, w2, w3], [b1, b2, b3])


def test_jets_linear_in_last_layer():
    arch = architecture.from_hidden(2, [5, 5])
    first, second = init_params(arch, seed=3), init_params(arch, seed=4)
    pts = np.random.default_rng(7).uniform(-0.5, 0.5, size=(10, 3))
    mixed = eval_jets(_stacked_average(first, second), pts)
    ja, jb = eval_jets(first, pts), eval_jets(second, pts)
    np.testing.assert_allclose(mixed.value, 0.5*(ja.value+jb.value), atol=1e-12)
    np.testing.assert_allclose(mixed.first, 0.5*(ja.first+jb.first), atol=1e-12)
    np.testing.assert_allclose(mixed.second, 0.5*(ja.second+jb.second), atol=1e-12)


def test_jets_invariant_under_hidden_permutation():
    arch = architecture.from_hidden(2, [6, 7])
    params = init_params(arch, seed=11)
    rng = np.random.default_rng(12)
    p1, p2 = rng.permutation(6), rng.permutation(7)
    ww = [np.array(w) for w in params.weights]
    bb = [np.array(b) for b in params.biases]
    shuffled = mlp_params(arch, [ww[0][p1], ww[1][p2][:, p1], ww[2][:, p2]], [bb[0][p1], bb[1][p2], bb[2]])
    pts = rng.uniform(-0.5, 0.5, size=(10, 3))
    ja, jb = eval_jets(params, pts), eval_jets(shuffled, pts)
    np.testing.assert_allclose(jb.value, ja.value, atol=1e-12)
    np.testing.assert_allclose(jb.first, ja.first, atol=1e-12)
    np.testing.assert_allclose(jb.second, ja.second, atol=1e-12)
