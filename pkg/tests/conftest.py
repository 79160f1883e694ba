import numpy as np
import pytest

from pinnwave.network import architecture, init_params, mlp_params
from pinnwave.problems import damped_wave_problem
from pinnwave.quadrature import uniform_sets


@pytest.fixture
def damped():
    return damped_wave_problem()


@pytest.fixture
def small_net():
    arch = architecture.from_hidden(2, [6, 6])
    return init_params(arch, seed=3)


@pytest.fixture
def zero_net():
    arch = architecture.from_hidden(2, [5, 5])
    return mlp_params(arch, [np.zeros(s) for s in arch.shapes()], [np.zeros(s[0]) for s in arch.shapes()])


@pytest.fixture
def small_sets(damped):
    return uniform_sets(damped.box, 2)


@pytest.fixture
def identity_net():
    '''1-1-1 tanh network with unit weights and zero biases'''
    arch = architecture([1, 1, 1])
    return mlp_params(arch, [np.ones((1, 1)), np.ones((1, 1))], [np.zeros(1), np.zeros(1)])
