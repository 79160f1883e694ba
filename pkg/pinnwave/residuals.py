from .cupy_pal import *
from .exceptions import ContractViolation, NonFiniteResidual
from .derivatives import eval_jets
from .quadrature import STRATA, midpoint_integrate
import logging
import math

logger = logging.getLogger(__name__)

# Squared components of the training error, in report order
COMPONENTS = ['pde', 's_u', 's_ut', 'u0', 'u1', 'grad']
STRATUM_COMPONENTS = {'interior': ['pde'], 'boundary': ['s_u', 's_ut'], 'initial': ['u0', 'u1', 'grad']}


def stratum_residuals(problem, stratum, points, jets):
    '''
    Pointwise residuals of one stratum

    Parameters
    ----------
    problem: problem_spec
        Equation data
    stratum: str
        'interior', 'boundary' or 'initial'
    points: xp.array
        Shape (P, d+1)
    jets: jet_batch
        Jets of the evaluated function at the points

    Returns
    -------
    Dictionary component -> xp.array, (P,) for scalar residuals and (P,d) for grad
    '''
    x = points[:, :-1]
    if stratum == 'interior':
        res = jets.dtt-jets.laplacian+problem.damping(x)*jets.dt
        if problem.nonlinearity is not None:
            res = res+problem.nonlinearity(x, jets.value)
        return {'pde': res}
    elif stratum == 'boundary':
        return {'s_u': jets.value, 's_ut': jets.dt}
    elif stratum == 'initial':
        return {'u0': jets.value-problem.u0(x), 'u1': jets.dt-problem.u1(x), 'grad': jets.grad_x-problem.grad_u0(x)}
    raise ContractViolation('Unknown stratum {:s}, use one of {}'.format(stratum, STRATA))


def check_finite(stratum, points, residuals):
    '''Raises NonFiniteResidual at the first point with a nan or inf residual'''
    for name, values in residuals.items():
        flat = values if values.ndim == 1 else xp.sum(values, axis=1)
        bad = xp.nonzero(~xp.isfinite(flat))[0]
        if bad.shape[0] > 0:
            idx = int(bad[0])
            raise NonFiniteResidual(stratum, idx, cp2np(points[idx]), '{:s}={}'.format(name, to_float(flat[idx])))


def _on_stratum(box, stratum, point, tol=1e-12):
    x, t = point[:-1], point[-1]
    inside = all(a-tol <= v <= b+tol for v, a, b in zip(x, box.lower, box.upper)) and -tol <= t <= box.T+tol
    if not inside:
        return False
    if stratum == 'initial':
        return abs(t) <= tol
    on_face = any(abs(v-a) <= tol or abs(v-b) <= tol for v, a, b in zip(x, box.lower, box.upper))
    if stratum == 'boundary':
        return on_face
    return not on_face and t > tol


class residual_vector(object):
    def __init__(self, r_pde=None, r_su=None, r_sut=None, r_u0=None, r_u1=None, r_grad=None):
        '''Residuals at one point, the components of other strata are None'''
        self.r_pde = r_pde
        self.r_su = r_su
        self.r_sut = r_sut
        self.r_u0 = r_u0
        self.r_u1 = r_u1
        self.r_grad = r_grad

    def to_dict(self):
        return {kk: vv for kk, vv in vars(self).items() if vv is not None}


def residual_at(model, problem, point, stratum):
    '''
    Residuals of the evaluated function at one point of a stratum

    Parameters
    ----------
    model: mlp_params or object with jets
        Evaluated function
    problem: problem_spec
        Equation data
    point: array
        (x_1, ..., x_d, t)
    stratum: str
        Stratum the point belongs to

    Returns
    -------
    residual_vector
    '''
    pt = np.asarray(cp2np(point), dtype=float)
    if stratum not in STRATA:
        raise ContractViolation('Unknown stratum {:s}, use one of {}'.format(stratum, STRATA))
    if pt.shape != (problem.d+1,) or not _on_stratum(problem.box, stratum, pt):
        raise ContractViolation('Point {} does not belong to the {:s} stratum'.format(tuple(pt), stratum))
    pts = np2cp(pt[None, :])
    res = stratum_residuals(problem, stratum, pts, eval_jets(model, pts))
    if stratum == 'interior':
        return residual_vector(r_pde=to_float(res['pde'][0]))
    elif stratum == 'boundary':
        return residual_vector(r_su=to_float(res['s_u'][0]), r_sut=to_float(res['s_ut'][0]))
    return residual_vector(r_u0=to_float(res['u0'][0]), r_u1=to_float(res['u1'][0]),
                           r_grad=[float(v) for v in cp2np(res['grad'][0])])


class training_error_report(object):
    def __init__(self, components, counts):
        '''
        Squared residual quadratures on the three strata

        Parameters
        ----------
        components: dict
            pde, s_u, s_ut, u0, u1, grad -> squared component
        counts: dict
            M_PDE, M_s, M_t of the sets the report was computed on
        '''
        self.components = {kk: float(components[kk]) for kk in COMPONENTS}
        self.counts = dict(counts)

    @property
    def total_squared(self):
        return math.fsum(self.components[kk] for kk in COMPONENTS)

    @property
    def total(self):
        return math.sqrt(self.total_squared)

    @property
    def norms(self):
        '''Square roots of the components, i.e. the L2 norms of the residuals'''
        return {kk: math.sqrt(vv) for kk, vv in self.components.items()}

    def to_dict(self):
        return {'components': self.components, 'norms': self.norms, 'total_squared': self.total_squared,
                'total': self.total, 'counts': self.counts}

    @classmethod
    def from_dict(cls, dd):
        return cls(dd['components'], dd['counts'])


def training_error(model, sets, problem):
    '''
    Measure-weighted midpoint quadrature of the squared residuals, the gradient
    residual contributes the sum of its d squared entries

    Parameters
    ----------
    model: mlp_params or object with jets
        Evaluated function
    sets: collocation_sets
        Quadrature sets
    problem: problem_spec
        Equation data

    Returns
    -------
    training_error_report
    '''
    components = {}
    for stratum in STRATA:
        points, weights = sets.stratum(stratum)
        if points.shape[0] == 0:
            components.update({kk: 0. for kk in STRATUM_COMPONENTS[stratum]})
            continue
        res = stratum_residuals(problem, stratum, points, eval_jets(model, points))
        check_finite(stratum, points, res)
        for kk, vv in res.items():
            squared = vv*vv if vv.ndim == 1 else xp.sum(vv*vv, axis=1)
            components[kk] = midpoint_integrate(squared, weights)
    return training_error_report(components, {'M_PDE': sets.m_pde, 'M_s': sets.m_s, 'M_t': sets.m_t})


def generalization_error_estimate(model, problem, sets, refinement=4):
    '''
    Residual integrals on a grid `refinement` times finer per axis than the training
    sets, the computable stand-in for the generalization error

    Parameters
    ----------
    model: mlp_params or object with jets
        Evaluated function
    problem: problem_spec
        Equation data
    sets: collocation_sets
        Training sets to refine
    refinement: int
        Cells multiplier per axis, at least 2

    Returns
    -------
    training_error_report, its norms are the residual L2 norms
    '''
    if refinement < 2:
        raise ContractViolation('The fine grid must be strictly finer than the training grid')
    return training_error(model, sets.refined(refinement), problem)
