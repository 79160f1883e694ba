from .cupy_pal import *
from .exceptions import BoundUnavailable, ContractViolation
from .network import cn_norm_bound_mp, c0_norm_bound, compute_activation_norms, round_up_bound
from .derivatives import eval_jets
from .residuals import stratum_residuals
from .quadrature import node_grid
from .problems import expression_derivative_sups
import logging
import math
import mpmath

logger = logging.getLogger(__name__)

NORM_SOURCES = ['lemma', 'empirical']
# Nodes per axis of the dense grids used for sampled residual norms
DEFAULT_NORM_NODES = 41


def _mp_log10(value):
    value = mpmath.mpf(value)
    return float(mpmath.log10(value)) if value > 0 else float('-inf')


class geometry_constants(object):
    def __init__(self, c_omega=1., c_omega_t=1., c_boundary=1.):
        '''
        Constants of the midpoint-rule error estimates on Omega, Omega x [0,T] and dOmega x [0,T]

        Parameters
        ----------
        c_omega, c_omega_t, c_boundary: float
            Geometry constants, 1 by default
        '''
        self.c_omega = float(c_omega)
        self.c_omega_t = float(c_omega_t)
        self.c_boundary = float(c_boundary)
        if min(self.c_omega, self.c_omega_t, self.c_boundary) <= 0:
            raise BoundUnavailable('Geometry constants must be positive')

    def to_dict(self):
        return {'c_omega': self.c_omega, 'c_omega_t': self.c_omega_t, 'c_boundary': self.c_boundary}

    @classmethod
    def from_dict(cls, dd):
        return cls(**dd) if dd is not None else cls()


def poincare_constant(box):
    '''Poincare-Wirtinger constant of a convex domain, diameter/pi'''
    return box.diameter/math.pi


def trace_constant(box):
    '''
    Constant of the multiplicative trace inequality on Omega x [0,T],
    sqrt(2 max{2h, d+1}/rho) with h the space-time diameter and rho the inradius
    '''
    return math.sqrt(2.*max(2.*box.space_time_diameter, box.d+1.)/box.space_time_inradius)


def hat_c(problem, u_c0, uhat_c0):
    '''
    Amplification constant of the nonlinearity, 2^(r-1) c (||u||^r + ||uhat||^r/(r+1)),
    zero for the linear equation.

    Parameters
    ----------
    problem: problem_spec
        Equation data with growth (c, r)
    u_c0: float
        C^0 norm of the exact solution
    uhat_c0: float
        C^0 norm of the error u_theta - u
    '''
    if problem.is_linear:
        return 0.
    c, r = problem.growth
    if r < 1:
        raise BoundUnavailable('The nonlinearity constant needs r >= 1, got r={:f}'.format(r))
    return 2.**(r-1.)*c*(u_c0**r+uhat_c0**r/(r+1.))


def gronwall_factor(T, c_pw, hat_c_value=0.):
    '''
    T exp(T max{1, 2 C_pw^2}(1 + C_hat + 2 sqrt(T)/C_pw^2)), in multiprecision

    Returns
    -------
    mpmath.mpf
    '''
    T = mpmath.mpf(T)
    c_pw = mpmath.mpf(c_pw)
    k = max(mpmath.mpf(1), 2*c_pw**2)
    return T*mpmath.exp(T*k*(1+mpmath.mpf(hat_c_value)+2*mpmath.sqrt(T)/c_pw**2))


class constant_ledger(object):
    def __init__(self, c_pw, trace, hat_c_value, constants, boundary_factor, geometry, norm_source, inputs):
        '''
        Constants of the a-posteriori bound

        Parameters
        ----------
        c_pw: float
            Poincare-Wirtinger constant
        trace: float
            Trace constant of Omega x [0,T]
        hat_c_value: float
            Nonlinearity amplification constant
        constants: dict
            c1..c5 as mpmath numbers
        boundary_factor: mpmath.mpf
            Bound or sampled value of ||u_theta - u||_C1
        geometry: geometry_constants
            Quadrature constants
        norm_source: str
            'lemma' (architecture bounds, rigorous) or 'empirical' (sampled norms, not rigorous)
        inputs: dict
            Supporting inputs for audit
        '''
        if norm_source not in NORM_SOURCES:
            raise ContractViolation('Unknown norm source {:s}'.format(norm_source))
        self.c_pw = c_pw
        self.trace_constant = trace
        self.hat_c = hat_c_value
        self.constants = {kk: mpmath.mpf(vv) for kk, vv in constants.items()}
        self.boundary_factor = mpmath.mpf(boundary_factor)
        self.geometry = geometry
        self.norm_source = norm_source
        self.inputs = inputs

    def __getitem__(self, key):
        return self.constants[key]

    def to_dict(self):
        return {'c_pw': self.c_pw, 'trace_constant': self.trace_constant, 'hat_c': self.hat_c,
                'constants': {kk: float(vv) for kk, vv in self.constants.items()},
                'log10_constants': {kk: _mp_log10(vv) for kk, vv in self.constants.items()},
                'boundary_factor': float(self.boundary_factor), 'log10_boundary_factor': _mp_log10(self.boundary_factor),
                'geometry': self.geometry.to_dict(), 'norm_source': self.norm_source,
                'rigorous': self.norm_source == 'lemma', 'inputs': self.inputs}


def exact_cn_norms(problem, n=3, nodes=None):
    '''
    C^k norms, k=0..n, of the exact solution sampled on a dense space-time grid

    Returns
    -------
    dict k -> ||u||_C^k
    '''
    exact = problem.require_exact('exact_cn_norms')
    box = problem.box
    sups = expression_derivative_sups(exact.expression, exact.symbols, box.lower+[0.], box.upper+[box.T], n, nodes=nodes)
    return {k: max(sups[:k+1]) for k in range(n+1)}


def lemma_constants(arch, act, problem, geometry, c_pw, u_norms=None):
    '''
    Architecture-only bounds of the quadrature constants C1..C5 and of ||u_theta - u||_C1

    Parameters
    ----------
    arch: architecture
        Network architecture with finite weight bound
    act: activation_norm_table
        Sup norms of the activation up to order 4
    problem: problem_spec
        Equation data
    geometry: geometry_constants
        Quadrature constants
    c_pw: float
        Poincare-Wirtinger constant
    u_norms: dict
        k -> ||u||_C^k for k = 0..3, sampled from the exact solution when missing

    Returns
    -------
    dict with c1..c5 and boundary_factor as mpmath numbers
    '''
    if u_norms is None:
        if not problem.has_exact:
            raise BoundUnavailable('Problem {:s} has no exact solution, supply norms of u up to C^3'.format(problem.name))
        u_norms = exact_cn_norms(problem, 3)
    missing = [k for k in range(4) if k not in u_norms]
    if len(missing) > 0:
        raise BoundUnavailable('Supply norms of u, C^k norms missing for k={}'.format(missing))
    d = arch.spatial_dim
    mp = mpmath.mpf
    B = {n: cn_norm_bound_mp(arch, n, act, d=d) for n in range(1, 5)}
    R, W = mp(arch.weight_bound), mp(arch.max_width)
    u = {k: mp(v) for k, v in u_norms.items()}

    c_omega, c_omega_t, c_boundary = mp(geometry.c_omega), mp(geometry.c_omega_t), mp(geometry.c_boundary)
    c1 = 8*c_omega*(B[3]**2+u[3]**2)
    nonlinear = mp(0)
    if not problem.is_linear:
        c, r = problem.growth
        nonlinear = mp(c)**2*mp(2)**r*R**(r+1)*(W**(r+1)*mp(act.norm(0))**(r+1)+1)
    c2 = 16*c_omega_t*((d+1)*B[4]**2+16*mp(problem.damping_c2_norm)**2*B[3]**2+nonlinear)
    c3 = d*c1
    c4 = 2*mpmath.sqrt(c_boundary)*B[3]
    c5 = 16*c_omega/mp(c_pw)**2*(B[2]**2+u[2]**2)
    return {'c1': c1, 'c2': c2, 'c3': c3, 'c4': c4, 'c5': c5, 'boundary_factor': B[1]+u[1]}


def sampled_cn_norm(values, spacings, n):
    '''
    Max over the grid of |D^alpha g| for |alpha| <= n, derivatives by second order central
    differences. Axes with fewer than 3 nodes are not differentiated.

    Parameters
    ----------
    values: np.array
        Field on a tensor grid, one array axis per coordinate
    spacings: list of float
        Node spacing per axis
    n: int
        Derivative order, at most 2

    Returns
    -------
    float
    '''
    if n > 2:
        raise ContractViolation('Sampled norms are available up to order 2, requested {:d}'.format(n))
    values = np.asarray(cp2np(values), dtype=float)
    axes = [i for i in range(values.ndim) if values.shape[i] >= 3]
    best = float(np.max(np.abs(values)))
    if n == 0:
        return best
    firsts = {}
    for i in axes:
        firsts[i] = np.gradient(values, spacings[i], axis=i, edge_order=2)
        best = max(best, float(np.max(np.abs(firsts[i]))))
    if n == 2:
        for i in axes:
            for j in axes:
                if j < i:
                    continue
                second = np.gradient(firsts[i], spacings[j], axis=j, edge_order=2)
                best = max(best, float(np.max(np.abs(second))))
    return best


def _field(model, problem, stratum, points):
    return stratum_residuals(problem, stratum, points, eval_jets(model, points))


def empirical_cn_norms(params, problem, n=2, nodes=None, u_norms=None):
    '''
    Sampled C^n norms of the squared residual fields and of the error u_theta - u.
    These are estimates, not rigorous bounds.

    Parameters
    ----------
    params: mlp_params or object with jets
        Evaluated function
    problem: problem_spec
        Equation data
    n: int
        Derivative order of the residual norms, at most 2
    nodes: int
        Nodes per axis of the sampling grids
    u_norms: dict
        Norms of u used for ||u_theta - u||_C1 when the problem has no exact solution

    Returns
    -------
    dict with keys pde, s_ut, u0, u1, grad (C^n norms of the squared residuals) and uhat_c0, uhat_c1
    '''
    box = problem.box
    d = box.d
    nodes = DEFAULT_NORM_NODES if nodes is None else int(nodes)
    if nodes < 3:
        raise ContractViolation('Sampling grids need at least 3 nodes per axis')
    space_time_lower, space_time_upper = box.lower+[0.], box.upper+[box.T]
    spacing = [(b-a)/(nodes-1) for a, b in zip(space_time_lower, space_time_upper)]
    out = {}

    pts, _ = node_grid(space_time_lower, space_time_upper, [nodes]*(d+1))
    res = _field(params, problem, 'interior', pts)
    out['pde'] = sampled_cn_norm(cp2np(res['pde']**2).reshape([nodes]*(d+1)), spacing, n)

    face_norm = 0.
    for i in range(d):
        others = [j for j in range(d) if j != i]
        face_pts, _ = node_grid([box.lower[j] for j in others]+[0.], [box.upper[j] for j in others]+[box.T], [nodes]*d)
        face_spacing = [spacing[j] for j in others]+[spacing[-1]]
        for value in [box.lower[i], box.upper[i]]:
            full = xp.concatenate([face_pts[:, :i], xp.full((face_pts.shape[0], 1), value), face_pts[:, i:]], axis=1)
            rr = _field(params, problem, 'boundary', full)['s_ut']
            face_norm = max(face_norm, sampled_cn_norm(cp2np(rr**2).reshape([nodes]*d), face_spacing, n))
    out['s_ut'] = face_norm

    init_pts, _ = node_grid(box.lower, box.upper, [nodes]*d)
    init_pts = xp.concatenate([init_pts, xp.zeros((init_pts.shape[0], 1))], axis=1)
    res = _field(params, problem, 'initial', init_pts)
    shape = [nodes]*d
    out['u0'] = sampled_cn_norm(cp2np(res['u0']**2).reshape(shape), spacing[:-1], n)
    out['u1'] = sampled_cn_norm(cp2np(res['u1']**2).reshape(shape), spacing[:-1], n)
    out['grad'] = sampled_cn_norm(cp2np(xp.sum(res['grad']**2, axis=1)).reshape(shape), spacing[:-1], n)

    jj = eval_jets(params, pts)
    if problem.has_exact:
        ee = problem.exact.jets(pts)
        out['uhat_c0'] = to_float(xp.max(xp.abs(jj.value-ee.value)))
        out['uhat_c1'] = max(out['uhat_c0'], to_float(xp.max(xp.abs(jj.first-ee.first))))
    elif u_norms is not None and 0 in u_norms and 1 in u_norms:
        own_c0 = to_float(xp.max(xp.abs(jj.value)))
        out['uhat_c0'] = own_c0+u_norms[0]
        out['uhat_c1'] = max(own_c0, to_float(xp.max(xp.abs(jj.first))))+u_norms[1]
    else:
        raise BoundUnavailable('Problem {:s} has no exact solution, supply norms of u up to C^1'.format(problem.name))
    logger.debug('Sampled norms {}'.format(out))
    return out


def lemma_ledger(arch, problem, geometry=None, u_norms=None, include_nonlinearity=None):
    '''
    Ledger with the architecture-only constants, every entry is a rigorous upper bound
    given the norms of u

    Parameters
    ----------
    arch: architecture
        Architecture with finite weight bound R
    problem: problem_spec
        Equation data
    geometry: geometry_constants
        Quadrature constants, all 1 by default
    u_norms: dict
        k -> ||u||_C^k, k=0..3, sampled from the exact solution when missing
    include_nonlinearity: bool
        Whether the nonlinearity constant enters, by default when the problem is nonlinear

    Returns
    -------
    constant_ledger
    '''
    geometry = geometry_constants() if geometry is None else geometry
    if math.isinf(arch.weight_bound):
        raise BoundUnavailable('Lemma constants need a finite weight bound R')
    if u_norms is None and problem.has_exact:
        u_norms = exact_cn_norms(problem, 3)
    act = compute_activation_norms(arch.activation, 4)
    box = problem.box
    c_pw = poincare_constant(box)
    consts = lemma_constants(arch, act, problem, geometry, c_pw, u_norms=u_norms)
    boundary_factor = consts.pop('boundary_factor')
    include = (not problem.is_linear) if include_nonlinearity is None else include_nonlinearity
    hc = hat_c(problem, u_norms[0], c0_norm_bound(arch, act)+u_norms[0]) if include else 0.
    inputs = {'L': arch.depth, 'W': arch.max_width, 'R': arch.weight_bound, 'd': arch.spatial_dim,
              'activation': act.to_dict(), 'u_norms': {str(k): v for k, v in u_norms.items()},
              'a_c2_norm': problem.damping_c2_norm}
    return constant_ledger(c_pw, trace_constant(box), hc, consts, boundary_factor, geometry, 'lemma', inputs)


def empirical_ledger(params, problem, geometry=None, nodes=None, u_norms=None, include_nonlinearity=None):
    '''
    Ledger whose constants use sampled norms of the squared residuals of the trained network

    Returns
    -------
    constant_ledger
    '''
    geometry = geometry_constants() if geometry is None else geometry
    box = problem.box
    c_pw = poincare_constant(box)
    norms = empirical_cn_norms(params, problem, n=2, nodes=nodes, u_norms=u_norms)
    consts = {'c1': geometry.c_omega*norms['u1'],
              'c2': geometry.c_omega_t*norms['pde'],
              'c3': geometry.c_omega*norms['grad'],
              'c4': math.sqrt(geometry.c_boundary*norms['s_ut']),
              'c5': 2.*geometry.c_omega/c_pw**2*norms['u0']}
    include = (not problem.is_linear) if include_nonlinearity is None else include_nonlinearity
    hc = 0.
    if include:
        if u_norms is None:
            u_norms = exact_cn_norms(problem, 0) if problem.has_exact else None
        if u_norms is None:
            raise BoundUnavailable('Supply the C^0 norm of u for the nonlinearity constant')
        hc = hat_c(problem, u_norms[0], norms['uhat_c0'])
    inputs = {'sampled_norms': norms, 'nodes': DEFAULT_NORM_NODES if nodes is None else nodes}
    return constant_ledger(c_pw, trace_constant(box), hc, consts, norms['uhat_c1'], geometry, 'empirical', inputs)


class bound_report(object):
    def __init__(self, c_of_m, gronwall, breakdown, include_nonlinearity, norm_source, counts):
        '''
        A-posteriori bound on int |u_theta-u|^2 + int |d_t(u_theta-u)|^2 over Omega x [0,T]

        Parameters
        ----------
        c_of_m: mpmath.mpf
            Bracket of the bound, max{1, 2 C_pw^2} times the sum of the breakdown terms
        gronwall: mpmath.mpf
            Exponential amplification factor
        breakdown: dict
            Non-negative terms of the bracket
        include_nonlinearity: bool
            Whether the nonlinearity constant entered the Gronwall factor
        norm_source: str
            Source of the constants
        counts: dict
            Collocation counts
        '''
        self.c_of_m = mpmath.mpf(c_of_m)
        self.gronwall = mpmath.mpf(gronwall)
        self.breakdown = {kk: mpmath.mpf(vv) for kk, vv in breakdown.items()}
        self.include_nonlinearity = include_nonlinearity
        self.norm_source = norm_source
        self.counts = counts

    @property
    def bound_value_mp(self):
        return self.c_of_m*self.gronwall

    @property
    def bound_value(self):
        return float(self.bound_value_mp)

    @property
    def log10_bound(self):
        return _mp_log10(self.bound_value_mp)

    def to_dict(self):
        return {'C_of_M': float(self.c_of_m), 'log10_C_of_M': _mp_log10(self.c_of_m),
                'gronwall_factor': float(self.gronwall), 'bound_value': self.bound_value,
                'log10_bound_value': self.log10_bound,
                'breakdown': {kk: float(vv) for kk, vv in self.breakdown.items()},
                'log10_breakdown': {kk: _mp_log10(vv) for kk, vv in self.breakdown.items()},
                'include_nonlinearity': self.include_nonlinearity, 'norm_source': self.norm_source,
                'counts': self.counts}


def posterior_bound(report, sets, ledger, box, include_nonlinearity=False):
    '''
    A-posteriori bound from the training errors and the quadrature constants

    Parameters
    ----------
    report: training_error_report
        Training errors on the sets
    sets: collocation_sets
        The sets the report was computed on
    ledger: constant_ledger
        Constants
    box: box_domain
        Space-time domain
    include_nonlinearity: bool
        Keep the nonlinearity constant in the Gronwall factor

    Returns
    -------
    bound_report
    '''
    counts = {'M_PDE': sets.m_pde, 'M_s': sets.m_s, 'M_t': sets.m_t}
    if any(report.counts.get(kk) != vv for kk, vv in counts.items()):
        raise ContractViolation('Training report counts {} differ from the sets {}'.format(report.counts, counts))
    mp = mpmath.mpf
    d = box.d
    T = mp(box.T)
    c_pw = mp(ledger.c_pw)
    m_t, m_s, m_pde = mp(sets.m_t), mp(sets.m_s), mp(sets.m_pde)
    E = {kk: mp(vv) for kk, vv in report.components.items()}
    breakdown = {
        'u1_quadrature': ledger['c1']*m_t**(mp(-2)/d),
        'u1_training': E['u1'],
        'pde_quadrature': ledger['c2']*m_pde**(mp(-2)/(d+1)),
        'pde_training': E['pde'],
        'grad_quadrature': ledger['c3']*m_t**(mp(-2)/d),
        'grad_training': E['grad'],
        'boundary_quadrature': 2*mpmath.sqrt(T*box.boundary_measure)*ledger.boundary_factor*ledger['c4']*m_s**(mp(-1)/d),
        'boundary_training': 2*mpmath.sqrt(T*box.boundary_measure)*ledger.boundary_factor*mpmath.sqrt(E['s_ut']),
        'u0_quadrature': ledger['c5']*m_t**(mp(-2)/d),
        'u0_training': 2/c_pw**2*E['u0'],
    }
    k = max(mp(1), 2*c_pw**2)
    c_of_m = k*mpmath.fsum(breakdown.values())
    hc = ledger.hat_c if include_nonlinearity else 0.
    out = bound_report(c_of_m, gronwall_factor(box.T, ledger.c_pw, hc), breakdown, include_nonlinearity,
                       ledger.norm_source, counts)
    logger.info('Bound ({:s}) log10 value {:.3f}'.format(ledger.norm_source, out.log10_bound))
    return out


def residual_bound(residual_norms, ledger, box, uhat_c1, include_nonlinearity=False):
    '''
    Bound from the L2 norms of the residuals

    Parameters
    ----------
    residual_norms: dict
        pde, s_ut, u0, u1, grad -> L2 norm of the residual
    ledger: constant_ledger
        Provides C_pw and the nonlinearity constant
    box: box_domain
        Space-time domain
    uhat_c1: float
        ||u_theta - u||_C1
    include_nonlinearity: bool
        Keep the nonlinearity constant in the Gronwall factor

    Returns
    -------
    float
    '''
    c_pw = ledger.c_pw
    k = max(1., 2.*c_pw**2)
    bracket = k*(residual_norms['u1']**2+residual_norms['pde']**2+residual_norms['grad']**2
                 + 2.*math.sqrt(box.T*box.boundary_measure)*float(uhat_c1)*residual_norms['s_ut']
                 + 2./c_pw**2*residual_norms['u0']**2)
    hc = ledger.hat_c if include_nonlinearity else 0.
    return float(bracket*gronwall_factor(box.T, c_pw, hc))


def certify(params, problem, sets, report, mode='both', geometry=None, weight_bound=None, u_norms=None,
            nodes=None, fine_report=None, include_nonlinearity=None):
    '''
    Ledgers and bounds of a trained network in the requested modes

    Parameters
    ----------
    params: mlp_params
        Trained network
    problem: problem_spec
        Equation data
    sets: collocation_sets
        Training sets
    report: training_error_report
        Training errors on the sets
    mode: str
        'lemma', 'empirical' or 'both'
    geometry: geometry_constants
        Quadrature constants
    weight_bound: float
        R of the lemma constants, the max observed weight rounded up when None
    u_norms: dict
        Norms of u, sampled from the exact solution when missing
    nodes: int
        Nodes per axis of the empirical sampling grids
    fine_report: training_error_report
        Fine-grid residual report, adds the residual-norm bound when given
    include_nonlinearity: bool
        Keep the nonlinearity constant, by default when the problem is nonlinear

    Returns
    -------
    dict mode -> {'ledger', 'bound', 'residual_bound'}
    '''
    modes = NORM_SOURCES if mode == 'both' else [mode]
    if any(mm not in NORM_SOURCES for mm in modes):
        raise ContractViolation('Unknown bound mode {:s}, use lemma, empirical or both'.format(mode))
    include = (not problem.is_linear) if include_nonlinearity is None else include_nonlinearity
    out = {}
    for mm in modes:
        if mm == 'lemma':
            R = round_up_bound(params.max_abs_weight()) if weight_bound is None else float(weight_bound)
            ledger = lemma_ledger(params.arch.with_weight_bound(R), problem, geometry=geometry, u_norms=u_norms,
                                  include_nonlinearity=include)
        else:
            ledger = empirical_ledger(params, problem, geometry=geometry, nodes=nodes, u_norms=u_norms,
                                      include_nonlinearity=include)
        entry = {'ledger': ledger, 'bound': posterior_bound(report, sets, ledger, problem.box, include_nonlinearity=include)}
        if fine_report is not None:
            entry['residual_bound'] = residual_bound(fine_report.norms, ledger, problem.box,
                                                     float(ledger.boundary_factor), include_nonlinearity=include)
        out[mm] = entry
    return out
