from .cupy_pal import *
from .exceptions import ConfigurationError, HypothesisViolation
from .quadrature import box_domain
from .bounds import trace_constant
from .utils import write_csv
from fractions import Fraction
import logging
import math
import mpmath

logger = logging.getLogger(__name__)

RATE_HEADER = ['N', 'M_PDE', 'M_s', 'M_t', 'generalization_rate', 'approximation_term', 'boundary_term',
               'initial_term', 'interior_term', 'training_rate']
RATE_FOOTER = ['training_rate sums every term with a plus sign; the printed statement subtracts the M_t term']

# Printed exponents of the training-set thresholds, kept for audit next to the values actually used
PRINTED_EXPONENTS = {'M_PDE': '-(-(d+1)(eta-1))/(k-eta)', 'M_t': '-(-d(eta-1))/(k-eta)',
                     'M_s': '-(-2d(eta-1))/(k-eta)'}


def _exact(value):
    '''Exact rational of a decimal input, so that ceilings of exact integers stay exact'''
    return Fraction(str(value)) if isinstance(value, float) else Fraction(value)


class theory_inputs(object):
    def __init__(self, d, k, n, N, delta, T, box_lower, box_upper, gamma=None, sobolev_seminorm=None,
                 w_norms=None, gn_constant=None):
        '''
        Inputs of the approximation formulas for two hidden layer tanh networks

        Parameters
        ----------
        d: int
            Spatial dimension
        k: int
            Sobolev regularity of the solution, k > 3
        n: int
            Regularity of the activation in the width formula, at least 2
        N: int
            Grid parameter of the approximation, N > 5 where the formulas are evaluated
        delta: float
            Positive slack in lambda_l
        T: float
            Time horizon
        box_lower, box_upper: list of int
            Integer box enclosing the spatial domain
        gamma: float
            Gagliardo-Nirenberg interpolation exponent in [0, 1), None for the linear equation
        sobolev_seminorm: float
            H^(k+1) seminorm entering C_l
        w_norms: float or dict
            W^(l,inf) norms for l = 0, 1, 2 entering beta_l, a single float is used for every l
        gn_constant: float
            Gagliardo-Nirenberg constant of the semilinear term
        '''
        self.d = int(d)
        self.k = int(k)
        self.n = int(n)
        self.N = int(N)
        self.delta = float(delta)
        self.T = T
        self.box_lower = [int(a) for a in box_lower]
        self.box_upper = [int(b) for b in box_upper]
        self.gamma = None if gamma is None else float(gamma)
        self.sobolev_seminorm = sobolev_seminorm
        if w_norms is None or isinstance(w_norms, dict):
            self.w_norms = None if w_norms is None else {int(kk): float(vv) for kk, vv in w_norms.items()}
        else:
            self.w_norms = {l: float(w_norms) for l in range(3)}
        self.gn_constant = gn_constant
        self.validate()

    def validate(self):
        if self.d < 1:
            raise ConfigurationError('Spatial dimension must be positive, got {:d}'.format(self.d))
        if self.k <= 3:
            raise HypothesisViolation('The approximation formulas need k > 3, got k={:d}'.format(self.k))
        if self.n < 2:
            raise HypothesisViolation('The activation regularity must be at least 2, got n={:d}'.format(self.n))
        if self.delta <= 0:
            raise HypothesisViolation('delta must be positive, got {:f}'.format(self.delta))
        if self.T <= 0:
            raise ConfigurationError('The time horizon must be positive')
        if len(self.box_lower) != self.d or len(self.box_upper) != self.d:
            raise ConfigurationError('The enclosing box needs {:d} lower and upper integers'.format(self.d))
        if any(a >= b for a, b in zip(self.box_lower, self.box_upper)):
            raise ConfigurationError('Enclosing box bounds must satisfy a_i < b_i')
        if self.gamma is not None and not (0. <= self.gamma < 1. and 4.*self.gamma < self.d+1):
            raise HypothesisViolation('gamma must lie in [0,1) with 4 gamma < d+1, got {:f}'.format(self.gamma))

    @property
    def r(self):
        '''Growth exponent matched to gamma, 4 gamma/(d+1-4 gamma)'''
        if self.gamma is None:
            return None
        return 4.*self.gamma/(self.d+1.-4.*self.gamma)

    @property
    def box(self):
        return box_domain([float(a) for a in self.box_lower], [float(b) for b in self.box_upper], float(self.T))

    def with_N(self, N):
        '''Copy with a different grid parameter'''
        return theory_inputs(self.d, self.k, self.n, N, self.delta, self.T, self.box_lower, self.box_upper,
                             gamma=self.gamma, sobolev_seminorm=self.sobolev_seminorm, w_norms=self.w_norms,
                             gn_constant=self.gn_constant)

    def to_dict(self):
        return {'d': self.d, 'k': self.k, 'n': self.n, 'N': self.N, 'delta': self.delta, 'T': self.T,
                'box_lower': self.box_lower, 'box_upper': self.box_upper, 'gamma': self.gamma, 'r': self.r,
                'sobolev_seminorm': self.sobolev_seminorm, 'w_norms': self.w_norms, 'gn_constant': self.gn_constant}

    @classmethod
    def from_dict(cls, dd):
        dd = dict(dd)
        dd.pop('r', None)
        try:
            return cls(**dd)
        except TypeError as err:
            raise ConfigurationError('Invalid theory inputs: {}'.format(err))


def _check_N(N):
    if N <= 5:
        raise HypothesisViolation('The approximation formulas hold for N > 5, got N={:d}'.format(N))


def q1_widths(inputs):
    '''
    Widths of the two hidden layers of the approximating tanh network

    Parameters
    ----------
    inputs: theory_inputs

    Returns
    -------
    (width1, width2) as integers
    '''
    _check_N(inputs.N)
    d, k, n, N = inputs.d, inputs.k, inputs.n, inputs.N
    T = _exact(inputs.T)
    edges = [b-a for a, b in zip(inputs.box_lower, inputs.box_upper)]
    width1 = 3*math.ceil(Fraction(k+n-1, 2))*int(comb(d+k+1, k, exact=True))+math.ceil((N-1)*(T+sum(edges)))
    width2 = 3*(d+3)*N**(d+1)*math.ceil(Fraction(d+n+1, 2))*math.ceil(T*math.prod(edges))
    return width1, width2


def weight_growth_exponent(inputs):
    '''Exponent kappa of the weight growth R ~ N^kappa of the approximating network'''
    d, k = inputs.d, inputs.k
    return max((k+1)**2, (d+1)*(d+k+4))/inputs.n


def _c_l(inputs, l):
    d, k = inputs.d, inputs.k
    base = 3*mpmath.sqrt(d+1)/mpmath.pi
    terms = []
    for i in range(l+1):
        m = k+1-i
        terms.append(mpmath.sqrt(mpmath.binomial(d+i, i))*mpmath.sqrt(mpmath.factorial(m))
                     / mpmath.factorial(math.ceil(Fraction(m, d+1)))**(mpmath.mpf(d+1)/2)*base**m)
    return max(terms)*mpmath.mpf(inputs.sobolev_seminorm)


def lambda_beta(inputs, l):
    '''
    Logarithmic factor lambda_l(N), with beta_l and C_l it depends on

    Parameters
    ----------
    inputs: theory_inputs
        Needs sobolev_seminorm and w_norms
    l: int
        Derivative order, 0, 1 or 2

    Returns
    -------
    (lambda_l, beta_l, C_l) as mpmath numbers
    '''
    if l not in (0, 1, 2):
        raise ConfigurationError('The derivative order must be 0, 1 or 2, got {}'.format(l))
    _check_N(inputs.N)
    if inputs.sobolev_seminorm is None or inputs.w_norms is None or l not in inputs.w_norms:
        raise HypothesisViolation('lambda_{:d} needs the H^(k+1) seminorm and the W^({:d},inf) norm'.format(l, l))
    if inputs.sobolev_seminorm <= 0:
        raise HypothesisViolation('The H^(k+1) seminorm must be positive')
    d, k, N = inputs.d, inputs.k, inputs.N
    delta = mpmath.mpf(inputs.delta)
    c_l = _c_l(inputs, l)
    volume = _exact(inputs.T)*math.prod(b-a for a, b in zip(inputs.box_lower, inputs.box_upper))
    volume = mpmath.mpf(volume.numerator)/volume.denominator if isinstance(volume, Fraction) else mpmath.mpf(volume)
    beta = (mpmath.mpf(2)**(l*(d+1))*5*max(volume, d+1)*max(mpmath.mpf(inputs.w_norms[l]), 1)
            / (mpmath.mpf(3)**(d+1)*delta*min(mpmath.mpf(1), c_l)))
    lam = mpmath.mpf(2)**l*mpmath.mpf(3)**(d+1)*(1+delta)*mpmath.log(beta*mpmath.mpf(N)**(d+k+4))**l
    return lam, beta, c_l


def q1_residual_bounds(inputs, a_linf=0., include_nonlinearity=None):
    '''
    Upper bounds of the L2 norms of the six residuals of the approximating network

    Parameters
    ----------
    inputs: theory_inputs
    a_linf: float
        Sup norm of the damping
    include_nonlinearity: bool
        Adds the Gagliardo-Nirenberg term of the PDE residual, defaults to whether gamma is set

    Returns
    -------
    Dictionary pde, s_u, s_ut, u0, u1, grad -> float, plus 'generalization', their sum
    '''
    if include_nonlinearity is None:
        include_nonlinearity = inputs.gamma is not None
    if include_nonlinearity and (inputs.gn_constant is None or inputs.gamma is None):
        raise HypothesisViolation('The semilinear term needs gamma and the Gagliardo-Nirenberg constant')
    d, k = inputs.d, inputs.k
    N = mpmath.mpf(inputs.N)
    lam = {}
    c = {}
    for l in range(3):
        lam[l], _, c[l] = lambda_beta(inputs, l)
    c_trace = mpmath.mpf(trace_constant(inputs.box))
    sqd = mpmath.sqrt(d)
    second = c[2]*lam[2]*N**(-k+1)
    first = c[1]*lam[1]*N**(-k)

    pde = (c[2]+sqd)*lam[2]*N**(-k+1)+mpmath.mpf(a_linf)*first
    if include_nonlinearity:
        gamma = mpmath.mpf(inputs.gamma)
        pde += mpmath.mpf(inputs.gn_constant)*second**gamma*(c[0]*lam[0]*N**(-k-1))**(1-gamma)
    out = {'pde': pde, 's_u': c_trace*first, 's_ut': c_trace*second, 'u0': c_trace*first,
           'u1': c_trace*second, 'grad': sqd*c_trace*second}
    out['generalization'] = mpmath.fsum(out.values())
    return {kk: float(vv) for kk, vv in out.items()}


def rate_curves(inputs, N_values, m_counts=None):
    '''
    Rates of the generalization error and of the squared training error over a range of N

    Parameters
    ----------
    inputs: theory_inputs
        Fixes d and k
    N_values: list of int
        Values of N, every one above 5
    m_counts: list of (M_PDE, M_s, M_t)
        Training set sizes per row, uniform grids with N cells per axis when None

    Returns
    -------
    List of dictionaries keyed as RATE_HEADER
    '''
    d, k = inputs.d, inputs.k
    if m_counts is not None and len(m_counts) != len(N_values):
        raise ConfigurationError('Give one (M_PDE, M_s, M_t) triple per value of N')
    rows = []
    for i, N in enumerate(N_values):
        N = int(N)
        _check_N(N)
        if m_counts is None:
            m_pde, m_s, m_t = N**(d+1), 2*d*N**d, N**d
        else:
            m_pde, m_s, m_t = [int(m) for m in m_counts[i]]
        logN = math.log(N)
        generalization = logN**2*N**(-k+1.)
        approximation = logN**4*N**(2.*(-k+1))
        boundary = m_s**(-2./d)
        initial = m_t**(-2./d)
        interior = m_pde**(-2./(d+1))
        rows.append({'N': N, 'M_PDE': m_pde, 'M_s': m_s, 'M_t': m_t, 'generalization_rate': generalization,
                     'approximation_term': approximation, 'boundary_term': boundary, 'initial_term': initial,
                     'interior_term': interior,
                     'training_rate': math.fsum([approximation, boundary, initial, interior])})
    return rows


def write_rate_table(rows, filename):
    write_csv(filename, RATE_HEADER, [[row[kk] for kk in RATE_HEADER] for row in rows], footer=RATE_FOOTER)
    logger.info('Rate table with {:d} rows written to {:s}'.format(len(rows), filename))


class sizing_plan(object):
    def __init__(self, eps, d, k, eta, sizes, width_constant, l_min):
        '''
        Sizes that guarantee a total error of order eps

        Parameters
        ----------
        eps: float
            Target accuracy
        d, k: int
            Spatial dimension and regularity
        eta: int
            Regularity threshold 2(18d+55)
        sizes: dict
            N, M_PDE, M_t, M_s, R_min, W_min as mpmath numbers before ceiling
        width_constant: float
            Factor C of the width threshold, reported symbolically as W_min/C
        l_min: int
            Minimal depth
        '''
        self.eps = eps
        self.d = d
        self.k = k
        self.eta = eta
        self.sizes = sizes
        self.width_constant = width_constant
        self.l_min = l_min

    def _ceil(self, key):
        return max(mpmath.ceil(self.sizes[key]), 1)

    @property
    def N(self):
        return self._ceil('N')

    @property
    def m_pde(self):
        return self._ceil('M_PDE')

    @property
    def m_t(self):
        return self._ceil('M_t')

    @property
    def m_s(self):
        return self._ceil('M_s')

    @property
    def r_min(self):
        return self.sizes['R_min']

    @property
    def w_min(self):
        return self._ceil('W_min')

    @property
    def below_hypothesis(self):
        '''True when the grid parameter does not reach the N > 5 floor'''
        return self.sizes['N'] <= 5

    def to_dict(self):
        out = {'eps': self.eps, 'd': self.d, 'k': self.k, 'eta': self.eta, 'L_min': self.l_min,
               'width_constant': self.width_constant, 'below_hypothesis': bool(self.below_hypothesis),
               'printed_exponents': PRINTED_EXPONENTS, 'values': {}, 'log10_values': {}}
        for key in self.sizes.keys():
            value = self.sizes[key] if key == 'R_min' else self._ceil(key)
            out['values'][key] = float(value)
            out['log10_values'][key] = float(mpmath.log10(value)) if value > 0 else float('-inf')
        out['W_min_over_C'] = float(self.sizes['W_min']/mpmath.mpf(self.width_constant))
        return out


def apriori_sizes(eps, d, k, width_constant=1., r=None):
    '''
    Network and training set sizes for a total error of order eps

    Parameters
    ----------
    eps: float
        Target accuracy in (0, 1)
    d: int
        Spatial dimension
    k: int
        Regularity, must exceed 2(18d+55)
    width_constant: float
        Unspecified constant of the width threshold, 1 by default
    r: float
        Growth exponent, when given the depth also satisfies 24L-1 >= r

    Returns
    -------
    sizing_plan
    '''
    if not 0. < eps < 1.:
        raise HypothesisViolation('The target accuracy must lie in (0,1), got {}'.format(eps))
    eta = 2*(18*d+55)
    if k <= eta:
        raise HypothesisViolation('The a-priori sizes need k > 2(18d+55) = {:d}, got k={:d}'.format(eta, k))
    inv = 1/mpmath.mpf(eps)
    expo = mpmath.mpf(1)/(k-eta)
    # Threshold exponents taken positive so that every set grows as eps shrinks
    sizes = {'N': inv**expo,
             'M_PDE': inv**((d+1)*(eta-1)*expo),
             'M_t': inv**(d*(eta-1)*expo),
             'M_s': inv**(2*d*(eta-1)*expo),
             'R_min': inv**expo*mpmath.log(inv),
             'W_min': mpmath.mpf(width_constant)*inv**((d+1)*expo)}
    l_min = 3 if r is None else max(3, math.ceil((r+1.)/24.))
    plan = sizing_plan(eps, d, k, eta, sizes, width_constant, l_min)
    if plan.below_hypothesis:
        logger.warning('Grid parameter N={:.3g} does not exceed 5, the approximation hypothesis fails'.format(
            float(sizes['N'])))
    return plan
