from .cupy_pal import *
from .exceptions import ConfigurationError, ContractViolation, BoundUnavailable
import functools
import json
import logging
import math
import mpmath

logger = logging.getLogger(__name__)

ACTIVATIONS = ['tanh', 'logistic']
INIT_SCHEMES = ['uniform-fan-in', 'small-uniform']


def activation_derivatives(name, z, order):
    '''
    Evaluates the activation function and its derivatives

    Parameters
    ----------
    name: str
        'tanh' or 'logistic'
    z: xp.array
        Pre-activations
    order: int
        Highest derivative order, at most 4

    Returns
    -------
    List of xp.arrays [sigma(z), sigma'(z), ..., sigma^(order)(z)]
    '''
    if order > 4:
        raise ContractViolation('Activation derivatives are available up to order 4, requested {:d}'.format(order))
    if name == 'tanh':
        h = xp.tanh(z)
        s1 = 1. - h*h
        out = [h, s1, -2.*h*s1, (6.*h*h-2.)*s1, 8.*h*s1*(2.-3.*h*h)]
    elif name == 'logistic':
        s = 0.5*(1.+xp.tanh(0.5*z))
        s1 = s*(1.-s)
        out = [s, s1, s1*(1.-2.*s), s1*(1.-6.*s+6.*s*s), s1*(1.-2.*s)*(1.-12.*s+12.*s*s)]
    else:
        raise ConfigurationError('Activation {:s} not known, use one of {}'.format(name, ACTIVATIONS))
    return out[:order+1]


class activation_norm_table(object):
    def __init__(self, name, n, sup_norms):
        '''
        Sup-norms of an activation function and of its derivatives

        Parameters
        ----------
        name: str
            Activation name
        n: int
            Highest derivative order in the table
        sup_norms: list
            sup|sigma^(i)| for i=0..n
        '''
        self.name = name
        self.n = n
        self.sup_norms = [float(s) for s in sup_norms]
        if len(self.sup_norms) != n+1 or min(self.sup_norms) < 0:
            raise ContractViolation('Activation norm table needs n+1 non-negative entries')

    @property
    def cn_norm(self):
        return max(self.sup_norms)

    def norm(self, n):
        '''C^n norm, i.e. the max of the first n+1 entries'''
        if n > self.n:
            raise ContractViolation('Table built up to order {:d}, C^{:d} norm requested'.format(self.n, n))
        return max(self.sup_norms[:n+1])

    def to_dict(self):
        return {'activation': self.name, 'n': self.n, 'sup_norms': self.sup_norms, 'cn_norm': self.cn_norm}


@functools.lru_cache(maxsize=None)
def compute_activation_norms(name='tanh', n=4, half_width=20., step=1e-5):
    '''
    Tabulates sup|sigma^(i)|, i=0..n, by scanning a fine grid on [-half_width, half_width].
    All derivatives of tanh and logistic decay at infinity, the only sup reached at
    infinity is the one of sigma itself, which is added analytically.

    Parameters
    ----------
    name: str
        Activation name
    n: int
        Highest derivative order (<= 4)
    half_width, step: float
        Scan interval and grid spacing

    Returns
    -------
    activation_norm_table
    '''
    npts = int(round(2*half_width/step))+1
    z = np.linspace(-half_width, half_width, npts)
    derivs = activation_derivatives(name, np2cp(z), n)
    sups = [to_float(xp.max(xp.abs(dd))) for dd in derivs]
    # Limits at +-infinity
    sups[0] = max(sups[0], 1.)
    logger.debug('Activation {:s} sup norms {}'.format(name, sups))
    return activation_norm_table(name, n, sups)


class architecture(object):
    def __init__(self, widths, weight_bound=float('inf'), activation='tanh'):
        '''
        Architecture of a feed-forward network with L affine layers

        Parameters
        ----------
        widths: list of int
            Layer widths l_0, ..., l_L. l_0 = d+1 for a d-dimensional spatial problem and l_L = 1
        weight_bound: float
            Bound R on the magnitude of every weight and bias, inf allowed
        activation: str
            Activation of the hidden layers
        '''
        self.widths = [int(w) for w in widths]
        self.weight_bound = float(weight_bound)
        self.activation = activation
        self._validate()

    def _validate(self):
        if len(self.widths) < 3:
            raise ConfigurationError('At least one hidden layer is needed (L>=2), widths={}'.format(self.widths))
        if min(self.widths) < 1:
            raise ConfigurationError('All widths must be positive integers, widths={}'.format(self.widths))
        if self.widths[-1] != 1:
            raise ConfigurationError('The output layer must have width 1, got {:d}'.format(self.widths[-1]))
        if not self.weight_bound >= 0:
            raise ConfigurationError('Weight bound must be non-negative')
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError('Activation {:s} not known, use one of {}'.format(self.activation, ACTIVATIONS))

    @classmethod
    def from_hidden(cls, d, hidden_widths, weight_bound=float('inf'), activation='tanh'):
        '''Build the architecture from the spatial dimension and the hidden widths'''
        return cls([d+1]+list(hidden_widths)+[1], weight_bound=weight_bound, activation=activation)

    @property
    def depth(self):
        return len(self.widths)-1

    @property
    def max_width(self):
        return max(self.widths)

    @property
    def input_dim(self):
        return self.widths[0]

    @property
    def spatial_dim(self):
        return self.widths[0]-1

    def shapes(self):
        '''List of (rows, cols) of the weight matrices'''
        return [(self.widths[k+1], self.widths[k]) for k in range(self.depth)]

    @property
    def n_parameters(self):
        return sum(r*c+r for r, c in self.shapes())

    def with_weight_bound(self, weight_bound):
        return architecture(self.widths, weight_bound=weight_bound, activation=self.activation)

    def to_dict(self):
        return {'widths': self.widths, 'weight_bound': self.weight_bound, 'activation': self.activation}

    @classmethod
    def from_dict(cls, dd):
        return cls(dd['widths'], weight_bound=dd.get('weight_bound', float('inf')), activation=dd.get('activation', 'tanh'))


class mlp_params(object):
    def __init__(self, arch, weights, biases):
        '''
        Weights and biases of a network. Arrays are copied and never modified afterwards,
        updated parameters are new instances.

        Parameters
        ----------
        arch: architecture
            Architecture the parameters belong to
        weights: list of xp.array
            W_k with shape (l_k, l_{k-1})
        biases: list of xp.array
            b_k with shape (l_k,)
        '''
        self.arch = arch
        if len(weights) != arch.depth or len(biases) != arch.depth:
            raise ContractViolation('Expected {:d} layers, got {:d} weights and {:d} biases'.format(
                arch.depth, len(weights), len(biases)))
        self.weights = []
        self.biases = []
        for k, (rows, cols) in enumerate(arch.shapes()):
            ww = xp.array(weights[k], dtype=float).reshape(rows, cols)
            bb = xp.array(biases[k], dtype=float).reshape(rows)
            if not CUPY_LOADED:
                ww.flags.writeable = False
                bb.flags.writeable = False
            self.weights.append(ww)
            self.biases.append(bb)

    def flatten(self):
        '''Parameter vector, layer by layer, weights row-major then bias'''
        return xp.concatenate([xp.concatenate([ww.ravel(), bb]) for ww, bb in zip(self.weights, self.biases)])

    @classmethod
    def from_flat(cls, arch, vector):
        '''Inverse of flatten'''
        vector = xp.asarray(vector, dtype=float)
        if vector.shape != (arch.n_parameters,):
            raise ContractViolation('Parameter vector has shape {}, expected ({:d},)'.format(vector.shape, arch.n_parameters))
        weights, biases = [], []
        start = 0
        for rows, cols in arch.shapes():
            weights.append(vector[start:start+rows*cols].reshape(rows, cols))
            start += rows*cols
            biases.append(vector[start:start+rows])
            start += rows
        return cls(arch, weights, biases)

    def max_abs_weight(self):
        '''Largest magnitude among all weights and biases'''
        return max(to_float(xp.max(xp.abs(ww))) for ww in self.weights+self.biases)

    def respects_bound(self):
        return self.max_abs_weight() <= self.arch.weight_bound

    def to_dict(self):
        '''Flat JSON layout {architecture, layers: [{weights: row-major list, bias: list}]}'''
        return {'architecture': self.arch.to_dict(),
                'layers': [{'weights': [float(v) for v in cp2np(ww).ravel()], 'bias': [float(v) for v in cp2np(bb)]}
                           for ww, bb in zip(self.weights, self.biases)]}

    @classmethod
    def from_dict(cls, dd):
        arch = architecture.from_dict(dd['architecture'])
        return cls(arch, [np2cp(np.array(ll['weights'])) for ll in dd['layers']],
                   [np2cp(np.array(ll['bias'])) for ll in dd['layers']])


def save_params(params, filename):
    '''Writes the parameters to a JSON file'''
    with open(filename, 'w') as f:
        json.dump(params.to_dict(), f)


def load_params(filename):
    '''Reads parameters written by save_params'''
    with open(filename, 'r') as f:
        return mlp_params.from_dict(json.load(f))


def round_up_bound(value, digits=2):
    '''Rounds a positive number up to the given significant digits, used as the default finite R'''
    if value <= 0:
        return 0.
    exponent = math.floor(math.log10(value))-digits+1
    return math.ceil(value/10**exponent)*10**exponent


def init_params(arch, seed, scheme='uniform-fan-in', scale=None):
    '''
    Draws initial parameters

    Parameters
    ----------
    arch: architecture
        Network architecture
    seed: int
        Seed of the random generator, the draw is deterministic for a fixed seed
    scheme: str
        'uniform-fan-in': uniform on [-s,s] with s=min(R, 1/sqrt(fan-in)).
        'small-uniform': uniform on [-s,s] with s=min(R, scale), scale defaults to 0.1
    scale: float
        Half width for the small-uniform scheme

    Returns
    -------
    mlp_params
    '''
    if scheme not in INIT_SCHEMES:
        raise ConfigurationError('Initialization scheme {:s} not known, use one of {}'.format(scheme, INIT_SCHEMES))
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for rows, cols in arch.shapes():
        if scheme == 'uniform-fan-in':
            half = min(arch.weight_bound, 1./math.sqrt(cols))
        else:
            half = min(arch.weight_bound, 0.1 if scale is None else float(scale))
        weights.append(np2cp(rng.uniform(-half, half, size=(rows, cols))))
        biases.append(np2cp(rng.uniform(-half, half, size=rows)))
    return mlp_params(arch, weights, biases)


def _as_points(params, points):
    pts = xp.asarray(points, dtype=float)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != params.arch.input_dim:
        raise ContractViolation('Points have shape {}, the network expects {:d} coordinates'.format(
            tuple(pts.shape), params.arch.input_dim))
    return pts, single


def forward(params, points):
    '''
    Evaluates the network u_theta = A_L o sigma o A_{L-1} o ... o sigma o A_1

    Parameters
    ----------
    params: mlp_params
        Network parameters
    points: xp.array
        A single point of shape (l_0,) or a batch of shape (P, l_0), coordinates (x_1, ..., x_d, t)

    Returns
    -------
    float for a single point, xp.array of shape (P,) for a batch
    '''
    pts, single = _as_points(params, points)
    act = pts
    for k in range(params.arch.depth-1):
        act = activation_derivatives(params.arch.activation, act @ params.weights[k].T + params.biases[k], 0)[0]
    out = (act @ params.weights[-1].T + params.biases[-1])[:, 0]
    return to_float(out[0]) if single else out


def _lemma_precondition(arch, act, n):
    if math.isinf(arch.weight_bound):
        raise BoundUnavailable('Network norm bounds need a finite weight bound R')
    if arch.depth < 2:
        raise BoundUnavailable('Network norm bounds need L>=2')
    if act.norm(n) < 1:
        raise BoundUnavailable('Network norm bounds need ||sigma||_C^{:d} >= 1, got {:f}'.format(n, act.norm(n)))


def cn_norm_bound_mp(arch, n, act, d=None):
    '''
    Bound on the C^n norm of the network, 16^L (d+1)^(2n) (e^2 n^4 W^3 R^n ||sigma||_C^n)^(nL),
    evaluated in multiprecision.

    Returns
    -------
    mpmath.mpf
    '''
    if n < 1:
        raise BoundUnavailable('C^n network bound needs n>=1, got {:d}'.format(n))
    _lemma_precondition(arch, act, n)
    d = arch.spatial_dim if d is None else d
    L, W, R = arch.depth, arch.max_width, mpmath.mpf(arch.weight_bound)
    base = mpmath.e**2*mpmath.mpf(n)**4*mpmath.mpf(W)**3*R**n*mpmath.mpf(act.norm(n))
    return mpmath.mpf(16)**L*mpmath.mpf(d+1)**(2*n)*base**(n*L)


def cn_norm_bound(arch, d, n, act):
    '''
    Bound on the C^n norm of the network, see cn_norm_bound_mp.

    Parameters
    ----------
    arch: architecture
        Architecture with finite weight bound
    d: int
        Spatial dimension
    n: int
        Derivative order, n>=1
    act: activation_norm_table
        Sup-norm table of the activation with at least n+1 entries

    Returns
    -------
    float (inf when beyond float range)
    '''
    return float(cn_norm_bound_mp(arch, n, act, d=d))


def c0_norm_bound(arch, act):
    '''
    Bound on the C^0 norm of the network, R (W ||sigma||_C^0 + 1)
    '''
    _lemma_precondition(arch, act, 0)
    return arch.weight_bound*(arch.max_width*act.norm(0)+1.)
