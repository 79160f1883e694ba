from .cupy_pal import *
from .exceptions import ConfigurationError, Unsupported, ContractViolation
from .quadrature import box_domain, node_grid
from .derivatives import jet_batch
import itertools
import logging
import math
import sympy
from sympy.parsing.sympy_parser import parse_expr, standard_transformations, convert_xor

logger = logging.getLogger(__name__)

SPATIAL_NAMES = ['x', 'y', 'z']
# Sampling budget of the dense grids used for sup norms of closed-form functions
MAX_NODES_PER_AXIS = 400
MAX_GRID_POINTS = 2000000


class damped_wave_solution(object):
    def __init__(self):
        '''
        u = exp(-pi t)(cos(pi t)+sin(pi t)) cos(pi x) cos(pi y), the exact solution of
        u_tt - Delta u + 2 pi u_t = 0 on [-0.5,0.5]^2 with u_0 = cos(pi x)cos(pi y), u_1 = 0.
        '''
        self.d = 2
        x, y, t = sympy.symbols('x y t', real=True)
        self.symbols = [x, y, t]
        self.expression = sympy.exp(-sympy.pi*t)*(sympy.cos(sympy.pi*t)+sympy.sin(sympy.pi*t))*sympy.cos(sympy.pi*x)*sympy.cos(sympy.pi*y)

    def _time_factors(self, t):
        e = xp.exp(-xp.pi*t)
        c, s = xp.cos(xp.pi*t), xp.sin(xp.pi*t)
        return e*(c+s), -2.*xp.pi*e*s, 2.*xp.pi**2*e*(s-c)

    def value(self, x, t):
        g, _, _ = self._time_factors(t)
        return g*xp.cos(xp.pi*x[:, 0])*xp.cos(xp.pi*x[:, 1])

    def dt(self, x, t):
        _, g1, _ = self._time_factors(t)
        return g1*xp.cos(xp.pi*x[:, 0])*xp.cos(xp.pi*x[:, 1])

    def jets(self, points):
        x, t = points[:, :2], points[:, 2]
        g, g1, g2 = self._time_factors(t)
        cx, cy = xp.cos(xp.pi*x[:, 0]), xp.cos(xp.pi*x[:, 1])
        sx, sy = xp.sin(xp.pi*x[:, 0]), xp.sin(xp.pi*x[:, 1])
        u = g*cx*cy
        first = xp.stack([-xp.pi*g*sx*cy, -xp.pi*g*cx*sy, g1*cx*cy], axis=1)
        second = xp.stack([-xp.pi**2*u, -xp.pi**2*u, g2*cx*cy], axis=1)
        return jet_batch(u, first, second)


class expression_solution(object):
    def __init__(self, expression, symbols):
        '''
        Exact solution given in closed form

        Parameters
        ----------
        expression: sympy expression
            u(x_1, ..., x_d, t)
        symbols: list
            Spatial symbols followed by the time symbol
        '''
        self.expression = expression
        self.symbols = list(symbols)
        self.d = len(symbols)-1
        self._u = _lambdify(symbols, expression)
        self._first = [_lambdify(symbols, sympy.diff(expression, s)) for s in symbols]
        self._second = [_lambdify(symbols, sympy.diff(expression, s, 2)) for s in symbols]

    def value(self, x, t):
        return self._u(xp.concatenate([x, t[:, None]], axis=1))

    def dt(self, x, t):
        return self._first[-1](xp.concatenate([x, t[:, None]], axis=1))

    def jets(self, points):
        return jet_batch(self._u(points), xp.stack([ff(points) for ff in self._first], axis=1),
                         xp.stack([ff(points) for ff in self._second], axis=1))


def _lambdify(symbols, expression):
    '''Compiles a sympy expression of the given symbols into f(points) -> xp.array of shape (P,)'''
    func = sympy.lambdify(symbols, expression, 'numpy')

    def wrapped(points):
        host = cp2np(points)
        out = func(*[host[:, i] for i in range(host.shape[1])])
        return np2cp(np.broadcast_to(np.asarray(out, dtype=float), (host.shape[0],)).copy())
    return wrapped


class problem_spec(object):
    def __init__(self, name, box, damping, u0, u1, grad_u0, damping_c2_norm, nonlinearity=None,
                 nonlinearity_du=None, growth=(0., 1.), exact=None, expressions=None):
        '''
        Semilinear damped wave equation u_tt - Delta u + a(x) u_t + f(x,u) = 0 on the box
        with homogeneous Dirichlet boundary data.

        Parameters
        ----------
        name: str
            Problem name
        box: box_domain
            Space-time domain
        damping: callable
            a(x), x of shape (P,d), returns (P,)
        u0, u1: callable
            Initial data, x of shape (P,d), return (P,)
        grad_u0: callable
            Gradient of u0, returns (P,d)
        damping_c2_norm: float
            ||a||_C2
        nonlinearity, nonlinearity_du: callable
            f(x,u) and df/du, None for the linear equation
        growth: tuple
            (c, r) of the growth condition |D^i (d/du)^j f| <= c |u|^(r+1-j)
        exact: object
            Exact solution with value, dt, jets and a sympy expression, or None
        expressions: dict
            Source strings of the data when the problem comes from expressions
        '''
        self.name = name
        self.box = box
        self.damping = damping
        self.u0 = u0
        self.u1 = u1
        self.grad_u0 = grad_u0
        self.damping_c2_norm = float(damping_c2_norm)
        self.nonlinearity = nonlinearity
        self.nonlinearity_du = nonlinearity_du
        self.growth = (float(growth[0]), float(growth[1]))
        self.exact = exact
        self.expressions = expressions
        if box.d >= 6:
            raise ConfigurationError('Spatial dimension must be below 6, got {:d}'.format(box.d))
        if (nonlinearity is None) != (nonlinearity_du is None):
            raise ConfigurationError('Nonlinearity and its u-derivative must be given together')

    @property
    def d(self):
        return self.box.d

    @property
    def is_linear(self):
        return self.nonlinearity is None

    @property
    def has_exact(self):
        return self.exact is not None

    def require_exact(self, what):
        if self.exact is None:
            raise Unsupported('{:s} needs an exact solution, problem {:s} has none'.format(what, self.name))
        return self.exact

    def to_dict(self):
        out = {'name': self.name, 'box': self.box.to_dict(), 'growth': {'c': self.growth[0], 'r': self.growth[1]},
               'damping_c2_norm': self.damping_c2_norm, 'linear': self.is_linear, 'has_exact': self.has_exact}
        if self.expressions is not None:
            out['expressions'] = self.expressions
        return out


def check_growth_exponent(d, r):
    '''Upper range of the growth exponent for the spatial dimension'''
    if 2 < d <= 4 and not r < (d+2.)/(d-2.):
        raise ConfigurationError('Growth exponent r={:f} must be below (d+2)/(d-2) for d={:d}'.format(r, d))
    if d == 5 and not r < 2:
        raise ConfigurationError('Growth exponent r={:f} must be below 2 for d=5'.format(r))
    if r < 1:
        logger.warning('Growth exponent r={:f} is below 1, the nonlinearity constant of the bounds is not defined'.format(r))


def _damped_initial_data():
    def u0(x):
        return xp.cos(xp.pi*x[:, 0])*xp.cos(xp.pi*x[:, 1])

    def u1(x):
        return xp.zeros(x.shape[0])

    def grad_u0(x):
        return xp.stack([-xp.pi*xp.sin(xp.pi*x[:, 0])*xp.cos(xp.pi*x[:, 1]),
                         -xp.pi*xp.cos(xp.pi*x[:, 0])*xp.sin(xp.pi*x[:, 1])], axis=1)
    return u0, u1, grad_u0


def _constant_damping(value):
    def damping(x):
        return xp.full(x.shape[0], float(value))
    return damping


def damped_wave_problem():
    '''
    Linear damped wave with a = 2 pi on [-0.5,0.5]^2, T = 0.5 and its exact solution

    Returns
    -------
    problem_spec
    '''
    u0, u1, grad_u0 = _damped_initial_data()
    return problem_spec('damped_wave', box_domain([-0.5, -0.5], [0.5, 0.5], 0.5), _constant_damping(2.*math.pi),
                        u0, u1, grad_u0, damping_c2_norm=2.*math.pi, exact=damped_wave_solution())


def semilinear_power_problem(p, box=None, damping=2.*math.pi, u0=None, u1=None, grad_u0=None):
    '''
    Damped wave with the nonlinearity f(x,u) = |u|^p u. The growth data are r = p and
    c = p+1, for which |df/du| = c |u|^r holds with equality. The initial data default to
    the ones of the damped-wave benchmark.

    Parameters
    ----------
    p: float
        Power, p >= 0
    box: box_domain
        Space-time domain, defaults to [-0.5,0.5]^2 x [0,0.5]
    damping: float
        Constant damping a
    u0, u1, grad_u0: callable
        Initial data, required when the box is not two-dimensional

    Returns
    -------
    problem_spec
    '''
    if p < 0:
        raise ConfigurationError('Power must be non-negative, got {:f}'.format(p))
    if box is None:
        box = box_domain([-0.5, -0.5], [0.5, 0.5], 0.5)
    if u0 is None:
        if box.d != 2:
            raise ConfigurationError('Initial data must be given for a {:d}-dimensional box'.format(box.d))
        u0, u1, grad_u0 = _damped_initial_data()
    check_growth_exponent(box.d, float(p))

    def nonlinearity(x, u):
        return xp.abs(u)**p*u

    def nonlinearity_du(x, u):
        return (p+1.)*xp.abs(u)**p

    return problem_spec('semilinear_power', box, _constant_damping(damping), u0, u1, grad_u0,
                        damping_c2_norm=abs(damping), nonlinearity=nonlinearity, nonlinearity_du=nonlinearity_du,
                        growth=(p+1., float(p)))


def klein_gordon_problem(box=None, damping=2.*math.pi, u0=None, u1=None, grad_u0=None):
    '''Damped Klein-Gordon equation, the p = 0 member of the power family (f = u)'''
    problem = semilinear_power_problem(0., box=box, damping=damping, u0=u0, u1=u1, grad_u0=grad_u0)
    problem.name = 'klein_gordon'
    return problem


def _expression_namespace(d):
    spatial = [sympy.Symbol('x{:d}'.format(i+1), real=True) for i in range(d)]
    names = {'x{:d}'.format(i+1): s for i, s in enumerate(spatial)}
    if d <= 3:
        names.update({SPATIAL_NAMES[i]: s for i, s in enumerate(spatial)})
    t = sympy.Symbol('t', real=True)
    u = sympy.Symbol('u', real=True)
    names.update({'t': t, 'u': u, 'sin': sympy.sin, 'cos': sympy.cos, 'exp': sympy.exp, 'abs': sympy.Abs,
                  'pi': sympy.pi, 'e': sympy.E})
    return names, spatial, t, u


def parse_expression(text, d, allowed):
    '''
    Parses an expression of the small grammar: numbers, + - * / ^, parentheses, sin, cos,
    exp, abs, the constants pi and e and the variables listed in `allowed`.

    Parameters
    ----------
    text: str
        Expression
    d: int
        Spatial dimension
    allowed: list of str
        Variable kinds that may appear, among 'x', 't' and 'u'

    Returns
    -------
    sympy expression
    '''
    names, spatial, t, u = _expression_namespace(d)
    global_dict = {'Integer': sympy.Integer, 'Float': sympy.Float, 'Rational': sympy.Rational,
                   'Symbol': sympy.Symbol, 'Function': sympy.Function, '__builtins__': {}}
    try:
        expr = parse_expr(str(text), local_dict=names, global_dict=global_dict,
                          transformations=standard_transformations+(convert_xor,))
    except Exception as err:
        raise ConfigurationError('Cannot parse expression "{}": {}'.format(text, err))
    expr = sympy.sympify(expr)
    if len(expr.atoms(sympy.core.function.AppliedUndef)) > 0:
        raise ConfigurationError('Expression "{}" uses unknown functions, only sin, cos, exp and abs are allowed'.format(text))
    symbols = set()
    if 'x' in allowed:
        symbols |= set(spatial)
    if 't' in allowed:
        symbols.add(t)
    if 'u' in allowed:
        symbols.add(u)
    unknown = expr.free_symbols-symbols
    if len(unknown) > 0:
        raise ConfigurationError('Expression "{}" uses variables {} that are not allowed here'.format(
            text, sorted(str(s) for s in unknown)))
    return expr


def expression_derivative_sups(expression, symbols, lower, upper, n, nodes=None):
    '''
    Samples max |D^alpha g| over the multi-indices of every order |alpha| = 0..n on a dense node grid

    Parameters
    ----------
    expression: sympy expression
        Function g
    symbols: list
        Variables of g, one per axis of the box
    lower, upper: list
        Box corners
    n: int
        Derivative order
    nodes: int
        Nodes per axis, defaults to 400 capped by the total grid budget

    Returns
    -------
    List of n+1 floats, the sup of the derivatives of each order
    '''
    k = len(symbols)
    if nodes is None:
        nodes = min(MAX_NODES_PER_AXIS, int(MAX_GRID_POINTS**(1./k)))
    points, _ = node_grid(lower, upper, [nodes]*k)
    sups = []
    for order in range(n+1):
        best = 0.
        for combo in itertools.combinations_with_replacement(range(k), order):
            deriv = expression
            for axis in combo:
                deriv = sympy.diff(deriv, symbols[axis])
            values = _lambdify(symbols, deriv)(points)
            best = max(best, to_float(xp.max(xp.abs(values))))
        sups.append(best)
    return sups


def expression_cn_norm(expression, symbols, lower, upper, n, nodes=None):
    '''C^n norm of a closed-form function, the max of expression_derivative_sups'''
    return max(expression_derivative_sups(expression, symbols, lower, upper, n, nodes=nodes))


def expression_problem(block):
    '''
    Problem whose data are expression strings

    Parameters
    ----------
    block: dict
        lower, upper, T, damping (of x), u0, u1 (of x), optional nonlinearity (of x and u)
        with growth {c, r}, optional exact (of x and t)

    Returns
    -------
    problem_spec
    '''
    try:
        box = box_domain(block['lower'], block['upper'], block['T'])
    except KeyError as err:
        raise ConfigurationError('Expression problem misses the key {}'.format(err))
    d = box.d
    names, spatial, t, u = _expression_namespace(d)
    a_expr = parse_expression(block.get('damping', '0'), d, ['x'])
    u0_expr = parse_expression(block.get('u0', '0'), d, ['x'])
    u1_expr = parse_expression(block.get('u1', '0'), d, ['x'])

    a_func = _lambdify(spatial, a_expr)
    u0_func = _lambdify(spatial, u0_expr)
    u1_func = _lambdify(spatial, u1_expr)
    grad_funcs = [_lambdify(spatial, sympy.diff(u0_expr, s)) for s in spatial]

    def grad_u0(x):
        return xp.stack([gg(x) for gg in grad_funcs], axis=1)

    nonlinearity = nonlinearity_du = None
    growth = (0., 1.)
    if block.get('nonlinearity') is not None:
        f_expr = parse_expression(block['nonlinearity'], d, ['x', 'u'])
        f_func = _lambdify(spatial+[u], f_expr)
        fu_func = _lambdify(spatial+[u], sympy.diff(f_expr, u))
        if 'growth' not in block:
            raise ConfigurationError('A nonlinearity needs its growth data {c, r}')
        growth = (float(block['growth']['c']), float(block['growth']['r']))
        check_growth_exponent(d, growth[1])

        def nonlinearity(x, uu):
            return f_func(xp.concatenate([x, uu[:, None]], axis=1))

        def nonlinearity_du(x, uu):
            return fu_func(xp.concatenate([x, uu[:, None]], axis=1))

    exact = None
    if block.get('exact') is not None:
        exact = expression_solution(parse_expression(block['exact'], d, ['x', 't']), spatial+[t])

    a_c2 = block.get('damping_c2_norm')
    if a_c2 is None:
        a_c2 = expression_cn_norm(a_expr, spatial, box.lower, box.upper, 2)
    sources = {kk: block.get(kk) for kk in ['damping', 'u0', 'u1', 'nonlinearity', 'exact']}
    return problem_spec(block.get('name', 'expression'), box, a_func, u0_func, u1_func, grad_u0, a_c2,
                        nonlinearity=nonlinearity, nonlinearity_du=nonlinearity_du, growth=growth,
                        exact=exact, expressions=sources)


def problem_from_config(block):
    '''
    Builds a problem from its configuration block, a name or a dictionary with a name key.
    Known names are damped_wave, semilinear_power (with key p), klein_gordon and expression.
    '''
    if isinstance(block, str):
        block = {'name': block}
    name = block.get('name', 'damped_wave')
    if name == 'damped_wave':
        return damped_wave_problem()
    elif name == 'semilinear_power':
        if 'p' not in block:
            raise ConfigurationError('semilinear_power needs the power p')
        return semilinear_power_problem(float(block['p']), damping=float(block.get('damping', 2.*math.pi)))
    elif name == 'klein_gordon':
        return klein_gordon_problem(damping=float(block.get('damping', 2.*math.pi)))
    elif name == 'expression' or block.get('type') == 'expression':
        return expression_problem(block)
    raise ConfigurationError('Problem {} not known, use damped_wave, semilinear_power, klein_gordon or expression'.format(name))


def exact_pde_check(problem, point):
    '''
    Residual u_tt - Delta u + a u_t + f(x,u) of the exact solution at one point

    Parameters
    ----------
    problem: problem_spec
        Problem with an exact solution
    point: array
        (x_1, ..., x_d, t)

    Returns
    -------
    float
    '''
    exact = problem.require_exact('exact_pde_check')
    pts = xp.atleast_2d(xp.asarray(point, dtype=float))
    if pts.shape[1] != problem.d+1:
        raise ContractViolation('Point needs {:d} coordinates'.format(problem.d+1))
    jj = exact.jets(pts)
    x = pts[:, :-1]
    res = jj.dtt-jj.laplacian+problem.damping(x)*jj.dt
    if problem.nonlinearity is not None:
        res = res+problem.nonlinearity(x, jj.value)
    return to_float(res[0])


class assumption_report(object):
    def __init__(self, min_damping, worst_f_ratio, worst_fu_ratio):
        '''
        Sampled check of a(x) >= 0 and of the growth bounds |f| <= c|u|^(r+1), |df/du| <= c|u|^r

        Parameters
        ----------
        min_damping: float
            Smallest sampled a(x)
        worst_f_ratio, worst_fu_ratio: float
            Largest sampled |f|/(c|u|^(r+1)) and |df/du|/(c|u|^r), 0 for linear problems
        '''
        self.min_damping = min_damping
        self.worst_f_ratio = worst_f_ratio
        self.worst_fu_ratio = worst_fu_ratio

    @property
    def damping_ok(self):
        return self.min_damping >= 0

    @property
    def growth_ok(self):
        return self.worst_f_ratio <= 1.+1e-12 and self.worst_fu_ratio <= 1.+1e-12

    @property
    def violations(self):
        out = []
        if not self.damping_ok:
            out.append('a(x) negative, min {:.6g}'.format(self.min_damping))
        if not self.growth_ok:
            out.append('growth bound exceeded, ratios {:.6g} {:.6g}'.format(self.worst_f_ratio, self.worst_fu_ratio))
        return out

    def to_dict(self):
        return {'min_damping': self.min_damping, 'worst_f_ratio': self.worst_f_ratio,
                'worst_fu_ratio': self.worst_fu_ratio, 'violations': self.violations}


def validate_assumptions(problem, nodes=11, u_values=None):
    '''
    Samples the damping sign and the growth conditions of the nonlinearity

    Parameters
    ----------
    problem: problem_spec
        Problem to check
    nodes: int
        Nodes per spatial axis
    u_values: array
        Sampled values of u, defaults to 41 values in [-2, 2]

    Returns
    -------
    assumption_report
    '''
    x, _ = node_grid(problem.box.lower, problem.box.upper, [nodes]*problem.d)
    min_damping = to_float(xp.min(problem.damping(x)))
    f_ratio = fu_ratio = 0.
    if problem.nonlinearity is not None:
        c, r = problem.growth
        uu = np2cp(np.linspace(-2., 2., 41) if u_values is None else np.asarray(u_values, dtype=float))
        uu = uu[xp.abs(uu) > 1e-12]
        xx = xp.repeat(x, uu.shape[0], axis=0)
        ug = xp.tile(uu, x.shape[0])
        f_ratio = to_float(xp.max(xp.abs(problem.nonlinearity(xx, ug))/(c*xp.abs(ug)**(r+1.))))
        fu_ratio = to_float(xp.max(xp.abs(problem.nonlinearity_du(xx, ug))/(c*xp.abs(ug)**r)))
    report = assumption_report(min_damping, f_ratio, fu_ratio)
    for vv in report.violations:
        logger.warning('Problem {:s}: {:s}'.format(problem.name, vv))
    return report
