from .cupy_pal import *
from .exceptions import ConfigurationError, ContractViolation, NonFiniteResidual
from .network import mlp_params
from .derivatives import training_loss_and_gradient
from .utils import write_json, read_json
try:
    from scipy.optimize._linesearch import scalar_search_wolfe2, LineSearchWarning
except ImportError:
    from scipy.optimize.linesearch import scalar_search_wolfe2, LineSearchWarning
import logging
import math
import time
import warnings

logger = logging.getLogger(__name__)

TERMINATIONS = ['max_iterations', 'gradient_tolerance', 'loss_stagnation', 'line_search_failure']


class _budget_exhausted(Exception):
    pass


class train_config(object):
    def __init__(self, max_iterations=50000, memory=10, c1=1e-4, c2=0.9, gtol=1e-9, ftol=1e-12,
                 stagnation_window=10, max_line_search=60, seed=0, log_every=100, history_size=2000):
        '''
        Settings of the full-batch L-BFGS training

        Parameters
        ----------
        max_iterations: int
            Iteration cap
        memory: int
            Number of stored curvature pairs
        c1, c2: float
            Strong Wolfe constants, 0 < c1 < c2 < 1
        gtol: float
            Stop when the max-norm of the gradient is below gtol
        ftol: float
            Stop when the relative loss decrease over stagnation_window iterations is below ftol
        stagnation_window: int
            Iterations used by the stagnation test
        max_line_search: int
            Function evaluations allowed in one line search
        seed: int
            Seed of the run, stored for the record
        log_every: int
            Debug trace period
        history_size: int
            Maximum length of the stored loss history
        '''
        self.max_iterations = int(max_iterations)
        self.memory = int(memory)
        self.c1 = float(c1)
        self.c2 = float(c2)
        self.gtol = float(gtol)
        self.ftol = float(ftol)
        self.stagnation_window = int(stagnation_window)
        self.max_line_search = int(max_line_search)
        self.seed = int(seed)
        self.log_every = int(log_every)
        self.history_size = int(history_size)
        self.validate()

    def validate(self):
        if not 0 < self.c1 < self.c2 < 1:
            raise ConfigurationError('Wolfe constants need 0 < c1 < c2 < 1, got c1={:g} c2={:g}'.format(self.c1, self.c2))
        if self.memory < 1:
            raise ConfigurationError('L-BFGS memory must be at least 1, got {:d}'.format(self.memory))
        if self.max_iterations < 0 or self.max_line_search < 1 or self.stagnation_window < 1:
            raise ConfigurationError('Iteration counts must be non-negative')
        if self.gtol < 0 or self.ftol < 0:
            raise ConfigurationError('Tolerances must be non-negative')

    def to_dict(self):
        return dict(vars(self))

    @classmethod
    def from_dict(cls, dd):
        known = cls().to_dict().keys()
        unknown = set(dd.keys())-set(known)
        if len(unknown) > 0:
            raise ConfigurationError('Unknown train settings {}'.format(sorted(unknown)))
        return cls(**dd)


class train_record(object):
    def __init__(self, params, iterations, loss_history, termination, seconds, evaluations=0, collocation=None):
        '''
        Outcome of a training run

        Parameters
        ----------
        params: mlp_params
            Final parameters
        iterations: int
            Accepted L-BFGS iterations
        loss_history: list
            Squared training error, downsampled, the first and last entries are always kept
        termination: str
            One of TERMINATIONS
        seconds: float
            Wall-clock time
        evaluations: int
            Loss and gradient evaluations
        collocation: dict
            Cell counts of the training sets, as collocation_sets.cells
        '''
        self.params = params
        self.iterations = iterations
        self.loss_history = loss_history
        self.termination = termination
        self.seconds = seconds
        self.evaluations = evaluations
        self.collocation = collocation

    @property
    def final_loss(self):
        return self.loss_history[-1]

    def to_dict(self):
        return {'params': self.params.to_dict(), 'iterations': self.iterations, 'loss_history': self.loss_history,
                'termination': self.termination, 'seconds': self.seconds, 'evaluations': self.evaluations,
                'collocation': self.collocation}

    @classmethod
    def from_dict(cls, dd):
        return cls(mlp_params.from_dict(dd['params']), dd['iterations'], dd['loss_history'], dd['termination'],
                   dd['seconds'], dd.get('evaluations', 0), dd.get('collocation'))


def save_checkpoint(record, filename):
    '''Writes the record with its parameter snapshot to JSON'''
    write_json(filename, record.to_dict())


def load_checkpoint(filename):
    return train_record.from_dict(read_json(filename))


def lbfgs_direction(s_list, y_list, grad):
    '''
    Two-loop recursion of L-BFGS

    Parameters
    ----------
    s_list, y_list: list of xp.array
        Steps and gradient differences, oldest first
    grad: xp.array
        Current gradient

    Returns
    -------
    xp.array, the search direction -H grad
    '''
    pairs = [(s, y, to_float(xp.dot(s, y))) for s, y in zip(s_list, y_list)]
    pairs = [(s, y, sy) for s, y, sy in pairs if sy > 0]
    q = xp.array(grad, dtype=float, copy=True)
    alphas = []
    for s, y, sy in reversed(pairs):
        alpha = to_float(xp.dot(s, q))/sy
        q = q-alpha*y
        alphas.append(alpha)
    if len(pairs) > 0:
        s, y, sy = pairs[-1]
        q = q*(sy/to_float(xp.dot(y, y)))
    for (s, y, sy), alpha in zip(pairs, reversed(alphas)):
        beta = to_float(xp.dot(y, q))/sy
        q = q+s*(alpha-beta)
    return -q


def wolfe_line_search(ray, phi0, derphi0, c1=1e-4, c2=0.9, alpha0=1.0, max_evals=60, amax=1e10):
    '''
    Line search for a step satisfying the strong Wolfe conditions
    phi(alpha) <= phi(0) + c1 alpha phi'(0) and |phi'(alpha)| <= c2 |phi'(0)|,
    driven by scipy's scalar_search_wolfe2 on the step rescaled by alpha0.

    Parameters
    ----------
    ray: callable
        alpha -> (phi(alpha), phi'(alpha)), objective and slope along the search direction
    phi0, derphi0: float
        Objective and slope at alpha=0
    c1, c2: float
        Wolfe constants
    alpha0: float
        First trial step
    max_evals: int
        Bound on the evaluations of ray
    amax: float
        Largest step

    Returns
    -------
    (alpha, phi(alpha), phi'(alpha), evaluations), alpha is None on failure
    '''
    if not derphi0 < 0:
        raise ContractViolation('Line search needs a descent direction, slope {:g}'.format(derphi0))
    alpha0 = min(alpha0, amax)
    seen = {}

    def evaluate(beta):
        # scipy asks for phi and phi' separately, ray is called once per trial step
        if beta not in seen:
            if len(seen) >= max_evals:
                raise _budget_exhausted()
            phi_a, derphi_a = ray(beta*alpha0)
            if not math.isfinite(phi_a):
                phi_a, derphi_a = math.inf, math.nan
            seen[beta] = (phi_a, derphi_a)
        return seen[beta]

    try:
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', LineSearchWarning)
            beta, phi_s, _, derphi_s = scalar_search_wolfe2(lambda b: evaluate(b)[0], lambda b: alpha0*evaluate(b)[1],
                                                            phi0=phi0, derphi0=alpha0*derphi0, c1=c1, c2=c2,
                                                            amax=amax/alpha0, maxiter=max_evals)
    except _budget_exhausted:
        return None, None, None, len(seen)
    if beta is None or not math.isfinite(phi_s):
        return None, None, None, len(seen)
    return beta*alpha0, phi_s, derphi_s/alpha0, len(seen)


def _downsample(history, size):
    if len(history) <= size:
        return list(history)
    stride = int(math.ceil((len(history)-1)/(size-1)))
    keep = list(range(0, len(history), stride))
    if keep[-1] != len(history)-1:
        keep.append(len(history)-1)
    return [history[i] for i in keep]


def minimize_lbfgs(fun_and_grad, x0, cfg, callback=None):
    '''
    Full-batch L-BFGS with strong Wolfe line search. On a line search failure the history
    is cleared and a steepest descent step is attempted once before giving up.

    Parameters
    ----------
    fun_and_grad: callable
        x -> (f(x), grad f(x))
    x0: xp.array
        Starting point
    cfg: train_config
        Settings
    callback: callable
        Called as callback(iteration, x, f) after every accepted step

    Returns
    -------
    x, loss history (every accepted iterate), termination reason, iterations, evaluations
    '''
    x = xp.array(x0, dtype=float, copy=True)
    f, g = fun_and_grad(x)
    evaluations = 1
    if not math.isfinite(f):
        raise ContractViolation('Non-finite loss {} at the starting point'.format(f))
    history = [f]
    s_list, y_list = [], []
    termination = 'max_iterations'
    iteration = 0
    while iteration < cfg.max_iterations:
        if to_float(xp.max(xp.abs(g))) <= cfg.gtol:
            termination = 'gradient_tolerance'
            break
        found = None
        for restart in [False, True]:
            if restart:
                s_list, y_list = [], []
                logger.debug('Line search failed at iteration {:d}, restarting from steepest descent'.format(iteration))
            p = lbfgs_direction(s_list, y_list, g)
            derphi0 = to_float(xp.dot(g, p))
            if not derphi0 < 0:
                p = -g
                derphi0 = to_float(xp.dot(g, p))
                s_list, y_list = [], []
            if len(s_list) == 0:
                alpha0 = min(1., 1./math.sqrt(-derphi0))
            else:
                alpha0 = 1.
            cache = {}

            def ray(alpha):
                xa = x+alpha*p
                fa, ga = fun_and_grad(xa)
                cache[alpha] = (xa, fa, ga)
                return fa, (to_float(xp.dot(ga, p)) if math.isfinite(fa) else float('nan'))

            alpha, _, _, used = wolfe_line_search(ray, f, derphi0, c1=cfg.c1, c2=cfg.c2, alpha0=alpha0,
                                                  max_evals=cfg.max_line_search)
            evaluations += used
            if alpha is not None:
                found = cache[alpha]
                break
            if len(s_list) == 0 and restart is False:
                # Already steepest descent, a restart would repeat the same search
                break
        if found is None:
            termination = 'line_search_failure'
            break
        x_new, f_new, g_new = found
        s, y = x_new-x, g_new-g
        if to_float(xp.dot(s, y)) > 1e-10*to_float(xp.dot(y, y)):
            s_list.append(s)
            y_list.append(y)
            if len(s_list) > cfg.memory:
                s_list.pop(0)
                y_list.pop(0)
        x, f, g = x_new, f_new, g_new
        history.append(f)
        iteration += 1
        if callback is not None:
            callback(iteration, x, f)
        if iteration % cfg.log_every == 0:
            logger.debug('iteration {:d} loss {:.6e} |g|_inf {:.3e}'.format(iteration, f, to_float(xp.max(xp.abs(g)))))
        window = cfg.stagnation_window
        if len(history) > window:
            old = history[-1-window]
            if (old-f) <= cfg.ftol*max(abs(old), 1e-300):
                termination = 'loss_stagnation'
                break
    return x, history, termination, iteration, evaluations


def train(params0, sets, problem, cfg, callback=None):
    '''
    Minimizes the squared training error over the network parameters

    Parameters
    ----------
    params0: mlp_params
        Starting parameters
    sets: collocation_sets
        Training sets
    problem: problem_spec
        Equation data
    cfg: train_config
        Optimizer settings
    callback: callable
        Called as callback(iteration, flat_parameters, loss)

    Returns
    -------
    train_record
    '''
    arch = params0.arch
    flat0 = params0.flatten()
    if not bool(xp.all(xp.isfinite(flat0))):
        raise ContractViolation('Starting parameters are not finite')

    state = {'started': False}

    def fun_and_grad(vector):
        try:
            out = training_loss_and_gradient(mlp_params.from_flat(arch, vector), sets, problem)
        except NonFiniteResidual:
            if not state['started']:
                raise
            # Trial steps with overflowing residuals are rejected by the line search
            return float('inf'), xp.zeros_like(vector)
        state['started'] = True
        return out

    start = time.perf_counter()
    x, history, termination, iterations, evaluations = minimize_lbfgs(fun_and_grad, flat0, cfg, callback=callback)
    seconds = time.perf_counter()-start
    logger.info('Training stopped by {:s} after {:d} iterations, loss {:.6e}, {:.1f} s'.format(
        termination, iterations, history[-1], seconds))
    return train_record(mlp_params.from_flat(arch, x), iterations, _downsample([float(h) for h in history], cfg.history_size),
                        termination, seconds, evaluations, collocation=sets.cells)
