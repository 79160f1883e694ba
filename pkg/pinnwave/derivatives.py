from .cupy_pal import *
from .network import mlp_params, architecture, activation_derivatives, forward, _as_points
from .exceptions import ContractViolation
from .quadrature import STRATA
import logging

logger = logging.getLogger(__name__)

# Points per batch when propagating jets, sums over batches run in a fixed order
CHUNK = 16384


class jet(object):
    def __init__(self, value, dt, dtt, grad_x, laplacian):
        '''
        Value and derivatives of a function at one space-time point

        Parameters
        ----------
        value: float
            u
        dt, dtt: float
            First and second time derivative
        grad_x: list
            Spatial gradient
        laplacian: float
            Spatial Laplacian
        '''
        self.value = value
        self.dt = dt
        self.dtt = dtt
        self.grad_x = grad_x
        self.laplacian = laplacian

    def to_dict(self):
        return {'value': self.value, 'dt': self.dt, 'dtt': self.dtt, 'grad_x': self.grad_x, 'laplacian': self.laplacian}


class jet_batch(object):
    def __init__(self, value, first, second):
        '''
        Jets of many points. Coordinates are ordered (x_1, ..., x_d, t).

        Parameters
        ----------
        value: xp.array
            Shape (P,)
        first: xp.array
            Shape (P, d+1), first derivative along every coordinate
        second: xp.array
            Shape (P, d+1), pure second derivative along every coordinate
        '''
        self.value = value
        self.first = first
        self.second = second

    @property
    def dt(self):
        return self.first[:, -1]

    @property
    def dtt(self):
        return self.second[:, -1]

    @property
    def grad_x(self):
        return self.first[:, :-1]

    @property
    def laplacian(self):
        return xp.sum(self.second[:, :-1], axis=1)

    def __len__(self):
        return int(self.value.shape[0])

    def point(self, i):
        '''Jet of the i-th point'''
        return jet(to_float(self.value[i]), to_float(self.dt[i]), to_float(self.dtt[i]),
                   [float(v) for v in cp2np(self.grad_x[i])], to_float(self.laplacian[i]))


def _network_jets(params, pts, keep_cache=False):
    '''
    Forward propagation of second order jets along every coordinate direction.
    For each hidden layer z = a W^T + b, Dz = D W^T, Sz = S W^T and
    A = sigma(z), DA = sigma'(z) Dz, SA = sigma''(z) Dz^2 + sigma'(z) Sz.
    '''
    P, m = pts.shape
    act = params.arch.activation
    a = pts
    D = xp.broadcast_to(xp.eye(m)[None, :, :], (P, m, m))
    S = xp.zeros((P, m, m))
    cache = []
    for k in range(params.arch.depth):
        W, b = params.weights[k], params.biases[k]
        z = a @ W.T+b
        Dz = D @ W.T
        Sz = S @ W.T
        if k == params.arch.depth-1:
            if keep_cache:
                cache.append((a, D, S))
            return jet_batch(z[:, 0], Dz[:, :, 0], Sz[:, :, 0]), cache
        sig = activation_derivatives(act, z, 3 if keep_cache else 2)
        s1 = sig[1][:, None, :]
        s2 = sig[2][:, None, :]
        if keep_cache:
            cache.append((a, D, S, Dz, Sz, s1, s2, sig[3][:, None, :]))
        a, D, S = sig[0], s1*Dz, s2*Dz*Dz+s1*Sz


def _network_backward(params, cache, g_value, g_first, g_second):
    '''
    Reverse accumulation through the jet computation.

    Returns
    -------
    List of (dW_k, db_k)
    '''
    gA = g_value[:, None]
    gDA = g_first[:, :, None]
    gSA = g_second[:, :, None]
    grads = []
    for k in reversed(range(params.arch.depth)):
        W = params.weights[k]
        if k == params.arch.depth-1:
            a, D, S = cache[k]
            gz, gDz, gSz = gA, gDA, gSA
        else:
            a, D, S, Dz, Sz, s1, s2, s3 = cache[k]
            gz = gA*s1[:, 0, :]+xp.sum(gDA*Dz*s2+gSA*(s3*Dz*Dz+s2*Sz), axis=1)
            gDz = gDA*s1+2.*gSA*s2*Dz
            gSz = gSA*s1
        gW = gz.T @ a+xp.einsum('pjl,pji->li', gDz, D)+xp.einsum('pjl,pji->li', gSz, S)
        gb = xp.sum(gz, axis=0)
        grads.append((gW, gb))
        if k > 0:
            gA, gDA, gSA = gz @ W, gDz @ W, gSz @ W
    return grads[::-1]


def eval_jets(model, points):
    '''
    Value, first and pure second derivatives at many points

    Parameters
    ----------
    model: mlp_params or object with a jets(points) method
        Network, or any function providing its own jets (e.g. an exact solution)
    points: xp.array
        Shape (P, d+1)

    Returns
    -------
    jet_batch
    '''
    if not isinstance(model, mlp_params):
        return model.jets(xp.atleast_2d(xp.asarray(points, dtype=float)))
    pts, _ = _as_points(model, points)
    parts = [_network_jets(model, pts[i:i+CHUNK])[0] for i in range(0, max(pts.shape[0], 1), CHUNK)]
    if len(parts) == 1:
        return parts[0]
    return jet_batch(xp.concatenate([pp.value for pp in parts]), xp.concatenate([pp.first for pp in parts]),
                     xp.concatenate([pp.second for pp in parts]))


def eval_jet(model, point):
    '''
    u, u_t, u_tt, grad_x u and Laplacian of u at one point, derivatives are exact
    up to rounding.

    Parameters
    ----------
    model: mlp_params or object with a jets(points) method
        Function to differentiate
    point: array
        Coordinates (x_1, ..., x_d, t)

    Returns
    -------
    jet
    '''
    point = xp.asarray(point, dtype=float)
    if point.ndim != 1:
        raise ContractViolation('eval_jet takes one point, use eval_jets for batches')
    return eval_jets(model, point[None, :]).point(0)


def _stratum_adjoints(problem, stratum, points, weights, jets):
    '''Squared-residual loss of one stratum and its seeds on the jet outputs'''
    from .residuals import stratum_residuals
    res = stratum_residuals(problem, stratum, points, jets)
    P, m = jets.first.shape
    d = m-1
    g_value = xp.zeros(P)
    g_first = xp.zeros((P, m))
    g_second = xp.zeros((P, m))
    loss = 0.
    if stratum == 'interior':
        r = res['pde']
        gr = 2.*weights*r
        g_second[:, -1] = gr
        g_second[:, :d] = -gr[:, None]
        g_first[:, -1] = gr*problem.damping(points[:, :d])
        if problem.nonlinearity is not None:
            g_value = gr*problem.nonlinearity_du(points[:, :d], jets.value)
        loss = xp.sum(weights*r*r)
    elif stratum == 'boundary':
        g_value = 2.*weights*res['s_u']
        g_first[:, -1] = 2.*weights*res['s_ut']
        loss = xp.sum(weights*(res['s_u']**2+res['s_ut']**2))
    else:
        g_value = 2.*weights*res['u0']
        g_first[:, -1] = 2.*weights*res['u1']
        g_first[:, :d] = 2.*weights[:, None]*res['grad']
        loss = xp.sum(weights*(res['u0']**2+res['u1']**2+xp.sum(res['grad']**2, axis=1)))
    return to_float(loss), g_value, g_first, g_second


def _loss_and_layer_grads(params, sets, problem):
    loss = 0.
    total = [(xp.zeros_like(W), xp.zeros_like(b)) for W, b in zip(params.weights, params.biases)]
    for stratum in STRATA:
        points, weights = sets.stratum(stratum)
        for i in range(0, points.shape[0], CHUNK):
            pts, ww = points[i:i+CHUNK], weights[i:i+CHUNK]
            jets, cache = _network_jets(params, pts, keep_cache=True)
            part, g_value, g_first, g_second = _stratum_adjoints(problem, stratum, pts, ww, jets)
            loss += part
            grads = _network_backward(params, cache, g_value, g_first, g_second)
            total = [(tW+gW, tb+gb) for (tW, tb), (gW, gb) in zip(total, grads)]
    return loss, total


def loss_gradient(params, sets, problem):
    '''
    Gradient of the squared training error with respect to every weight and bias

    Parameters
    ----------
    params: mlp_params
        Network parameters
    sets: collocation_sets
        Training sets
    problem: problem_spec
        Equation data

    Returns
    -------
    mlp_params holding the gradient entries
    '''
    _, grads = _loss_and_layer_grads(params, sets, problem)
    arch = architecture(params.arch.widths, activation=params.arch.activation)
    return mlp_params(arch, [gW for gW, _ in grads], [gb for _, gb in grads])


def training_loss_and_gradient(params, sets, problem):
    '''
    Squared training error and its flattened gradient from a single pass

    Returns
    -------
    loss: float
    gradient: xp.array, same layout as mlp_params.flatten
    '''
    loss, grads = _loss_and_layer_grads(params, sets, problem)
    return loss, xp.concatenate([xp.concatenate([gW.ravel(), gb]) for gW, gb in grads])


class grad_check_report(object):
    def __init__(self, errors, h):
        '''
        Relative deviations of analytic derivatives from central finite differences,
        the denominator of every deviation is max(|analytic|, 1).

        Parameters
        ----------
        errors: dict
            Quantity name -> relative error
        h: float
            Finite difference step
        '''
        self.errors = errors
        self.h = h

    @property
    def max_rel_error(self):
        return max(self.errors.values()) if len(self.errors) > 0 else 0.

    def to_dict(self):
        return {'max_rel_error': self.max_rel_error, 'errors': self.errors, 'h': self.h}


def _rel(analytic, numeric):
    analytic = np.asarray(cp2np(analytic), dtype=float)
    numeric = np.asarray(cp2np(numeric), dtype=float)
    return float(np.max(np.abs(analytic-numeric)/np.maximum(np.abs(analytic), 1.)))


def fd_check(params, target, h=1e-4, problem=None):
    '''
    Compares the analytic derivatives with central finite differences

    Parameters
    ----------
    params: mlp_params
        Network
    target: array or collocation_sets
        A point, to check the jet, or training sets, to check the loss gradient (needs problem)
    h: float
        Finite difference step
    problem: problem_spec
        Equation data for the loss gradient check

    Returns
    -------
    grad_check_report
    '''
    if not h > 0:
        raise ContractViolation('Finite difference step must be positive')
    if problem is None:
        point = xp.asarray(target, dtype=float)
        m = point.shape[0]
        jj = eval_jets(params, point[None, :])
        errors = {}
        for j in range(m):
            step = xp.zeros(m)
            step[j] = h
            fp, f0, fm = [to_float(v) for v in forward(params, xp.stack([point+step, point, point-step]))]
            name = 't' if j == m-1 else 'x{:d}'.format(j+1)
            errors['d'+name] = _rel(jj.first[0, j], (fp-fm)/(2.*h))
            errors['d'+name+name] = _rel(jj.second[0, j], (fp-2.*f0+fm)/h**2)
        return grad_check_report(errors, h)

    loss, grad = training_loss_and_gradient(params, target, problem)
    flat = params.flatten()
    numeric = xp.zeros_like(flat)
    for i in range(flat.shape[0]):
        step = xp.zeros_like(flat)
        step[i] = h
        lp, _ = _loss_only(mlp_params.from_flat(params.arch, flat+step), target, problem)
        lm, _ = _loss_only(mlp_params.from_flat(params.arch, flat-step), target, problem)
        numeric[i] = (lp-lm)/(2.*h)
    return grad_check_report({'loss_gradient': _rel(grad, numeric)}, h)


def _loss_only(params, sets, problem):
    from .residuals import training_error
    report = training_error(params, sets, problem)
    return report.total_squared, report
