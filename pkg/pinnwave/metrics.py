from .cupy_pal import *
from .exceptions import ContractViolation
from .derivatives import eval_jets
from .quadrature import midpoint_grid, node_grid, midpoint_integrate
from .utils import write_csv
import logging
import math
import os

logger = logging.getLogger(__name__)

DEFAULT_REFINEMENT = 4
DEFAULT_FIELD_NODES = 51
FIELD_KINDS = ['pinn', 'exact', 'abs_error']


def metric_cells(problem, sets=None, refinement=DEFAULT_REFINEMENT, cells=None):
    '''
    Cells per axis of the space-time metric grid, refinement times the interior cells of
    the training sets

    Parameters
    ----------
    problem: problem_spec
        Equation data
    sets: collocation_sets
        Training sets, used when cells is None
    refinement: int
        Multiplier of the training resolution
    cells: int or list
        Explicit cells per space-time axis

    Returns
    -------
    list of d+1 integers
    '''
    d = problem.d
    if cells is not None:
        cells = [int(cells)]*(d+1) if isinstance(cells, int) else [int(c) for c in cells]
        if len(cells) != d+1 or min(cells) < 1:
            raise ContractViolation('The metric grid needs {:d} positive cell counts'.format(d+1))
        return cells
    if sets is None:
        raise ContractViolation('Give either the training sets or the metric cells')
    if sets.cells is not None:
        base = sets.cells['interior']
    else:
        base = [int(math.ceil(sets.m_pde**(1./(d+1))))]*(d+1)
    return [refinement*c for c in base]


def _error_integrals(model, problem, cells):
    exact = problem.require_exact('The total error')
    box = problem.box
    points, weights = midpoint_grid(box.lower+[0.], box.upper+[box.T], cells)
    approx = eval_jets(model, points)
    truth = exact.jets(points)
    diff = approx.value-truth.value
    diff_t = approx.dt-truth.dt
    return midpoint_integrate(diff*diff, weights), midpoint_integrate(diff_t*diff_t, weights)


def total_error_l2(model, problem, sets=None, refinement=DEFAULT_REFINEMENT, cells=None):
    '''
    L2 norm of u_theta - u over Omega x [0,T], midpoint quadrature on the metric grid

    Parameters
    ----------
    model: mlp_params or object with jets
        Evaluated function
    problem: problem_spec
        Problem with an exact solution
    sets: collocation_sets
        Training sets fixing the metric resolution
    refinement: int
        Multiplier of the training resolution
    cells: list
        Explicit metric cells, override sets and refinement

    Returns
    -------
    float
    '''
    l2_part, _ = _error_integrals(model, problem, metric_cells(problem, sets, refinement, cells))
    return math.sqrt(max(l2_part, 0.))


def total_error_h1(model, problem, sets=None, refinement=DEFAULT_REFINEMENT, cells=None):
    '''
    int |u_theta-u|^2 and int |d_t(u_theta-u)|^2 over Omega x [0,T]

    Returns
    -------
    (l2_part, dt_part, l2_part+dt_part), squared integrals
    '''
    l2_part, dt_part = _error_integrals(model, problem, metric_cells(problem, sets, refinement, cells))
    return l2_part, dt_part, l2_part+dt_part


class metric_report(object):
    def __init__(self, l2_part, dt_part, cells):
        '''
        Total errors against the exact solution

        Parameters
        ----------
        l2_part: float
            int |u_theta-u|^2
        dt_part: float
            int |d_t(u_theta-u)|^2
        cells: list
            Cells per axis of the metric grid
        '''
        self.l2_part = float(l2_part)
        self.dt_part = float(dt_part)
        self.cells = list(cells)

    @property
    def l2_error(self):
        return math.sqrt(max(self.l2_part, 0.))

    @property
    def h1_quantity(self):
        '''The quantity bounded a-posteriori'''
        return self.l2_part+self.dt_part

    @property
    def h1_error(self):
        return math.sqrt(max(self.h1_quantity, 0.))

    def to_dict(self):
        return {'l2_error': self.l2_error, 'l2_part': self.l2_part, 'dt_part': self.dt_part,
                'h1_quantity': self.h1_quantity, 'h1_error': self.h1_error, 'cells': self.cells}

    @classmethod
    def from_dict(cls, dd):
        return cls(dd['l2_part'], dd['dt_part'], dd['cells'])


def evaluate_metrics(model, problem, sets=None, refinement=DEFAULT_REFINEMENT, cells=None):
    '''Both total errors from a single pass over the metric grid'''
    cells = metric_cells(problem, sets, refinement, cells)
    l2_part, dt_part = _error_integrals(model, problem, cells)
    out = metric_report(l2_part, dt_part, cells)
    logger.info('Total L2 error {:.4e}, H1 quantity {:.4e} on {} cells'.format(out.l2_error, out.h1_quantity, cells))
    return out


def _slice_grid(problem, t, nodes):
    box = problem.box
    if not -1e-12 <= t <= box.T+1e-12:
        raise ContractViolation('Time {:f} outside [0, {:f}]'.format(t, box.T))
    nodes = [int(nodes)]*problem.d if isinstance(nodes, int) else [int(n) for n in nodes]
    if len(nodes) != problem.d or min(nodes) < 2:
        raise ContractViolation('Field grids need {:d} node counts of at least 2'.format(problem.d))
    x, axes = node_grid(box.lower, box.upper, nodes)
    points = xp.concatenate([x, xp.full((x.shape[0], 1), float(t))], axis=1)
    return points, axes, nodes


def solution_field(model, problem, t, nodes=DEFAULT_FIELD_NODES):
    '''
    Network, exact solution and absolute error on the node grid of the time slice t

    Returns
    -------
    fields: dict kind -> np.array shaped as the node counts (pinn, and exact, abs_error when u is known)
    axes: list of np.array, node coordinates
    '''
    points, axes, nodes = _slice_grid(problem, t, nodes)
    fields = {'pinn': cp2np(eval_jets(model, points).value).reshape(nodes)}
    if problem.has_exact:
        truth = cp2np(problem.exact.jets(points).value).reshape(nodes)
        fields['exact'] = truth
        fields['abs_error'] = np.abs(fields['pinn']-truth)
    return fields, axes


def pointwise_error_field(model, problem, t, nodes=DEFAULT_FIELD_NODES):
    '''
    |u_theta-u| at the nodes of the time slice t

    Returns
    -------
    field: np.array shaped as the node counts, first axis along x1
    axes: list of np.array, node coordinates
    '''
    problem.require_exact('The pointwise error')
    fields, axes = solution_field(model, problem, t, nodes)
    return fields['abs_error'], axes


def write_field_csv(filename, field, axes, t, kind):
    '''
    Writes a field as a matrix, rows along x1 and columns along the remaining axes
    flattened row-major. The grid spec is written in the comment lines.
    '''
    rest = [np.asarray(a) for a in axes[1:]]
    if len(rest) == 0:
        labels = ['value']
    else:
        mesh = np.meshgrid(*rest, indexing='ij')
        labels = [';'.join('{:.10g}'.format(m.ravel()[j]) for m in mesh) for j in range(mesh[0].size)]
    comments = ['kind={:s} t={:.10g}'.format(kind, t),
                'lower={} upper={} nodes={}'.format([float(a[0]) for a in axes], [float(a[-1]) for a in axes],
                                                    [len(a) for a in axes]),
                'rows along x1, columns along x2..xd flattened row-major']
    matrix = np.asarray(field).reshape(len(axes[0]), -1)
    rows = [[float(x1)]+[float(v) for v in row] for x1, row in zip(axes[0], matrix)]
    header = ['x1']+labels
    write_csv(filename, header, rows, comments=comments)


def write_solution_fields(model, problem, folder, nodes=DEFAULT_FIELD_NODES, times=None, prefix='field'):
    '''
    Writes the network, exact and error fields at t = 0, T/2 and T

    Returns
    -------
    List of the written files
    '''
    T = problem.box.T
    times = [0., 0.5*T, T] if times is None else times
    os.makedirs(folder, exist_ok=True)
    written = []
    for i, t in enumerate(times):
        fields, axes = solution_field(model, problem, t, nodes)
        for kind in FIELD_KINDS:
            if kind not in fields:
                continue
            fname = os.path.join(folder, '{:s}_{:s}_t{:d}.csv'.format(prefix, kind, i))
            write_field_csv(fname, fields[kind], axes, t, kind)
            written.append(fname)
    logger.info('Written {:d} field files in {:s}'.format(len(written), folder))
    return written
