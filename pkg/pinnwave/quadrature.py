from .cupy_pal import *
from .exceptions import ConfigurationError, ContractViolation
from .utils import write_csv, read_csv
import logging
import math

logger = logging.getLogger(__name__)

STRATA = ['interior', 'boundary', 'initial']

# Cells per axis of the regular grids swept in the damped-wave experiment, from 144 to 18750 points for d=2
SWEEP_SETTINGS = [4, 6, 8, 10, 15, 20, 25]


class box_domain(object):
    def __init__(self, lower, upper, T):
        '''
        Spatial box prod_i [lower_i, upper_i] and time horizon T

        Parameters
        ----------
        lower, upper: list
            Box corners, one entry per spatial dimension
        T: float
            Time horizon
        '''
        self.lower = [float(v) for v in lower]
        self.upper = [float(v) for v in upper]
        self.T = float(T)
        if len(self.lower) != len(self.upper) or len(self.lower) == 0:
            raise ConfigurationError('Box corners must have the same positive length')
        if any(a >= b for a, b in zip(self.lower, self.upper)):
            raise ConfigurationError('Box needs lower < upper on every axis, got {} {}'.format(self.lower, self.upper))
        if not self.T > 0:
            raise ConfigurationError('Time horizon must be positive, got {:f}'.format(self.T))

    @property
    def d(self):
        return len(self.lower)

    @property
    def edges(self):
        return [b-a for a, b in zip(self.lower, self.upper)]

    @property
    def volume(self):
        '''|Omega|'''
        return math.prod(self.edges)

    @property
    def space_time_volume(self):
        return self.volume*self.T

    @property
    def boundary_measure(self):
        '''|dOmega|, the counting measure of the two end points when d=1'''
        edges = self.edges
        return sum(2.*math.prod(edges[:i]+edges[i+1:]) for i in range(self.d))

    @property
    def diameter(self):
        return math.sqrt(sum(e*e for e in self.edges))

    @property
    def space_time_diameter(self):
        return math.sqrt(sum(e*e for e in self.edges)+self.T**2)

    @property
    def space_time_inradius(self):
        '''Radius of the largest ball inside Omega x [0,T]'''
        return 0.5*min(self.edges+[self.T])

    def scaled(self, factor):
        '''Box scaled around the origin in space and time'''
        return box_domain([factor*v for v in self.lower], [factor*v for v in self.upper], factor*self.T)

    def contains(self, points, tol=0.):
        '''Boolean mask of the space-time points inside the closed space-time box'''
        points = xp.atleast_2d(points)
        mask = (points[:, -1] >= -tol) & (points[:, -1] <= self.T+tol)
        for i in range(self.d):
            mask &= (points[:, i] >= self.lower[i]-tol) & (points[:, i] <= self.upper[i]+tol)
        return mask

    def to_dict(self):
        return {'lower': self.lower, 'upper': self.upper, 'T': self.T}

    @classmethod
    def from_dict(cls, dd):
        return cls(dd['lower'], dd['upper'], dd['T'])


def _check_cells(cells, length, name):
    if isinstance(cells, int):
        cells = [cells]*length
    cells = list(cells)
    if len(cells) != length:
        raise ConfigurationError('{:s} cells need {:d} entries, got {:d}'.format(name, length, len(cells)))
    if any(int(c) != c or c < 1 for c in cells):
        raise ConfigurationError('{:s} cells must be integers >= 1, got {}'.format(name, cells))
    return [int(c) for c in cells]


def midpoint_grid(lower, upper, cells):
    '''
    Tensor grid of cell midpoints with measure weights, first axis varying slowest

    Parameters
    ----------
    lower, upper: list
        Corners of the (possibly zero-dimensional) box
    cells: list of int
        Cells per axis

    Returns
    -------
    points: xp.array (P, k)
    weights: xp.array (P,), each equal to the cell volume
    '''
    axes = []
    cell_volume = 1.
    for a, b, n in zip(lower, upper, cells):
        h = (b-a)/n
        axes.append(a+h*(np.arange(n)+0.5))
        cell_volume *= h
    if len(axes) == 0:
        return xp.zeros((1, 0)), xp.ones(1)
    mesh = np.meshgrid(*axes, indexing='ij')
    points = np.stack([mm.ravel() for mm in mesh], axis=1)
    return np2cp(points), xp.full(points.shape[0], cell_volume)


def node_grid(lower, upper, nodes):
    '''
    Closed tensor grid including the box faces, first axis varying slowest

    Returns
    -------
    points: xp.array (P, k)
    axes: list of np.array, the 1-D node coordinates
    '''
    axes = [np.linspace(a, b, n) for a, b, n in zip(lower, upper, nodes)]
    mesh = np.meshgrid(*axes, indexing='ij')
    return np2cp(np.stack([mm.ravel() for mm in mesh], axis=1)), axes


class collocation_sets(object):
    def __init__(self, box, interior, boundary, initial, cells=None):
        '''
        Weighted training sets on the three strata

        Parameters
        ----------
        box: box_domain
            Space-time domain
        interior, boundary, initial: tuple
            (points, weights) with points of shape (P, d+1), last coordinate the time
        cells: dict
            Cell counts used to build the sets, None when imported from file
        '''
        self.box = box
        self.interior_points, self.interior_weights = interior
        self.boundary_points, self.boundary_weights = boundary
        self.initial_points, self.initial_weights = initial
        self.cells = cells
        for name in STRATA:
            pts, ww = self.stratum(name)
            if pts.ndim != 2 or pts.shape[1] != box.d+1 or pts.shape[0] != ww.shape[0]:
                raise ContractViolation('Stratum {:s} has inconsistent points {} and weights {}'.format(
                    name, tuple(pts.shape), tuple(ww.shape)))

    def stratum(self, name):
        '''Points and weights of the named stratum'''
        if name == 'interior':
            return self.interior_points, self.interior_weights
        elif name == 'boundary':
            return self.boundary_points, self.boundary_weights
        elif name == 'initial':
            return self.initial_points, self.initial_weights
        raise ContractViolation('Unknown stratum {:s}, use one of {}'.format(name, STRATA))

    @property
    def m_pde(self):
        return int(self.interior_points.shape[0])

    @property
    def m_s(self):
        return int(self.boundary_points.shape[0])

    @property
    def m_t(self):
        return int(self.initial_points.shape[0])

    @property
    def total(self):
        return self.m_pde+self.m_s+self.m_t

    def counts(self):
        return {'M_PDE': self.m_pde, 'M_s': self.m_s, 'M_t': self.m_t, 'M_total': self.total}

    def refined(self, factor):
        '''Sets on the same box with factor times more cells per axis'''
        if self.cells is None:
            raise ContractViolation('Imported collocation sets cannot be refined')
        return build_sets(self.box, [factor*c for c in self.cells['interior']],
                          [factor*c for c in self.cells['boundary']], [factor*c for c in self.cells['initial']])

    def to_rows(self):
        rows = []
        for name in STRATA:
            pts, ww = self.stratum(name)
            for p, w in zip(cp2np(pts), cp2np(ww)):
                rows.append([name]+[float(v) for v in p]+[float(w)])
        return rows


def build_sets(box, interior_cells, boundary_cells, initial_cells):
    '''
    Builds the midpoint collocation sets

    Parameters
    ----------
    box: box_domain
        Space-time domain
    interior_cells: int or list
        Cells per axis of Omega x [0,T], d+1 entries with the time last
    boundary_cells: int or list
        d+1 entries, the spatial ones are the tangential counts along each axis and
        the last one the time count. Every one of the 2d faces uses the counts of its
        tangential axes.
    initial_cells: int or list
        Cells per axis of Omega, d entries

    Returns
    -------
    collocation_sets
    '''
    d = box.d
    interior_cells = _check_cells(interior_cells, d+1, 'Interior')
    boundary_cells = _check_cells(boundary_cells, d+1, 'Boundary')
    initial_cells = _check_cells(initial_cells, d, 'Initial')

    interior = midpoint_grid(box.lower+[0.], box.upper+[box.T], interior_cells)

    face_points, face_weights = [], []
    for i in range(d):
        others = [j for j in range(d) if j != i]
        pts, ww = midpoint_grid([box.lower[j] for j in others]+[0.], [box.upper[j] for j in others]+[box.T],
                                [boundary_cells[j] for j in others]+[boundary_cells[-1]])
        for value in [box.lower[i], box.upper[i]]:
            full = xp.concatenate([pts[:, :i], xp.full((pts.shape[0], 1), value), pts[:, i:]], axis=1)
            face_points.append(full)
            face_weights.append(ww)
    boundary = (xp.concatenate(face_points, axis=0), xp.concatenate(face_weights))

    pts, ww = midpoint_grid(box.lower, box.upper, initial_cells)
    initial = (xp.concatenate([pts, xp.zeros((pts.shape[0], 1))], axis=1), ww)

    sets = collocation_sets(box, interior, boundary, initial,
                            cells={'interior': interior_cells, 'boundary': boundary_cells, 'initial': initial_cells})
    logger.debug('Collocation sets M_PDE={:d} M_s={:d} M_t={:d}'.format(sets.m_pde, sets.m_s, sets.m_t))
    return sets


def uniform_sets(box, n):
    '''Sets with n cells along every space and time axis on every stratum'''
    return build_sets(box, n, n, n)


def uniform_total(d, n):
    '''Total number of points of uniform_sets, n^(d+1) + 2d n^d + n^d'''
    return n**(d+1)+(2*d+1)*n**d


def default_counts(total, d=2):
    '''
    Cell counts of the regular grids giving exactly `total` collocation points, with the
    same number n of cells along every axis of every stratum

    Returns
    -------
    dict with interior, boundary and initial cell lists
    '''
    n = 1
    while uniform_total(d, n) < total:
        n += 1
    if uniform_total(d, n) != total:
        raise ConfigurationError('{:d} points do not split in regular grids for d={:d}, closest totals {:d} and {:d}'.format(
            total, d, uniform_total(d, max(n-1, 1)), uniform_total(d, n)))
    return {'interior': [n]*(d+1), 'boundary': [n]*(d+1), 'initial': [n]*d}


def sets_from_counts(box, counts):
    '''
    Builds sets from a collocation block, one of {'n': int}, {'total': int} or
    explicit {'interior': [...], 'boundary': [...], 'initial': [...]}
    '''
    if 'n' in counts:
        return uniform_sets(box, counts['n'])
    if 'total' in counts:
        cc = default_counts(counts['total'], d=box.d)
        return build_sets(box, cc['interior'], cc['boundary'], cc['initial'])
    try:
        return build_sets(box, counts['interior'], counts['boundary'], counts['initial'])
    except KeyError as err:
        raise ConfigurationError('Collocation block misses the key {}'.format(err))


def midpoint_integrate(values, weights):
    '''
    Measure-weighted composite midpoint rule, sum_m w_m f(y_m)

    Parameters
    ----------
    values: xp.array
        Integrand at the midpoints
    weights: xp.array
        Midpoint weights

    Returns
    -------
    float
    '''
    values = xp.asarray(values)
    weights = xp.asarray(weights)
    if values.shape != weights.shape:
        raise ContractViolation('Integrand has {:d} values for {:d} weights'.format(values.size, weights.size))
    return to_float(xp.sum(values*weights))


def quadrature_error_bound(c_geom, f_c2_norm, M, dim):
    '''
    Midpoint-rule error bound C ||f||_C2 M^(-2/dim)

    Parameters
    ----------
    c_geom: float
        Geometry constant of the domain
    f_c2_norm: float
        C^2 norm of the integrand
    M: int
        Number of midpoints
    dim: int
        Dimension of the integration domain
    '''
    if M < 1 or dim < 1:
        raise ContractViolation('Quadrature bound needs M>=1 and dim>=1')
    return c_geom*f_c2_norm*float(M)**(-2./dim)


def write_points_csv(sets, filename):
    '''Writes the collocation points, columns stratum, x1..xd, t, weight'''
    d = sets.box.d
    header = ['stratum']+['x{:d}'.format(i+1) for i in range(d)]+['t', 'weight']
    write_csv(filename, header, sets.to_rows())
    logger.info('Written {:d} collocation points to {:s}'.format(sets.total, filename))


def read_points_csv(box, filename):
    '''Reads collocation points written by write_points_csv'''
    header, rows = read_csv(filename)
    if header[0] != 'stratum' or len(header) != box.d+3:
        raise ContractViolation('File {:s} does not hold points of a {:d}-dimensional box'.format(filename, box.d))
    parts = {}
    for name in STRATA:
        sel = [[float(v) for v in row[1:]] for row in rows if row[0] == name]
        arr = np.array(sel, dtype=float).reshape(-1, box.d+2)
        parts[name] = (np2cp(arr[:, :-1]), np2cp(arr[:, -1]))
    return collocation_sets(box, parts['interior'], parts['boundary'], parts['initial'])
