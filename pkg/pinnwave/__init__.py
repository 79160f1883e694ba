from . import cupy_pal
from . import exceptions
from . import utils
from . import network
from . import quadrature
from . import derivatives
from . import problems
from . import residuals
from . import optimizer
from . import bounds
from . import theory
from . import metrics
from . import experiments
from . import cli
