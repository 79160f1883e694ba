import os
import logging

__all__ = ['xp', 'np', 'CUPY_LOADED', 'comb', 'cp2np', 'np2cp', 'to_float']

logger = logging.getLogger(__name__)


def _cupy_requested():
    '''
    Decides whether the cupy backend was requested, either with a config.py file in the
    working folder containing CUPY=True or with the PINNWAVE_CUPY=1 environment variable.
    '''
    if os.environ.get('PINNWAVE_CUPY', '0') == '1':
        return True
    try:
        import config
        logger.info('Config file loaded')
        return bool(getattr(config, 'CUPY', False))
    except ImportError:
        return False


if _cupy_requested():
    try:
        import cupy as xp
        import numpy as np
        CUPY_LOADED = True
        logger.info('CUPY LOADED')
    except ImportError:
        import numpy as xp
        import numpy as np
        CUPY_LOADED = False
        logger.info('CUPY NOT LOADED BACK TO NUMPY')
else:
    import numpy as xp
    import numpy as np
    CUPY_LOADED = False

from scipy.special import comb # noqa


if CUPY_LOADED:
    def cp2np(array):
        '''Cast any array to numpy'''
        return xp.asnumpy(array)

    def np2cp(array):
        '''Cast any array to cupy'''
        return xp.asarray(array)
else:
    def cp2np(array):
        '''Cast any array to numpy'''
        return np.asarray(array)

    def np2cp(array):
        '''Cast any array to cupy'''
        return xp.asarray(array)


def to_float(value):
    '''Cast a 0-d array (numpy or cupy) or scalar to a python float'''
    return float(cp2np(value))
