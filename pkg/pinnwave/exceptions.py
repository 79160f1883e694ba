'''
Exceptions raised by pinnwave. All of them derive from ValueError so that callers
catching ValueError keep working.
'''


class ConfigurationError(ValueError):
    '''Invalid architecture, collocation counts, optimizer settings or run configuration'''


class ContractViolation(ValueError):
    '''A precondition of an operation was not met (shapes, strata, descent directions)'''


class BoundUnavailable(ValueError):
    '''A closed-form bound cannot be evaluated with the given inputs'''


class HypothesisViolation(ValueError):
    '''The hypothesis of an approximation-theoretic formula does not hold'''


class Unsupported(ValueError):
    '''The operation needs data the problem does not provide, e.g. an exact solution'''


class NonFiniteResidual(ValueError):
    def __init__(self, stratum, index, point, value):
        '''
        Raised when a residual evaluates to nan or inf at a collocation point

        Parameters
        ----------
        stratum: str
            'interior', 'boundary' or 'initial'
        index: int
            Index of the point in its stratum
        point: sequence
            Space-time coordinates of the point
        value: float
            Offending residual value
        '''
        self.stratum = stratum
        self.index = index
        self.point = tuple(float(p) for p in point)
        self.value = value
        super().__init__('Non-finite residual {} in stratum {:s} at point #{:d} {}'.format(
            value, stratum, index, self.point))


class StageError(RuntimeError):
    def __init__(self, stage, seed, original):
        '''
        Wraps an error raised while running an experiment

        Parameters
        ----------
        stage: str
            Pipeline stage ('config', 'init', 'train', 'metrics', 'bound', 'write')
        seed: int or None
            Seed being processed, None for seed-independent stages
        original: Exception
            The error raised by the stage
        '''
        self.stage = stage
        self.seed = seed
        self.original = original
        super().__init__('[stage={:s} seed={}] {}'.format(stage, seed, original))
