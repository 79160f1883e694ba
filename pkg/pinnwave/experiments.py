'''
Experiment orchestration: multi-seed training runs, sweeps over collocation sizes,
bounds from checkpoints, theory tables and point exports.
'''
from .cupy_pal import *
from .exceptions import ConfigurationError, StageError
from .network import architecture, init_params, ACTIVATIONS, INIT_SCHEMES
from .quadrature import SWEEP_SETTINGS, sets_from_counts, write_points_csv
from .problems import problem_from_config
from .residuals import training_error, generalization_error_estimate, COMPONENTS
from .optimizer import train_config, train, save_checkpoint, load_checkpoint
from .bounds import certify, geometry_constants, NORM_SOURCES
from .metrics import evaluate_metrics, write_solution_fields
from .theory import (theory_inputs, q1_widths, weight_growth_exponent, lambda_beta, q1_residual_bounds,
                     rate_curves, write_rate_table, apriori_sizes)
from .utils import write_json, read_json, write_csv, write_condor_files
from multiprocessing import Pool
from tqdm import tqdm
import copy
import hashlib
import json
import logging
import math
import os
import time

logger = logging.getLogger(__name__)

BOUND_MODES = NORM_SOURCES+['both']

DEFAULTS = {
    'problem': 'damped_wave',
    'architecture': {'hidden_widths': [80, 80], 'activation': 'tanh', 'init_scheme': 'uniform-fan-in',
                     'init_scale': None},
    'train': {},
    'collocation': {'n': 25},
    'sweep': None,
    'metric_refinement': 4,
    'field_nodes': 51,
    'write_fields': True,
    'bound': {'mode': 'both', 'geometry_constants': None, 'weight_bound': None, 'norm_grid': 41,
              'u_norms': None, 'include_nonlinearity': None},
    'seeds': list(range(10)),
    'output_dir': 'pinnwave_out',
    'workers': 1,
    'theory': {'d': 2, 'k': 4, 'n': 2, 'N': 6, 'delta': 1., 'T': 0.5, 'box_lower': [-1, -1],
               'box_upper': [1, 1], 'N_range': [6, 64], 'a_linf': 2.*math.pi, 'eps': None, 'apriori_k': None},
}

PRESETS = {
    'smoke': {'collocation': {'n': 4}, 'sweep': [{'n': 4}], 'seeds': [0], 'train': {'max_iterations': 200},
              'metric_refinement': 2, 'field_nodes': 11, 'bound': {'mode': 'empirical', 'norm_grid': 11}},
    'sweep-small': {'collocation': {'n': 10}, 'sweep': [{'n': n} for n in SWEEP_SETTINGS if n <= 10],
                   'seeds': [0, 1, 2], 'train': {'max_iterations': 2000}},
    'sweep-full': {'collocation': {'n': 25}, 'sweep': [{'n': n} for n in SWEEP_SETTINGS],
                  'seeds': list(range(10)), 'train': {'max_iterations': 50000}},
}

# Benchmark names of the two sweeps
PRESETS['fig5-small'] = PRESETS['sweep-small']
PRESETS['fig5-full'] = PRESETS['sweep-full']

AGGREGATES = ['mean', 'min', 'max']
QUANTITIES = ['E_T']+['E_'+kk for kk in COMPONENTS]+['l2_error', 'h1_quantity', 'bound_empirical',
                                                     'log10_bound_empirical', 'bound_lemma', 'log10_bound_lemma',
                                                     'residual_bound_empirical', 'train_seconds']
SWEEP_HEADER = ['M_total', 'M_PDE', 'M_s', 'M_t']+[qq+'_'+aa for qq in QUANTITIES for aa in AGGREGATES]


def _merge(base, update):
    '''Recursive dictionary merge, values of update win'''
    out = copy.deepcopy(base)
    for kk, vv in update.items():
        if isinstance(vv, dict) and isinstance(out.get(kk), dict):
            out[kk] = _merge(out[kk], vv)
        else:
            out[kk] = copy.deepcopy(vv)
    return out


class run_config(object):
    def __init__(self, content):
        '''
        Experiment configuration, see DEFAULTS for the keys

        Parameters
        ----------
        content: dict
            Configuration merged over DEFAULTS
        '''
        unknown = set(content.keys())-set(DEFAULTS.keys())
        if len(unknown) > 0:
            raise ConfigurationError('Unknown configuration keys {}'.format(sorted(unknown)))
        content = _merge(DEFAULTS, content)
        self.problem = content['problem']
        self.architecture = content['architecture']
        self.train = content['train']
        self.collocation = content['collocation']
        self.sweep = content['sweep']
        self.metric_refinement = int(content['metric_refinement'])
        self.field_nodes = content['field_nodes']
        self.write_fields = bool(content['write_fields'])
        self.bound = content['bound']
        self.seeds = [int(s) for s in content['seeds']]
        self.output_dir = content['output_dir']
        self.workers = int(content['workers'])
        self.theory = content['theory']

    def build_problem(self):
        return problem_from_config(self.problem)

    def build_architecture(self, problem):
        block = self.architecture
        if block['activation'] not in ACTIVATIONS:
            raise ConfigurationError('Activation {} not known, use one of {}'.format(block['activation'], ACTIVATIONS))
        return architecture.from_hidden(problem.d, block['hidden_widths'], activation=block['activation'])

    def build_train_config(self, seed=0):
        return train_config.from_dict(dict(self.train, seed=seed))

    def sweep_settings(self):
        return self.sweep if self.sweep is not None else [{'n': n} for n in SWEEP_SETTINGS]

    def validate(self):
        '''Checks every block against the preconditions of the modules, before any work starts'''
        problem = self.build_problem()
        self.build_architecture(problem)
        self.build_train_config()
        if self.architecture['init_scheme'] not in INIT_SCHEMES:
            raise ConfigurationError('Initialization scheme {} not known'.format(self.architecture['init_scheme']))
        for block in [self.collocation]+list(self.sweep_settings()):
            sets_from_counts(problem.box, block)
        if self.metric_refinement < 2:
            raise ConfigurationError('metric_refinement must be at least 2')
        if self.bound['mode'] not in BOUND_MODES:
            raise ConfigurationError('Bound mode {} not known, use one of {}'.format(self.bound['mode'], BOUND_MODES))
        geometry_constants.from_dict(self.bound['geometry_constants'])
        if len(self.seeds) == 0:
            raise ConfigurationError('At least one seed is needed')
        if self.workers < 1:
            raise ConfigurationError('The number of workers must be positive')
        return problem

    def to_dict(self):
        return {kk: copy.deepcopy(getattr(self, kk)) for kk in DEFAULTS.keys()}


def load_config(filename=None, preset=None, overrides=None):
    '''
    Builds the run configuration: DEFAULTS, then the preset, then the JSON file, then
    the PINNWAVE_OUT and PINNWAVE_WORKERS variables and finally explicit overrides (command line)

    Returns
    -------
    run_config, validated
    '''
    content = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigurationError('Preset {} not known, use one of {}'.format(preset, sorted(PRESETS.keys())))
        content = _merge(content, PRESETS[preset])
    if filename is not None:
        try:
            content = _merge(content, read_json(filename))
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigurationError('Cannot read configuration {}: {}'.format(filename, err))
    if 'PINNWAVE_OUT' in os.environ:
        content['output_dir'] = os.environ['PINNWAVE_OUT']
    if 'PINNWAVE_WORKERS' in os.environ:
        try:
            content['workers'] = int(os.environ['PINNWAVE_WORKERS'])
        except ValueError:
            raise ConfigurationError('PINNWAVE_WORKERS must be an integer')
    if overrides is not None:
        content = _merge(content, overrides)
    cfg = run_config(content)
    cfg.validate()
    return cfg


def _u_norms(block):
    return None if block is None else {int(kk): float(vv) for kk, vv in block.items()}


def _fingerprint(config, block, seed):
    relevant = {kk: config[kk] for kk in ['problem', 'architecture', 'train', 'metric_refinement', 'bound']}
    relevant.update({'collocation': block, 'seed': seed})
    return hashlib.sha1(json.dumps(relevant, sort_keys=True, default=str).encode()).hexdigest()


def _seed_file(folder, seed):
    return os.path.join(folder, 'seed_{:d}.json'.format(seed))


def run_seed(config, block, seed, folder):
    '''
    Pipeline of one seed: init, train, training and fine-grid errors, total errors, bounds,
    report. A report written by an earlier run with the same settings is reused.

    Parameters
    ----------
    config: run_config
        Configuration
    block: dict
        Collocation block of the training sets
    seed: int
        Seed
    folder: str
        Output folder of the setting

    Returns
    -------
    dict, the seed report
    '''
    fname = _seed_file(folder, seed)
    fingerprint = _fingerprint(config.to_dict(), block, seed)
    if os.path.isfile(fname):
        previous = read_json(fname)
        if previous.get('fingerprint') == fingerprint:
            logger.info('Seed {:d} already done in {:s}'.format(seed, folder))
            return previous

    stage = 'init'
    try:
        problem = config.build_problem()
        arch = config.build_architecture(problem)
        ablock = config.architecture
        params = init_params(arch, seed, scheme=ablock['init_scheme'], scale=ablock['init_scale'])
        sets = sets_from_counts(problem.box, block)

        stage = 'train'
        record = train(params, sets, problem, config.build_train_config(seed))
        save_checkpoint(record, os.path.join(folder, 'seed_{:d}_checkpoint.json'.format(seed)))

        stage = 'metrics'
        report = training_error(record.params, sets, problem)
        fine = generalization_error_estimate(record.params, problem, sets, refinement=config.metric_refinement)
        metrics = None
        if problem.has_exact:
            metrics = evaluate_metrics(record.params, problem, sets, refinement=config.metric_refinement)
            if config.write_fields:
                write_solution_fields(record.params, problem, os.path.join(folder, 'fields_seed_{:d}'.format(seed)),
                                      nodes=config.field_nodes)

        stage = 'bound'
        bb = config.bound
        certified = certify(record.params, problem, sets, report, mode=bb['mode'],
                            geometry=geometry_constants.from_dict(bb['geometry_constants']),
                            weight_bound=bb['weight_bound'], u_norms=_u_norms(bb['u_norms']), nodes=bb['norm_grid'],
                            fine_report=fine, include_nonlinearity=bb['include_nonlinearity'])

        stage = 'write'
        out = {'seed': seed, 'fingerprint': fingerprint, 'counts': sets.counts(), 'problem': problem.to_dict(),
               'architecture': arch.to_dict(), 'iterations': record.iterations, 'termination': record.termination,
               'evaluations': record.evaluations, 'loss_history': record.loss_history,
               'training_error': report.to_dict(), 'fine_residuals': fine.to_dict(),
               'metrics': None if metrics is None else metrics.to_dict(),
               'bounds': {mm: {'ledger': entry['ledger'].to_dict(), 'bound': entry['bound'].to_dict(),
                               'residual_bound': entry.get('residual_bound')}
                          for mm, entry in certified.items()},
               'timing': {'train_seconds': record.seconds}}
        write_json(fname, out)
    except StageError:
        raise
    except Exception as err:
        raise StageError(stage, seed, err)
    logger.info('Seed {:d}: E_T^2 {:.4e}'.format(seed, report.total_squared))
    return out


def _seed_task(args):
    config_dict, block, seed, folder = args
    try:
        return run_seed(run_config(config_dict), block, seed, folder)
    except StageError as err:
        # Exceptions with custom constructors do not survive pickling
        return {'error': {'stage': err.stage, 'seed': err.seed, 'message': str(err.original)}}


def seed_scalars(report):
    '''Flat scalar summary of a seed report, the quantities that are aggregated over seeds'''
    out = {'E_T': report['training_error']['total']}
    out.update({'E_'+kk: report['training_error']['components'][kk] for kk in COMPONENTS})
    if report['metrics'] is not None:
        out['l2_error'] = report['metrics']['l2_error']
        out['h1_quantity'] = report['metrics']['h1_quantity']
    for mm, entry in report['bounds'].items():
        out['bound_'+mm] = entry['bound']['bound_value']
        out['log10_bound_'+mm] = entry['bound']['log10_bound_value']
        if entry.get('residual_bound') is not None:
            out['residual_bound_'+mm] = entry['residual_bound']
    out['train_seconds'] = report['timing']['train_seconds']
    return out


def aggregate(reports):
    '''Mean, min and max over seeds of every scalar, seeds sorted before the reduction'''
    scalars = [seed_scalars(rr) for rr in sorted(reports, key=lambda rr: rr['seed'])]
    keys = sorted(set().union(*[ss.keys() for ss in scalars]))
    out = {}
    for kk in keys:
        values = np.array([ss[kk] for ss in scalars if kk in ss], dtype=float)
        out[kk] = {'mean': float(np.mean(values)), 'min': float(np.min(values)), 'max': float(np.max(values))}
    return out


def _summary_row(counts, agg):
    '''One table row per setting, empty cells for quantities not computed (e.g. no exact solution)'''
    row = [counts['M_total'], counts['M_PDE'], counts['M_s'], counts['M_t']]
    for qq in QUANTITIES:
        row += [agg[qq][aa] if qq in agg else '' for aa in AGGREGATES]
    return row


def run(config, block=None, folder=None, progress=True):
    '''
    Trains every seed on one collocation setting and aggregates the reports

    Parameters
    ----------
    config: run_config
        Validated configuration
    block: dict
        Collocation block, config.collocation by default
    folder: str
        Output folder, config.output_dir by default
    progress: bool
        Shows a progress bar over the seeds

    Returns
    -------
    dict, the run report, also written to run_report.json with a run_summary.csv
    '''
    block = config.collocation if block is None else block
    folder = config.output_dir if folder is None else folder
    os.makedirs(folder, exist_ok=True)
    start = time.perf_counter()
    tasks = [(config.to_dict(), block, seed, folder) for seed in config.seeds]
    if config.workers > 1:
        with Pool(config.workers) as pool:
            results = list(tqdm(pool.imap(_seed_task, tasks), total=len(tasks), disable=not progress))
    else:
        results = [_seed_task(tt) for tt in tqdm(tasks, disable=not progress)]
    for rr in results:
        if 'error' in rr:
            raise StageError(rr['error']['stage'], rr['error']['seed'], rr['error']['message'])
    results = sorted(results, key=lambda rr: rr['seed'])

    counts = results[0]['counts']
    agg = aggregate(results)
    out = {'config': config.to_dict(), 'collocation': block, 'counts': counts, 'seeds': [rr['seed'] for rr in results],
           'aggregate': agg, 'per_seed': [seed_scalars(rr) for rr in results],
           'timing': {'seconds': time.perf_counter()-start}}
    write_json(os.path.join(folder, 'run_report.json'), out)
    write_csv(os.path.join(folder, 'run_summary.csv'), SWEEP_HEADER, [_summary_row(counts, agg)])
    logger.info('Run on {:d} points done, mean E_T {:.4e}'.format(counts['M_total'], agg['E_T']['mean']))
    return out


def sweep(config, settings=None, progress=True):
    '''
    Runs every collocation setting and writes the sweep table

    Parameters
    ----------
    config: run_config
        Validated configuration
    settings: list of dict
        Collocation blocks, config.sweep_settings() by default

    Returns
    -------
    List of run reports, one per setting, in the order of the settings
    '''
    settings = config.sweep_settings() if settings is None else settings
    os.makedirs(config.output_dir, exist_ok=True)
    reports, rows = [], []
    for block in tqdm(settings, disable=not progress):
        box = config.build_problem().box
        total = sets_from_counts(box, block).total
        rr = run(config, block=block, folder=os.path.join(config.output_dir, 'M{:d}'.format(total)), progress=progress)
        reports.append(rr)
        rows.append(_summary_row(rr['counts'], rr['aggregate']))
    fname = os.path.join(config.output_dir, 'sweep.csv')
    write_csv(fname, SWEEP_HEADER, rows)
    logger.info('Sweep over {:d} settings written to {:s}'.format(len(settings), fname))
    return reports


def bound_from_checkpoint(config, checkpoint, mode=None, folder=None):
    '''
    Recomputes training errors and bounds of a saved training record
    on the collocation sets stored in the checkpoint. Older checkpoints without them use the
    collocation block of the configuration.

    Returns
    -------
    dict, also written to bound_report.json
    '''
    stage = 'init'
    try:
        problem = config.build_problem()
        record = load_checkpoint(checkpoint)
        sets = sets_from_counts(problem.box, config.collocation)
        if record.collocation is not None and record.collocation != sets.cells:
            # Certify on the sets the network was trained on
            logger.warning('Checkpoint trained on {} cells, the configuration asks for {}, using the checkpoint'.format(
                record.collocation, sets.cells))
            sets = sets_from_counts(problem.box, record.collocation)
        stage = 'metrics'
        report = training_error(record.params, sets, problem)
        fine = generalization_error_estimate(record.params, problem, sets, refinement=config.metric_refinement)
        metrics = evaluate_metrics(record.params, problem, sets, config.metric_refinement) if problem.has_exact else None
        stage = 'bound'
        bb = config.bound
        certified = certify(record.params, problem, sets, report, mode=bb['mode'] if mode is None else mode,
                            geometry=geometry_constants.from_dict(bb['geometry_constants']),
                            weight_bound=bb['weight_bound'], u_norms=_u_norms(bb['u_norms']), nodes=bb['norm_grid'],
                            fine_report=fine, include_nonlinearity=bb['include_nonlinearity'])
    except Exception as err:
        raise StageError(stage, None, err)
    out = {'checkpoint': os.path.abspath(checkpoint), 'counts': sets.counts(), 'training_error': report.to_dict(),
           'fine_residuals': fine.to_dict(), 'metrics': None if metrics is None else metrics.to_dict(),
           'bounds': {mm: {'ledger': entry['ledger'].to_dict(), 'bound': entry['bound'].to_dict(),
                           'residual_bound': entry.get('residual_bound')} for mm, entry in certified.items()}}
    folder = config.output_dir if folder is None else folder
    os.makedirs(folder, exist_ok=True)
    write_json(os.path.join(folder, 'bound_report.json'), out)
    return out


def theory_report(config, folder=None):
    '''
    Evaluates the approximation formulas of the theory block and writes theory_report.json
    and rate_table.csv

    Returns
    -------
    dict
    '''
    block = dict(config.theory)
    n_range = block.pop('N_range', [6, 64])
    a_linf = block.pop('a_linf', 0.)
    eps = block.pop('eps', None)
    apriori_k = block.pop('apriori_k', None)
    try:
        inputs = theory_inputs.from_dict(block)
        width1, width2 = q1_widths(inputs)
        out = {'inputs': inputs.to_dict(), 'widths': [width1, width2], 'kappa': weight_growth_exponent(inputs)}
        if inputs.sobolev_seminorm is not None and inputs.w_norms is not None:
            out['lambda_beta'] = {}
            for l in range(3):
                lam, beta, c_l = lambda_beta(inputs, l)
                out['lambda_beta'][l] = {'lambda': float(lam), 'beta': float(beta), 'C': float(c_l)}
            out['residual_bounds'] = q1_residual_bounds(inputs, a_linf=a_linf)
        rows = rate_curves(inputs, list(range(int(n_range[0]), int(n_range[1])+1)))
        if eps is not None:
            plan = apriori_sizes(float(eps), inputs.d, int(inputs.k if apriori_k is None else apriori_k), r=inputs.r)
            out['apriori'] = plan.to_dict()
    except Exception as err:
        raise StageError('theory', None, err)
    folder = config.output_dir if folder is None else folder
    os.makedirs(folder, exist_ok=True)
    write_rate_table(rows, os.path.join(folder, 'rate_table.csv'))
    write_json(os.path.join(folder, 'theory_report.json'), out)
    return out


def export_points(config, folder=None):
    '''Writes the training points of the configured collocation block'''
    problem = config.build_problem()
    sets = sets_from_counts(problem.box, config.collocation)
    folder = config.output_dir if folder is None else folder
    os.makedirs(folder, exist_ok=True)
    fname = os.path.join(folder, 'points_M{:d}.csv'.format(sets.total))
    write_points_csv(sets, fname)
    return fname


def write_jobs(config, config_file, folder=None):
    '''Writes one condor job per seed into output_dir/jobs'''
    folder = os.path.join(config.output_dir, 'jobs') if folder is None else folder
    return write_condor_files(folder, config_file, config.seeds)
