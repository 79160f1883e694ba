import os as _os
import csv
import json
import logging
import mpmath

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(name)s %(levelname)s: %(message)s'


def setup_logger(verbosity=1):
    '''
    Installs a single stream handler on the package logger.

    Parameters
    ----------
    verbosity: int
        0 warnings only, 1 info, 2 debug
    '''
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    root = logging.getLogger('pinnwave')
    for hh in list(root.handlers):
        root.removeHandler(hh)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level)
    return root


def parse_seeds(text):
    '''
    Parses a seed list, either 'a..b' (inclusive) or comma separated integers.

    Returns
    -------
    Sorted list of unique integers
    '''
    text = str(text).strip()
    try:
        if '..' in text:
            first, last = text.split('..')
            seeds = list(range(int(first), int(last)+1))
        else:
            seeds = [int(s) for s in text.split(',') if s.strip() != '']
    except ValueError:
        raise ConfigurationError('Cannot parse seeds {:s}, use a..b or a,b,c'.format(text))
    if len(seeds) == 0:
        raise ConfigurationError('Empty seed list {:s}'.format(text))
    return sorted(set(seeds))


def to_jsonable(value):
    '''Recursively casts numpy, mpmath and tuple values to plain python objects'''
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, mpmath.mpf):
        return float(value)
    if hasattr(value, 'tolist'):
        return value.tolist()
    return value


def write_json(filename, content):
    '''Writes a dictionary to a JSON file with sorted keys'''
    with open(filename, 'w') as f:
        json.dump(to_jsonable(content), f, indent=2, sort_keys=True)


def read_json(filename):
    with open(filename, 'r') as f:
        return json.load(f)


def write_csv(filename, header, rows, comments=None, footer=None):
    '''
    Writes a CSV table

    Parameters
    ----------
    filename: str
        Output file
    header: list of str
        Column names
    rows: list of lists
        Table rows
    comments: list of str
        Lines written at the top and prefixed with #
    footer: list of str
        Lines written at the bottom and prefixed with #
    '''
    with open(filename, 'w', newline='') as f:
        if comments is not None:
            for cc in comments:
                f.write('# '+cc+'\n')
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([to_jsonable(v) for v in row])
        f.flush()
        if footer is not None:
            for cc in footer:
                f.write('# '+cc+'\n')


def read_csv(filename):
    '''Reads a CSV table written by write_csv, returns the header and the rows as strings'''
    with open(filename, 'r', newline='') as f:
        lines = [ll for ll in f if not ll.startswith('#')]
    reader = csv.reader(lines)
    header = next(reader)
    return header, [row for row in reader]


def write_condor_files(home_folder, config_file, seeds, uname='pinnwave', agroup='pinnwave.training',
                       memory=4000, cpus=1, disk=1000):
    '''
    Writes one bash script and one condor submit file per seed, each training the
    configuration for that seed only. To launch the jobs, 1) Generate files with this function
    2) submit the sub files. Seed reports land in the configuration output folder and are picked up
    by a later resumed run.

    Parameters
    ----------
    home_folder: str
        Folder where to write the job files
    config_file: str
        Path of the JSON configuration
    seeds: list of int
        Seeds to run
    uname: str
        Username for condor
    agroup: str
        Accounting group for condor

    Returns
    -------
    List of the written submit files
    '''
    _os.makedirs(home_folder, exist_ok=True)
    written = []
    for seed in seeds:
        fname = _os.path.join(home_folder, 'seed_{:d}'.format(seed))

        with open(fname+'.sh', 'w') as f:
            f.write('#!/bin/bash\n')
            f.write('pinnwave train --config {:s} --seeds {:d}..{:d}\n'.format(_os.path.abspath(config_file), seed, seed))
        _os.chmod(fname+'.sh', 0o755)

        with open(fname+'.sub', 'w') as f:
            f.write('universe = vanilla\n')
            f.write('getenv = True\n')
            f.write('executable = '+fname+'.sh\n')
            f.write('accounting_group = '+agroup+'\n')
            f.write('accounting_group_user = '+uname+'\n')
            f.write('request_memory ='+str(memory)+'\n')
            f.write('request_cpus ='+str(cpus)+'\n')
            f.write('request_disk ='+str(disk)+'\n')
            f.write('output = '+fname+'.stdout\n')
            f.write('error = '+fname+'.stderr\n')
            f.write('log = '+fname+'.log\n')
            f.write('queue\n')
        written.append(fname+'.sub')
    logger.info('Written {:d} condor jobs in {:s}'.format(len(written), home_folder))
    return written
