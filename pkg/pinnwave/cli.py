'''
Command line entry point, `pinnwave <verb> [options]`
'''
from .exceptions import StageError
from .experiments import (PRESETS, BOUND_MODES, load_config, run, sweep, bound_from_checkpoint, theory_report,
                          export_points, write_jobs)
from .utils import setup_logger, parse_seeds
import argparse
import logging
import sys

logger = logging.getLogger(__name__)

VERBS = ['train', 'sweep', 'bound', 'theory', 'export-points']


def build_parser():
    parser = argparse.ArgumentParser(prog='pinnwave',
                                     description='PINNs for damped and semilinear wave equations with error bounds.')
    parser.add_argument('verb', choices=VERBS, help='Action to run')
    parser.add_argument('--config', type=str, default=None, help='JSON configuration file')
    parser.add_argument('--preset', type=str, default=None, choices=sorted(PRESETS.keys()), help='Named preset')
    parser.add_argument('--seeds', type=str, default=None, help='Seeds as a..b or a,b,c')
    parser.add_argument('--out', type=str, default=None, help='Output directory')
    parser.add_argument('--mode', type=str, default=None, choices=BOUND_MODES, help='Bound mode')
    parser.add_argument('--checkpoint', type=str, default=None, help='Training checkpoint for the bound verb')
    parser.add_argument('--write-jobs', action='store_true', help='Write one condor job per seed instead of training')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--quiet', action='store_true', help='Warnings only, no progress bars')
    verbosity.add_argument('--verbose', action='store_true', help='Debug output')
    return parser


def _overrides(args):
    out = {}
    if args.seeds is not None:
        out['seeds'] = parse_seeds(args.seeds)
    if args.out is not None:
        out['output_dir'] = args.out
    if args.mode is not None:
        out['bound'] = {'mode': args.mode}
    return out


def main(argv=None):
    '''
    Runs the CLI

    Returns
    -------
    Exit status, 0 on success, 1 when a pipeline stage failed, 2 on invalid arguments or configuration
    '''
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logger(0 if args.quiet else (2 if args.verbose else 1))
    progress = not args.quiet

    try:
        config = load_config(args.config, preset=args.preset, overrides=_overrides(args))
    except ValueError as err:
        print('[stage=config seed=None] {}'.format(err), file=sys.stderr)
        return 2

    try:
        if args.verb == 'train':
            if args.write_jobs:
                if args.config is None:
                    print('[stage=config seed=None] --write-jobs needs --config', file=sys.stderr)
                    return 2
                write_jobs(config, args.config)
            else:
                run(config, progress=progress)
        elif args.verb == 'sweep':
            sweep(config, progress=progress)
        elif args.verb == 'bound':
            if args.checkpoint is None:
                print('[stage=config seed=None] the bound verb needs --checkpoint', file=sys.stderr)
                return 2
            bound_from_checkpoint(config, args.checkpoint, mode=args.mode)
        elif args.verb == 'theory':
            theory_report(config)
        elif args.verb == 'export-points':
            export_points(config)
    except StageError as err:
        print(str(err), file=sys.stderr)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
