# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-lowswitch development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import argparse
import logging
import sys

from . import __version__
from ._core import ConfigurationError
from ._criteria import theorem1_check
from ._experiment import parse_config, report, run_experiment
from ._selftest import run_selftest

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _seed_list(text):
    try:
        return [int(s) for s in text.split(',') if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError('seeds must be a comma separated '
                                         'list of integers, got %r' % text)


def build_parser():
    parser = argparse.ArgumentParser(
        prog='lowswitch',
        description='Train value-based and actor-critic agents under '
                    'policy switching criteria and report switching cost.')
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    parser.add_argument('--verbose', action='store_true',
                        help='log progress at INFO level')
    commands = parser.add_subparsers(dest='command', required=True)

    run = commands.add_parser('run', help='run an experiment grid')
    run.add_argument('config', help='YAML experiment configuration')
    run.add_argument('--seeds', type=_seed_list,
                     help='comma separated base seeds, e.g. 0,1,2')
    run.add_argument('--out', help='output directory')
    run.add_argument('--jobs', type=int, help='worker processes')
    run.add_argument('--criterion', action='append', dest='criteria',
                     help='criterion to run; repeat for several')

    rep = commands.add_parser('report',
                              help='re-aggregate the run records in a '
                                   'results directory')
    rep.add_argument('directory')
    rep.add_argument('--baseline', default='none')
    rep.add_argument('--sigma-rsi', type=float, default=0.2)

    theorem = commands.add_parser(
        'theorem1', help='evaluate the two-task representation construction')
    theorem.add_argument('--k', type=int, required=True)
    theorem.add_argument('--alpha', type=float, required=True)
    theorem.add_argument('--no-flip', dest='flip', action='store_false')

    commands.add_parser('selftest', help='run the closed-form checks')
    return parser


def _run(args):
    with open(args.config) as fh:
        text = fh.read()
    spec = parse_config(text, seeds=args.seeds, criteria=args.criteria,
                        jobs=args.jobs, output_dir=args.out)
    return run_experiment(spec)


def _report(args):
    report(args.directory, baseline=args.baseline, sigma=args.sigma_rsi)
    return EXIT_OK


def _theorem1(args):
    try:
        similarity, error = theorem1_check(args.k, args.alpha, flip=args.flip)
    except ValueError as err:
        raise ConfigurationError(str(err))
    print('similarity: %g' % similarity)
    print('prediction_error: %g' % error)
    return EXIT_OK


def _selftest(args):
    return EXIT_OK if run_selftest() else EXIT_RUNTIME


_COMMANDS = {'run': _run, 'report': _report, 'theorem1': _theorem1,
             'selftest': _selftest}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format='%(asctime)s %(name)s %(levelname)s: %(message)s')
    try:
        return _COMMANDS[args.command](args)
    except ConfigurationError as err:
        for message in err.errors:
            print('error: %s' % message, file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print('error: %s' % err, file=sys.stderr)
        return EXIT_CONFIG


if __name__ == '__main__':
    sys.exit(main())
