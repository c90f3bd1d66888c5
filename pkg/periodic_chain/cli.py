"""
Command-line front end.

    python manage.py gap --config chain.toml
    python manage.py solve --config chain.toml --method both --out runs/a
    python manage.py integrate --config chain.toml --solution runs/a/solution.csv
    python manage.py diagnose --config chain.toml
    python manage.py sweep --config chain.toml --workers 4
    python manage.py greens-dump --config chain.toml
    python manage.py selftest

Exit codes: 0 ok, 1 unexpected failure, 2 configuration error, 3 resonance,
4 non-convergence, 5 oracle failure.
"""

import argparse
import logging
import sys
from pathlib import Path

from . import settings
from .solver import tasks
from .solver.exceptions import ConfigurationError
from .solver.runspec import decode, parse_mapping

logger = logging.getLogger(__name__)

COMMANDS = ('gap', 'solve', 'integrate', 'diagnose', 'sweep', 'greens-dump', 'selftest')


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help='TOML run configuration')
    common.add_argument('--method', choices=('series', 'fixed', 'both'),
                        help='solver method (default: series, or [solver].method)')
    common.add_argument('--tol', type=float, help=f'stopping tolerance (default {settings.SOLVER_TOL:g})')
    common.add_argument('--out', type=Path, help=f'output directory (default {settings.OUTPUT_DIR})')
    common.add_argument('--workers', type=int, default=settings.WORKERS,
                        help='sweep worker processes (default %(default)s)')
    common.add_argument('--seed', type=int, help=f'random seed (default {settings.SELFTEST_SEED})')
    common.add_argument('--solution', type=Path, help='harmonics CSV to integrate against')
    common.add_argument('--periods', type=int,
                        help=f'integration periods (default {settings.INTEGRATION_PERIODS})')
    common.add_argument('--steps', type=int,
                        help=f'RK4 steps per period (default {settings.STEPS_PER_PERIOD})')
    common.add_argument('--log-level', default=settings.LOG_LEVEL,
                        choices=('DEBUG', 'INFO', 'WARNING', 'ERROR'))

    parser = argparse.ArgumentParser(
        prog='periodic-chain',
        description='Periodic steady states of a forced anharmonic chain with boundary damping.',
    )
    sub = parser.add_subparsers(dest='command', required=True)
    helps = {
        'gap': 'print resonance gaps and convergence radii',
        'solve': 'solve for the periodic state; writes solution.csv and report.json',
        'integrate': 'RK4 integration with strobe distances to the periodic state',
        'diagnose': 'work, dissipation, localization and uniformity diagnostics',
        'sweep': 'solve every point of the [sweep] parameter grid',
        'greens-dump': 'write the kernel tables H_m(x, y) to kernels.csv',
        'selftest': 'run the embedded oracle suites',
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _override(data, section, key, value):
    if value is not None:
        data.setdefault(section, {})[key] = value


def load_spec(args):
    """Read the TOML file and fold the command-line overrides into it."""
    if args.config is None:
        raise ConfigurationError(f"{args.command} needs --config")
    if not args.config.exists():
        raise ConfigurationError(f"config file not found: {args.config}")
    text = args.config.read_text(encoding='utf-8')
    data = decode(text)
    _override(data, 'solver', 'method', args.method)
    _override(data, 'solver', 'tol', args.tol)
    _override(data, 'solver', 'seed', args.seed)
    _override(data, 'integrator', 'periods', args.periods)
    _override(data, 'integrator', 'steps_per_period', args.steps)
    _override(data, 'output', 'dir', str(args.out) if args.out else None)
    return parse_mapping(data)


def _format_gap(radius):
    lines = [
        f"delta*      = {radius['delta']:.12g}",
        f"delta*_odd  = {radius['delta_odd']:.12g}",
        f"nu0         = {radius['nu0']:.12g}",
        f"nu0_odd     = {radius['nu0_odd']:.12g}",
    ]
    single = radius.get('single_oscillator')
    if single:
        lines += [
            f"delta*(N=0)     = {single['delta']:.12g}",
            f"delta*_odd(N=0) = {single['delta_odd']:.12g}",
            f"nu0(N=0)        = {single['nu0']:.12g}",
            f"nu0_odd(N=0)    = {single['nu0_odd']:.12g}",
        ]
    return '\n'.join(lines)


def _format_selftest(results):
    return '\n'.join(
        f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']:<18} max error {r['max_error']:.3e}"
        for r in results
    )


def dispatch(args):
    if args.command == 'selftest':
        result = tasks.run_selftest(args.seed)
        if result.get('results'):
            print(_format_selftest(result['results']))
        return result
    spec = load_spec(args)
    if args.command == 'gap':
        result = tasks.run_gap(spec)
        if result['status'] == 'success':
            print(_format_gap(result['radius']))
        return result
    if args.command == 'solve':
        return tasks.run_solve(spec)
    if args.command == 'integrate':
        return tasks.run_integrate(spec, args.solution)
    if args.command == 'diagnose':
        result = tasks.run_diagnose(spec)
        if result['status'] == 'success':
            print(result['text'])
        return result
    if args.command == 'sweep':
        return tasks.run_sweep(spec, args.workers)
    return tasks.run_greens_dump(spec)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format=settings.LOG_FORMAT, stream=sys.stderr)
    try:
        result = dispatch(args)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e}")
        return e.exit_code
    if result['status'] != 'success':
        print(f"error: {result['error']}", file=sys.stderr)
    return result['exit_code']


if __name__ == '__main__':
    sys.exit(main())
