"""
Command line front end: configuration, command dispatch and artifacts.

    subwalk coeffs --alpha 1 --k 4
    subwalk verify tail --alpha 1 --n 4 --t 1e4 1e6
"""

import argparse
import dataclasses
import itertools
import json
import logging
import math
import sys
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import __version__
from .asymptotics import (DEFAULT_TOLERANCES, CONVENTIONS, const_C, const_D, const_polya, onsite_constant,
                          polya_constant, verify_doa, verify_flt_marginal, verify_onsite, verify_polya,
                          verify_ratio, verify_scaling, verify_tail)
from .bernstein import BernsteinSpec, coefficients, spatial_scale
from .errors import ConfigError, DomainError, NumericError, ResourceError, SubwalkError, VerificationFailure
from .kernel import cached_analysis, kernel_exact_table, kernel_fourier_table, simulate_endpoint
from .output import (coeffs_frame, emit, kernel_frame, pmf_frame, simulate_frame, tail_frame, write_csv)
from .subordinator import tail_predictor, tau_pmf, tau_tail
from .walk import WalkSpec

logger = logging.getLogger('subwalk')

COMMANDS = ('coeffs', 'tau', 'kernel', 'simulate', 'constants', 'verify')
SUITES = ('tail', 'onsite', 'ratio', 'polya', 'doa', 'flt', 'scaling')
ROUTES = ('both', 'exact', 'fourier')

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3

# truncation of the time-average route when no k is given, per dimension
EXACT_ROUTE_K = {1: 4096, 2: 256, 3: 64}
SIMULATE_K = 2 ** 16
REPLICAS = {'flt': 100000, 'simulate': 1000}


@dataclass(frozen=True)
class RunConfig:
    """Validated run parameters; list-valued keys are stored as tuples."""
    walk: WalkSpec = field(default_factory=lambda: WalkSpec.named('simple-1d'))
    psi: BernsteinSpec = field(default_factory=lambda: BernsteinSpec.stable(1.0))
    seed: int = 0
    out: str = '.'
    threads: int = 1
    k: int = None
    n: tuple = None
    t: tuple = None
    x: tuple = None
    M: int = None
    replicas: int = None
    xi: tuple = (1.0,)
    lam: tuple = (0.5, 1.0, 2.0)
    route: str = 'both'
    convention: str = 'effective'
    tolerances: dict = field(default_factory=dict)

    def tolerance(self, suite):
        return self.tolerances.get(suite, DEFAULT_TOLERANCES[suite])

    def to_dict(self):
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name in ('walk', 'psi'):
                value = value.to_dict()
            elif isinstance(value, tuple):
                value = [list(v) if isinstance(v, tuple) else v for v in value]
            elif isinstance(value, dict):
                value = dict(value)
            out[f.name] = value
        return out


FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def _integer(name, value, minimum=None):
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    elif isinstance(value, str) and value.strip().lstrip('-').isdigit():
        value = int(value)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(name, "expected an integer, got %r" % (value,))
    number = value
    if minimum is not None and number < minimum:
        raise ConfigError(name, "must be at least %d" % minimum)
    return number


def _real(name, value):
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ConfigError(name, "expected a number, got %r" % (value,))
    if not math.isfinite(number):
        raise ConfigError(name, "must be finite")
    return number


def _listed(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _points(value, d):
    """Lattice points from an int, a list, a "1;2" string or {"radius": R}."""
    if isinstance(value, dict):
        if set(value) != {'radius'}:
            raise ConfigError('x', "a window is written {\"radius\": R}")
        R = _integer('x.radius', value['radius'], 0)
        return tuple(itertools.product(range(-R, R + 1), repeat=d))
    items = _listed(value)
    if d > 1 and len(items) == d and all(isinstance(c, int) for c in items):
        items = [items]
    points = []
    for item in items:
        if isinstance(item, str):
            try:
                item = [int(c) for c in item.split(';')]
            except ValueError:
                raise ConfigError('x', "cannot read lattice point %r" % item)
        coords = tuple(_integer('x', c) for c in _listed(item))
        if len(coords) != d:
            raise ConfigError('x', "point %r does not have %d coordinates" % (coords, d))
        points.append(coords)
    return tuple(points)


def _psi(value):
    if not isinstance(value, dict):
        raise ConfigError('psi', "expected an object with a family")
    alpha = value.get('alpha')
    if alpha is not None:
        alpha = _real('psi.alpha', alpha)
        if not 0 < alpha < 2:
            raise ConfigError('psi.alpha', "alpha must lie in (0,2)")
    try:
        return BernsteinSpec.from_dict(value)
    except DomainError as e:
        raise ConfigError('psi', str(e))


def _walk(value):
    try:
        return WalkSpec.from_dict(value)
    except DomainError as e:
        raise ConfigError('walk', str(e))


def config_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError('config', "expected a JSON object")
    unknown = sorted(set(data) - FIELDS)
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    values = {}
    if 'walk' in data:
        values['walk'] = _walk(data['walk'])
    if 'psi' in data:
        values['psi'] = _psi(data['psi'])
    walk = values.get('walk') or RunConfig().walk
    for name in ('seed', 'threads', 'k', 'M', 'replicas'):
        if data.get(name) is not None:
            values[name] = _integer(name, data[name], 0 if name == 'seed' else 1)
    if data.get('out') is not None:
        values['out'] = str(data['out'])
    if data.get('n') is not None:
        values['n'] = tuple(_integer('n', v, 1) for v in _listed(data['n']))
    if data.get('t') is not None:
        values['t'] = tuple(_real('t', v) for v in _listed(data['t']))
        if any(v < 0 for v in values['t']):
            raise ConfigError('t', "times must be nonnegative")
    if data.get('x') is not None:
        values['x'] = _points(data['x'], walk.d)
    for name in ('xi', 'lam'):
        if data.get(name) is not None:
            values[name] = tuple(_real(name, v) for v in _listed(data[name]))
    if data.get('route') is not None:
        if data['route'] not in ROUTES:
            raise ConfigError('route', "expected one of %s" % ', '.join(ROUTES))
        values['route'] = data['route']
    if data.get('convention') is not None:
        if data['convention'] not in CONVENTIONS:
            raise ConfigError('convention', "expected one of %s" % ', '.join(CONVENTIONS))
        values['convention'] = data['convention']
    if data.get('tolerances') is not None:
        tolerances = data['tolerances']
        if not isinstance(tolerances, dict):
            raise ConfigError('tolerances', "expected an object keyed by suite")
        for suite, value in tolerances.items():
            if suite not in DEFAULT_TOLERANCES:
                raise ConfigError('tolerances.%s' % suite, "unknown suite")
            if not _real('tolerances.%s' % suite, value) > 0:
                raise ConfigError('tolerances.%s' % suite, "must be positive")
        values['tolerances'] = {s: float(v) for s, v in tolerances.items()}
    return RunConfig(**values)


def parse_config(text):
    """Validate a JSON document and fill in defaults."""
    try:
        data = json.loads(text)
    except ValueError as e:
        raise ConfigError('config', "invalid JSON: %s" % e)
    return config_from_dict(data)


def _first(values, default):
    return values[0] if values else default


def _origin(walk):
    return ((0,) * walk.d,)


def run_coeffs(config):
    table = coefficients(config.psi, config.k)
    write_csv(coeffs_frame(table), config.out, 'coeffs.csv')
    return EXIT_PASS, {'command': 'coeffs', 'K': table.K, 'tail_mass': table.tail_mass}


def run_tau(config):
    n = _first(config.n, 1)
    coeffs = coefficients(config.psi, config.k)
    sub = tau_pmf(coeffs, n, coeffs.K, workers=config.threads)
    write_csv(pmf_frame(sub), config.out, 'tau.csv')
    summary = {'command': 'tau', 'n': n, 'K': sub.K, 'tail_mass': sub.tail_mass}
    if config.t:
        rows = []
        for t in config.t:
            measured = tau_tail(sub, t)
            predicted = tail_predictor(config.psi, n, t) if t > 0 else float('nan')
            rows.append({'t': t, 'empirical_tail': measured, 'predictor': predicted,
                         'ratio': measured / predicted})
        write_csv(tail_frame(rows), config.out, 'tau_tail.csv')
    return EXIT_PASS, summary


def run_kernel(config):
    walk, psi = config.walk, config.psi
    points = config.x or _origin(walk)
    tables = []
    for n in config.n or (1,):
        if config.route in ('both', 'exact'):
            coeffs = coefficients(psi, config.k or EXACT_ROUTE_K.get(walk.d, 64))
            sub = tau_pmf(coeffs, n, coeffs.K, workers=config.threads)
            tables.append(kernel_exact_table(walk, sub, points))
        if config.route in ('both', 'fourier'):
            tables.append(kernel_fourier_table(walk, psi, points, n, M=config.M, workers=config.threads))
    frame = kernel_frame(tables)
    write_csv(frame, config.out, 'kernel.csv')
    summary = {'command': 'kernel', 'rows': len(frame)}
    if config.route == 'both':
        exact = frame[frame['route'] == 'exact'].reset_index(drop=True)
        fourier = frame[frame['route'] == 'fourier'].reset_index(drop=True)
        gap = (exact['p_psi'] - fourier['p_psi']).abs()
        slack = exact['error_bound'] + fourier['error_bound']
        summary.update(max_difference=float(gap.max()), agree=bool((gap <= slack + 1e-12).all()))
    return EXIT_PASS, summary


def run_simulate(config):
    coeffs = coefficients(config.psi, config.k or SIMULATE_K)
    n = _first(config.n, 1)
    t_grid = config.t or (1.0,)
    replicas = config.replicas or REPLICAS['simulate']
    paths = [simulate_endpoint(config.walk, coeffs, n, t_grid, np.random.SeedSequence(config.seed, spawn_key=(i,)))
             for i in range(replicas)]
    write_csv(simulate_frame(paths, t_grid), config.out, 'simulate.csv')
    return EXIT_PASS, {'command': 'simulate', 'n': n, 'replicas': replicas, 'seed': config.seed}


def run_constants(config):
    walk, psi = config.walk, config.psi
    analysis = cached_analysis(walk)
    d, alpha, Q = walk.d, psi.alpha, analysis.Q
    values = {
        'const_polya': const_polya(alpha),
        'const_C': const_C(d, alpha, Q),
        'const_D': const_D(d, alpha, Q),
        'onsite_effective': onsite_constant(d, alpha, Q, 'effective'),
        'polya_effective': polya_constant(d, alpha, Q, analysis.r, 'effective'),
        'period': analysis.r,
        'det_Q': analysis.det_Q,
    }
    for n in config.n or ():
        values['scale_%d' % n] = spatial_scale(psi, n)
    write_csv(pd.DataFrame({'name': list(values), 'value': list(values.values())}), config.out, 'constants.csv')
    summary = {'command': 'constants'}
    summary.update(values)
    return EXIT_PASS, summary


def run_suite(config, suite):
    """Run one verification suite under ``config`` and return its report."""
    walk, psi, threads = config.walk, config.psi, config.threads
    tolerance = config.tolerance(suite)
    if suite == 'tail':
        grid = list(itertools.product(config.n or (4,), config.t or (1e4, 1e6)))
        return verify_tail(psi, grid, tolerance=tolerance, threads=threads, K=config.k)
    if suite == 'onsite':
        return verify_onsite(walk, psi, config.n or (100, 1000, 10000), tolerance=tolerance,
                             convention=config.convention, threads=threads, M=config.M)
    if suite == 'ratio':
        pairs = list(itertools.product(config.x or ((5,) + (0,) * (walk.d - 1),), config.n or (100, 1000, 10000)))
        return verify_ratio(walk, psi, pairs, tolerance=tolerance, threads=threads, M=config.M)
    if suite == 'polya':
        pairs = list(itertools.product(config.x or ((200,) + (0,) * (walk.d - 1), (2000,) + (0,) * (walk.d - 1)),
                                       config.n or (10,)))
        return verify_polya(walk, psi, pairs, tolerance=tolerance, convention=config.convention,
                            threads=threads, M=config.M or 2 ** 14)
    if suite == 'doa':
        return verify_doa(walk, psi, config.xi, config.n or (10 ** 2, 10 ** 4, 10 ** 6), tolerance=tolerance)
    if suite == 'flt':
        return verify_flt_marginal(walk, psi, n=_first(config.n, 2000), t=_first(config.t, 1.0),
                                   replicas=config.replicas or REPLICAS['flt'], seed=config.seed,
                                   tolerance=tolerance, threads=threads)
    if suite == 'scaling':
        return verify_scaling(psi, config.n or (10 ** 2, 10 ** 4, 10 ** 6), config.lam, tolerance=tolerance)
    raise ConfigError('suite', "unknown suite %r" % suite)


def run_verify(config, suite):
    report = run_suite(config, suite)
    write_csv(report.table, config.out, 'verify_%s.csv' % suite)
    summary = report.summary()
    return (EXIT_PASS if report.passed else EXIT_FAIL), summary


def run(config, command, suite=None):
    """
    Execute ``command`` and write its CSV artifacts to ``config.out``.

    Returns the exit status and the JSON summary. Library errors propagate;
    ``main`` maps them onto exit statuses.
    """
    logger.debug('run %s%s with seed %d', command, ' ' + suite if suite else '', config.seed)
    if command == 'verify':
        return run_verify(config, suite)
    handlers = {
        'coeffs': run_coeffs,
        'tau': run_tau,
        'kernel': run_kernel,
        'simulate': run_simulate,
        'constants': run_constants,
    }
    try:
        handler = handlers[command]
    except KeyError:
        raise ConfigError('command', "unknown command %r" % command)
    return handler(config)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help="JSON file with run configuration; flags override it")
    common.add_argument('--out', help="directory for CSV artifacts")
    common.add_argument('--threads', type=int, help="maximum number of worker threads")
    common.add_argument('--seed', type=int, help="seed for Monte Carlo commands")
    common.add_argument('--walk', help="walk name or inline WalkSpec JSON")
    common.add_argument('--family', choices=['stable', 'stable_log', 'levy_quadrature'])
    common.add_argument('--alpha', type=float)
    common.add_argument('--beta', type=float)
    common.add_argument('--k', type=int, help="coefficient / subordinator truncation")
    common.add_argument('--n', type=int, nargs='+')
    common.add_argument('--t', type=float, nargs='+')
    common.add_argument('--x', nargs='+', help="lattice points, coordinates joined by ';'")
    common.add_argument('--M', type=int, help="Fourier grid size per axis")
    common.add_argument('--replicas', type=int)
    common.add_argument('--xi', type=float, nargs='+')
    common.add_argument('--lam', type=float, nargs='+')
    common.add_argument('--route', choices=ROUTES)
    common.add_argument('--convention', choices=CONVENTIONS)
    common.add_argument('--tolerance', type=float, help="tolerance of the verify suite")
    common.add_argument('-v', '--verbose', action='store_true', help="debug logging on stderr")

    parser = argparse.ArgumentParser(prog='subwalk', description="Discrete subordinated random walks")
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True
    for name, text in [('coeffs', "coefficients c(psi, k)"),
                       ('tau', "law and tail of tau_n"),
                       ('kernel', "subordinated kernel p_psi(x, n)"),
                       ('simulate', "simulated endpoints of subordinated paths"),
                       ('constants', "asymptotic constants")]:
        commands.add_parser(name, parents=[common], help=text)
    verify = commands.add_parser('verify', parents=[common], help="verification suites")
    verify.add_argument('suite', choices=SUITES)
    return parser


def config_from_args(args):
    data = {}
    if args.config:
        try:
            with open(args.config, 'r') as f:
                data = json.load(f)
        except (OSError, ValueError) as e:
            raise ConfigError('config', str(e))
        if not isinstance(data, dict):
            raise ConfigError('config', "expected a JSON object")
    for name in ('out', 'threads', 'seed', 'k', 'n', 't', 'x', 'M', 'replicas', 'xi', 'lam', 'route',
                 'convention'):
        value = getattr(args, name)
        if value is not None:
            data[name] = value
    if args.walk is not None:
        walk = args.walk.strip()
        data['walk'] = json.loads(walk) if walk.startswith('{') else walk
    if args.family is not None or args.alpha is not None or args.beta is not None:
        psi = dict(data.get('psi') or {'family': 'stable'})
        if args.family is not None and args.family != psi.get('family'):
            psi = {'family': args.family, 'alpha': psi.get('alpha')}
        if args.alpha is not None:
            psi['alpha'] = args.alpha
        if args.beta is not None:
            psi['beta'] = args.beta
        data['psi'] = psi
    if args.tolerance is not None and getattr(args, 'suite', None):
        tolerances = dict(data.get('tolerances') or {})
        tolerances[args.suite] = args.tolerance
        data['tolerances'] = tolerances
    return config_from_dict(data)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(format="[%(asctime)s - %(name)s - %(levelname)s] %(message)s", stream=sys.stderr)
    if args.verbose:
        logger.setLevel(logging.DEBUG)
    suite = getattr(args, 'suite', None)
    try:
        config = config_from_args(args)
        status, summary = run(config, args.command, suite)
    except VerificationFailure as e:
        logger.exception('verification failed')
        status, summary = EXIT_FAIL, {'error': str(e), 'suite': e.suite}
    except (ConfigError, DomainError, json.JSONDecodeError) as e:
        logger.exception('invalid input')
        status, summary = EXIT_USAGE, {'error': str(e)}
    except (NumericError, ResourceError) as e:
        logger.exception('numerical failure')
        status, summary = EXIT_NUMERIC, {'error': str(e)}
    except SubwalkError as e:
        logger.exception('failure')
        status, summary = EXIT_NUMERIC, {'error': str(e)}
    summary['status'] = status
    emit(summary)
    return status


if __name__ == '__main__':
    sys.exit(main())
