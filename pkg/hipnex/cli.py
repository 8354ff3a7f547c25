import argparse
import concurrent.futures
import csv
import glob
import hashlib
import json
import logging
import os
import sys
import tempfile

import numpy as np

from .config import RunConfig
from .exceptions import HipnexError, ParameterError
from .variational.algorithm import run
from .variational.baselines import NpeConfig, exact_resolvent_oracle, hpe_run, npe_run
from .variational.defaults import BACKEND_AUTO, BACKEND_TSENG, BACKENDS
from .variational.problems import initial_point
from .variational.suites import SUITES, run_suites
from .variational.trace import Trace


logger = logging.getLogger(__name__)


def array_hash(values):
    return hashlib.sha256(np.ascontiguousarray(values, dtype=float).tobytes()).hexdigest()


class MetricsSummary(object):
    FIELDS = ('method', 'backend', 'problem', 'n', 'seed', 'status', 'criterion',
              'time_s', 'iterations', 'final_residual', 'linear_solves',
              'f_evals', 'j_evals', 'j_products', 'j_materializations',
              'inner_iterations', 'x0_sha256', 'b_sha256')

    def __init__(self, method, backend, problem, n, seed, status='ok',
                 criterion=None, time_s=None, iterations=None,
                 final_residual=None, linear_solves=None, f_evals=None,
                 j_evals=None, j_products=None, j_materializations=None,
                 inner_iterations=None, x0_sha256=None, b_sha256=None, instance=None):
        self.method = method
        self.backend = backend
        self.problem = problem
        self.n = n
        self.seed = seed
        self.status = status
        self.criterion = criterion
        self.time_s = time_s
        self.iterations = iterations
        self.final_residual = final_residual
        self.linear_solves = linear_solves
        self.f_evals = f_evals
        self.j_evals = j_evals
        self.j_products = j_products
        self.j_materializations = j_materializations
        self.inner_iterations = inner_iterations
        self.x0_sha256 = x0_sha256
        self.b_sha256 = b_sha256
        self.instance = instance

    def __repr__(self):
        return '<MetricsSummary {}-{}: n {} | {}>'.format(self.method, self.backend, self.n, self.status)

    def __eq__(self, other):
        if not isinstance(other, MetricsSummary):
            return False
        return self.as_dict() == other.as_dict()

    def __ne__(self, other):
        return not self.__eq__(other)

    @classmethod
    def from_result(cls, result, config, problem, x0, backend):
        costs = result.costs.as_dict()
        spec = problem.spec
        return cls(
            method=result.method,
            backend=backend,
            problem=config.problem,
            n=config.n,
            seed=config.seed,
            criterion=result.criterion,
            time_s=result.time_s,
            iterations=result.iterations,
            final_residual=result.final_residual,
            x0_sha256=array_hash(x0),
            b_sha256=array_hash(getattr(spec, 'b', getattr(spec, 'q', np.zeros(0)))),
            instance=spec.to_dict() if spec is not None else None,
            **{key: costs[key] for key in ('linear_solves', 'f_evals', 'j_evals', 'j_products',
                                           'j_materializations', 'inner_iterations')}
        )

    @classmethod
    def from_dict(cls, data):
        return cls(instance=data.get('instance'), **{key: data.get(key) for key in cls.FIELDS})

    def as_dict(self):
        return {key: getattr(self, key) for key in self.FIELDS}

    def as_json(self):
        """The CSV fields plus the generator settings of the instance."""
        data = self.as_dict()
        data['instance'] = self.instance
        return data

    @property
    def label(self):
        return '{}-{}-{}-n{}-s{}'.format(self.method, self.backend, self.problem, self.n, self.seed)


def _atomic_write(path, write):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with tempfile.NamedTemporaryFile('w', encoding='utf-8', newline='', dir=directory,
                                     delete=False, suffix='.tmp') as f:
        temporary = f.name
        write(f)
    os.replace(temporary, path)


def write_trace_csv(path, trace):
    def write(f):
        writer = csv.DictWriter(f, fieldnames=Trace.COLUMNS, lineterminator='\n')
        writer.writeheader()
        writer.writerows(trace.to_rows())
    _atomic_write(path, write)


def write_summary_json(path, summary):
    def write(f):
        json.dump(summary.as_json(), f, sort_keys=True, indent=2)
        f.write('\n')
    _atomic_write(path, write)


def write_metrics_csv(path, summaries):
    def write(f):
        writer = csv.DictWriter(f, fieldnames=MetricsSummary.FIELDS, lineterminator='\n')
        writer.writeheader()
        writer.writerows(summary.as_dict() for summary in summaries)
    _atomic_write(path, write)


TABLE_COLUMNS = (
    ('Method', lambda s: '{}-{}'.format(s.method, s.backend)),
    ('n', lambda s: s.n),
    ('Time (s)', lambda s: '{:.3f}'.format(s.time_s) if s.time_s is not None else '-'),
    ('Iterations', lambda s: s.iterations),
    ('‖F‖', lambda s: '{:.3e}'.format(s.final_residual) if s.final_residual is not None else '-'),
    ('Linear solves', lambda s: s.linear_solves),
    ('F evaluations', lambda s: s.f_evals),
    ('J evaluations', lambda s: s.j_evals),
    ('Inner iterations', lambda s: s.inner_iterations),
    ('Status', lambda s: s.status),
)


def render_table(summaries):
    """
    Aligned plain-text table, one row per summary.
    """
    header = [name for name, _ in TABLE_COLUMNS]
    rows = [['-' if value is None else str(value) for value in (get(s) for _, get in TABLE_COLUMNS)]
            for s in summaries]
    widths = [max([len(h)] + [len(row[i]) for row in rows]) for i, h in enumerate(header)]
    lines = ['  '.join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip()
             for line in [header] + rows]
    lines.insert(1, '  '.join('-' * width for width in widths))
    return '\n'.join(lines) + '\n'


def solve(config, problem, x0, method, backend):
    """
    Run one method on a built problem and return its RunResult.
    """
    if method == 'hipnex':
        return run(problem, config.params(), config.rho, config.max_iter,
                   backend=backend, x0=x0, strict=config.strict)
    if method == 'npe':
        if backend == BACKEND_TSENG:
            raise ParameterError('npe does not support the tseng back-end')
        npe_config = NpeConfig(sigma_hat=config.sigma_hat, backend=backend)
        return npe_run(problem, npe_config, x0, config.rho, config.max_iter)
    if method == 'hpe':
        params = config.params()
        oracle = exact_resolvent_oracle(problem, params.eta)
        d0 = None
        if problem.known_solution is not None:
            d0 = float(np.linalg.norm(x0 - problem.known_solution))
        return hpe_run(problem, oracle, tau=params.tau, sigma=0.0, eta=params.eta,
                       x0=x0, N=config.max_iter, d0=d0, rho=config.rho)
    raise ParameterError('Unknown method {!r}'.format(method))


def run_cell(config, problem, x0, method, backend, out=None):
    """
    Solve one benchmark cell and write its artifacts; failures are returned
    as a summary with an error status.
    """
    try:
        result = solve(config, problem, x0, method, backend)
    except HipnexError as exc:
        logger.error('%s-%s on %r failed: %s', method, backend, problem, exc)
        return MetricsSummary(
            method=method,
            backend=backend,
            problem=config.problem,
            n=config.n,
            seed=config.seed,
            status='error: {}'.format(exc),
            x0_sha256=array_hash(x0),
        ), None
    summary = MetricsSummary.from_result(result, config, problem, x0, backend)
    if out is not None:
        write_trace_csv(os.path.join(out, summary.label + '.csv'), result.trace)
        write_summary_json(os.path.join(out, summary.label + '.json'), summary)
    return summary, result


def _start(config, problem, seed):
    return problem.project(initial_point(problem.dim, seed))


def cmd_run(config):
    config.validate()
    problem = config.make_problem()
    x0 = _start(config, problem, config.seed)
    result = solve(config, problem, x0, config.method, config.backend)
    summary = MetricsSummary.from_result(result, config, problem, x0, config.backend)
    write_trace_csv(os.path.join(config.out, summary.label + '.csv'), result.trace)
    write_summary_json(os.path.join(config.out, summary.label + '.json'), summary)
    sys.stdout.write(render_table([summary]))
    if not result.converged:
        logger.warning('%s stopped on %s without meeting ρ', summary.label, result.criterion)
        return 2
    return 0


def grid_cells(config):
    for n in config.grid_sizes:
        for seed in config.grid_seeds:
            for cell in config.grid_methods:
                method, _, backend = cell.partition('-')
                yield n, seed, method, backend or BACKEND_AUTO


def cmd_bench(config):
    config.validate()
    cells = list(grid_cells(config))
    instances = {}
    for n, seed, _, _ in cells:
        if (n, seed) not in instances:
            cell_config = config.override(n=n, seed=seed)
            problem = cell_config.make_problem()
            instances[n, seed] = (cell_config, problem, _start(cell_config, problem, seed))

    with concurrent.futures.ThreadPoolExecutor(max_workers=config.workers) as executor:
        futures = [
            executor.submit(run_cell, instances[n, seed][0], instances[n, seed][1],
                            instances[n, seed][2], method, backend, config.out)
            for n, seed, method, backend in cells
        ]
        summaries = [future.result()[0] for future in futures]

    write_metrics_csv(os.path.join(config.out, 'bench.csv'), summaries)
    table = render_table(summaries)
    _atomic_write(os.path.join(config.out, 'bench.txt'), lambda f: f.write(table))
    sys.stdout.write(table)
    return 1 if any(summary.status != 'ok' for summary in summaries) else 0


def cmd_check(selector, seed=0):
    reports = run_suites(selector, seed=seed)
    failed = False
    for report in reports:
        status = 'PASS' if report.passed else 'FAIL'
        sys.stdout.write('{:<12} {} ({} checked, {} skipped)\n'.format(
            report.name, status, report.checked, len(report.skipped),
        ))
        for key, value in sorted(report.maxima.items()):
            sys.stdout.write('    max {} = {:.3e}\n'.format(key, value))
        for failure in report.failures:
            sys.stdout.write('    {}\n'.format(failure))
        for skipped in report.skipped:
            sys.stdout.write('    skipped: {}\n'.format(skipped))
        failed = failed or not report.passed
    return 1 if failed else 0


def load_summaries(paths):
    summaries = []
    for path in paths:
        files = sorted(glob.glob(os.path.join(path, '*.json'))) if os.path.isdir(path) else [path]
        for name in files:
            with open(name, 'r', encoding='utf-8') as f:
                summaries.append(MetricsSummary.from_dict(json.load(f)))
    return summaries


def cmd_table(paths):
    sys.stdout.write(render_table(load_summaries(paths)))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog='hipnex',
        description='Solve monotone variational inequalities and benchmark the solvers.',
    )
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='Log run summaries (-v) or every iteration (-vv).')
    subparsers = parser.add_subparsers(dest='command')
    subparsers.required = True

    def add_run_options(sub):
        sub.add_argument('--config', help='JSON config file; flags override its values.')
        sub.add_argument('--seed', type=int)
        sub.add_argument('--rho', type=float)
        sub.add_argument('--method', choices=('hipnex', 'npe', 'hpe'))
        sub.add_argument('--backend', choices=BACKENDS + (BACKEND_AUTO,))
        sub.add_argument('--n', type=int)
        sub.add_argument('--out', help='Directory for CSV and JSON artifacts.')
        sub.add_argument('--strict', action='store_true', default=None,
                         help='Fail on any invariant breach.')
        sub.add_argument('--problem', choices=('cubic', 'affine', 'box'))
        sub.add_argument('--sigma-hat', dest='sigma_hat', type=float)
        sub.add_argument('--max-iter', dest='max_iter', type=int)

    add_run_options(subparsers.add_parser('run', help='Solve one problem instance.'))
    bench = subparsers.add_parser('bench', help='Run a methods × sizes × seeds grid.')
    add_run_options(bench)
    bench.add_argument('--workers', type=int)
    check = subparsers.add_parser('check', help='Run property suites.')
    check.add_argument('selector', nargs='?', default='all', choices=sorted(SUITES) + ['all'])
    check.add_argument('--seed', type=int, default=0)
    table = subparsers.add_parser('table', help='Render stored JSON summaries as a table.')
    table.add_argument('paths', nargs='+')
    return parser


def load_config(args):
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {key: getattr(args, key, None)
                 for key in ('seed', 'rho', 'method', 'backend', 'n', 'out', 'strict',
                             'problem', 'sigma_hat', 'max_iter', 'workers')}
    if args.command == 'bench':
        if overrides['n'] is not None:
            overrides['grid_sizes'] = [overrides['n']]
        if overrides['seed'] is not None:
            overrides['grid_seeds'] = [overrides['seed']]
        if overrides['method'] is not None:
            backend = overrides['backend']
            overrides['grid_methods'] = [overrides['method'] + ('-' + backend if backend else '')]
    return config.override(**overrides)


def configure_logging(verbosity):
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(verbosity, 2)]
    logging.basicConfig(level=level, format='%(asctime)s %(name)s %(levelname)s %(message)s')


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        if args.command == 'check':
            return cmd_check(args.selector, seed=args.seed)
        if args.command == 'table':
            return cmd_table(args.paths)
        config = load_config(args)
        if args.command == 'run':
            return cmd_run(config)
        return cmd_bench(config)
    except (HipnexError, OSError) as exc:
        sys.stderr.write('hipnex: {}\n'.format(exc))
        return 1
