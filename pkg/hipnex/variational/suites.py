"""
Property suites run by ``hipnex check``. Every suite returns a CheckReport.
"""
import logging

import numpy as np

from ..exceptions import InvariantViolation, ParameterError, SubproblemError
from .algorithm import check_hpe_subsequence, check_rate_bounds, run
from .baselines import exact_resolvent_oracle, hpe_run
from .defaults import (
    BACKEND_DIRECT,
    BACKEND_KRYLOV,
    BACKEND_TSENG,
    CRITERION_ERGODIC,
    CRITERION_FLOOR,
    CRITERION_POINTWISE,
    SIGMA_HAT,
)
from .ergodic import ErgodicAccumulator, ergodic_direct
from .params import (
    budget_ergodic,
    budget_pointwise,
    derive_params,
    init_lambda,
    remark_budget_ergodic,
    remark_budget_pointwise,
)
from .problems import initial_point, make_problem
from .subproblem import (
    SubproblemInstance,
    operator_norm_estimate,
    solve_subproblem,
    tseng_iteration_bound,
    verify_solution,
)
from .trace import CheckReport


logger = logging.getLogger(__name__)

# Inner iterations one subproblem solve may spend inside a suite.
SUITE_MAX_INNER = 5000


def known_solution_instances(seed=0):
    """
    (problem, x0) pairs with known solutions: cubic min-max n = 50 on three
    seeds, affine n = 20 and box n = 20.
    """
    instances = [make_problem('cubic', 50, seed=seed + i) for i in range(3)]
    instances.append(make_problem('affine', 20, seed=seed))
    instances.append(make_problem('box', 20, seed=seed))
    return [(problem, problem.project(initial_point(problem.dim, seed))) for problem in instances]


def check_params(seed=0, samples=1000):
    report = CheckReport('params')
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        sigma_hat = rng.uniform(0.0, 0.5)
        lipschitz = 10.0 ** rng.uniform(-4.0, 4.0)
        params = derive_params(sigma_hat, lipschitz)
        report.checked += 1
        report.observe('q_relative', abs(params.q(params.tau)) / params.q_scale())
        expected = (1.0 - 2.0 * sigma_hat) / 4.0
        report.observe('theta_hat_default', abs(params.theta_hat - expected) / expected)
        for violation in params.violations(q_rtol=1e-10):
            report.fail('σ̂ {:.4f}, L {:.3e}: {}'.format(sigma_hat, lipschitz, violation))
    for lipschitz in (1e-3, 1.0, 1e3):
        params = derive_params(0.0, lipschitz)
        report.observe('theta_hat_at_zero', abs(params.theta_hat - params.theta ** 2))
    if report.maxima['theta_hat_at_zero'] > 1e-15:
        report.fail('θ̂ != θ² at σ̂ = 0')
    if report.maxima['theta_hat_default'] > 1e-12:
        report.fail('θ̂ != (1 - 2σ̂)/4 for the default θ')
    return report


def _stopped_by_subproblem(report, problem, exc, what):
    iteration = exc.diagnostics.get('iteration')
    report.skip('{!r}: {} stopped by the subproblem at iteration {} ({})'.format(
        problem, what, iteration, exc,
    ))
    return iteration


def check_invariants(seed=0, rho=1e-6, max_iter=2000, max_inner=SUITE_MAX_INNER):
    report = CheckReport('invariants')
    for problem, x0 in known_solution_instances(seed):
        params = derive_params(SIGMA_HAT, problem.lipschitz)
        try:
            result = run(problem, params, rho, max_iter, x0=x0, strict=True, max_inner=max_inner)
        except InvariantViolation as exc:
            report.fail('{!r}: {}'.format(problem, exc))
            continue
        except SubproblemError as exc:
            # every iteration before the failed solve passed the strict monitor
            iteration = _stopped_by_subproblem(report, problem, exc, 'run')
            report.checked += max((iteration or 1) - 1, 0)
            continue
        report.checked += result.iterations
        for record in result.trace:
            report.observe('invariant_a', record.invariant_a / result.params.theta)
            report.observe('invariant_b', record.invariant_b / result.params.theta_hat)
    return report


def check_rates(seed=0, rho=1e-6, max_iter=2000):
    report = CheckReport('rates')
    for problem, x0 in known_solution_instances(seed):
        if problem.spec.kind == 'box':
            continue
        params = derive_params(SIGMA_HAT, problem.lipschitz)
        result = run(problem, params, rho, max_iter, x0=x0, keep_points=True)
        d0 = float(np.linalg.norm(x0 - problem.known_solution))
        report.merge(check_rate_bounds(result.trace, result.params, d0))
        report.merge(check_hpe_subsequence(result.trace, result.params, x0=x0))
        if result.ergodic is not None and not result.ergodic.eps_is_sane():
            report.fail('{!r}: final ergodic ε = {:.3e} is negative'.format(problem, result.ergodic.eps_a))
    return report


def check_budgets(seed=0, rhos=(1e-3, 1e-6), cap=5000, max_inner=SUITE_MAX_INNER):
    """
    Iterations to pointwise and to ergodic success never exceed their
    budgets. Runs are capped at min(budget, cap). A run that succeeds passes;
    one that does not fails when its budget was within the cap and is
    skipped otherwise, as are runs ended by the rounding floor or by a
    subproblem that needs more than `max_inner` inner iterations.
    """
    report = CheckReport('budgets')
    for problem, x0 in known_solution_instances(seed):
        d0 = float(np.linalg.norm(x0 - problem.known_solution))
        for rho in rhos:
            params = derive_params(SIGMA_HAT, problem.lipschitz)
            lambda1 = init_lambda(float(np.linalg.norm(problem.F(x0))), params.theta, params.lipschitz)
            params = params.with_lambda1(lambda1)
            targets = (
                (CRITERION_POINTWISE, budget_pointwise(params, d0, rho),
                 remark_budget_pointwise(params.sigma_hat, params.lipschitz, lambda1, d0, rho)),
                (CRITERION_ERGODIC, budget_ergodic(params, d0, rho),
                 remark_budget_ergodic(params.sigma_hat, params.lipschitz, lambda1, d0, rho)),
            )
            for criterion, budget, remark in targets:
                if budget > remark:
                    report.fail('{!r}: exact-τ {} budget {} exceeds closed form {}'.format(
                        problem, criterion, budget, remark,
                    ))
                what = '{} at ρ = {}'.format(criterion, rho)
                try:
                    result = run(problem, params, rho, min(budget, cap), x0=x0, stop_on=(criterion,),
                                 max_inner=max_inner)
                except SubproblemError as exc:
                    _stopped_by_subproblem(report, problem, exc, what)
                    continue
                reached = (result.first_pointwise_k if criterion == CRITERION_POINTWISE
                           else result.first_ergodic_k)
                if reached is not None:
                    report.checked += 1
                    report.observe('{}_ratio'.format(criterion), reached / float(budget))
                    if reached > budget:
                        report.fail('{!r}: {} success at {} beyond its budget {}'.format(
                            problem, what, reached, budget,
                        ))
                elif result.criterion == CRITERION_FLOOR:
                    report.skip('{!r}: {} ended at the rounding floor after {} iterations'.format(
                        problem, what, result.iterations,
                    ))
                elif budget <= cap:
                    report.checked += 1
                    report.fail('{!r}: no {} success within its budget {}'.format(problem, what, budget))
                else:
                    report.skip('{!r}: {} budget {} is above the cap {}'.format(problem, what, budget, cap))
    return report


def _random_instance(problem, rng, lam_range):
    lam = 10.0 ** rng.uniform(*lam_range)
    anchor = problem.project(rng.standard_normal(problem.dim))
    center = problem.project(anchor + 0.5 * rng.standard_normal(problem.dim))
    return SubproblemInstance(problem, lam, anchor=anchor, center=center)


def check_subproblems(seed=0, samples=100, sigma_hat=SIGMA_HAT):
    report = CheckReport('subproblem')
    rng = np.random.default_rng(seed)
    unconstrained = [make_problem('cubic', 10, seed=seed), make_problem('affine', 20, seed=seed)]
    box = make_problem('box', 20, seed=seed)
    for backend, problems, lam_range in ((BACKEND_DIRECT, unconstrained, (-2.0, 3.0)),
                                         (BACKEND_KRYLOV, unconstrained, (-2.0, 3.0)),
                                         (BACKEND_TSENG, [box], (-2.0, 1.0))):
        for i in range(samples):
            problem = problems[i % len(problems)]
            instance = _random_instance(problem, rng, lam_range)
            solution = solve_subproblem(instance, backend, sigma_hat)
            holds, residual, bound = verify_solution(instance, solution, sigma_hat)
            report.checked += 1
            report.observe('{}_relative_error'.format(backend), residual / bound if bound > 0 else 0.0)
            if not holds:
                report.fail('{} instance {}: ‖e‖ {:.3e} > {:.3e}'.format(backend, i, residual, bound))
            if backend == BACKEND_TSENG:
                lipschitz_k = instance.lam * operator_norm_estimate(problem, instance.anchor) + 1.0
                j_hat = tseng_iteration_bound(1.0 / (2.0 * lipschitz_k), lipschitz_k, sigma_hat)
                report.observe('tseng_iterations_over_bound', solution.inner_iterations / float(j_hat))
                if solution.inner_iterations > 2 * j_hat:
                    report.fail('tseng instance {}: {} iterations > 2 × {}'.format(
                        i, solution.inner_iterations, j_hat,
                    ))
    return report


def check_hpe(seed=0, N=200, tau=0.5, eta=1.0):
    problem = make_problem('affine', 20, seed=seed)
    x0 = initial_point(problem.dim, seed)
    d0 = float(np.linalg.norm(x0 - problem.known_solution))
    oracle = exact_resolvent_oracle(problem, eta)
    result = hpe_run(problem, oracle, tau=tau, sigma=0.0, eta=eta, x0=x0, N=N, d0=d0)
    return result.bounds


def check_ergodic(seed=0, length=10000, dim=10, rtol=1e-8):
    """
    The streaming ergodic triple against the direct evaluation, on points
    w = F(y) of a monotone affine operator.
    """
    report = CheckReport('ergodic')
    rng = np.random.default_rng(seed)
    problem = make_problem('affine', dim, seed=seed)
    lams = 10.0 ** rng.uniform(-2.0, 2.0, length)
    ys = rng.standard_normal((length, dim))
    ws = np.array([problem.F(y) for y in ys])
    accumulator = ErgodicAccumulator(dim)
    for lam, y, w in zip(lams, ys, ws):
        accumulator.update(lam, y, w)
    streamed = accumulator.certificate()
    direct = ergodic_direct(lams, ys, ws)
    report.checked = length
    error = abs(streamed.eps_a - direct.eps_a) / abs(direct.eps_a)
    report.observe('eps_relative', error)
    report.observe('y_relative', np.linalg.norm(streamed.y_a - direct.y_a) / (1.0 + np.linalg.norm(direct.y_a)))
    report.observe('v_relative', np.linalg.norm(streamed.v_a - direct.v_a) / (1.0 + np.linalg.norm(direct.v_a)))
    for key, value in sorted(report.maxima.items()):
        if value > rtol:
            report.fail('{} = {:.3e} above {:.0e}'.format(key, value, rtol))
    if direct.eps_a < 0:
        report.fail('negative ε = {:.3e} for a monotone operator'.format(direct.eps_a))
    return report


SUITES = {
    'params': check_params,
    'invariants': check_invariants,
    'rates': check_rates,
    'budgets': check_budgets,
    'subproblem': check_subproblems,
    'hpe': check_hpe,
    'ergodic': check_ergodic,
}


def run_suites(selector, seed=0):
    """
    Run the suite named by `selector`, or every suite for 'all'.
    """
    if selector == 'all':
        names = sorted(SUITES)
    elif selector in SUITES:
        names = [selector]
    else:
        raise ParameterError('Unknown suite {!r}; choose from all, {}'.format(
            selector, ', '.join(sorted(SUITES)),
        ))
    reports = []
    for name in names:
        logger.info('Running the %s suite', name)
        reports.append(SUITES[name](seed=seed))
    return reports
