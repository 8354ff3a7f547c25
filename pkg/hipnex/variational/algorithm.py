import logging
import math
import time

import numpy as np

from ..exceptions import (
    BudgetExhausted,
    InvalidState,
    InvariantViolation,
    ParameterError,
    SubproblemError,
)
from .core import as_point, rounding_noise
from .costs import CostCounter
from .defaults import (
    BACKEND_AUTO,
    CRITERION_ERGODIC,
    CRITERION_EXACT,
    CRITERION_FLOOR,
    CRITERION_MAX_ITER,
    CRITERION_POINTWISE,
    FLOOR_FACTOR,
    INVARIANT_SLACK,
    LAMBDA_LAW_RTOL,
    RETURN_TOL,
    STEP_LARGE,
    STEP_RETURN,
    STEP_SKIP,
    STEP_SMALL,
)
from .ergodic import ErgodicAccumulator
from .params import init_lambda
from .subproblem import SubproblemInstance, solve_subproblem
from .trace import CheckReport, IterationRecord, Trace


logger = logging.getLogger(__name__)


def _scaled_residual(lam, lipschitz, w, y, x):
    return 0.5 * lam * lipschitz * np.linalg.norm(lam * w + y - x)


def invariant_a(params, lam, w_prev, y_prev, x_prev):
    """(λ_k L/2)‖λ_k(F(y_{k-1}) + ν_{k-1}) + y_{k-1} - x_{k-1}‖, also the skip test."""
    return _scaled_residual(lam, params.lipschitz, w_prev, y_prev, x_prev)


def invariant_b(params, lam, w, y, x_prev):
    """(λ_k L/2)‖λ_k(F(y_k) + ν_k) + y_k - x_{k-1}‖."""
    return _scaled_residual(lam, params.lipschitz, w, y, x_prev)


def lambda_law(params, lambda1, a_count, b_count):
    return (1.0 - params.tau) ** (a_count - b_count) * lambda1


def small_step_bound(params, lam):
    return params.log_term_numerator / lam ** 2


# Below this relative size, F(y) + ν is compared with its rounding error.
_NEAR_ROUNDING = math.sqrt(np.finfo(float).eps)


def noise_level(problem, y, fy, nu):
    """
    Rounding error of F(y) + ν when it is small enough for rounding to
    matter, else 0.
    """
    w = fy + nu
    if np.linalg.norm(w) > _NEAR_ROUNDING * (1.0 + np.linalg.norm(fy) + np.linalg.norm(nu)):
        return 0.0
    return rounding_noise(problem, y, fy, nu)


class SolverState(object):
    def __init__(self, k, x, y, nu, lam, a_count, b_count, fy, lambda1,
                 record=None, noise=0.0):
        self.k = k
        self.x = x
        self.y = y
        self.nu = nu
        self.lam = lam
        self.a_count = a_count
        self.b_count = b_count
        self.fy = fy
        self.lambda1 = lambda1
        self.record = record
        self.noise = noise

    def __repr__(self):
        return '<SolverState {}: λ {:.3e} | a {} | b {}>'.format(
            self.k,
            self.lam,
            self.a_count,
            self.b_count,
        )

    @property
    def w(self):
        return self.fy + self.nu

    @property
    def residual_norm(self):
        return float(np.linalg.norm(self.w))


class Terminated(object):
    """
    Returned by `step` when F(y_{k-1}) + ν_{k-1} vanishes ('exact') or has
    reached the rounding floor of its evaluation ('floor'). `record` is the
    RETURN row of iteration k.
    """
    def __init__(self, y, nu, k, record=None, criterion=CRITERION_EXACT):
        self.y = y
        self.nu = nu
        self.k = k
        self.record = record
        self.criterion = criterion

    def __repr__(self):
        return '<Terminated at {}: {}>'.format(self.k, self.criterion)


class InvariantMonitor(object):
    """
    Checks invariants A and B, the λ law and the small-step residual bound
    after every iteration. Breaches raise InvariantViolation in strict mode
    and are logged otherwise.

    Near the rounding floor the invariant bounds are widened by
    (λL/2)·λ·noise, the part of (λL/2)‖λw + y - x‖ that rounding of w alone
    can produce.
    """
    def __init__(self, params, strict=False):
        self.params = params
        self.strict = strict
        self.slack = INVARIANT_SLACK * (1.0 + params.theta)
        self.breaches = []

    def __repr__(self):
        return '<InvariantMonitor: {} | {} breaches>'.format(
            'strict' if self.strict else 'lenient',
            len(self.breaches),
        )

    def _breach(self, k, name, value, bound):
        message = 'Iteration {}: {} = {!r} exceeds {!r}'.format(k, name, value, bound)
        self.breaches.append((k, name, value, bound))
        if self.strict:
            raise InvariantViolation(message, name=name, value=value, bound=bound)
        logger.warning(message)

    def slack_for(self, record):
        return self.slack + 0.5 * self.params.lipschitz * record.lam ** 2 * record.noise

    def check(self, k, record, lambda1):
        p = self.params
        slack = self.slack_for(record)
        if record.invariant_a > p.theta + slack:
            self._breach(k, 'invariant_a', record.invariant_a, p.theta)
        if record.invariant_b > p.theta_hat + slack:
            self._breach(k, 'invariant_b', record.invariant_b, p.theta_hat)
        expected = lambda_law(p, lambda1, record.a_count, record.b_count)
        if abs(record.lam_next - expected) > LAMBDA_LAW_RTOL * record.lam_next:
            self._breach(k, 'lambda_law', record.lam_next, expected)
        if not record.is_large:
            bound = small_step_bound(p, record.lam)
            if record.residual_norm > bound * (1.0 + INVARIANT_SLACK) + self.slack + record.noise:
                self._breach(k, 'small_step_residual', record.residual_norm, bound)


def initial_state(problem, params, x0):
    """
    State before the first iteration: y₀ = x₀, ν₀ = 0 and λ₁ from the pack,
    or the largest admissible value when the pack has none.
    """
    fy = problem.F(x0)
    norm_fy = float(np.linalg.norm(fy))
    if params.lambda1 is None:
        lambda1 = init_lambda(norm_fy, params.theta, params.lipschitz)
    else:
        if not params.admits_lambda1(norm_fy):
            raise ParameterError('λ₁ = {} violates λ₁²‖F(y₀)‖ <= 2θ/L'.format(params.lambda1))
        lambda1 = params.lambda1
    nu = np.zeros_like(x0)
    return SolverState(
        k=0,
        x=x0,
        y=x0.copy(),
        nu=nu,
        lam=lambda1,
        a_count=0,
        b_count=0,
        fy=fy,
        lambda1=lambda1,
        noise=noise_level(problem, x0, fy, nu),
    )


def _return_record(state, params, k, costs, started):
    value = invariant_a(params, state.lam, state.w, state.y, state.x)
    return IterationRecord(
        k=k,
        lam=state.lam,
        lam_next=state.lam,
        step_class=STEP_RETURN,
        solved=False,
        residual_norm=state.residual_norm,
        invariant_a=float(value),
        invariant_b=float(value),
        step_length=float(state.lam * np.linalg.norm(state.y - state.x)),
        inner_iterations=0,
        linear_solves=0,
        costs=costs.snapshot() if costs is not None else CostCounter(),
        wall_time_s=(time.monotonic() - started) if started is not None else 0.0,
        a_count=state.a_count,
        b_count=state.b_count,
        noise=state.noise,
    )


def step(state, problem, params, backend=BACKEND_AUTO, monitor=None,
         accumulator=None, keep_points=False, started=None, **solver_options):
    """
    One iteration: the return test, then either the skip branch or a
    subproblem solve, then the large or small step. Returns the next
    SolverState (with its IterationRecord attached) or Terminated.
    """
    k = state.k + 1
    lam = state.lam
    w_prev = state.w
    costs = getattr(problem, 'costs', None)
    w_prev_norm = np.linalg.norm(w_prev)
    scale = 1.0 + np.linalg.norm(state.fy) + np.linalg.norm(state.nu)
    if w_prev_norm <= RETURN_TOL * scale:
        logger.debug('F(y) + ν vanished at iteration %d', k)
        return Terminated(state.y, state.nu, k, _return_record(state, params, k, costs, started))
    if w_prev_norm <= FLOOR_FACTOR * state.noise:
        logger.info('‖F(y) + ν‖ = %.3e is at the rounding floor %.3e at iteration %d',
                    w_prev_norm, state.noise, k)
        return Terminated(state.y, state.nu, k, _return_record(state, params, k, costs, started),
                          criterion=CRITERION_FLOOR)

    value_a = invariant_a(params, lam, w_prev, state.y, state.x)
    inner_iterations = 0
    linear_solves = 0
    if value_a <= params.theta_hat:
        solved = False
        y, nu, fy, noise = state.y, state.nu, state.fy, state.noise
    else:
        solved = True
        instance = SubproblemInstance(problem, lam, anchor=state.y, center=state.x, f_anchor=state.fy)
        solution = solve_subproblem(instance, backend, params.sigma_hat, **solver_options)
        inner_iterations = solution.inner_iterations
        linear_solves = solution.linear_solves
        if costs is not None:
            costs.linear_solves += linear_solves
            costs.inner_iterations += inner_iterations
        y, nu = solution.y, solution.nu
        fy = problem.F(y)
        noise = noise_level(problem, y, fy, nu)

    w = fy + nu
    value_b = invariant_b(params, lam, w, y, state.x)
    step_length = lam * np.linalg.norm(y - state.x)
    ergodic_v_norm = ergodic_eps = None
    if step_length >= params.eta:
        step_class = STEP_LARGE
        x = state.x - params.tau * lam * w
        lam_next = (1.0 - params.tau) * lam
        a_count, b_count = state.a_count + 1, state.b_count
        if accumulator is not None:
            certificate = accumulator.update(lam, y, w).certificate()
            ergodic_v_norm = certificate.v_norm
            ergodic_eps = certificate.eps_a
    else:
        step_class = STEP_SMALL if solved else STEP_SKIP
        x = state.x
        lam_next = lam / (1.0 - params.tau)
        a_count, b_count = state.a_count, state.b_count + 1

    record = IterationRecord(
        k=k,
        lam=lam,
        lam_next=lam_next,
        step_class=step_class,
        solved=solved,
        residual_norm=float(np.linalg.norm(w)),
        invariant_a=float(value_a),
        invariant_b=float(value_b),
        step_length=float(step_length),
        inner_iterations=inner_iterations,
        linear_solves=linear_solves,
        costs=costs.snapshot() if costs is not None else CostCounter(),
        wall_time_s=(time.monotonic() - started) if started is not None else 0.0,
        a_count=a_count,
        b_count=b_count,
        ergodic_v_norm=ergodic_v_norm,
        ergodic_eps=ergodic_eps,
        noise=max(state.noise, noise),
    )
    if keep_points:
        record.x_prev = state.x
        record.x = x
        record.y = y
        record.w = w
    logger.debug('%r', record)
    if monitor is not None:
        monitor.check(k, record, state.lambda1)
    return SolverState(
        k=k,
        x=x,
        y=y,
        nu=nu,
        lam=lam_next,
        a_count=a_count,
        b_count=b_count,
        fy=fy,
        lambda1=state.lambda1,
        record=record,
        noise=noise,
    )


class PointwiseCertificate(object):
    def __init__(self, y, nu, residual_norm, k):
        self.y = y
        self.nu = nu
        self.residual_norm = residual_norm
        self.k = k

    def __repr__(self):
        return '<PointwiseCertificate {}: residual {:.3e}>'.format(self.k, self.residual_norm)


class RunResult(object):
    """
    Outcome of a solver run. `criterion` names what stopped it: 'pointwise',
    'ergodic', 'exact' (F(y) + ν vanished), 'floor' (F(y) + ν stopped at the
    rounding error of its evaluation, above ρ) or 'max_iter'. The trace has
    one row per iteration, the RETURN row of a terminated run included.
    """
    def __init__(self, method, criterion, solution, nu, pointwise, ergodic,
                 trace, costs, iterations, time_s, final_residual,
                 first_pointwise_k=None, first_ergodic_k=None, params=None,
                 ergodic_all=None, monitor=None, bounds=None):
        self.method = method
        self.criterion = criterion
        self.solution = solution
        self.nu = nu
        self.pointwise = pointwise
        self.ergodic = ergodic
        self.trace = trace
        self.costs = costs
        self.iterations = iterations
        self.time_s = time_s
        self.final_residual = final_residual
        self.first_pointwise_k = first_pointwise_k
        self.first_ergodic_k = first_ergodic_k
        self.params = params
        self.ergodic_all = ergodic_all
        self.monitor = monitor
        self.bounds = bounds

    def __repr__(self):
        return '<RunResult {}: {} after {} iterations | {!r}>'.format(
            self.method,
            self.criterion,
            self.iterations,
            self.costs,
        )

    @property
    def converged(self):
        return self.criterion not in (CRITERION_MAX_ITER, CRITERION_FLOOR)

    def raise_for_status(self):
        if not self.converged:
            raise BudgetExhausted(
                '{} stopped ({}) after {} iterations without meeting the tolerance'.format(
                    self.method, self.criterion, self.iterations,
                )
            )
        return self


def _start_point(problem, x0):
    if x0 is None:
        return problem.project(np.zeros(problem.dim))
    x0 = as_point(x0, problem.dim, 'x0')
    if not problem.projection.contains(x0):
        raise ParameterError('x0 must lie in C')
    return x0


def run(problem, params, rho, max_iter, backend=BACKEND_AUTO, x0=None,
        strict=False, stop_on=(CRITERION_POINTWISE, CRITERION_ERGODIC),
        keep_points=False, track_all=False, **solver_options):
    """
    Iterate `step` until ‖F(y_k) + ν_k‖ <= ρ, the ergodic measure
    max{‖v^a‖, ε^a} <= ρ (criteria not listed in `stop_on` are recorded but
    do not stop the run), F(y) + ν vanishes or sinks to the rounding error of
    its evaluation, or `max_iter` iterations have been spent.
    """
    if not rho > 0:
        raise ParameterError('ρ must be positive, got {}'.format(rho))
    if max_iter < 0:
        raise ParameterError('max_iter must be nonnegative')
    costs = CostCounter()
    metered = problem.metered(costs)
    x0 = _start_point(problem, x0)
    state = initial_state(metered, params, x0)
    params = params.with_lambda1(state.lambda1)
    monitor = InvariantMonitor(params, strict=strict)
    accumulator = ErgodicAccumulator(problem.dim)
    accumulator_all = ErgodicAccumulator(problem.dim) if track_all else None
    trace = Trace()
    started = time.monotonic()
    best = None
    first_pointwise_k = first_ergodic_k = None
    criterion = CRITERION_MAX_ITER
    solution, nu = None, None

    logger.info('Running hipnex on %r: ρ %g, max_iter %d, backend %s', problem, rho, max_iter, backend)
    while state.k < max_iter:
        try:
            outcome = step(
                state, metered, params,
                backend=backend,
                monitor=monitor,
                accumulator=accumulator,
                keep_points=keep_points,
                started=started,
                **solver_options
            )
        except SubproblemError as exc:
            logger.error('Subproblem failed at iteration %d: %s', state.k + 1, exc)
            exc.diagnostics.setdefault('iteration', state.k + 1)
            raise
        if isinstance(outcome, Terminated):
            criterion = outcome.criterion
            solution, nu = outcome.y, outcome.nu
            if best is None or state.residual_norm <= best.residual_norm:
                best = PointwiseCertificate(outcome.y, outcome.nu, state.residual_norm, outcome.k)
            trace.append(outcome.record)
            state.k = outcome.k
            break
        state = outcome
        record = state.record
        trace.append(record)
        if accumulator_all is not None:
            accumulator_all.update(record.lam, state.y, state.w)
        if best is None or record.residual_norm < best.residual_norm:
            best = PointwiseCertificate(state.y, state.nu, record.residual_norm, state.k)
        if record.residual_norm <= rho and first_pointwise_k is None:
            first_pointwise_k = state.k
            if CRITERION_POINTWISE in stop_on:
                criterion = CRITERION_POINTWISE
                solution, nu = state.y, state.nu
                break
        if record.is_large and first_ergodic_k is None:
            if max(record.ergodic_v_norm, record.ergodic_eps) <= rho:
                first_ergodic_k = state.k
                if CRITERION_ERGODIC in stop_on:
                    criterion = CRITERION_ERGODIC
                    certificate = accumulator.certificate()
                    solution, nu = certificate.y_a, None
                    break

    if criterion == CRITERION_FLOOR:
        logger.warning('hipnex stopped at the rounding floor after %d iterations without meeting ρ = %g',
                       state.k, rho)
    if criterion == CRITERION_MAX_ITER:
        logger.warning('hipnex reached max_iter = %d without meeting ρ = %g', max_iter, rho)
        if best is not None:
            solution, nu = best.y, best.nu
        else:
            solution, nu = state.y, state.nu
    ergodic = accumulator.certificate() if len(accumulator) else None
    ergodic_all = accumulator_all.certificate() if accumulator_all is not None and len(accumulator_all) else None
    final_residual = trace.last.residual_norm if len(trace) else state.residual_norm
    result = RunResult(
        method='hipnex',
        criterion=criterion,
        solution=solution,
        nu=nu,
        pointwise=best,
        ergodic=ergodic,
        trace=trace,
        costs=costs,
        iterations=state.k,
        time_s=time.monotonic() - started,
        final_residual=final_residual,
        first_pointwise_k=first_pointwise_k,
        first_ergodic_k=first_ergodic_k,
        params=params,
        ergodic_all=ergodic_all,
        monitor=monitor,
    )
    logger.info('%r', result)
    return result


def _relative(excess, scale):
    return max(0.0, excess) / (1.0 + scale)


def check_hpe_subsequence(trace, params, x0=None, tol=1e-8):
    """
    Recompute, for every LARGE iteration of a trace kept with points, the
    relative-error test with σ = 2θ̂/(ηL), the large-step condition, the
    extragradient update and the fact that x stays frozen between LARGE
    iterations. Reports the largest relative violation of each.
    """
    report = CheckReport('hpe_subsequence')
    for key in ('relative_error', 'large_step', 'extragradient', 'frozen_x'):
        report.observe(key, 0.0)
    previous_x = None if x0 is None else np.asarray(x0, dtype=float)
    for record in trace.large_steps():
        if not record.has_points:
            raise InvalidState('The trace was recorded without points')
        report.checked += 1
        lam = record.lam
        distance = np.linalg.norm(record.y - record.x_prev)
        lhs = np.linalg.norm(lam * record.w + record.y - record.x_prev)
        bound = params.sigma * distance
        report.observe('relative_error', _relative(lhs - bound, bound))
        report.observe('large_step', _relative(params.eta - lam * distance, params.eta))
        expected = record.x_prev - params.tau * lam * record.w
        report.observe('extragradient', np.linalg.norm(record.x - expected) / (1.0 + np.linalg.norm(record.x)))
        if previous_x is not None:
            drift = np.linalg.norm(record.x_prev - previous_x)
            report.observe('frozen_x', drift / (1.0 + np.linalg.norm(previous_x)))
        previous_x = record.x
    for key, value in sorted(report.maxima.items()):
        if value > tol:
            report.fail('{} violated by {:.3e}'.format(key, value))
    return report


def rate_bounds(tau, sigma, eta, d0, k):
    """
    (pointwise, ergodic ‖v‖, ergodic ε) upper bounds after k large steps of
    an under-relaxed HPE run.
    """
    pointwise = d0 ** 2 / (tau * eta * (1.0 - sigma) * k)
    denominator = tau ** 1.5 * eta * k ** 1.5
    v_bound = 2.0 * d0 ** 2 / (denominator * math.sqrt(1.0 - sigma ** 2))
    eps_bound = 2.0 * d0 ** 3 / (denominator * (1.0 - sigma ** 2))
    return pointwise, v_bound, eps_bound


def check_rate_bounds(trace, params, d0, floor=1e-10):
    """
    Assert the pointwise and ergodic convergence-rate bounds at every count
    of completed LARGE steps. Maxima are ratios value/bound.
    """
    return check_rates(trace, params.tau, params.sigma, params.eta, d0, floor=floor)


def check_rates(trace, tau, sigma, eta, d0, floor=1e-10, name='rate_bounds'):
    report = CheckReport(name)
    best = np.inf
    for record in trace.large_steps():
        report.checked += 1
        k = record.a_count
        best = min(best, record.residual_norm)
        pointwise, v_bound, eps_bound = rate_bounds(tau, sigma, eta, d0, k)
        checks = (
            ('pointwise', best, pointwise),
            ('ergodic_v', record.ergodic_v_norm, v_bound),
            ('ergodic_eps', record.ergodic_eps, eps_bound),
        )
        for label, value, bound in checks:
            if value is None:
                continue
            report.observe(label, value / bound)
            if value > bound:
                report.fail('{} at k = {}: {:.3e} > {:.3e}'.format(label, k, value, bound))
        if record.ergodic_eps is not None and record.ergodic_eps < -floor * (1.0 + d0 ** 2):
            report.fail('negative ε at k = {}: {:.3e}'.format(k, record.ergodic_eps))
    return report


def enlargement_gap(problem, certificate, rng, samples=100, scale=1.0):
    """
    Sampled necessary condition for v^a ∈ (F + N_C)^ε(y^a): the smallest
    ⟨v - F(z) - u, y - z⟩ + ε over random z ∈ C and u ∈ N_C(z), with u the
    projection residual of a random point. Negative values refute the
    inclusion.
    """
    y, v, eps = certificate.y_a, certificate.v_a, certificate.eps_a
    worst = np.inf
    for _ in range(samples):
        point = y + scale * rng.standard_normal(problem.dim)
        z = problem.project(point)
        u = point - z
        worst = min(worst, float(np.dot(v - problem.F(z) - u, y - z)) + eps)
    return worst
