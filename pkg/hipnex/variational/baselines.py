import logging
import math
import time

import numpy as np

from ..exceptions import OracleError, ParameterError, SearchExhausted
from .algorithm import PointwiseCertificate, RunResult, check_rates
from .core import as_point, check_normal_cone, default_tol, rounding_noise
from .costs import CostCounter
from .defaults import (
    BACKEND_AUTO,
    BACKEND_DIRECT,
    BACKEND_KRYLOV,
    CRITERION_EXACT,
    CRITERION_MAX_ITER,
    CRITERION_POINTWISE,
    NPE_MAX_TRIALS,
    NPE_SIGMA_L,
    NPE_SIGMA_U,
    FLOOR_FACTOR,
    RETURN_TOL,
    ROUNDING_MARGIN,
    SIGMA_HAT,
    STEP_LARGE,
)
from .ergodic import ErgodicAccumulator
from .subproblem import SubproblemInstance, choose_backend, solve_subproblem
from .trace import IterationRecord, Trace


logger = logging.getLogger(__name__)


def hpe_run(problem, oracle, tau, sigma, eta, x0, N, d0=None, large_step=True,
            rho=None):
    """
    Large-step under-relaxed HPE: for k = 1..N ask the oracle for
    (λ_k, y_k, ν_k), check the relative-error and large-step conditions and
    set x_k = x_{k-1} - τλ_k(F(y_k) + ν_k). The ergodic averages run over
    all iterations. With `large_step=False` the large-step condition is not
    enforced (τ = 1 then gives the plain HPE method).

    When `d0` is given, the result's `bounds` holds the convergence-rate
    report; when `rho` is given, the run stops at the first y_k with
    ‖F(y_k) + ν_k‖ <= ρ. An oracle returns None when x_{k-1} already solves
    the problem to working precision, which ends the run as 'exact'.

    The relative-error test allows ROUNDING_MARGIN times λ times the
    rounding error of F(y_k) + ν_k on top of σ‖y_k - x_{k-1}‖.
    """
    if not 0.0 < tau <= 1.0:
        raise ParameterError('τ must lie in (0, 1], got {}'.format(tau))
    if not 0.0 <= sigma < 1.0:
        raise ParameterError('σ must lie in [0, 1), got {}'.format(sigma))
    if not eta > 0:
        raise ParameterError('η must be positive, got {}'.format(eta))
    costs = CostCounter()
    metered = problem.metered(costs)
    x = as_point(x0, problem.dim, 'x0')
    accumulator = ErgodicAccumulator(problem.dim)
    trace = Trace()
    started = time.monotonic()
    best = None
    criterion = CRITERION_MAX_ITER
    first_pointwise_k = None

    for k in range(1, int(N) + 1):
        answer = oracle(x)
        if answer is None:
            logger.info('HPE oracle reports x solves the problem at iteration %d', k)
            criterion = CRITERION_EXACT
            break
        lam, y, nu = answer
        y = as_point(y, problem.dim, 'y')
        nu = as_point(nu, problem.dim, 'nu')
        if not lam > 0:
            raise OracleError('Iteration {}: oracle returned λ = {}'.format(k, lam))
        if not check_normal_cone(problem, y, nu):
            raise OracleError('Iteration {}: ν is not in the normal cone at y'.format(k))
        fy = metered.F(y)
        w = fy + nu
        distance = np.linalg.norm(y - x)
        error = np.linalg.norm(lam * w + y - x)
        allowance = default_tol(np.linalg.norm(x)) + ROUNDING_MARGIN * lam * rounding_noise(metered, y, fy, nu)
        if error > sigma * distance + allowance:
            raise OracleError('Iteration {}: relative error {:.3e} exceeds σ‖y - x‖ = {:.3e}'.format(
                k, error, sigma * distance,
            ))
        if large_step and lam * distance < eta * (1.0 - 1e-12):
            raise OracleError('Iteration {}: λ‖y - x‖ = {:.3e} below η = {:.3e}'.format(
                k, lam * distance, eta,
            ))
        x_prev = x
        x = x_prev - tau * lam * w
        certificate = accumulator.update(lam, y, w).certificate()
        residual_norm = float(np.linalg.norm(w))
        trace.append(IterationRecord(
            k=k,
            lam=lam,
            lam_next=None,
            step_class=STEP_LARGE,
            solved=True,
            residual_norm=residual_norm,
            invariant_a=None,
            invariant_b=None,
            step_length=float(lam * distance),
            inner_iterations=0,
            linear_solves=0,
            costs=costs.snapshot(),
            wall_time_s=time.monotonic() - started,
            a_count=k,
            b_count=0,
            ergodic_v_norm=certificate.v_norm,
            ergodic_eps=certificate.eps_a,
            x_prev=x_prev,
            x=x,
            y=y,
            w=w,
        ))
        if best is None or residual_norm < best.residual_norm:
            best = PointwiseCertificate(y, nu, residual_norm, k)
        if rho is not None and residual_norm <= rho:
            criterion = CRITERION_POINTWISE
            first_pointwise_k = k
            break

    bounds = None
    if d0 is not None and large_step:
        bounds = check_rates(trace, tau, sigma, eta, d0, name='hpe_rates')
    result = RunResult(
        method='hpe',
        criterion=criterion,
        solution=x if criterion == CRITERION_EXACT or best is None else best.y,
        nu=np.zeros_like(x) if criterion == CRITERION_EXACT or best is None else best.nu,
        pointwise=best,
        ergodic=accumulator.certificate() if len(accumulator) else None,
        trace=trace,
        costs=costs,
        iterations=len(trace),
        time_s=time.monotonic() - started,
        final_residual=trace.last.residual_norm if len(trace) else None,
        first_pointwise_k=first_pointwise_k,
        bounds=bounds,
    )
    return result


def exact_resolvent_oracle(problem, eta, lam0=1.0, max_doublings=200):
    """
    HPE oracle for affine problems on the whole space: y = (λM + I)⁻¹(x - λq)
    with ν = 0, doubling λ until λ‖y - x‖ >= η. The last accepted λ is
    where the next search starts. Returns None once ‖F(x)‖ is within
    FLOOR_FACTOR times its rounding error, where no λ can give a large step.
    """
    resolvent = getattr(problem.spec, 'resolvent', None)
    if resolvent is None:
        raise ParameterError('{!r} has no exact resolvent'.format(problem))
    if not problem.is_unconstrained:
        raise ParameterError('The exact resolvent oracle needs C to be the whole space')
    state = {'lam': float(lam0)}

    def oracle(x):
        fx = problem.F(x)
        if np.linalg.norm(fx) <= FLOOR_FACTOR * rounding_noise(problem, x, fx):
            return None
        lam = state['lam']
        for _ in range(max_doublings):
            y = resolvent(lam, x)
            if lam * np.linalg.norm(y - x) >= eta:
                state['lam'] = lam
                return lam, y, np.zeros_like(y)
            lam *= 2.0
        raise OracleError('No λ up to {:.3e} gives a large step; x is (nearly) a solution'.format(lam))
    return oracle


class NpeConfig(object):
    """
    Search settings of the Newton proximal extragradient baseline. Accepted
    λ satisfy 2σ_l/L <= λ‖y - x‖ <= 2σ_u/L.
    """
    def __init__(self, sigma_l=NPE_SIGMA_L, sigma_u=NPE_SIGMA_U,
                 max_trials=NPE_MAX_TRIALS, sigma_hat=SIGMA_HAT,
                 backend=BACKEND_AUTO, lambda0=None):
        self.sigma_l = sigma_l
        self.sigma_u = sigma_u
        self.max_trials = max_trials
        self.sigma_hat = sigma_hat
        self.backend = backend
        self.lambda0 = lambda0

    def __repr__(self):
        return '<NpeConfig: σ_l {} | σ_u {} | trials {} | σ̂ {} | {}>'.format(
            self.sigma_l,
            self.sigma_u,
            self.max_trials,
            self.sigma_hat,
            self.backend,
        )

    def __eq__(self, other):
        if not isinstance(other, NpeConfig):
            return False
        return all((
            self.sigma_l == other.sigma_l,
            self.sigma_u == other.sigma_u,
            self.max_trials == other.max_trials,
            self.sigma_hat == other.sigma_hat,
            self.backend == other.backend,
            self.lambda0 == other.lambda0,
            ))

    def __ne__(self, other):
        return not self.__eq__(other)

    def validate(self):
        if not 0.0 < self.sigma_l < self.sigma_u < 1.0:
            raise ParameterError('NPE needs 0 < σ_l < σ_u < 1, got {} and {}'.format(
                self.sigma_l, self.sigma_u,
            ))
        if self.max_trials < 1:
            raise ParameterError('max_trials must be positive')
        if not 0.0 <= self.sigma_hat < 0.5:
            raise ParameterError('σ̂ must lie in [0, 1/2), got {}'.format(self.sigma_hat))
        if self.backend not in (BACKEND_AUTO, BACKEND_DIRECT, BACKEND_KRYLOV):
            raise ParameterError('NPE supports the direct and krylov back-ends, got {!r}'.format(
                self.backend,
            ))
        if self.lambda0 is not None and not self.lambda0 > 0:
            raise ParameterError('λ₀ must be positive')
        return self


class LambdaSearch(object):
    """
    Doubling/halving from the previous λ until the bracket is hit or
    overshot, then bisection in log scale.
    """
    def __init__(self, trial, lower, upper, max_trials):
        self.trial = trial
        self.lower = lower
        self.upper = upper
        self.max_trials = max_trials
        self.trials = 0

    def _evaluate(self, lam):
        if self.trials >= self.max_trials:
            raise SearchExhausted('No λ met the bracket within {} trials'.format(self.max_trials))
        self.trials += 1
        solution = self.trial(lam)
        return solution, lam * solution.step_norm

    def search(self, lam):
        solution, value = self._evaluate(lam)
        if self.lower <= value <= self.upper:
            return lam, solution
        too_small = value < self.lower
        factor = 2.0 if too_small else 0.5
        while True:
            previous = lam
            lam *= factor
            solution, value = self._evaluate(lam)
            if self.lower <= value <= self.upper:
                return lam, solution
            if (value < self.lower) != too_small:
                break
        lo, hi = (previous, lam) if too_small else (lam, previous)
        while True:
            lam = math.sqrt(lo * hi)
            solution, value = self._evaluate(lam)
            if self.lower <= value <= self.upper:
                return lam, solution
            if value < self.lower:
                lo = lam
            else:
                hi = lam


def npe_run(problem, config, x0, rho, max_iter):
    """
    Newton proximal extragradient with a λ search: each iteration solves the
    subproblem linearized at x_{k-1} for trial values of λ until
    λ‖y - x_{k-1}‖ falls in [2σ_l/L, 2σ_u/L], then sets
    x_k = x_{k-1} - λF(y). Every trial's linear solve is counted.
    """
    config.validate()
    if not rho > 0:
        raise ParameterError('ρ must be positive, got {}'.format(rho))
    backend = config.backend
    if backend == BACKEND_AUTO:
        backend = choose_backend(problem)
    if backend not in (BACKEND_DIRECT, BACKEND_KRYLOV):
        raise ParameterError('NPE needs C to be the whole space')
    costs = CostCounter()
    metered = problem.metered(costs)
    x = as_point(x0, problem.dim, 'x0')
    lower = 2.0 * config.sigma_l / problem.lipschitz
    upper = 2.0 * config.sigma_u / problem.lipschitz
    accumulator = ErgodicAccumulator(problem.dim)
    trace = Trace()
    started = time.monotonic()
    fx = metered.F(x)
    lam = config.lambda0
    if lam is None:
        norm_fx = np.linalg.norm(fx)
        lam = math.sqrt(math.sqrt(lower * upper) / norm_fx) if norm_fx > 0 else 1.0
    best = None
    criterion = CRITERION_MAX_ITER
    first_pointwise_k = None
    k = 0
    logger.info('Running npe on %r with %r', problem, config)

    while k < max_iter:
        if np.linalg.norm(fx) <= RETURN_TOL * (1.0 + np.linalg.norm(fx)):
            criterion = CRITERION_EXACT
            best = PointwiseCertificate(x, np.zeros_like(x), float(np.linalg.norm(fx)), k)
            break
        k += 1
        before = costs.snapshot()
        anchor, f_anchor = x, fx

        def trial(value):
            instance = SubproblemInstance(metered, value, anchor=anchor, center=anchor, f_anchor=f_anchor)
            solution = solve_subproblem(instance, backend, config.sigma_hat)
            costs.linear_solves += solution.linear_solves
            costs.inner_iterations += solution.inner_iterations
            return solution

        search = LambdaSearch(trial, lower, upper, config.max_trials)
        lam, solution = search.search(lam)
        y = solution.y
        fy = metered.F(y)
        x = anchor - lam * fy
        fx = metered.F(x)
        certificate = accumulator.update(lam, y, fy).certificate()
        residual_norm = float(np.linalg.norm(fy))
        spent = costs - before
        trace.append(IterationRecord(
            k=k,
            lam=lam,
            lam_next=lam,
            step_class=STEP_LARGE,
            solved=True,
            residual_norm=residual_norm,
            invariant_a=None,
            invariant_b=None,
            step_length=float(lam * solution.step_norm),
            inner_iterations=spent.inner_iterations,
            linear_solves=spent.linear_solves,
            costs=costs.snapshot(),
            wall_time_s=time.monotonic() - started,
            a_count=k,
            b_count=0,
            ergodic_v_norm=certificate.v_norm,
            ergodic_eps=certificate.eps_a,
        ))
        logger.debug('NPE iteration %d: λ %.3e after %d trials, residual %.3e',
                     k, lam, search.trials, residual_norm)
        if best is None or residual_norm < best.residual_norm:
            best = PointwiseCertificate(y, np.zeros_like(y), residual_norm, k)
        if residual_norm <= rho:
            criterion = CRITERION_POINTWISE
            first_pointwise_k = k
            break

    if criterion == CRITERION_MAX_ITER:
        logger.warning('npe reached max_iter = %d without meeting ρ = %g', max_iter, rho)
    result = RunResult(
        method='npe',
        criterion=criterion,
        solution=best.y if best is not None else x,
        nu=best.nu if best is not None else np.zeros_like(x),
        pointwise=best,
        ergodic=accumulator.certificate() if len(accumulator) else None,
        trace=trace,
        costs=costs,
        iterations=k,
        time_s=time.monotonic() - started,
        final_residual=trace.last.residual_norm if len(trace) else float(np.linalg.norm(fx)),
        first_pointwise_k=first_pointwise_k,
    )
    logger.info('%r', result)
    return result
