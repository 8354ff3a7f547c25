import logging
import math

import numpy as np
import scipy.linalg

from ..exceptions import (
    FactorizationError,
    InnerIterationLimit,
    ParameterError,
    reraise,
)
from .core import as_point, check_normal_cone, eval_linearization
from .defaults import (
    BACKEND_AUTO,
    BACKEND_DIRECT,
    BACKEND_KRYLOV,
    BACKEND_TSENG,
    DIRECT_MAX_DIM,
    KRYLOV_MAX_INNER,
    KRYLOV_RESTART,
    NORM_INFLATION,
    NORM_ITERATIONS,
    TSENG_MAX_INNER,
    TSENG_SAFETY_FACTOR,
)
from .krylov import RestartedGmres


logger = logging.getLogger(__name__)


class SubproblemInstance(object):
    """
    The linearized proximal inclusion
    0 ∈ λ(F_anchor(y) + N_C(y)) + y - center.
    """
    def __init__(self, problem, lam, anchor, center, f_anchor=None):
        if not lam > 0:
            raise ParameterError('λ must be positive, got {}'.format(lam))
        self.problem = problem
        self.lam = float(lam)
        self.anchor = as_point(anchor, problem.dim, 'anchor')
        self.center = as_point(center, problem.dim, 'center')
        if f_anchor is None:
            f_anchor = problem.F(self.anchor)
        self.f_anchor = f_anchor

    def __repr__(self):
        return '<SubproblemInstance: λ {}>'.format(self.lam)

    @property
    def offset(self):
        """λF(anchor) + anchor - center, the residual of y = anchor."""
        return self.lam * self.f_anchor + self.anchor - self.center

    def residual(self, y, nu):
        """
        e = λ(F_anchor(y) + ν) + y - center, recomputed from scratch.
        """
        linear = eval_linearization(self.problem, self.anchor, y, f_anchor=self.f_anchor)
        return self.lam * (linear + nu) + y - self.center

    def system_matrix(self):
        jacobian = self.problem.materialize_J(self.anchor)
        return self.lam * jacobian + np.eye(self.problem.dim)

    def operator(self, direction):
        return self.lam * self.problem.apply_J(self.anchor, direction) + direction


class ApproxSolution(object):
    def __init__(self, y, nu, residual_norm, step_norm, inner_iterations=0,
                 linear_solves=0, backend=None):
        self.y = y
        self.nu = nu
        self.residual_norm = residual_norm
        self.step_norm = step_norm
        self.inner_iterations = inner_iterations
        self.linear_solves = linear_solves
        self.backend = backend

    def __repr__(self):
        return '<ApproxSolution {}: residual {:.3e} | step {:.3e} | inner {}>'.format(
            self.backend,
            self.residual_norm,
            self.step_norm,
            self.inner_iterations,
        )

    def satisfies(self, sigma_hat, tol=0.0):
        return self.residual_norm <= sigma_hat * self.step_norm + tol


def _require_unconstrained(instance, backend):
    if not instance.problem.is_unconstrained:
        raise ParameterError(
            'The {} back-end needs C to be the whole space; use tseng'.format(backend)
        )


def solve_direct(instance):
    """
    Solve (λF'(anchor) + I)(y - anchor) = -(λF(anchor) + anchor - center)
    by LU factorization.
    """
    _require_unconstrained(instance, BACKEND_DIRECT)
    matrix = instance.system_matrix()
    rhs = -instance.offset
    try:
        factors = scipy.linalg.lu_factor(matrix, check_finite=True)
        step = scipy.linalg.lu_solve(factors, rhs)
    except (np.linalg.LinAlgError, ValueError):
        reraise(FactorizationError)
    if not np.all(np.isfinite(step)):
        raise FactorizationError(
            'LU solve produced non-finite values',
            diagnostics={'lambda': instance.lam},
        )
    y = instance.anchor + step
    residual = matrix.dot(step) - rhs
    return ApproxSolution(
        y=y,
        nu=np.zeros_like(y),
        residual_norm=float(np.linalg.norm(residual)),
        step_norm=float(np.linalg.norm(step)),
        inner_iterations=0,
        linear_solves=1,
        backend=BACKEND_DIRECT,
    )


def solve_krylov(instance, sigma_hat, max_inner=KRYLOV_MAX_INNER, restart=KRYLOV_RESTART):
    """
    Restarted GMRES on the Newton system, started at y = anchor and stopped
    at the first iterate with
    ‖(λF' + I)(y - anchor) + λF(anchor) + anchor - center‖ <= σ̂‖y - anchor‖.
    The Arnoldi estimate triggers the test; one extra product confirms it.
    """
    _require_unconstrained(instance, BACKEND_KRYLOV)
    if not sigma_hat > 0:
        raise ParameterError('The krylov back-end needs σ̂ > 0; use direct for exact solves')
    rhs = -instance.offset
    confirmations = [0]
    accepted = {}

    def accept(step, resnorm):
        step_norm = np.linalg.norm(step)
        if resnorm > sigma_hat * step_norm:
            return False
        confirmations[0] += 1
        true_norm = np.linalg.norm(instance.operator(step) - rhs)
        if true_norm <= sigma_hat * step_norm:
            accepted['residual'] = true_norm
            accepted['step'] = step_norm
            return True
        return False

    solver = RestartedGmres(instance.operator, rhs, restart=restart, max_products=max_inner)
    step = solver.solve(accept)
    products = solver.products + confirmations[0]
    if not solver.converged:
        best = instance.anchor + step
        raise InnerIterationLimit(
            'GMRES did not meet the relative-error test in {} products'.format(products),
            best=best,
            diagnostics={
                'products': products,
                'last_resnorm': solver.resnorms[-1] if solver.resnorms else None,
                'step_norm': float(np.linalg.norm(step)),
                'lambda': instance.lam,
            },
        )
    y = instance.anchor + step
    return ApproxSolution(
        y=y,
        nu=np.zeros_like(y),
        residual_norm=float(accepted['residual']),
        step_norm=float(accepted['step']),
        inner_iterations=products,
        linear_solves=1,
        backend=BACKEND_KRYLOV,
    )


def operator_norm_estimate(problem, anchor, iters=NORM_ITERATIONS, seed=0):
    """
    Upper estimate of ‖F'(anchor)‖ by power iteration on JᵀJ, inflated by
    a fixed factor. Falls back to the Frobenius norm if the iteration
    breaks down.
    """
    iters = max(1, int(iters))
    jacobian = problem.materialize_J(anchor)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(jacobian.shape[1])
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(iters):
        jv = jacobian.dot(v)
        estimate = np.linalg.norm(jv)
        w = jacobian.T.dot(jv)
        w_norm = np.linalg.norm(w)
        if w_norm == 0.0 or not np.isfinite(w_norm):
            break
        v = w / w_norm
    frobenius = np.linalg.norm(jacobian)
    if not np.isfinite(estimate) or (estimate == 0.0 and frobenius > 0.0):
        logger.debug('Power iteration stagnated; using the Frobenius norm')
        return float(frobenius)
    return float(NORM_INFLATION * estimate)


def tseng_omega(step, lipschitz_k):
    t = 1.0 - step ** 2 * lipschitz_k ** 2
    return 2.0 * step * t / (2.0 * step + t)


def tseng_iteration_bounds(step, lipschitz_k, sigma_hat):
    """
    Return (j*, j**, ĵ): the iteration counts after which the Tseng iterate
    is within half the initial distance of the solution, its residual is
    below σ̂ times that half distance, and both hold.
    """
    omega = tseng_omega(step, lipschitz_k)
    t = 1.0 - step ** 2 * lipschitz_k ** 2
    contraction = 2.0 * min(1.0 / math.sqrt(2.0 * step), 1.0 + 1.0 / math.sqrt(t))
    ratio = math.sqrt((1.0 + step * lipschitz_k) / (1.0 - step * lipschitz_k))
    first = math.log(contraction)
    second = math.log(2.0 / (sigma_hat * step) * ratio)
    j_star = 1 + int(math.ceil(2.0 / omega * first))
    j_star_star = 1 + int(math.ceil(2.0 / omega * second))
    j_hat = 1 + int(math.ceil(2.0 / omega * max(first, second)))
    return j_star, j_star_star, j_hat


def tseng_iteration_bound(step, lipschitz_k, sigma_hat):
    return tseng_iteration_bounds(step, lipschitz_k, sigma_hat)[2]


def solve_tseng(instance, sigma_hat, safety_factor=TSENG_SAFETY_FACTOR, norm_estimate=None,
                max_inner=TSENG_MAX_INNER, callback=None):
    """
    Tseng's forward-backward-forward method on VIP(G, C) with
    G(y) = λF_anchor(y) + y - center, started at the anchor, step 1/(2L_k),
    L_k = λ‖F'(anchor)‖ + 1. Returns the first (ỹ, ν) satisfying the
    relative-error test.

    The iteration cap is `safety_factor` times the proven bound ĵ_k, and
    never more than `max_inner`. `callback(j, y)` sees every corrected
    iterate.
    """
    if not sigma_hat > 0:
        raise ParameterError('The tseng back-end needs σ̂ > 0')
    problem = instance.problem
    lam = instance.lam
    if norm_estimate is None:
        norm_estimate = operator_norm_estimate(problem, instance.anchor)
    lipschitz_k = lam * norm_estimate + 1.0
    step = 1.0 / (2.0 * lipschitz_k)
    j_hat = tseng_iteration_bound(step, lipschitz_k, sigma_hat)
    cap = min(int(math.ceil(safety_factor * j_hat)), int(max_inner))
    identity = problem.is_unconstrained
    offset = instance.offset

    def G(y):
        return lam * problem.apply_J(instance.anchor, y - instance.anchor) + offset + (y - instance.anchor)

    y_prev = instance.anchor.copy()
    g_prev = offset.copy()
    best = None
    for j in range(1, cap + 1):
        forward = y_prev - step * g_prev
        y_tilde = problem.project(forward)
        if identity:
            nu = np.zeros_like(y_tilde)
        else:
            nu = (forward - y_tilde) / (lam * step)
        g_tilde = G(y_tilde)
        residual_norm = np.linalg.norm(g_tilde + lam * nu)
        step_norm = np.linalg.norm(y_tilde - instance.anchor)
        if best is None or residual_norm - sigma_hat * step_norm < best[0]:
            best = (residual_norm - sigma_hat * step_norm, y_tilde, nu)
        if residual_norm <= sigma_hat * step_norm:
            logger.debug('Tseng met the test after %d iterations (bound %d)', j, j_hat)
            return ApproxSolution(
                y=y_tilde,
                nu=nu,
                residual_norm=float(residual_norm),
                step_norm=float(step_norm),
                inner_iterations=j,
                linear_solves=0,
                backend=BACKEND_TSENG,
            )
        y_prev = y_tilde - step * (g_tilde - g_prev)
        if callback is not None:
            callback(j, y_prev)
        g_prev = G(y_prev)
    raise InnerIterationLimit(
        'Tseng iteration exceeded its cap of {} iterations (bound {})'.format(cap, j_hat),
        best=best[1] if best else None,
        diagnostics={
            'cap': cap,
            'j_hat': j_hat,
            'max_inner': max_inner,
            'lipschitz_k': lipschitz_k,
            'norm_estimate': norm_estimate,
            'lambda': lam,
        },
    )


def choose_backend(problem, max_direct_dim=DIRECT_MAX_DIM):
    if not problem.is_unconstrained:
        return BACKEND_TSENG
    if problem.dim <= max_direct_dim and problem.can_materialize:
        return BACKEND_DIRECT
    return BACKEND_KRYLOV


def solve_subproblem(instance, backend, sigma_hat, **options):
    """
    Dispatch to the named back-end ('auto' picks one from the problem).
    """
    if backend == BACKEND_AUTO:
        backend = choose_backend(instance.problem)
    if backend == BACKEND_DIRECT:
        return solve_direct(instance)
    if backend == BACKEND_KRYLOV:
        return solve_krylov(
            instance,
            sigma_hat,
            max_inner=options.get('max_inner', KRYLOV_MAX_INNER),
            restart=options.get('restart', KRYLOV_RESTART),
        )
    if backend == BACKEND_TSENG:
        return solve_tseng(
            instance,
            sigma_hat,
            safety_factor=options.get('safety_factor', TSENG_SAFETY_FACTOR),
            max_inner=options.get('max_inner', TSENG_MAX_INNER),
        )
    raise ParameterError('Unknown back-end {!r}'.format(backend))


def verify_solution(instance, solution, sigma_hat, tol=1e-10):
    """
    Independently recompute e and check the σ̂-approximate solution
    conditions. Returns (holds, ‖e‖, σ̂‖y - anchor‖).
    """
    residual = np.linalg.norm(instance.residual(solution.y, solution.nu))
    bound = sigma_hat * np.linalg.norm(solution.y - instance.anchor)
    scale = 1.0 + np.linalg.norm(instance.offset)
    in_cone = check_normal_cone(instance.problem, solution.y, solution.nu)
    return in_cone and residual <= bound + tol * scale, float(residual), float(bound)
