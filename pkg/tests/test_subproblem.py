import numpy as np

from hipnex.exceptions import InnerIterationLimit, ParameterError
from hipnex.variational.core import VIProblem, check_normal_cone
from hipnex.variational.problems import make_problem
from hipnex.variational.subproblem import (
    ApproxSolution,
    SubproblemInstance,
    choose_backend,
    operator_norm_estimate,
    solve_direct,
    solve_krylov,
    solve_subproblem,
    solve_tseng,
    tseng_iteration_bound,
    tseng_iteration_bounds,
    tseng_omega,
    verify_solution,
)

from .base import BaseTestCase


def matrix_problem(matrix, shift=None):
    matrix = np.asarray(matrix, dtype=float)
    shift = np.zeros(matrix.shape[0]) if shift is None else np.asarray(shift, dtype=float)
    return VIProblem(
        dim=matrix.shape[0],
        operator=lambda x: matrix.dot(x) + shift,
        jacobian_product=lambda anchor, d: matrix.dot(d),
        jacobian=lambda anchor: matrix,
        lipschitz=1.0,
    )


class SubproblemInstanceTestCase(BaseTestCase):
    def test_rejects_lambda(self):
        with self.assertRaises(ParameterError):
            SubproblemInstance(matrix_problem([[1.0]]), 0.0, anchor=[0.0], center=[0.0])

    def test_offset_and_residual(self):
        instance = SubproblemInstance(matrix_problem([[1.0]]), 1.0, anchor=[0.0], center=[2.0])
        self.assertPointsClose(instance.offset, [-2.0])
        self.assertPointsClose(instance.residual(np.array([1.0]), np.zeros(1)), [0.0])
        self.assertPointsClose(instance.residual(np.array([0.0]), np.array([1.0])), [-1.0])


class SolveDirectTestCase(BaseTestCase):
    def test_scalar(self):
        instance = SubproblemInstance(matrix_problem([[1.0]]), 1.0, anchor=[0.0], center=[2.0])
        solution = solve_direct(instance)
        self.assertPointsClose(solution.y, [1.0], atol=1e-14)
        self.assertEqual(solution.linear_solves, 1)
        self.assertEqual(solution.inner_iterations, 0)
        self.assertLessEqual(solution.residual_norm, 1e-14)

    def test_constant_map(self):
        problem = matrix_problem(np.zeros((3, 3)), shift=[1.0, -2.0, 0.5])
        center = np.array([0.3, 0.2, 0.1])
        instance = SubproblemInstance(problem, 0.5, anchor=np.ones(3), center=center)
        solution = solve_direct(instance)
        self.assertPointsClose(solution.y, center - 0.5 * np.array([1.0, -2.0, 0.5]), atol=1e-14)

    def test_cubic(self):
        problem = make_problem('cubic', 20, seed=1, L=1.0)
        rng = np.random.default_rng(0)
        instance = SubproblemInstance(problem, 3.0, anchor=rng.standard_normal(40), center=rng.standard_normal(40))
        solution = solve_direct(instance)
        holds, residual, _ = verify_solution(instance, solution, 0.0)
        self.assertTrue(holds)
        self.assertLessEqual(residual, 1e-10)

    def test_rejects_box(self):
        problem = make_problem('box', 4)
        instance = SubproblemInstance(problem, 1.0, anchor=np.full(4, 0.5), center=np.zeros(4))
        with self.assertRaises(ParameterError):
            solve_direct(instance)


class SolveKrylovTestCase(BaseTestCase):
    def test_cubic(self):
        problem = make_problem('cubic', 50, seed=0)
        rng = np.random.default_rng(1)
        anchor = rng.standard_normal(100)
        instance = SubproblemInstance(problem, 10.0, anchor=anchor, center=anchor + rng.standard_normal(100))
        solution = solve_krylov(instance, 0.25)
        holds, residual, bound = verify_solution(instance, solution, 0.25)
        self.assertTrue(holds)
        self.assertLessEqual(residual, bound)
        self.assertGreater(solution.inner_iterations, 0)
        self.assertEqual(solution.linear_solves, 1)

    def test_rejects_exact(self):
        instance = SubproblemInstance(matrix_problem([[1.0]]), 1.0, anchor=[0.0], center=[2.0])
        with self.assertRaises(ParameterError):
            solve_krylov(instance, 0.0)

    def test_inner_limit(self):
        problem = make_problem('affine', 20, seed=2)
        rng = np.random.default_rng(3)
        instance = SubproblemInstance(problem, 5.0, anchor=rng.standard_normal(20), center=rng.standard_normal(20))
        with self.assertRaises(InnerIterationLimit) as caught:
            solve_krylov(instance, 1e-12, max_inner=2)
        self.assertEqual(caught.exception.best.shape, (20,))
        self.assertEqual(caught.exception.diagnostics['lambda'], 5.0)

    def test_step_bound(self):
        problem = make_problem('affine', 20, seed=4)
        rng = np.random.default_rng(5)
        for _ in range(10):
            instance = SubproblemInstance(
                problem, 10.0 ** rng.uniform(-2, 2),
                anchor=rng.standard_normal(20), center=rng.standard_normal(20),
            )
            solution = solve_krylov(instance, 0.25)
            bound = np.linalg.norm(instance.offset) / 0.75
            self.assertLessEqual(solution.step_norm, bound * (1.0 + 1e-10))


class SolveTsengTestCase(BaseTestCase):
    def test_omega(self):
        self.assertAlmostEqual(tseng_omega(0.5, 1.0), 0.75 / 1.75, places=12)

    def test_bounds(self):
        j_star, j_star_star, j_hat = tseng_iteration_bounds(0.25, 2.0, 0.25)
        self.assertEqual(j_hat, max(j_star, j_star_star))
        self.assertEqual(tseng_iteration_bound(0.25, 2.0, 0.25), j_hat)
        self.assertGreater(tseng_iteration_bound(0.25, 2.0, 0.01), j_hat)

    def test_box(self):
        problem = make_problem('box', 20, seed=3)
        rng = np.random.default_rng(6)
        for _ in range(10):
            anchor = problem.project(rng.standard_normal(20))
            center = anchor + rng.standard_normal(20)
            instance = SubproblemInstance(problem, 10.0 ** rng.uniform(-1, 1), anchor=anchor, center=center)
            solution = solve_tseng(instance, 0.25)
            holds, _, _ = verify_solution(instance, solution, 0.25)
            self.assertTrue(holds)
            self.assertTrue(check_normal_cone(problem, solution.y, solution.nu))
            lipschitz_k = instance.lam * operator_norm_estimate(problem, anchor) + 1.0
            j_hat = tseng_iteration_bound(1.0 / (2.0 * lipschitz_k), lipschitz_k, 0.25)
            self.assertLessEqual(solution.inner_iterations, j_hat)

    def test_full_space(self):
        problem = make_problem('affine', 10, seed=7)
        rng = np.random.default_rng(8)
        instance = SubproblemInstance(problem, 1.0, anchor=rng.standard_normal(10), center=rng.standard_normal(10))
        solution = solve_tseng(instance, 0.25)
        self.assertPointsClose(solution.nu, np.zeros(10))
        self.assertTrue(verify_solution(instance, solution, 0.25)[0])

    def test_cap(self):
        problem = make_problem('box', 10, seed=1)
        instance = SubproblemInstance(problem, 1.0, anchor=np.full(10, 0.5), center=np.zeros(10))
        with self.assertRaises(InnerIterationLimit) as caught:
            solve_tseng(instance, 0.25, safety_factor=1e-9)
        self.assertEqual(caught.exception.diagnostics['cap'], 1)

    def test_max_inner(self):
        problem = make_problem('box', 10, seed=1)
        instance = SubproblemInstance(problem, 1.0, anchor=np.full(10, 0.5), center=np.zeros(10))
        with self.assertRaises(InnerIterationLimit) as caught:
            solve_tseng(instance, 0.25, max_inner=1)
        self.assertEqual(caught.exception.diagnostics['cap'], 1)
        self.assertEqual(caught.exception.diagnostics['max_inner'], 1)
        with self.assertRaises(InnerIterationLimit):
            solve_subproblem(instance, 'tseng', 0.25, max_inner=1)

    def test_linear_decay(self):
        problem = make_problem('affine', 10, seed=4)
        rng = np.random.default_rng(9)
        anchor = rng.standard_normal(10)
        instance = SubproblemInstance(problem, 2.0, anchor=anchor, center=anchor + rng.standard_normal(10))
        y_star = solve_direct(instance).y
        norm = np.linalg.norm(problem.materialize_J(anchor), 2)
        lipschitz_k = instance.lam * norm + 1.0
        rate = np.sqrt(1.0 - tseng_omega(1.0 / (2.0 * lipschitz_k), lipschitz_k))

        distances = [np.linalg.norm(anchor - y_star)]
        try:
            solve_tseng(instance, 1e-10, norm_estimate=norm,
                        callback=lambda j, y: distances.append(np.linalg.norm(y - y_star)))
        except InnerIterationLimit:
            pass
        self.assertGreater(len(distances), 10)
        d0 = distances[0]
        for before, after in zip(distances, distances[1:]):
            if before <= 1e-8 * d0:
                break
            self.assertLessEqual(after, rate * before + 1e-12 * d0)

    def test_step_bound_with_multiplier(self):
        # ν_prev ∈ N_C(anchor) makes λ(F(anchor) + ν_prev) + anchor - center a point of the
        # strongly monotone subproblem operator at the anchor
        problem = make_problem('box', 20, seed=5)
        rng = np.random.default_rng(10)
        anchors = [(problem.known_solution, problem.known_certificate)]
        for _ in range(4):
            anchors.append((problem.project(rng.standard_normal(20)), np.zeros(20)))
        for anchor, nu_prev in anchors:
            self.assertTrue(check_normal_cone(problem, anchor, nu_prev))
            for _ in range(3):
                lam = 10.0 ** rng.uniform(-1, 1)
                center = anchor + rng.standard_normal(20)
                instance = SubproblemInstance(problem, lam, anchor=anchor, center=center)
                solution = solve_tseng(instance, 0.25)
                shifted = instance.offset + lam * nu_prev
                bound = np.linalg.norm(shifted) / 0.75
                self.assertLessEqual(np.linalg.norm(solution.y - anchor), bound * (1.0 + 1e-10) + 1e-12)

    def test_rejects_exact(self):
        problem = make_problem('box', 4)
        instance = SubproblemInstance(problem, 1.0, anchor=np.full(4, 0.5), center=np.zeros(4))
        with self.assertRaises(ParameterError):
            solve_tseng(instance, 0.0)


class NormEstimateTestCase(BaseTestCase):
    def test_identity(self):
        estimate = operator_norm_estimate(matrix_problem(np.eye(4)), np.zeros(4))
        self.assertGreaterEqual(estimate, 1.0)
        self.assertLessEqual(estimate, 1.05 + 1e-12)

    def test_diagonal(self):
        estimate = operator_norm_estimate(matrix_problem(np.diag([1.0, 2.0, 3.0, 4.0, 5.0])), np.zeros(5))
        self.assertGreaterEqual(estimate, 5.0)
        self.assertLessEqual(estimate, 5.25 + 1e-12)

    def test_rotation(self):
        estimate = operator_norm_estimate(matrix_problem([[0.0, 1.0], [-1.0, 0.0]]), np.zeros(2))
        self.assertGreaterEqual(estimate, 1.0)
        self.assertLessEqual(estimate, 1.05 + 1e-12)

    def test_zero(self):
        self.assertEqual(operator_norm_estimate(matrix_problem(np.zeros((3, 3))), np.zeros(3)), 0.0)


class DispatchTestCase(BaseTestCase):
    def test_choose_backend(self):
        self.assertEqual(choose_backend(make_problem('box', 4)), 'tseng')
        self.assertEqual(choose_backend(make_problem('affine', 4)), 'direct')
        self.assertEqual(choose_backend(make_problem('affine', 4), max_direct_dim=3), 'krylov')

    def test_backends_agree(self):
        problem = make_problem('affine', 15, seed=9)
        rng = np.random.default_rng(10)
        instance = SubproblemInstance(problem, 2.0, anchor=rng.standard_normal(15), center=rng.standard_normal(15))
        for backend in ('direct', 'krylov', 'tseng', 'auto'):
            solution = solve_subproblem(instance, backend, 0.25)
            self.assertTrue(verify_solution(instance, solution, 0.25)[0], msg=backend)

    def test_unknown_backend(self):
        instance = SubproblemInstance(matrix_problem([[1.0]]), 1.0, anchor=[0.0], center=[2.0])
        with self.assertRaises(ParameterError):
            solve_subproblem(instance, 'cholesky', 0.25)

    def test_satisfies(self):
        solution = ApproxSolution(np.zeros(1), np.zeros(1), residual_norm=0.2, step_norm=1.0)
        self.assertTrue(solution.satisfies(0.25))
        self.assertFalse(solution.satisfies(0.1))
