import numpy as np

from hipnex.exceptions import DimensionMismatch
from hipnex.variational.core import (
    Box,
    FullSpace,
    VIProblem,
    as_point,
    check_normal_cone,
    eval_linearization,
    jacobian_consistency,
    linearization_error,
    linearization_gap,
    monotonicity_gap,
    projection_defects,
)
from hipnex.variational.costs import CostCounter
from hipnex.variational.problems import make_problem

from .base import BaseTestCase


def linear_problem(matrix, shift, projection=None, jacobian=True):
    matrix = np.asarray(matrix, dtype=float)
    shift = np.asarray(shift, dtype=float)
    return VIProblem(
        dim=shift.shape[0],
        operator=lambda x: matrix.dot(x) + shift,
        jacobian_product=lambda anchor, d: matrix.dot(d),
        jacobian=(lambda anchor: matrix) if jacobian else None,
        lipschitz=1.0,
        projection=projection,
    )


class AsPointTestCase(BaseTestCase):
    def test_valid(self):
        self.assertPointsClose(as_point([1, 2], 2), [1.0, 2.0])

    def test_wrong_dimension(self):
        with self.assertRaises(DimensionMismatch):
            as_point([1.0, 2.0], 3)

    def test_matrix(self):
        with self.assertRaises(DimensionMismatch):
            as_point(np.eye(2))

    def test_non_finite(self):
        with self.assertRaises(DimensionMismatch):
            as_point([1.0, np.nan])
        with self.assertRaises(ValueError):
            as_point([np.inf])


class ProjectionTestCase(BaseTestCase):
    def test_equality(self):
        self.assertEqual(FullSpace(), FullSpace())
        self.assertEqual(Box([0, 0], [1, 1]), Box([0, 0], [1, 1]))
        self.assertNotEqual(Box([0, 0], [1, 1]), Box([0, 0], [1, 2]))
        self.assertNotEqual(Box([0, 0], [1, 1]), FullSpace())

    def test_full_space(self):
        z = np.array([3.0, -4.0])
        self.assertPointsClose(FullSpace()(z), z)
        self.assertTrue(FullSpace().is_identity)

    def test_box(self):
        box = Box([0.0, 0.0], [1.0, 1.0])
        self.assertPointsClose(box(np.array([2.0, -1.0])), [1.0, 0.0])
        self.assertPointsClose(box(np.array([0.5, 0.25])), [0.5, 0.25])
        self.assertTrue(box.contains(np.array([0.5, 1.0])))
        self.assertFalse(box.contains(np.array([0.5, 1.5])))
        self.assertFalse(box.is_identity)

    def test_bad_box(self):
        with self.assertRaises(ValueError):
            Box([1.0], [0.0])
        with self.assertRaises(DimensionMismatch):
            Box([0.0, 0.0], [1.0])

    def test_defects(self):
        problem = make_problem('box', 6, seed=3)
        idempotence, expansion = projection_defects(problem, np.random.default_rng(0))
        self.assertEqual(idempotence, 0.0)
        self.assertLessEqual(expansion, 1e-12)


class VIProblemTestCase(BaseTestCase):
    def setUp(self):
        self.matrix = np.array([[1.0, 2.0], [-2.0, 3.0]])
        self.problem = linear_problem(self.matrix, [1.0, -1.0])

    def test_operator(self):
        self.assertPointsClose(self.problem.F([1.0, 1.0]), [4.0, 0.0])
        with self.assertRaises(DimensionMismatch):
            self.problem.F([1.0, 1.0, 1.0])

    def test_invalid(self):
        with self.assertRaises(ValueError):
            VIProblem(0, None, None, 1.0)
        with self.assertRaises(ValueError):
            VIProblem(2, None, None, 0.0)

    def test_materialize_from_products(self):
        problem = linear_problem(self.matrix, [0.0, 0.0], jacobian=False)
        self.assertFalse(problem.can_materialize)
        self.assertPointsClose(problem.materialize_J(np.zeros(2)).ravel(), self.matrix.ravel())

    def test_unconstrained(self):
        self.assertTrue(self.problem.is_unconstrained)
        boxed = linear_problem(self.matrix, [0.0, 0.0], projection=Box([0, 0], [1, 1]))
        self.assertFalse(boxed.is_unconstrained)

    def test_metered(self):
        costs = CostCounter()
        metered = self.problem.metered(costs)
        metered.F(np.zeros(2))
        metered.F(np.ones(2))
        metered.apply_J(np.zeros(2), np.ones(2))
        metered.materialize_J(np.zeros(2))
        self.assertEqual(costs, CostCounter(f_evals=2, j_products=1, j_materializations=1))
        self.assertEqual(metered.dim, 2)
        self.assertIs(metered.metered(CostCounter()).problem, self.problem)

    def test_metered_materialize_from_products(self):
        costs = CostCounter()
        problem = linear_problem(self.matrix, [0.0, 0.0], jacobian=False)
        problem.metered(costs).materialize_J(np.zeros(2))
        self.assertEqual(costs.j_products, 2)
        self.assertEqual(costs.j_materializations, 0)


class LinearizationTestCase(BaseTestCase):
    def test_affine_is_exact(self):
        problem = linear_problem([[2.0, 1.0], [-1.0, 2.0]], [1.0, 0.0])
        x = np.array([0.3, -0.7])
        self.assertPointsClose(eval_linearization(problem, np.array([5.0, 5.0]), x), problem.F(x))
        self.assertLessEqual(linearization_error(problem, np.array([5.0, 5.0]), x), 1e-12)

    def test_cubic_bound(self):
        problem = make_problem('cubic', 5, seed=1, L=0.5)
        self.assertGreaterEqual(linearization_gap(problem, np.random.default_rng(2), pairs=300), -1e-12)

    def test_cubic_monotone(self):
        problem = make_problem('cubic', 5, seed=1)
        self.assertGreaterEqual(monotonicity_gap(problem, np.random.default_rng(4)), 0.0)

    def test_jacobian_consistency(self):
        problem = make_problem('cubic', 4, seed=2, L=1.0)
        rng = np.random.default_rng(5)
        anchor = rng.standard_normal(problem.dim)
        direction = rng.standard_normal(problem.dim)
        self.assertLessEqual(jacobian_consistency(problem, anchor, direction), 1e-4)


class NormalConeTestCase(BaseTestCase):
    def setUp(self):
        self.problem = linear_problem(np.eye(2), [0.0, 0.0], projection=Box([0, 0], [1, 1]))

    def test_interior(self):
        y = np.array([0.5, 0.5])
        self.assertTrue(check_normal_cone(self.problem, y, np.zeros(2)))
        self.assertFalse(check_normal_cone(self.problem, y, np.array([0.1, 0.0])))

    def test_active_bounds(self):
        y = np.array([1.0, 0.0])
        self.assertTrue(check_normal_cone(self.problem, y, np.array([2.0, -3.0])))
        self.assertFalse(check_normal_cone(self.problem, y, np.array([-2.0, 0.0])))
        self.assertFalse(check_normal_cone(self.problem, y, np.array([0.0, 3.0])))

    def test_full_space(self):
        problem = linear_problem(np.eye(2), [0.0, 0.0])
        self.assertTrue(check_normal_cone(problem, np.ones(2), np.zeros(2)))
        self.assertFalse(check_normal_cone(problem, np.ones(2), np.array([1e-3, 0.0])))
