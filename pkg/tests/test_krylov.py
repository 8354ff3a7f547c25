import numpy as np

from hipnex.variational.krylov import Givens, RestartedGmres

from .base import BaseTestCase


def shifted_skew(n, seed=0, shift=2.0):
    rng = np.random.default_rng(seed)
    skew = rng.standard_normal((n, n))
    return shift * np.eye(n) + (skew - skew.T) / np.sqrt(n)


class GivensTestCase(BaseTestCase):
    def test_annihilates(self):
        rotation = Givens(3.0, 4.0)
        self.assertPointsClose(rotation.apply([3.0, 4.0]), [5.0, 0.0], atol=1e-14)

    def test_zero(self):
        rotation = Givens(0.0, 0.0)
        self.assertEqual((rotation.c, rotation.s), (1.0, 0.0))


class RestartedGmresTestCase(BaseTestCase):
    def setUp(self):
        self.matrix = shifted_skew(8, seed=1)
        self.rhs = np.random.default_rng(2).standard_normal(8)
        self.expected = np.linalg.solve(self.matrix, self.rhs)

    def tight(self, x, resnorm):
        return resnorm <= 1e-12 * np.linalg.norm(self.rhs)

    def test_full_solve(self):
        solver = RestartedGmres(self.matrix.dot, self.rhs, restart=50)
        x = solver.solve(self.tight)
        self.assertTrue(solver.converged)
        self.assertPointsClose(x, self.expected, atol=1e-9)
        self.assertLessEqual(solver.products, 8)
        self.assertEqual(len(solver.resnorms), solver.products)

    def test_restarted(self):
        solver = RestartedGmres(self.matrix.dot, self.rhs, restart=2, max_products=500)
        x = solver.solve(self.tight)
        self.assertTrue(solver.converged)
        self.assertPointsClose(x, self.expected, atol=1e-9)

    def test_resnorm_estimates(self):
        seen = []

        def accept(x, resnorm):
            seen.append((np.linalg.norm(self.rhs - self.matrix.dot(x)), resnorm))
            return False

        RestartedGmres(self.matrix.dot, self.rhs, restart=50, max_products=5).solve(accept)
        self.assertEqual(len(seen), 5)
        for true_norm, estimate in seen:
            self.assertRelativelyClose(true_norm, estimate, rtol=1e-8)
        estimates = [estimate for _, estimate in seen]
        self.assertEqual(estimates, sorted(estimates, reverse=True))

    def test_product_limit(self):
        solver = RestartedGmres(self.matrix.dot, self.rhs, restart=3, max_products=4)
        solver.solve(lambda x, resnorm: False)
        self.assertFalse(solver.converged)
        self.assertLessEqual(solver.products, 4)

    def test_zero_rhs(self):
        solver = RestartedGmres(self.matrix.dot, np.zeros(8))
        x = solver.solve(lambda x, resnorm: resnorm == 0.0)
        self.assertTrue(solver.converged)
        self.assertEqual(solver.products, 0)
        self.assertPointsClose(x, np.zeros(8))

    def test_custom_accept(self):
        # stop on the first iterate moving at least one unit from the origin
        solver = RestartedGmres(self.matrix.dot, 10.0 * self.rhs)
        x = solver.solve(lambda x, resnorm: np.linalg.norm(x) >= 1.0)
        self.assertTrue(solver.converged)
        self.assertGreaterEqual(np.linalg.norm(x), 1.0)
