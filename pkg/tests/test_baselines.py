import numpy as np

from mock import Mock

from hipnex.exceptions import OracleError, ParameterError, SearchExhausted
from hipnex.variational.algorithm import run
from hipnex.variational.baselines import (
    LambdaSearch,
    NpeConfig,
    exact_resolvent_oracle,
    hpe_run,
    npe_run,
)
from hipnex.variational.core import VIProblem
from hipnex.variational.params import budget_pointwise, derive_params
from hipnex.variational.problems import initial_point, make_problem

from .base import BaseTestCase, slow


def scalar_identity():
    return VIProblem(
        dim=1,
        operator=lambda x: x.copy(),
        jacobian_product=lambda anchor, d: d.copy(),
        jacobian=lambda anchor: np.eye(1),
        lipschitz=1.0,
    )


class HpeRunTestCase(BaseTestCase):
    def setUp(self):
        self.problem = make_problem('affine', 20, seed=0)
        self.x0 = initial_point(self.problem.dim, 0)
        self.d0 = float(np.linalg.norm(self.x0 - self.problem.known_solution))

    def test_exact_oracle(self):
        oracle = exact_resolvent_oracle(self.problem, 1.0)
        result = hpe_run(self.problem, oracle, tau=0.5, sigma=0.0, eta=1.0, x0=self.x0, N=50, d0=self.d0)
        self.assertIn(result.criterion, ('max_iter', 'exact'))
        self.assertGreater(result.iterations, 0)
        self.assertLessEqual(result.iterations, 50)
        self.assertEqual(len(result.trace), result.iterations)
        self.assertPassed(result.bounds)
        self.assertEqual(result.bounds.checked, result.iterations)
        self.assertEqual(result.ergodic.count, result.iterations)
        self.assertLess(result.pointwise.residual_norm, np.linalg.norm(self.problem.F(self.x0)))

    def test_exact_oracle_to_rounding(self):
        # λ keeps growing until F(x) is lost in rounding; the run must end cleanly
        oracle = exact_resolvent_oracle(self.problem, 1.0)
        result = hpe_run(self.problem, oracle, tau=0.5, sigma=0.0, eta=1.0, x0=self.x0, N=200, d0=self.d0)
        self.assertIn(result.criterion, ('max_iter', 'exact'))
        self.assertPassed(result.bounds)
        self.assertLessEqual(np.linalg.norm(self.problem.F(result.solution)), 1e-8)
        if result.criterion == 'exact':
            self.assertLess(result.iterations, 200)
            self.assertPointsClose(result.nu, np.zeros(self.problem.dim))

    def test_oracle_returns_none_at_solution(self):
        problem = make_problem('affine', 20, seed=0, q=np.zeros(20))
        oracle = exact_resolvent_oracle(problem, 1.0)
        self.assertIsNone(oracle(np.zeros(20)))
        self.assertIsNotNone(oracle(self.x0))

    def test_exact_stop(self):
        oracle = Mock(return_value=None)
        result = hpe_run(self.problem, oracle, tau=0.5, sigma=0.0, eta=1.0, x0=self.x0, N=5)
        self.assertEqual(result.criterion, 'exact')
        self.assertTrue(result.converged)
        self.assertEqual(result.iterations, 0)
        self.assertPointsClose(result.solution, self.x0)
        self.assertPointsClose(result.nu, np.zeros(self.problem.dim))
        oracle.assert_called_once()

    def test_update_identity(self):
        oracle = exact_resolvent_oracle(self.problem, 1.0)
        result = hpe_run(self.problem, oracle, tau=0.3, sigma=0.0, eta=1.0, x0=self.x0, N=10)
        for record in result.trace:
            self.assertTrue(np.array_equal(record.x, record.x_prev - 0.3 * record.lam * record.w))
        for previous, current in zip(result.trace, result.trace[1:]):
            self.assertTrue(np.array_equal(current.x_prev, previous.x))
        self.assertIsNone(result.bounds)

    def test_stops_at_rho(self):
        oracle = exact_resolvent_oracle(self.problem, 1.0)
        result = hpe_run(self.problem, oracle, tau=1.0, sigma=0.0, eta=1.0, x0=self.x0, N=500, rho=1e-3)
        self.assertEqual(result.criterion, 'pointwise')
        self.assertEqual(result.first_pointwise_k, result.iterations)
        self.assertLessEqual(result.final_residual, 1e-3)

    def test_no_iterations(self):
        oracle = Mock()
        result = hpe_run(self.problem, oracle, tau=0.5, sigma=0.0, eta=1.0, x0=self.x0, N=0, d0=self.d0)
        self.assertEqual(len(result.trace), 0)
        self.assertEqual(result.iterations, 0)
        self.assertPointsClose(result.solution, self.x0)
        self.assertIsNone(result.ergodic)
        self.assertPassed(result.bounds)
        oracle.assert_not_called()

    def test_rejects_relative_error(self):
        def oracle(x):
            return 1.0, x + 1.0, np.zeros_like(x)
        with self.assertRaises(OracleError):
            hpe_run(self.problem, oracle, tau=0.5, sigma=0.0, eta=1e-6, x0=self.x0, N=1)

    def test_rejects_small_step(self):
        resolvent = self.problem.spec.resolvent

        def oracle(x):
            return 1e-8, resolvent(1e-8, x), np.zeros_like(x)
        with self.assertRaises(OracleError):
            hpe_run(self.problem, oracle, tau=0.5, sigma=0.0, eta=1.0, x0=self.x0, N=1)
        result = hpe_run(self.problem, oracle, tau=1.0, sigma=0.0, eta=1.0, x0=self.x0, N=3, large_step=False)
        self.assertEqual(result.iterations, 3)

    def test_rejects_normal_cone(self):
        box = make_problem('box', 4, seed=0)

        def oracle(x):
            return 1.0, np.full(4, 0.5), np.ones(4)
        with self.assertRaises(OracleError):
            hpe_run(box, oracle, tau=0.5, sigma=0.5, eta=1e-6, x0=np.full(4, 0.5), N=1)

    def test_rejects_parameters(self):
        oracle = Mock()
        for tau, sigma, eta in ((0.0, 0.0, 1.0), (1.5, 0.0, 1.0), (0.5, 1.0, 1.0), (0.5, 0.0, 0.0)):
            with self.assertRaises(ParameterError):
                hpe_run(self.problem, oracle, tau=tau, sigma=sigma, eta=eta, x0=self.x0, N=1)

    def test_resolvent_oracle_needs_affine(self):
        with self.assertRaises(ParameterError):
            exact_resolvent_oracle(make_problem('cubic', 3), 1.0)


class LambdaSearchTestCase(BaseTestCase):
    def trial(self, lam):
        return Mock(step_norm=1.0)

    def test_first_trial(self):
        search = LambdaSearch(self.trial, 4.0, 5.0, 10)
        lam, _ = search.search(4.5)
        self.assertEqual(lam, 4.5)
        self.assertEqual(search.trials, 1)

    def test_doubling(self):
        search = LambdaSearch(self.trial, 4.0, 5.0, 10)
        lam, _ = search.search(1.0)
        self.assertEqual(lam, 4.0)
        self.assertEqual(search.trials, 3)

    def test_halving_then_bisection(self):
        search = LambdaSearch(self.trial, 4.0, 5.0, 10)
        lam, _ = search.search(100.0)
        self.assertAlmostEqual(lam, np.sqrt(3.125 * 6.25))
        self.assertEqual(search.trials, 7)

    def test_exhausted(self):
        search = LambdaSearch(self.trial, 4.0, 5.0, 2)
        with self.assertRaises(SearchExhausted):
            search.search(1.0)


class NpeConfigTestCase(BaseTestCase):
    def test_defaults(self):
        self.assertEqual(NpeConfig().validate(), NpeConfig(sigma_l=0.1, sigma_u=0.5, max_trials=50))

    def test_invalid(self):
        for kwargs in ({'sigma_l': 0.5, 'sigma_u': 0.1}, {'max_trials': 0}, {'sigma_hat': 0.5},
                       {'backend': 'tseng'}, {'lambda0': -1.0}):
            with self.assertRaises(ParameterError):
                NpeConfig(**kwargs).validate()


class NpeRunTestCase(BaseTestCase):
    def test_affine(self):
        problem = make_problem('affine', 10, seed=1)
        x0 = initial_point(problem.dim, 1)
        result = npe_run(problem, NpeConfig(backend='direct'), x0, 1e-10, 500)
        self.assertEqual(result.method, 'npe')
        self.assertEqual(result.criterion, 'pointwise')
        self.assertPointsClose(result.solution, problem.known_solution, atol=1e-5, rtol=1e-5)
        self.assertEqual(result.costs.linear_solves, sum(r.linear_solves for r in result.trace))
        lower, upper = 0.2, 1.0
        for record in result.trace:
            self.assertGreaterEqual(record.step_length, lower * (1.0 - 1e-12))
            self.assertLessEqual(record.step_length, upper * (1.0 + 1e-12))

    def test_krylov(self):
        problem = make_problem('cubic', 10, seed=2)
        result = npe_run(problem, NpeConfig(backend='krylov'), initial_point(problem.dim, 2), 1e-6, 500)
        self.assertTrue(result.converged)
        self.assertGreater(result.costs.inner_iterations, 0)

    def test_first_trial_in_bracket(self):
        # λ = 1 at x = 1 gives y = 1/2 and λ|y - x| = 1/2 in [0.2, 1]
        result = npe_run(scalar_identity(), NpeConfig(backend='direct', lambda0=1.0), np.array([1.0]), 1e-12, 1)
        self.assertEqual(result.trace[0].linear_solves, 1)
        self.assertEqual(result.trace[0].lam, 1.0)
        self.assertEqual(result.trace[0].step_length, 0.5)
        self.assertPointsClose(result.solution, [0.5])

    def test_exhausted(self):
        config = NpeConfig(backend='direct', lambda0=1e-6, max_trials=1)
        with self.assertRaises(SearchExhausted):
            npe_run(scalar_identity(), config, np.array([1.0]), 1e-6, 5)

    def test_rejects_box(self):
        with self.assertRaises(ParameterError):
            npe_run(make_problem('box', 4), NpeConfig(), np.full(4, 0.5), 1e-6, 5)

    def test_zero_operator(self):
        problem = VIProblem(
            dim=2,
            operator=lambda x: np.zeros(2),
            jacobian_product=lambda anchor, d: np.zeros(2),
            jacobian=lambda anchor: np.zeros((2, 2)),
            lipschitz=1.0,
        )
        result = npe_run(problem, NpeConfig(), np.ones(2), 1e-6, 5)
        self.assertEqual(result.criterion, 'exact')
        self.assertEqual(result.iterations, 0)
        self.assertPointsClose(result.solution, np.ones(2))

    @slow
    def test_costs_against_hipnex(self):
        # Linear solves per iteration: below one for hipnex (skips), at least one for npe (λ search)
        for seed in range(3):
            problem = make_problem('cubic', 200, seed=seed)
            x0 = initial_point(problem.dim, seed)
            npe = npe_run(problem, NpeConfig(backend='krylov'), x0, 1e-6, 10000)
            params = derive_params(0.25, problem.lipschitz)
            hipnex = run(problem, params, 1e-6, 10000, backend='krylov', x0=x0, stop_on=('pointwise',))
            self.assertTrue(npe.converged)
            self.assertTrue(hipnex.converged)
            self.assertLess(hipnex.costs.linear_solves, hipnex.iterations)
            self.assertGreaterEqual(npe.costs.linear_solves, npe.iterations)
            d0 = float(np.linalg.norm(x0 - problem.known_solution))
            self.assertLessEqual(hipnex.iterations, budget_pointwise(hipnex.params, d0, 1e-6))
