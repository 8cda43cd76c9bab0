import numpy as np
from django.test import SimpleTestCase

from core.objectives import ObjectiveContext, ObjectiveKind
from core.optimizer import project_feasible, random_feasible, solve_weights


class ProjectionTests(SimpleTestCase):
    def test_rescale_only(self):
        np.testing.assert_allclose(project_feasible(np.array([2.0, 0.0]), m=5), [1.0, 0.0])

    def test_feasible_point_is_unchanged(self):
        z = np.full(4, 0.25)
        np.testing.assert_allclose(project_feasible(z), z)

    def test_clamp_redistributes_mass(self):
        np.testing.assert_allclose(project_feasible(np.array([10.0, 1.0, 1.0]), m=1), np.full(3, 1 / 3), atol=1e-8)

    def test_zero_vector_falls_back_to_equal_long(self):
        np.testing.assert_allclose(project_feasible(np.zeros(4)), np.full(4, 0.25))

    def test_random_points_are_feasible(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            w = random_feasible(rng, 5, m=2)
            self.assertAlmostEqual(np.abs(w).sum(), 1.0, places=8)
            self.assertTrue(np.all(np.abs(w) <= 2 / 5 + 1e-12))


class SolveWeightsTests(SimpleTestCase):
    def test_long_parity_is_closed_form(self):
        ctx = ObjectiveContext(np.random.default_rng(1).normal(size=(100, 4)), np.zeros(4))
        report = solve_weights(ObjectiveKind.parse("LongParity"), ctx)
        np.testing.assert_array_equal(report.w_star, np.full(4, 0.25))
        self.assertEqual(report.n_restarts, 0)

    def test_short_parity_is_closed_form(self):
        ctx = ObjectiveContext(np.zeros((10, 2)), np.zeros(2))
        report = solve_weights(ObjectiveKind.parse("ShortParity"), ctx)
        np.testing.assert_array_equal(report.w_star, [-0.5, -0.5])

    def test_kelly_binary_bet(self):
        R = np.array([[1.0, 0.0]] * 6 + [[-1.0, 0.0]] * 4)
        ctx = ObjectiveContext(R, np.array([0.5, 0.5]), c=0.0)
        report = solve_weights(ObjectiveKind.parse("Kelly"), ctx, seed=3)
        self.assertLess(abs(report.w_star[0] - 0.2), 0.02)
        self.assertAlmostEqual(np.abs(report.w_star).sum(), 1.0, places=8)

    def test_symmetric_min_variance(self):
        R = np.random.default_rng(4).normal(0.0, 0.01, size=(20_000, 2))
        ctx = ObjectiveContext(R, np.array([0.5, 0.5]), c=0.0)
        report = solve_weights(ObjectiveKind.parse("minVariance"), ctx, seed=4)
        # the objective is even in w, so the sign pattern is not identified
        np.testing.assert_allclose(np.abs(report.w_star), [0.5, 0.5], atol=0.02)

    def test_min_variance_matches_markowitz(self):
        cov = 1e-4 * np.array([[1.0, -0.3, -0.2], [-0.3, 2.0, -0.1], [-0.2, -0.1, 1.5]])
        R = np.random.default_rng(5).multivariate_normal(np.zeros(3), cov, size=20_000)
        ctx = ObjectiveContext(R, np.full(3, 1 / 3), c=0.0)
        report = solve_weights(ObjectiveKind.parse("minVariance"), ctx, m=5, seed=5)
        inverse = np.linalg.inv(np.cov(R, rowvar=False))
        oracle = inverse.sum(axis=1) / inverse.sum()
        w = report.w_star * np.sign(report.w_star.sum())
        self.assertLess(np.abs(w - oracle).max(), 0.02)

    def test_box_constraint_holds(self):
        R = np.random.default_rng(6).normal(0.001, 0.02, size=(500, 4))
        R[:, 0] += 0.05
        ctx = ObjectiveContext(R, np.full(4, 0.25), c=0.005)
        report = solve_weights(ObjectiveKind.parse("maxExpRetn"), ctx, m=2, seed=6)
        self.assertTrue(np.all(np.abs(report.w_star) <= 0.5 + 1e-9))
        self.assertAlmostEqual(np.abs(report.w_star).sum(), 1.0, places=8)
        self.assertAlmostEqual(report.w_star[0], 0.5, places=4)

    def test_same_seed_same_report(self):
        R = np.random.default_rng(7).normal(0.0, 0.02, size=(300, 3))
        ctx = ObjectiveContext(R, np.full(3, 1 / 3))
        kind = ObjectiveKind.parse("minES 0.05")
        first = solve_weights(kind, ctx, seed=7)
        second = solve_weights(kind, ctx, seed=7)
        np.testing.assert_array_equal(first.w_star, second.w_star)
        self.assertEqual(first.objective_value, second.objective_value)
        self.assertEqual(first.n_restarts, 11)

    def test_no_finite_start_falls_back(self):
        ctx = ObjectiveContext(np.array([[-2.0], [2.0]]), np.ones(1), c=0.0)
        with self.assertLogs("core.optimizer", level="WARNING"):
            report = solve_weights(ObjectiveKind.parse("Kelly"), ctx)
        np.testing.assert_array_equal(report.w_star, [1.0])
        self.assertIn("no_finite_start", report.flags)
        self.assertFalse(report.converged)
