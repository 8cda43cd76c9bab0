import numpy as np
from django.test import SimpleTestCase
from scipy import stats

from core.choices import MarginalFamily
from core.exceptions import FitError
from core.marginals import (
    MarginalModel,
    fit_marginal,
    fit_marginals,
    marginal_cdf,
    marginal_ppf,
    pseudo_observations,
    select_marginal,
)


class FitMarginalTests(SimpleTestCase):
    def test_gaussian_refit(self):
        x = np.random.default_rng(1).standard_normal(10_000)
        m = fit_marginal(x, MarginalFamily.GAUSSIAN)
        mu, sigma = m.params
        self.assertLess(abs(mu), 0.05)
        self.assertLess(abs(sigma - 1.0), 0.05)
        self.assertEqual(m.n_obs, 10_000)

    def test_laplace_refit(self):
        x = np.random.default_rng(2).laplace(0.0, 2.0, 10_000)
        m = fit_marginal(x, MarginalFamily.LAPLACE)
        self.assertLess(abs(m.params[1] - 2.0), 0.1)

    def test_constant_sample_is_degenerate(self):
        with self.assertRaises(FitError) as ctx:
            fit_marginal(np.full(100, 0.3), MarginalFamily.GAUSSIAN)
        self.assertIn("degenerate", ctx.exception.flags)

    def test_too_short_sample(self):
        with self.assertRaises(FitError):
            fit_marginal(np.arange(5.0), MarginalFamily.GAUSSIAN)

    def test_aic_counts_parameters(self):
        x = np.random.default_rng(3).standard_normal(500)
        m = fit_marginal(x, MarginalFamily.GAUSSIAN)
        loglik = stats.norm.logpdf(x, *m.params).sum()
        self.assertAlmostEqual(m.aic, 4.0 - 2.0 * loglik, places=6)


class SelectMarginalTests(SimpleTestCase):
    def test_heavy_tails_prefer_student_t(self):
        x = stats.t.rvs(3, size=5000, random_state=np.random.default_rng(4))
        m = select_marginal(x, [MarginalFamily.GAUSSIAN, MarginalFamily.STUDENT_T])
        self.assertEqual(m.family, MarginalFamily.STUDENT_T)

    def test_normal_quantile_grid_selects_gaussian(self):
        grid = stats.norm.ppf((np.arange(1, 1001) - 0.5) / 1000)
        m = select_marginal(grid, [MarginalFamily.GAUSSIAN, MarginalFamily.LAPLACE])
        self.assertEqual(m.family, MarginalFamily.GAUSSIAN)

    def test_singleton_family_set(self):
        x = np.random.default_rng(5).standard_normal(200)
        self.assertEqual(select_marginal(x, [MarginalFamily.GAUSSIAN]).family, MarginalFamily.GAUSSIAN)

    def test_all_failures_raise(self):
        with self.assertRaises(FitError):
            select_marginal(np.ones(50), [MarginalFamily.GAUSSIAN, MarginalFamily.LAPLACE])

    def test_per_column_fit_reports_column(self):
        matrix = np.column_stack([np.random.default_rng(6).standard_normal(100), np.ones(100)])
        with self.assertRaisesMessage(FitError, "column 1"):
            fit_marginals(matrix, [MarginalFamily.GAUSSIAN])


class TransformTests(SimpleTestCase):
    def test_gaussian_cdf_at_zero(self):
        m = MarginalModel(MarginalFamily.GAUSSIAN, (0.0, 1.0), 0.0, 100)
        self.assertAlmostEqual(float(marginal_cdf(m, 0.0)), 0.5)

    def test_laplace_median(self):
        m = MarginalModel(MarginalFamily.LAPLACE, (0.0, 1.0), 0.0, 100)
        self.assertAlmostEqual(float(marginal_ppf(m, 0.5)), 0.0)

    def test_ppf_rejects_closed_interval(self):
        m = MarginalModel(MarginalFamily.GAUSSIAN, (0.0, 1.0), 0.0, 100)
        with self.assertRaises(ValueError):
            marginal_ppf(m, 1.0)

    def test_cdf_ppf_round_trip(self):
        x = np.random.default_rng(7).standard_t(5, 400)
        m = fit_marginal(x, MarginalFamily.STUDENT_T)
        u = np.linspace(0.01, 0.99, 21)
        np.testing.assert_allclose(m.cdf(m.ppf(u)), u, atol=1e-8)

    def test_empirical_cdf_is_clamped(self):
        x = np.arange(1.0, 41.0)
        m = fit_marginal(x, MarginalFamily.EMPIRICAL)
        self.assertAlmostEqual(float(m.cdf(-100.0)), 1.0 / 41.0)
        self.assertAlmostEqual(float(m.cdf(100.0)), 40.0 / 41.0)
        self.assertAlmostEqual(float(m.ppf(0.5)), 20.5)

    def test_empirical_has_no_density(self):
        m = fit_marginal(np.arange(30.0), MarginalFamily.EMPIRICAL)
        with self.assertRaises(FitError):
            m.logpdf(1.0)

    def test_json_round_trip(self):
        m = fit_marginal(np.random.default_rng(8).standard_normal(100), MarginalFamily.GAUSSIAN)
        self.assertEqual(MarginalModel.from_dict(m.to_dict()), m)


class PseudoObservationTests(SimpleTestCase):
    def test_rank_formula(self):
        np.testing.assert_allclose(pseudo_observations([3.0, 1.0, 2.0])[:, 0], [0.75, 0.25, 0.5])
        np.testing.assert_allclose(pseudo_observations([10.0, 20.0])[:, 0], [1 / 3, 2 / 3])
        np.testing.assert_allclose(pseudo_observations([1.0, 2.0, 3.0])[:, 0], [0.25, 0.5, 0.75])

    def test_ties_take_average_rank(self):
        np.testing.assert_allclose(pseudo_observations([5.0, 5.0])[:, 0], [0.5, 0.5])

    def test_columns_are_ranked_separately(self):
        u = pseudo_observations(np.array([[1.0, 9.0], [2.0, 8.0], [3.0, 7.0]]))
        np.testing.assert_allclose(u[:, 1], [0.75, 0.5, 0.25])
