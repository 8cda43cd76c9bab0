import numpy as np
from django.test import SimpleTestCase
from scipy import stats

from core.choices import CopulaFamily, CopulaPreset
from core.copula import (
    BicopModel,
    EllipticalCopula,
    bicop_cdf,
    bicop_hfunc,
    bicop_hfunc_swap,
    bicop_hinv,
    bicop_hinv_swap,
    bicop_sample,
    fit_bicop,
    fit_elliptical_copula,
    kendall_tau,
    nearest_correlation,
    preset_families,
    sample_elliptical_copula,
    tau_to_param,
)
from core.exceptions import FitError

PAIR_MODELS = [
    BicopModel(CopulaFamily.GAUSSIAN, 0, (0.6,)),
    BicopModel(CopulaFamily.STUDENT_T, 0, (-0.4, 6.0)),
    BicopModel(CopulaFamily.CLAYTON, 0, (2.0,)),
    BicopModel(CopulaFamily.CLAYTON, 90, (1.5,)),
    BicopModel(CopulaFamily.GUMBEL, 180, (1.8,)),
    BicopModel(CopulaFamily.GUMBEL, 270, (2.5,)),
    BicopModel(CopulaFamily.FRANK, 0, (-4.0,)),
    BicopModel(CopulaFamily.JOE, 0, (2.0,)),
]


class KendallTauTests(SimpleTestCase):
    def test_perfect_agreement(self):
        self.assertEqual(kendall_tau([1, 2, 3], [1, 2, 3]), 1.0)
        self.assertEqual(kendall_tau([1, 2, 3], [3, 2, 1]), -1.0)

    def test_constant_input(self):
        with self.assertLogs("core.copula", level="WARNING"):
            self.assertEqual(kendall_tau([1, 1, 1], [1, 2, 3]), 0.0)

    def test_gaussian_dependence(self):
        c = EllipticalCopula(CopulaFamily.GAUSSIAN, np.array([[1.0, 0.5], [0.5, 1.0]]))
        u = sample_elliptical_copula(c, 5000, 3)
        self.assertLess(abs(kendall_tau(u[:, 0], u[:, 1]) - 1.0 / 3.0), 0.03)


class PairCopulaTests(SimpleTestCase):
    def test_clayton_cdf_closed_form(self):
        m = BicopModel(CopulaFamily.CLAYTON, 0, (2.0,))
        self.assertAlmostEqual(float(bicop_cdf(m, 0.5, 0.5)), 7.0**-0.5, places=12)

    def test_independence_hfunc(self):
        m = BicopModel()
        u = np.linspace(0.05, 0.95, 10)
        np.testing.assert_allclose(bicop_hfunc(m, u, 0.3), u)

    def test_hinv_inverts_hfunc(self):
        grid = np.linspace(0.02, 0.98, 21)
        p, v = np.meshgrid(grid, grid)
        for m in PAIR_MODELS:
            with self.subTest(family=m.family, rotation=m.rotation):
                u = bicop_hinv(m, p, v)
                np.testing.assert_allclose(bicop_hfunc(m, u, v), p, atol=1e-6)
                w = bicop_hinv_swap(m, p, v)
                np.testing.assert_allclose(bicop_hfunc_swap(m, v, w), p, atol=1e-6)

    def test_hfunc_is_cdf_derivative(self):
        u, v, e = 0.3, 0.6, 1e-6
        for rotation in (0, 90, 180, 270):
            m = BicopModel(CopulaFamily.CLAYTON, rotation, (2.0,))
            with self.subTest(rotation=rotation):
                dv = (bicop_cdf(m, u, v + e) - bicop_cdf(m, u, v - e)) / (2 * e)
                du = (bicop_cdf(m, u + e, v) - bicop_cdf(m, u - e, v)) / (2 * e)
                self.assertAlmostEqual(float(bicop_hfunc(m, u, v)), float(dv), places=5)
                self.assertAlmostEqual(float(bicop_hfunc_swap(m, u, v)), float(du), places=5)

    def test_rotation_must_be_known(self):
        with self.assertRaises(ValueError):
            BicopModel(CopulaFamily.CLAYTON, 45, (1.0,))

    def test_tau_inversion(self):
        self.assertAlmostEqual(tau_to_param(CopulaFamily.CLAYTON, 0.5), 2.0)
        self.assertAlmostEqual(tau_to_param(CopulaFamily.GUMBEL, 0.5), 2.0)
        self.assertAlmostEqual(tau_to_param(CopulaFamily.GAUSSIAN, 1.0 / 3.0), 0.5)

    def test_json_round_trip(self):
        m = BicopModel(CopulaFamily.GUMBEL, 180, (1.8,), aic=-10.0, loglik=6.0)
        self.assertEqual(BicopModel.from_dict(m.to_dict()), m)


class FitBicopTests(SimpleTestCase):
    def test_clayton_refit(self):
        truth = BicopModel(CopulaFamily.CLAYTON, 0, (2.0,))
        u = bicop_sample(truth, 2000, 5)
        m = fit_bicop(u, preset_families(CopulaPreset.ARCHIMEDEAN))
        self.assertEqual(m.family, CopulaFamily.CLAYTON)
        self.assertEqual(m.rotation, 0)
        self.assertGreaterEqual(m.params[0], 1.7)
        self.assertLessEqual(m.params[0], 2.3)

    def test_negative_dependence_uses_rotations(self):
        truth = BicopModel(CopulaFamily.CLAYTON, 90, (3.0,))
        u = bicop_sample(truth, 1500, 6)
        m = fit_bicop(u, preset_families(CopulaPreset.ARCHIMEDEAN, include_joe=False))
        self.assertIn(m.rotation, (0, 90, 270))
        self.assertLess(kendall_tau(u[:, 0], u[:, 1]), 0.0)

    def test_independent_sample_selects_independence(self):
        u = np.random.default_rng(7).random((500, 2))
        m = fit_bicop(u, preset_families(CopulaPreset.ELLIPTICAL))
        self.assertTrue(m.is_independence or abs(m.params[0]) < 0.15)

    def test_too_few_rows(self):
        with self.assertRaises(FitError):
            fit_bicop(np.random.default_rng(8).random((10, 2)), preset_families(CopulaPreset.ALLFAM))

    def test_presets(self):
        self.assertNotIn(CopulaFamily.JOE, preset_families(CopulaPreset.ALLFAM, include_joe=False))
        self.assertIn(CopulaFamily.INDEPENDENCE, preset_families(CopulaPreset.ELLIPTICAL))
        self.assertEqual(len(preset_families(CopulaPreset.ALLFAM)), 7)


class EllipticalCopulaTests(SimpleTestCase):
    def test_gaussian_refit(self):
        truth = EllipticalCopula(CopulaFamily.GAUSSIAN, np.array([[1.0, 0.7], [0.7, 1.0]]))
        c = fit_elliptical_copula(sample_elliptical_copula(truth, 5000, 9), CopulaFamily.GAUSSIAN)
        self.assertGreaterEqual(c.R[0, 1], 0.68)
        self.assertLessEqual(c.R[0, 1], 0.72)

    def test_single_column(self):
        c = fit_elliptical_copula(np.random.default_rng(10).random((20, 1)), CopulaFamily.GAUSSIAN)
        np.testing.assert_array_equal(c.R, [[1.0]])

    def test_too_few_rows(self):
        with self.assertRaises(FitError):
            fit_elliptical_copula(np.random.default_rng(11).random((12, 3)), CopulaFamily.GAUSSIAN)

    def test_rejects_archimedean_kind(self):
        with self.assertRaises(ValueError):
            fit_elliptical_copula(np.random.default_rng(12).random((50, 2)), CopulaFamily.CLAYTON)

    def test_sampling_is_seeded_and_uniform(self):
        c = EllipticalCopula(CopulaFamily.STUDENT_T, np.array([[1.0, -0.3], [-0.3, 1.0]]), nu=5.0)
        first = sample_elliptical_copula(c, 4000, 13)
        np.testing.assert_array_equal(first, sample_elliptical_copula(c, 4000, 13))
        for column in first.T:
            self.assertGreater(stats.kstest(column, "uniform").pvalue, 1e-3)

    def test_nearest_correlation_projects(self):
        R = np.array([[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]])
        fixed, projected = nearest_correlation(R)
        self.assertTrue(projected)
        np.testing.assert_allclose(np.diag(fixed), 1.0)
        self.assertGreater(np.linalg.eigvalsh(fixed).min(), 0.0)
