import numpy as np
from django.test import SimpleTestCase

from core.choices import InnovationDist
from core.exceptions import FitError
from core.volatility import (
    DccModel,
    GarchModel,
    dcc_correlations,
    dcc_q_path,
    fit_dcc11,
    fit_dcc_garch,
    fit_garch11,
    garch_filter,
    garch_forecast_variance,
    garch_variance_path,
    simulate_dcc,
    simulate_garch11,
    to_correlation,
)


def simulate_dcc_residuals(a, b, Qbar, T, seed):
    rng = np.random.default_rng(seed)
    D = Qbar.shape[0]
    eps = np.empty((T, D))
    Q = Qbar.copy()
    for t in range(T):
        if t > 0:
            Q = (1 - a - b) * Qbar + a * np.outer(eps[t - 1], eps[t - 1]) + b * Q
        R = to_correlation(Q[None])[0]
        eps[t] = np.linalg.cholesky(R) @ rng.standard_normal(D)
    return eps


class GarchTests(SimpleTestCase):
    def test_unconditional_variance(self):
        model = GarchModel(mu=0.0, alpha0=0.1, alpha1=0.1, beta1=0.8)
        self.assertAlmostEqual(model.unconditional_variance, 1.0)

    def test_recursion_step(self):
        h = garch_variance_path(np.array([1.0, 0.0]), 0.1, 0.1, 0.8, 1.0)
        np.testing.assert_allclose(h, [1.0, 1.0])

    def test_degenerate_recursion(self):
        model = GarchModel(mu=0.01, alpha0=0.04, alpha1=0.0, beta1=0.0, h0=0.04)
        r = np.array([0.01, 0.21, -0.19, 0.05])
        z, h = garch_filter(model, r)
        np.testing.assert_allclose(h, 0.04)
        np.testing.assert_allclose(z, (r - 0.01) / 0.2)

    def test_filter_recovers_simulated_innovations(self):
        model = GarchModel(mu=0.0, alpha0=0.05, alpha1=0.10, beta1=0.85)
        z = np.random.default_rng(11).standard_normal(500)
        r, _, h = simulate_garch11(model, 500, 0, z=z)
        recovered, path = garch_filter(model, r, h0=h[0])
        np.testing.assert_allclose(recovered, z, atol=1e-10)
        np.testing.assert_allclose(path, h, rtol=1e-10)

    def test_refit_simulated_path(self):
        truth = GarchModel(mu=0.0, alpha0=0.05, alpha1=0.10, beta1=0.85)
        r, _, _ = simulate_garch11(truth, 5000, 12)
        fitted = fit_garch11(r)
        self.assertLess(abs(fitted.alpha0 - 0.05), 0.05)
        self.assertLess(abs(fitted.alpha1 - 0.10), 0.05)
        self.assertLess(abs(fitted.beta1 - 0.85), 0.05)

    def test_iid_sample_has_small_arch_term(self):
        r = np.random.default_rng(13).standard_normal(3000)
        self.assertLess(fit_garch11(r).alpha1, 0.05)

    def test_student_innovations(self):
        truth = GarchModel(mu=0.0, alpha0=0.05, alpha1=0.10, beta1=0.85, dist=InnovationDist.STUDENT_T, nu=6.0)
        r, _, _ = simulate_garch11(truth, 3000, 14)
        fitted = fit_garch11(r, InnovationDist.STUDENT_T)
        self.assertGreater(fitted.nu, 3.0)
        self.assertLess(fitted.nu, 20.0)

    def test_short_or_constant_series(self):
        with self.assertRaises(FitError):
            fit_garch11(np.random.default_rng(0).standard_normal(10))
        with self.assertRaises(FitError):
            fit_garch11(np.zeros(100))

    def test_forecast_uses_last_state(self):
        model = GarchModel(mu=0.0, alpha0=0.1, alpha1=0.2, beta1=0.7, last_h=2.0, last_a=1.0)
        self.assertAlmostEqual(garch_forecast_variance(model), 0.1 + 0.2 + 1.4)

    def test_json_round_trip(self):
        model = GarchModel(mu=0.0, alpha0=0.1, alpha1=0.1, beta1=0.8, dist=InnovationDist.STUDENT_T, nu=5.0, loglik=-12.5)
        self.assertEqual(GarchModel.from_dict(model.to_dict()), model)


class DccTests(SimpleTestCase):
    def test_q_recursion_matches_loop(self):
        eps = np.random.default_rng(20).standard_normal((30, 3))
        Qbar = eps.T @ eps / 30
        path = dcc_q_path(eps, 0.05, 0.9, Qbar)
        Q = Qbar.copy()
        for t in range(1, 30):
            Q = 0.05 * Qbar + 0.05 * np.outer(eps[t - 1], eps[t - 1]) + 0.9 * Q
            np.testing.assert_allclose(path[t], Q, rtol=1e-10)

    def test_static_dynamics_give_constant_correlation(self):
        eps = np.random.default_rng(21).standard_normal((50, 2))
        Qbar = eps.T @ eps / 50
        model = DccModel(a=0.0, b=0.0, Qbar=Qbar, last_Q=Qbar, last_eps=eps[-1])
        R = dcc_correlations(model, eps)
        np.testing.assert_allclose(R, np.broadcast_to(to_correlation(Qbar[None])[0], R.shape))

    def test_scalar_case(self):
        eps = np.random.default_rng(22).standard_normal((100, 1))
        model = fit_dcc11(eps)
        self.assertIn("scalar", model.flags)
        np.testing.assert_array_equal(dcc_correlations(model, eps), np.ones((100, 1, 1)))

    def test_refit_simulated_dcc(self):
        Qbar = np.array([[1.0, 0.4, 0.2], [0.4, 1.0, 0.3], [0.2, 0.3, 1.0]])
        eps = simulate_dcc_residuals(0.05, 0.90, Qbar, 5000, 23)
        model = fit_dcc11(eps)
        self.assertLess(abs(model.a - 0.05), 0.06)
        self.assertLess(abs(model.b - 0.90), 0.06)

    def test_simulation_is_seeded(self):
        returns = np.random.default_rng(24).standard_normal((200, 2)) * 0.02
        model = fit_dcc_garch(returns)
        first = simulate_dcc(model, 1000, 5)
        second = simulate_dcc(model, 1000, 5)
        np.testing.assert_array_equal(first.values, second.values)
        self.assertEqual(first.values.shape, (1000, 2))

    def test_independent_static_model_draws_uncorrelated(self):
        garch = tuple(GarchModel(mu=0.0, alpha0=1.0, alpha1=0.0, beta1=0.0, last_h=1.0) for _ in range(2))
        model = DccModel(a=0.0, b=0.0, Qbar=np.eye(2), last_Q=np.eye(2), last_eps=np.zeros(2), garch=garch)
        values = simulate_dcc(model, 200_000, 7).values
        self.assertLess(abs(np.corrcoef(values.T)[0, 1]), 0.01)
        n = values.shape[0]
        self.assertTrue(np.all(np.abs(values.mean(axis=0)) < 4.0 / np.sqrt(n)))
