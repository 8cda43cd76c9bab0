import json

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase

from core.choices import CopulaFamily, CopulaPreset
from core.copula import BicopModel, EllipticalCopula, bicop_logpdf, bicop_sample, preset_families, sample_elliptical_copula
from core.exceptions import FitError
from core.vine import (
    MIN_VINE_OBS,
    RvineModel,
    VineEdge,
    check_rvine_structure,
    fit_rvine,
    rvine_inverse_rosenblatt,
    rvine_loglik,
    rvine_rosenblatt,
    sample_rvine,
)


def three_variable_vine():
    return RvineModel(
        d=3,
        trees=(
            (
                VineEdge(1, (0, 1), (0, 1), (), BicopModel(CopulaFamily.GAUSSIAN, 0, (0.5,))),
                VineEdge(1, (1, 2), (1, 2), (), BicopModel(CopulaFamily.CLAYTON, 0, (2.0,))),
            ),
            (VineEdge(2, (0, 1), (0, 2), (1,), BicopModel(CopulaFamily.FRANK, 0, (-3.0,))),),
        ),
        order=(0, 1, 2),
    )


class FitRvineTests(SimpleTestCase):
    def test_two_variables_give_one_edge(self):
        u = bicop_sample(BicopModel(CopulaFamily.CLAYTON, 0, (2.0,)), 500, 1)
        model = fit_rvine(u, preset_families(CopulaPreset.ARCHIMEDEAN))
        self.assertEqual(len(model.trees), 1)
        self.assertEqual(len(model.trees[0]), 1)
        self.assertEqual(model.trees[0][0].copula.family, CopulaFamily.CLAYTON)
        self.assertEqual(check_rvine_structure(model), [])

    def test_three_variables(self):
        R = np.array([[1.0, 0.6, 0.3], [0.6, 1.0, 0.5], [0.3, 0.5, 1.0]])
        u = sample_elliptical_copula(EllipticalCopula(CopulaFamily.GAUSSIAN, R), 800, 2)
        model = fit_rvine(u, preset_families(CopulaPreset.ELLIPTICAL), labels=["A", "B", "C"])
        self.assertEqual([len(tree) for tree in model.trees], [2, 1])
        self.assertEqual(len(model.trees[1][0].conditioning), 1)
        self.assertEqual(model.order, ("A", "B", "C"))
        self.assertEqual(check_rvine_structure(model), [])

    def test_strongest_pair_is_in_the_first_tree(self):
        R = np.array([[1.0, 0.1, 0.8], [0.1, 1.0, 0.2], [0.8, 0.2, 1.0]])
        u = sample_elliptical_copula(EllipticalCopula(CopulaFamily.GAUSSIAN, R), 1000, 3)
        model = fit_rvine(u, preset_families(CopulaPreset.ELLIPTICAL))
        self.assertIn((0, 2), [edge.conditioned for edge in model.trees[0]])

    def test_rejects_small_inputs(self):
        with self.assertRaises(FitError):
            fit_rvine(np.random.default_rng(4).random((100, 1)), preset_families(CopulaPreset.ALLFAM))
        with self.assertRaises(FitError):
            fit_rvine(np.random.default_rng(5).random((10, 3)), preset_families(CopulaPreset.ALLFAM))

    def test_minimum_sample_boundary(self):
        u = np.random.default_rng(6).random((MIN_VINE_OBS, 3))
        with self.assertRaisesMessage(FitError, f"at least {MIN_VINE_OBS} rows"):
            fit_rvine(u[:-1], preset_families(CopulaPreset.ALLFAM))
        model = fit_rvine(u, preset_families(CopulaPreset.ALLFAM))
        self.assertEqual([len(tree) for tree in model.trees], [2, 1])
        self.assertEqual(check_rvine_structure(model), [])

    def test_fits_a_default_fit_window(self):
        R = np.array([[1.0, 0.6, 0.3], [0.6, 1.0, 0.5], [0.3, 0.5, 1.0]])
        u = sample_elliptical_copula(EllipticalCopula(CopulaFamily.GAUSSIAN, R), settings.FIT_WINDOW_STEPS, 7)
        model = fit_rvine(u, preset_families(CopulaPreset.ELLIPTICAL))
        self.assertEqual(check_rvine_structure(model), [])


class StructureTests(SimpleTestCase):
    def test_valid_vine(self):
        self.assertEqual(check_rvine_structure(three_variable_vine()), [])

    def test_missing_tree(self):
        model = three_variable_vine()
        broken = RvineModel(3, model.trees[:1])
        self.assertTrue(check_rvine_structure(broken))

    def test_inconsistent_conditioning(self):
        model = three_variable_vine()
        bad_edge = VineEdge(2, (0, 1), (0, 2), (), BicopModel())
        broken = RvineModel(3, (model.trees[0], (bad_edge,)))
        self.assertTrue(check_rvine_structure(broken))


class TransformTests(SimpleTestCase):
    def test_rosenblatt_inverts_exactly(self):
        model = three_variable_vine()
        w = np.random.default_rng(6).uniform(0.001, 0.999, (300, 3))
        u = rvine_inverse_rosenblatt(model, w)
        np.testing.assert_allclose(rvine_rosenblatt(model, u), w, atol=1e-9)

    def test_fitted_vine_round_trip(self):
        R = np.array(
            [[1.0, 0.5, 0.3, 0.2], [0.5, 1.0, 0.4, 0.1], [0.3, 0.4, 1.0, 0.6], [0.2, 0.1, 0.6, 1.0]]
        )
        u = sample_elliptical_copula(EllipticalCopula(CopulaFamily.STUDENT_T, R, nu=5.0), 600, 7)
        model = fit_rvine(u, preset_families(CopulaPreset.ALLFAM))
        w = np.random.default_rng(8).uniform(0.01, 0.99, (200, 4))
        np.testing.assert_allclose(rvine_rosenblatt(model, rvine_inverse_rosenblatt(model, w)), w, atol=1e-7)

    def test_sampling_is_seeded(self):
        model = three_variable_vine()
        first = sample_rvine(model, 1000, 9)
        np.testing.assert_array_equal(first, sample_rvine(model, 1000, 9))
        self.assertTrue(np.all((first > 0.0) & (first < 1.0)))

    def test_single_edge_loglik(self):
        copula = BicopModel(CopulaFamily.GAUSSIAN, 0, (0.4,))
        model = RvineModel(2, ((VineEdge(1, (0, 1), (0, 1), (), copula),),))
        u = np.random.default_rng(10).random((50, 2))
        self.assertAlmostEqual(rvine_loglik(model, u), float(np.sum(bicop_logpdf(copula, u[:, 0], u[:, 1]))))

    def test_json_round_trip(self):
        R = np.array([[1.0, 0.6, 0.3], [0.6, 1.0, 0.5], [0.3, 0.5, 1.0]])
        u = sample_elliptical_copula(EllipticalCopula(CopulaFamily.GAUSSIAN, R), 300, 11)
        model = fit_rvine(u, preset_families(CopulaPreset.ALLFAM, include_joe=False))
        again = RvineModel.from_dict(json.loads(json.dumps(model.to_dict())))
        self.assertEqual(again, model)
        np.testing.assert_array_equal(sample_rvine(again, 50, 12), sample_rvine(model, 50, 12))
