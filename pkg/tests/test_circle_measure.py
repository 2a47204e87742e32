import sys
import unittest
from pathlib import Path

import numpy as np


SRC_DIR = Path(__file__).resolve().parents[1] / "src"
sys.path.insert(0, str(SRC_DIR))

import circle_measure as cm


class DensityTests(unittest.TestCase):
    def test_rational_density_rejects_phi_roots_inside_the_disk(self):
        with self.assertRaises(cm.MeasureError) as caught:
            cm.RationalDensity((1.0,), (1.0, -2.0))
        self.assertIn("density.phi", str(caught.exception))

    def test_rational_density_collects_every_problem(self):
        with self.assertRaises(cm.MeasureError) as caught:
            cm.RationalDensity((0.0,), (1.0, -2.0), delta2=-1.0)
        self.assertEqual(len(caught.exception.errors), 3)

    def test_tabulated_density_interpolates_periodically(self):
        density = cm.TabulatedDensity((1.0, 3.0))
        np.testing.assert_allclose(density.values(4), [1.0, 2.0, 3.0, 2.0])

    def test_tabulated_density_rejects_negative_samples(self):
        with self.assertRaises(cm.MeasureError):
            cm.TabulatedDensity((1.0, -0.5))


class MeasureTests(unittest.TestCase):
    def test_grid_size_must_be_a_power_of_two(self):
        with self.assertRaises(cm.MeasureError) as caught:
            cm.CircleMeasure(grid_size=1000)
        self.assertIn("grid_size", str(caught.exception))

    def test_zero_total_mass_is_rejected(self):
        with self.assertRaises(cm.MeasureError) as caught:
            cm.CircleMeasure(cm.TabulatedDensity((0.0,) * 8), grid_size=64)
        self.assertIn("zero total mass", str(caught.exception))

    def test_atom_alone_is_a_valid_measure(self):
        measure = cm.CircleMeasure(
            cm.TabulatedDensity((0.0,) * 4), (cm.Atom.from_angle(0.3, 2.0),), grid_size=64
        )
        self.assertAlmostEqual(cm.total_mass(measure), 2.0)
        self.assertAlmostEqual(measure.atoms[0].angle, 0.3)

    def test_total_mass_of_ar1_density(self):
        measure = cm.arma_spectral_measure((1.0,), (1.0, -0.5))
        self.assertAlmostEqual(cm.total_mass(measure), 4.0 / 3.0, places=12)

    def test_total_mass_adds_atoms(self):
        measure = cm.CircleMeasure(atoms=(cm.Atom.from_angle(1.0, 0.25),), grid_size=256)
        self.assertAlmostEqual(cm.total_mass(measure), 1.25, places=12)

    def test_white_noise_measure_mass(self):
        self.assertAlmostEqual(cm.total_mass(cm.white_noise_measure(2.0, 256)), 2.0, places=12)

    def test_coarse_grid_is_detected_near_a_pole(self):
        self.assertFalse(cm.grid_too_coarse(cm.CircleMeasure(grid_size=16)))
        self.assertTrue(cm.grid_too_coarse(cm.arma_spectral_measure((1.0,), (1.0, -0.99), grid_size=16)))


class InnerProductTests(unittest.TestCase):
    def setUp(self):
        self.measure = cm.CircleMeasure(grid_size=256)

    def test_monomials_are_orthonormal_under_lebesgue(self):
        t = self.measure.nodes
        gram = cm.gram_matrix(self.measure, np.vstack([t**0, t, t**2]))
        np.testing.assert_allclose(gram, np.eye(3), atol=1e-12)

    def test_inner_product_conjugates_the_second_argument(self):
        f = cm.GridFunction.sample(self.measure, lambda t: 2j * t)
        g = cm.GridFunction.sample(self.measure, lambda t: t)
        self.assertAlmostEqual(cm.inner_product(self.measure, f, g), 2j)

    def test_mismatched_grid_raises(self):
        f = cm.GridFunction(np.ones(128))
        with self.assertRaises(cm.GridMismatchError):
            cm.inner_product(self.measure, f, f)

    def test_atoms_enter_the_gram_matrix(self):
        measure = cm.CircleMeasure(
            cm.TabulatedDensity((0.0,) * 4), (cm.Atom(1j, 1.0),), grid_size=64
        )
        t = measure.nodes
        gram = cm.gram_matrix(measure, np.vstack([t**0, t]), np.array([[1.0], [1j]]))
        np.testing.assert_allclose(gram, [[1.0, 1j], [-1j, 1.0]], atol=1e-12)


class SzegoTests(unittest.TestCase):
    def test_lebesgue_szego_function_is_one(self):
        measure = cm.CircleMeasure(grid_size=256)
        self.assertTrue(cm.is_szego_class(measure).is_szego)
        self.assertAlmostEqual(cm.szego_function(measure, 0.3), 1.0)

    def test_ar1_szego_function_has_closed_form(self):
        measure = cm.arma_spectral_measure((1.0,), (1.0, -0.5), grid_size=1024)
        z = np.array([0.0, 0.3, -0.2 + 0.4j])
        np.testing.assert_allclose(cm.szego_function(measure, z), 1.0 / (1.0 - 0.5 * z), atol=1e-10)

    def test_geometric_mean_scales_with_delta2(self):
        measure = cm.arma_spectral_measure((1.0,), (1.0, -0.5), delta2=2.0, grid_size=1024)
        self.assertAlmostEqual(cm.szego_function(measure, 0.0).real, np.sqrt(2.0), places=10)

    def test_szego_function_is_defined_inside_the_disk_only(self):
        with self.assertRaises(ValueError):
            cm.szego_function(cm.CircleMeasure(grid_size=64), 1.0)

    def test_vanishing_density_is_not_szego(self):
        measure = cm.CircleMeasure(cm.TabulatedDensity((0.0, 1.0, 1.0, 1.0)), grid_size=64)
        check = cm.is_szego_class(measure)
        self.assertFalse(check.is_szego)
        self.assertIn("vanishes", check.diagnostic)
        with self.assertRaises(cm.SzegoClassError):
            cm.szego_function(measure, 0.1)

    def test_density_vanishing_on_the_circle_is_szego(self):
        measure = cm.CircleMeasure(cm.RationalDensity((1.0, -1.0), (1.0,)), grid_size=256)
        self.assertEqual(measure.weights[0], 0.0)
        check = cm.is_szego_class(measure)
        self.assertTrue(check.is_szego)
        self.assertAlmostEqual(check.log_integral, 0.0, places=12)
        z = np.array([0.0, 0.5, -0.3 + 0.2j])
        np.testing.assert_allclose(cm.szego_function(measure, z), 1.0 - z, atol=1e-12)

    def test_numerator_roots_inside_the_disk_are_reflected(self):
        measure = cm.arma_spectral_measure((1.0, -2.0), (1.0,), grid_size=256)
        check = cm.is_szego_class(measure)
        self.assertAlmostEqual(check.log_integral, 2 * np.log(2.0), places=12)
        z = np.array([0.0, 0.4j, -0.7])
        np.testing.assert_allclose(cm.szego_function(measure, z), 2.0 - z, atol=1e-12)
        self.assertLess(cm.boundary_modulus_gap(measure, 0.999), 1e-2)

    def test_boundary_modulus_gap_shrinks_towards_the_circle(self):
        measure = cm.arma_spectral_measure((1.0,), (1.0, -0.2), grid_size=1024)
        near = cm.boundary_modulus_gap(measure, 0.999)
        far = cm.boundary_modulus_gap(measure, 0.99)
        self.assertLess(near, 1e-3)
        self.assertLess(near, far)


if __name__ == "__main__":
    unittest.main()
