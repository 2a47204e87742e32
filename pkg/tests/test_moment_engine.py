import sys
import unittest
from pathlib import Path

import numpy as np


SRC_DIR = Path(__file__).resolve().parents[1] / "src"
sys.path.insert(0, str(SRC_DIR))

import moment_engine as me
from basis_systems import BasisSystem, PointSequence, SystemId, change_of_basis_matrix
from circle_measure import Atom, CircleMeasure, TabulatedDensity, arma_spectral_measure


POINTS = PointSequence((0, 0.5, -0.3, 0.2 + 0.4j, -0.1j, 0.35))


def rational_measure():
    return arma_spectral_measure((1.0, 0.3), (1.0, -0.4 + 0.2j), delta2=1.5, grid_size=1024)


class GtFromMeasureTests(unittest.TestCase):
    def test_lebesgue_w1_entries_are_blaschke_values_at_zero(self):
        system = BasisSystem(SystemId.W1, PointSequence((0, 0.5, -0.3)), 2)
        gt = me.gt_from_measure(system, CircleMeasure(grid_size=256))
        self.assertAlmostEqual(gt.matrix[0, 1], -0.5)
        self.assertAlmostEqual(gt.matrix[0, 2], -0.15)
        self.assertAlmostEqual(gt.matrix[1, 2], 0.3)
        np.testing.assert_allclose(gt.matrix.diagonal(), 1.0)
        self.assertTrue(me.is_positive(gt).positive)
        self.assertIs(gt.provenance, me.Provenance.QUADRATURE)

    def test_smooth_density_on_a_coarse_grid_raises(self):
        system = BasisSystem(SystemId.W1, PointSequence((0, 0.5)), 1)
        measure = arma_spectral_measure((1.0,), (1.0, -0.98), grid_size=16)
        with self.assertRaises(me.QuadratureInstabilityError):
            me.gt_from_measure(system, measure)

    def test_tabulated_density_only_warns(self):
        system = BasisSystem(SystemId.W1, PointSequence((0, 0.5)), 1)
        measure = CircleMeasure(TabulatedDensity((1.0, 5.0, 0.5, 2.0, 3.0)), grid_size=16)
        with self.assertLogs("moment_engine", level="WARNING"):
            gt = me.gt_from_measure(system, measure)
        self.assertEqual(gt.order, 2)

    def test_window_and_shift(self):
        system = BasisSystem(SystemId.W1, POINTS, 4)
        gt = me.gt_from_measure(system, rational_measure())
        window = gt.window(1, 3)
        self.assertEqual((window.start, window.stop), (1, 3))
        np.testing.assert_allclose(window.matrix, gt.matrix[1:4, 1:4])
        shifted = me.shift_block(gt, 2)
        self.assertEqual(shifted.start, 2)
        np.testing.assert_allclose(shifted.matrix, gt.matrix[2:, 2:])
        with self.assertRaises(ValueError):
            gt.window(0, 5)


class RecurrenceTests(unittest.TestCase):
    def test_moments_reproduce_the_quadrature_matrix(self):
        measure = rational_measure()
        for system_id in (SystemId.W1, SystemId.W2, SystemId.W2P):
            with self.subTest(system=system_id):
                system = BasisSystem(system_id, POINTS, 5)
                quadrature = me.gt_from_measure(system, measure)
                moments = me.MomentSequence.from_gt(quadrature)
                recurrence = me.gt_from_moments(system, moments)
                np.testing.assert_allclose(recurrence.matrix, quadrature.matrix, atol=1e-8)
                self.assertLess(me.recurrence_residual(quadrature), 1e-8)

    def test_short_moment_sequence_is_rejected(self):
        system = BasisSystem(SystemId.W1, POINTS, 3)
        with self.assertRaises(me.MomentError):
            me.gt_from_moments(system, me.MomentSequence([1.0, 0.1], SystemId.W1))

    def test_c0_must_be_real_and_positive(self):
        for bad in ([0.0, 0.1], [1j, 0.1], [-1.0]):
            with self.subTest(values=bad):
                with self.assertRaises(me.MomentError):
                    me.MomentSequence(bad, SystemId.W2)

    def test_indefinite_matrix_is_detected(self):
        check = me.is_positive(np.array([[1.0, 2.0], [2.0, 1.0]]))
        self.assertFalse(check.positive)
        self.assertAlmostEqual(check.min_eigenvalue, -1.0)


class PickTests(unittest.TestCase):
    points = PointSequence((0, 0.9))

    def test_atom_at_one_is_borderline_solvable(self):
        moments = me.MomentSequence([1.0, 10.0], SystemId.W2)
        report = me.pick_solvability(SystemId.W2, self.points, moments)
        self.assertTrue(report.solvable)
        np.testing.assert_allclose(report.matrix, [[1.0, 10.0], [10.0, 100.0]])
        witness = me.discrete_witness(SystemId.W2, self.points, moments)
        self.assertTrue(witness.feasible)
        self.assertAlmostEqual(float(witness.masses.sum()), 1.0, places=6)

    def test_tampered_moment_is_not_solvable(self):
        moments = me.MomentSequence([1.0, 12.0], SystemId.W2)
        report = me.pick_solvability(SystemId.W2, self.points, moments)
        self.assertFalse(report.solvable)
        self.assertLess(report.min_eigenvalue, 0)
        self.assertFalse(me.discrete_witness(SystemId.W2, self.points, moments).feasible)

    def test_w2_pick_matrix_equals_the_gt_matrix(self):
        system = BasisSystem(SystemId.W2, POINTS, 5)
        gt = me.gt_from_measure(system, rational_measure())
        moments = me.MomentSequence.from_gt(gt)
        np.testing.assert_allclose(me.pick_matrix(SystemId.W2, POINTS, moments), gt.matrix, atol=1e-8)

    def test_w1_measure_moments_pass(self):
        system = BasisSystem(SystemId.W1, POINTS, 5)
        moments = me.MomentSequence.from_gt(me.gt_from_measure(system, rational_measure()))
        self.assertTrue(me.pick_solvability(SystemId.W1, POINTS, moments).solvable)

    def test_pick_needs_distinct_points(self):
        points = PointSequence.constant_tail(0.5, 2)
        with self.assertRaises(me.ConfigError):
            me.pick_matrix(SystemId.W2, points, me.MomentSequence([1.0, 1.0, 1.0], SystemId.W2))


class PickSweepTests(unittest.TestCase):
    def test_pick_negative_moments_give_an_indefinite_gt_matrix(self):
        rng = np.random.default_rng(20240229)
        measure = rational_measure()
        indefinite = 0
        for n in range(4, 9):
            for trial in range(3):
                moduli = 0.2 + 0.5 * rng.uniform(size=n)
                points = PointSequence((0j,) + tuple(moduli * np.exp(2j * np.pi * rng.uniform(size=n))))
                system = BasisSystem(SystemId.W1, points, n)
                values = me.MomentSequence.from_gt(me.gt_from_measure(system, measure)).values.copy()
                with self.subTest(n=n, trial=trial):
                    genuine = me.MomentSequence(values, SystemId.W1)
                    self.assertTrue(me.pick_solvability(SystemId.W1, points, genuine).solvable)
                    self.assertTrue(me.is_positive(me.gt_from_moments(system, genuine)).positive)

                    # |c_1| <= c_0 for every measure; the leading 2x2 minors turn negative
                    values[1] += 3 * values[0].real * np.exp(2j * np.pi * rng.uniform())
                    tampered = me.MomentSequence(values, SystemId.W1)
                    report = me.pick_solvability(SystemId.W1, points, tampered)
                    self.assertLess(report.min_eigenvalue, -1e-6)
                    self.assertTrue(np.isfinite(report.printed_min_eigenvalue))
                    self.assertFalse(me.is_positive(me.gt_from_moments(system, tampered)).positive)
                    w2 = me.MomentSequence(me.w1_to_w2_moments(points, values), SystemId.W2)
                    self.assertFalse(me.pick_solvability(SystemId.W2, points, w2).solvable)
                    indefinite += 1
        self.assertEqual(indefinite, 15)


class MomentConversionTests(unittest.TestCase):
    def test_w1_moments_map_to_w2_moments(self):
        measure = rational_measure()
        w1 = BasisSystem(SystemId.W1, POINTS, 5)
        c1 = me.gt_from_measure(w1, measure).matrix[0]
        c2 = me.gt_from_measure(w1.with_id(SystemId.W2), measure).matrix[0]
        np.testing.assert_allclose(me.w1_to_w2_moments(POINTS, c1), c2, atol=1e-9)

    def test_zeta_moments_of_lebesgue(self):
        gamma = np.concatenate([[1.0], -POINTS.array[1:4]])
        np.testing.assert_allclose(me.zeta_moments_to_w2(POINTS, gamma), np.ones(4), atol=1e-12)
        np.testing.assert_allclose(me.w2_to_zeta_moments(POINTS, np.ones(4)), gamma, atol=1e-12)


class TransportTests(unittest.TestCase):
    def test_conjugation_moves_the_gt_matrix_between_systems(self):
        measure = rational_measure()
        source = BasisSystem(SystemId.W2P, POINTS, 5)
        target = source.with_id(SystemId.W1)
        change = change_of_basis_matrix(source, target)
        moved = me.conjugate_gt(me.gt_from_measure(source, measure), change)
        direct = me.gt_from_measure(target, measure)
        np.testing.assert_allclose(moved.matrix, direct.matrix, atol=1e-9)
        self.assertIs(moved.system_id, SystemId.W1)
        self.assertIs(moved.provenance, me.Provenance.CONJUGATED)

    def test_conjugation_checks_the_order(self):
        system = BasisSystem(SystemId.W1, POINTS, 3)
        gt = me.gt_from_measure(system, rational_measure())
        change = change_of_basis_matrix(system.restricted(2), system.restricted(2).with_id(SystemId.W2))
        with self.assertRaises(ValueError):
            me.conjugate_gt(gt, change)


class ExtensionTests(unittest.TestCase):
    def setUp(self):
        self.measure = rational_measure()
        self.system = BasisSystem(SystemId.W1, POINTS, 5)
        self.full = me.gt_from_measure(self.system, self.measure)

    def test_extension_from_moments(self):
        moments = me.MomentSequence.from_gt(self.full)
        block = self.full.window(1, 3)
        grown = me.extend_covariance_block(block, self.full.matrix[3, 4], moments)
        np.testing.assert_allclose(grown.matrix, self.full.matrix[1:5, 1:5], atol=1e-8)
        self.assertEqual((grown.start, grown.stop), (1, 4))

    def test_w1_extension_from_the_corner_alone(self):
        block = self.full.window(0, 3)
        grown = me.extend_covariance_block(block, self.full.matrix[3, 4])
        np.testing.assert_allclose(grown.matrix, self.full.matrix[:5, :5], atol=1e-8)

    def test_inconsistent_corner_raises(self):
        moments = me.MomentSequence.from_gt(self.full)
        block = self.full.window(0, 2)
        with self.assertRaises(me.InconsistentCornerError):
            me.extend_covariance_block(block, self.full.matrix[2, 3] + 0.1, moments)

    def test_extension_followed_by_shift_slides_the_window(self):
        block = self.full.window(0, 3)
        slid = me.shift_block(me.extend_covariance_block(block, self.full.matrix[3, 4]))
        np.testing.assert_allclose(slid.matrix, self.full.matrix[1:5, 1:5], atol=1e-8)


class AtomTests(unittest.TestCase):
    def test_single_atom_gives_a_rank_one_matrix(self):
        measure = CircleMeasure(TabulatedDensity((0.0,) * 4), (Atom.from_angle(0.4, 1.0),), grid_size=64)
        system = BasisSystem(SystemId.W1, POINTS, 3)
        gt = me.gt_from_measure(system, measure)
        self.assertEqual(np.linalg.matrix_rank(gt.matrix, tol=1e-9), 1)
        self.assertTrue(me.is_positive(gt).positive)


if __name__ == "__main__":
    unittest.main()
