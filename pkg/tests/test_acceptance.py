import sys
import tempfile
import unittest
from pathlib import Path

import pandas as pd


SRC_DIR = Path(__file__).resolve().parents[1] / "src"
sys.path.insert(0, str(SRC_DIR))

import acceptance


class RandomInstanceTests(unittest.TestCase):
    def test_instances_are_reproducible(self):
        first = acceptance.random_instances(5, 3, 4)
        second = acceptance.random_instances(5, 3, 4)
        for (measure_a, points_a), (measure_b, points_b) in zip(first, second):
            self.assertEqual(points_a, points_b)
            self.assertEqual(measure_a.density, measure_b.density)
            self.assertEqual(len(points_a), 5)


class CriterionTests(unittest.TestCase):
    def test_small_criteria_pass(self):
        checks = {
            "moment_routes": lambda: acceptance.moment_routes(1, instances=2, n=4),
            "change_of_basis": lambda: acceptance.change_of_basis_coherence(1, instances=2, n=4),
            "orf_correctness": lambda: acceptance.orf_correctness(1, instances=2, n=6),
            "energy_routes": lambda: acceptance.energy_routes(1, instances=2, n=6),
            "fejer_riesz": lambda: acceptance.fejer_riesz(1, instances=3),
        }
        for name, check in checks.items():
            with self.subTest(criterion=name):
                passed, detail = check()
                self.assertTrue(passed, detail)

    def test_runner_selects_criteria(self):
        results = acceptance.run_acceptance(seed=3, only=["fejer_riesz", "orf_correctness"])
        self.assertEqual([result.name for result in results], ["orf_correctness", "fejer_riesz"])
        self.assertTrue(all(result.passed for result in results))
        self.assertTrue(all(result.seconds >= 0 for result in results))


class LogTests(unittest.TestCase):
    def setUp(self):
        self.temporary = tempfile.TemporaryDirectory()
        self.root = Path(self.temporary.name)
        self.log_path = self.root / "acceptance_log.csv"

    def tearDown(self):
        self.temporary.cleanup()

    def test_newest_run_first(self):
        passing = [acceptance.CriterionResult("orf_correctness", True, "", 0.1)]
        failing = [
            acceptance.CriterionResult("orf_correctness", True, "", 0.1),
            acceptance.CriterionResult("varma_filters", False, "gap", 0.2),
            acceptance.CriterionResult("determinism", False, "mismatch", 0.3),
        ]
        acceptance.append_log(self.log_path, passing)
        acceptance.append_log(self.log_path, failing)

        log = pd.read_csv(self.log_path)
        self.assertEqual(list(log.columns), acceptance.LOG_COLUMNS)
        self.assertEqual(len(log), 2)
        self.assertEqual(log.loc[0, "failures"], "varma_filters;determinism")
        self.assertEqual(log.loc[0, "criteria_run"], 3)
        self.assertEqual(log.loc[0, "criteria_passed"], 1)
        self.assertEqual(log.loc[1, "failures"], "NONE")

    def test_unreadable_log(self):
        self.log_path.write_text("not,a\n\"broken", encoding="utf-8")
        with self.assertRaises(acceptance.ExportError):
            acceptance.append_log(self.log_path, [])


if __name__ == "__main__":
    unittest.main()
