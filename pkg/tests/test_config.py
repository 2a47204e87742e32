import json
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np


SRC_DIR = Path(__file__).resolve().parents[1] / "src"
sys.path.insert(0, str(SRC_DIR))

import config
from basis_systems import SystemId
from circle_measure import LebesgueDensity, RationalDensity, TabulatedDensity, total_mass
from errors import ConfigError


class ParseComplexTests(unittest.TestCase):
    def test_numbers_and_objects(self):
        self.assertEqual(config.parse_complex(0.5, "alpha"), 0.5 + 0j)
        self.assertEqual(config.parse_complex({"re": 1, "im": -2}, "alpha"), 1 - 2j)
        self.assertEqual(config.parse_complex({"im": 0.25}, "alpha"), 0.25j)

    def test_rejects_other_values(self):
        for value in ("0.5", True, None, {"re": 1, "imag": 2}):
            with self.subTest(value=value):
                with self.assertRaises(ConfigError):
                    config.parse_complex(value, "alpha")


class BuildMeasureTests(unittest.TestCase):
    def test_default_is_lebesgue(self):
        measure = config.build_measure({}, 256)
        self.assertIsInstance(measure.density, LebesgueDensity)
        self.assertEqual(measure.grid_size, 256)

    def test_rational_density_with_atoms(self):
        spec = {
            "density": {"kind": "rational", "theta": [1], "phi": [1, -0.5], "delta2": 2.0},
            "atoms": [{"angle": 0.5, "mass": 0.25}, {"location": {"re": 0, "im": 1}, "mass": 0.5}],
        }
        measure = config.build_measure(spec, 1024)
        self.assertIsInstance(measure.density, RationalDensity)
        self.assertEqual(len(measure.atoms), 2)
        self.assertAlmostEqual(total_mass(measure), 8.0 / 3.0 + 0.75, places=10)

    def test_tabulated_density(self):
        measure = config.build_measure({"density": {"kind": "tabulated", "samples": [1, 2, 3, 2]}}, 64)
        self.assertIsInstance(measure.density, TabulatedDensity)
        self.assertAlmostEqual(total_mass(measure), 2.0)

    def test_zero_mass(self):
        with self.assertRaises(ConfigError) as caught:
            config.build_measure({"density": {"kind": "tabulated", "samples": [0, 0, 0, 0]}}, 64)
        self.assertIn("zero total mass", str(caught.exception))

    def test_problems_are_collected(self):
        spec = {
            "density": {"kind": "rational", "phi": [1, -2], "delta2": -1},
            "atoms": [{"angle": 0.1}],
        }
        with self.assertRaises(ConfigError) as caught:
            config.build_measure(spec, 64)
        joined = " ".join(caught.exception.errors)
        self.assertIn("measure.density.delta2", joined)
        self.assertIn("measure.atoms[0]", joined)

    def test_measure_must_be_an_object(self):
        for spec in (5, [1, 2], "lebesgue"):
            with self.subTest(spec=spec):
                with self.assertRaises(ConfigError) as caught:
                    config.build_measure(spec, 64)
                self.assertIn("measure:", str(caught.exception))

    def test_atoms_must_be_a_list(self):
        with self.assertRaises(ConfigError) as caught:
            config.build_measure({"atoms": 3}, 64)
        self.assertIn("measure.atoms: expected a list", str(caught.exception))

    def test_unknown_kind(self):
        with self.assertRaises(ConfigError) as caught:
            config.build_measure({"density": {"kind": "gaussian"}}, 64)
        self.assertIn("measure.density.kind", str(caught.exception))


class PointsTests(unittest.TestCase):
    def test_list(self):
        source = config.build_points([0, 0.5, {"re": 0, "im": -0.3}])
        self.assertEqual(source.sequence(3).alphas, (0j, 0.5 + 0j, -0.3j))
        with self.assertRaises(ConfigError):
            source.sequence(4)

    def test_constant_and_convergent(self):
        constant = config.build_points({"constant": 0.3})
        self.assertEqual(constant.sequence(4).alphas, (0j, 0.3 + 0j, 0.3 + 0j, 0.3 + 0j))
        convergent = config.build_points({"convergent": 0.8})
        np.testing.assert_allclose(convergent.sequence(4).array, [0, 0, 0.4, 0.8 * 2 / 3])

    def test_invalid_points(self):
        for spec in ([0.1, 0.2], {"constant": 1.5}, {"linear": 0.2}, "0.5"):
            with self.subTest(spec=spec):
                with self.assertRaises(ConfigError):
                    config.build_points(spec)


class RunConfigTests(unittest.TestCase):
    def setUp(self):
        self.temporary = tempfile.TemporaryDirectory()
        self.root = Path(self.temporary.name)

    def tearDown(self):
        self.temporary.cleanup()

    def test_defaults(self):
        run = config.parse_run_config({})
        self.assertEqual(run.system_id, SystemId.W1)
        self.assertEqual(run.n, 1)
        self.assertEqual(run.seed, config.Config.SEED)
        self.assertEqual(run.output_format, "json")
        self.assertIsNone(run.output_path)
        self.assertIsNone(run.filter)

    def test_overrides_win(self):
        data = {"n": 2, "seed": 5, "points": {"constant": 0.2}, "output": {"format": "csv", "path": "a.csv"}}
        run = config.parse_run_config(data, {"n": 4, "seed": None, "format": "json", "out": "b.json"})
        self.assertEqual(run.n, 4)
        self.assertEqual(run.seed, 5)
        self.assertEqual(run.output_format, "json")
        self.assertEqual(run.output_path, Path("b.json"))

    def test_every_problem_is_reported(self):
        data = {
            "n": -1,
            "system": "w9",
            "seed": 2**63,
            "measure": {"density": {"kind": "rational", "phi": [1, -2]}},
            "kind": "sideways",
        }
        with self.assertRaises(ConfigError) as caught:
            config.parse_run_config(data)
        joined = " ".join(caught.exception.errors)
        for name in ("n:", "system:", "seed:", "density.phi", "kind:"):
            self.assertIn(name, joined)

    def test_output_must_be_an_object(self):
        with self.assertRaises(ConfigError) as caught:
            config.parse_run_config({"output": "out.json"})
        self.assertIn("output: expected an object", str(caught.exception))

    def test_points_must_cover_n(self):
        with self.assertRaises(ConfigError) as caught:
            config.parse_run_config({"n": 3, "points": [0, 0.5]})
        self.assertIn("points.alphas", str(caught.exception))

    def test_w2_with_repeated_points_is_rejected(self):
        with self.assertRaises(ConfigError):
            config.parse_run_config({"n": 2, "system": "w2", "points": {"constant": 0.4}})

    def test_filter_block(self):
        run = config.parse_run_config({"filter": {"theta": [1, 0.4], "phi": [1, -0.5], "tol": 1e-12}})
        self.assertEqual(run.filter["theta"], (1 + 0j, 0.4 + 0j))
        self.assertEqual(run.filter["R"], 1.0)
        with self.assertRaises(ConfigError):
            config.parse_run_config({"filter": {"phi": [1, -0.5], "R": 0.5}})

    def test_system_helper(self):
        run = config.parse_run_config({"n": 2, "system": "w2p", "points": [0, 0.5, -0.3, 0.1]})
        system = run.system()
        self.assertEqual(system.system_id, SystemId.W2P)
        self.assertEqual(system.n, 2)
        self.assertEqual(run.system(3, SystemId.W1).n, 3)

    def test_load_from_file(self):
        path = self.root / "run.json"
        path.write_text(json.dumps({"n": 2, "points": [0, 0.5, -0.3]}), encoding="utf-8")
        run = config.load_run_config(path, {"grid_size": 512})
        self.assertEqual(run.measure.grid_size, 512)
        self.assertEqual(run.point_sequence().alphas[1], 0.5)

    def test_unreadable_file(self):
        path = self.root / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with self.assertRaises(ConfigError):
            config.load_run_config(path)
        path.write_text("[1, 2]", encoding="utf-8")
        with self.assertRaises(ConfigError):
            config.load_run_config(path)


if __name__ == "__main__":
    unittest.main()
