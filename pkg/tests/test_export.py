import json
import sys
import tempfile
import unittest
from enum import Enum
from pathlib import Path

import numpy as np


SRC_DIR = Path(__file__).resolve().parents[1] / "src"
sys.path.insert(0, str(SRC_DIR))

import export
from vgp_sim import SamplePaths


class Colour(Enum):
    RED = "red"


class JsonTests(unittest.TestCase):
    def test_complex_values_become_objects(self):
        payload = {"value": 1 + 2j, "array": np.array([0.5, -1j]), "kind": Colour.RED, "flag": np.bool_(True)}
        decoded = json.loads(export.to_json(payload))
        self.assertEqual(decoded["value"], {"re": 1.0, "im": 2.0})
        self.assertEqual(decoded["array"], [{"re": 0.5, "im": 0.0}, {"re": 0.0, "im": -1.0}])
        self.assertEqual(decoded["kind"], "red")
        self.assertIs(decoded["flag"], True)

    def test_shortest_float_representation(self):
        text = export.to_json({"x": 0.1, "n": np.int64(3)})
        self.assertIn('"x": 0.1', text)
        self.assertIn('"n": 3', text)
        self.assertTrue(text.endswith("\n"))


class CsvTests(unittest.TestCase):
    def setUp(self):
        self.temporary = tempfile.TemporaryDirectory()
        self.root = Path(self.temporary.name)

    def tearDown(self):
        self.temporary.cleanup()

    def test_matrix_columns(self):
        frame = export.matrix_frame(np.array([[1, 2j], [-2j, 3]]))
        self.assertEqual(list(frame.columns), ["row", "re_0", "im_0", "re_1", "im_1"])
        self.assertEqual(frame.loc[0, "im_1"], 2.0)

    def test_full_precision(self):
        text = export.frame_to_csv(export.matrix_frame(np.array([[0.1]])))
        self.assertIn("0.10000000000000001", text)

    def test_matrix_read_back(self):
        matrix = np.array([[1.0, 0.3 - 0.2j], [0.3 + 0.2j, 2.0]])
        path = self.root / "matrix.csv"
        export.atomic_write_text(path, export.frame_to_csv(export.matrix_frame(matrix)))
        np.testing.assert_array_equal(export.read_matrix_csv(path), matrix)

    def test_paths_columns(self):
        paths = SamplePaths(np.zeros((0, 2), dtype=complex), 7)
        text = export.frame_to_csv(export.paths_frame(paths))
        self.assertEqual(text.strip(), "path,re_0,im_0,re_1,im_1")


class BinaryTests(unittest.TestCase):
    def setUp(self):
        self.temporary = tempfile.TemporaryDirectory()
        self.root = Path(self.temporary.name)

    def tearDown(self):
        self.temporary.cleanup()

    def test_layout(self):
        values = np.array([[1 + 2j, 3 - 4j], [0.5j, -1.0]])
        data = export.paths_to_bytes(SamplePaths(values, 2**63 + 5))
        self.assertEqual(len(data), 24 + 4 * 16)
        header = np.frombuffer(data[:24], dtype="<u8")
        self.assertEqual(header.tolist(), [2, 2, 2**63 + 5])
        body = np.frombuffer(data[24:], dtype="<f8")
        np.testing.assert_array_equal(body[:4], [1.0, 2.0, 3.0, -4.0])

    def test_file_round_trip(self):
        values = np.arange(6).reshape(3, 2) * (1 - 1j)
        path = self.root / "out" / "paths.bin"
        export.write_paths_binary(path, SamplePaths(values, 42))
        loaded = export.read_paths_binary(path)
        np.testing.assert_array_equal(loaded.values, values)
        self.assertEqual(loaded.seed, 42)
        self.assertEqual(sorted(p.name for p in path.parent.iterdir()), ["paths.bin"])

    def test_truncated_file(self):
        path = self.root / "short.bin"
        path.write_bytes(export.paths_to_bytes(SamplePaths(np.ones((2, 2), dtype=complex), 1))[:-8])
        with self.assertRaises(export.ExportError):
            export.read_paths_binary(path)
        path.write_bytes(b"\x00" * 10)
        with self.assertRaises(export.ExportError):
            export.read_paths_binary(path)


class AtomicWriteTests(unittest.TestCase):
    def setUp(self):
        self.temporary = tempfile.TemporaryDirectory()
        self.root = Path(self.temporary.name)

    def tearDown(self):
        self.temporary.cleanup()

    def test_replaces_existing_file(self):
        path = self.root / "result.json"
        export.atomic_write_text(path, "first\n")
        export.atomic_write_text(path, "second\n")
        self.assertEqual(path.read_text(encoding="utf-8"), "second\n")
        self.assertEqual([p.name for p in self.root.iterdir()], ["result.json"])

    def test_unwritable_target(self):
        blocker = self.root / "file"
        blocker.write_text("x", encoding="utf-8")
        with self.assertRaises(export.ExportError):
            export.atomic_write_text(blocker / "child.json", "{}")


if __name__ == "__main__":
    unittest.main()
