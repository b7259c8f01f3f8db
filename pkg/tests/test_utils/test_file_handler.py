"""
Tests for artifact file handling.
"""

import numpy as np
import pandas as pd
import pytest

from fpsteer.utils.file_handler import FileHandler


class TestFileHandler:

    def test_ensure_directory(self, tmp_path):
        """Nested directories are created."""
        path = FileHandler.ensure_directory(tmp_path / "a" / "b")
        assert path.is_dir()
        assert FileHandler.ensure_directory(path) == path

    @pytest.mark.parametrize(
        "name, expected",
        [
            ("example1", "example1"),
            ("my scenario", "my_scenario"),
            ("a/b:c", "a_b_c"),
            ("..", "scenario"),
        ],
    )
    def test_clean_filename(self, name, expected):
        """Invalid characters are replaced."""
        assert FileHandler.clean_filename(name) == expected

    def test_clean_filename_length(self):
        """Names are capped at 255 characters."""
        assert len(FileHandler.clean_filename("x" * 300)) == 255

    @pytest.mark.parametrize(
        "size, expected",
        [(0, "0 B"), (512, "512.0 B"), (2048, "2.0 KB"), (3 * 1024**2, "3.0 MB")],
    )
    def test_format_file_size(self, size, expected):
        """Sizes are shown in binary units."""
        assert FileHandler.format_file_size(size) == expected

    def test_json_is_canonical(self, tmp_path):
        """Key order does not change the bytes written."""
        first = FileHandler.write_json(tmp_path / "first.json", {"b": 1, "a": [1.5]})
        second = FileHandler.write_json(tmp_path / "second.json", {"a": [1.5], "b": 1})
        assert first.read_bytes() == second.read_bytes()
        assert FileHandler.read_json(first) == {"a": [1.5], "b": 1}

    def test_json_numpy_values(self, tmp_path):
        """numpy scalars and arrays are written as plain JSON."""
        path = FileHandler.write_json(
            tmp_path / "sub" / "data.json",
            {"scalar": np.float64(0.25), "array": np.array([1.0, 2.0])},
        )
        assert FileHandler.read_json(path) == {"array": [1.0, 2.0], "scalar": 0.25}

    def test_json_rejects_unknown_types(self, tmp_path):
        """Arbitrary objects are not serialized."""
        with pytest.raises(TypeError):
            FileHandler.write_json(tmp_path / "bad.json", {"value": object()})

    def test_read_missing(self, tmp_path):
        """Missing artifacts raise FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            FileHandler.read_json(tmp_path / "missing.json")
        with pytest.raises(FileNotFoundError):
            FileHandler.read_csv(tmp_path / "missing.csv")

    def test_csv_round_trip_precision(self, tmp_path):
        """Floats survive a CSV round trip exactly."""
        values = np.random.default_rng(1).normal(size=50)
        frame = pd.DataFrame({"run": np.arange(50), "x": values})
        path = FileHandler.write_csv(tmp_path / "samples.csv", frame)
        loaded = FileHandler.read_csv(path)
        np.testing.assert_array_equal(loaded["x"].to_numpy(), values)
        assert list(loaded.columns) == ["run", "x"]

    def test_file_digest(self, tmp_path):
        """Digests change with the file bytes."""
        path = tmp_path / "data.txt"
        path.write_text("one")
        before = FileHandler.file_digest(path)
        assert before == FileHandler.file_digest(path)
        path.write_text("two")
        assert FileHandler.file_digest(path) != before

    def test_canonical_digest(self):
        """Equal mappings have equal digests regardless of key order."""
        first = FileHandler.canonical_digest({"a": 1, "b": 2})
        second = FileHandler.canonical_digest({"b": 2, "a": 1})
        assert first == second
        assert first != FileHandler.canonical_digest({"a": 1, "b": 3})
