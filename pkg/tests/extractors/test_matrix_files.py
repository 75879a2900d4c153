import re

import numpy as np
import pytest

from src.errors import MatrixFormatError
from src.extractors.matrix_files import format_matrix, parse_matrix, read_matrix, write_matrix


class TestParseMatrix:
    """Tests for the plain-text matrix format."""

    def test_comments_and_blank_lines(self):
        text = "# blocks of the inverse example\n\n2 2\n1 1   # first row\n2 0.5\n"

        np.testing.assert_array_equal(parse_matrix(text), [[1.0, 1.0], [2.0, 0.5]])

    def test_empty_matrix(self):
        assert parse_matrix("0 0\n").shape == (0, 0)

    def test_empty_block_reads_back(self):
        assert parse_matrix(format_matrix(np.zeros((0, 3)))).shape == (0, 3)

    @pytest.mark.parametrize(
        ("text", "line", "message"),
        [
            ("", None, "missing 'rows cols' header"),
            ("2\n1 2\n", 1, "header must be 'rows cols'"),
            ("a b\n", 1, "two integers"),
            ("2 2\n1 2\n", 2, "expected 2 rows, found 1"),
            ("1 2\n1\n", 2, "expected 2 values, found 1"),
            ("1 2\n1 x\n", 2, "non-numeric token 'x'"),
            ("# c\n1 1\nnan\n", 3, "non-finite value 'nan'"),
        ],
    )
    def test_errors_carry_line_numbers(self, text, line, message):
        with pytest.raises(MatrixFormatError, match=message) as excinfo:
            parse_matrix(text, "m.txt")

        assert excinfo.value.line == line
        assert excinfo.value.path == "m.txt"
        if line is not None:
            assert str(excinfo.value).startswith(f"m.txt:{line}:")


class TestMatrixFiles:
    """Tests for reading and writing matrix files."""

    def test_written_values_read_back_exactly(self, tmp_path):
        m = np.array([[1.0 / 3.0, -2.0e-17], [np.pi, 1e300]])
        path = write_matrix(tmp_path / "nested" / "m.txt", m, comment="thirds\nand pi")

        assert path.read_text().startswith("# thirds\n# and pi\n2 2\n")
        np.testing.assert_array_equal(read_matrix(path), m)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_matrix(tmp_path / "absent.txt")

    def test_error_names_file(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1 1\noops\n")

        with pytest.raises(MatrixFormatError, match=re.escape(f"{path}:2:")):
            read_matrix(path)

    def test_invalid_utf8_names_file(self, tmp_path):
        path = tmp_path / "latin1.txt"
        path.write_bytes(b"# caf\xe9\n1 1\n2\n")

        with pytest.raises(MatrixFormatError, match="not UTF-8 text") as excinfo:
            read_matrix(path)

        assert excinfo.value.path == str(path)
        assert excinfo.value.line is None
        assert str(excinfo.value).startswith(f"{path}:")

    def test_refuses_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            format_matrix(np.array([[np.inf]]))
