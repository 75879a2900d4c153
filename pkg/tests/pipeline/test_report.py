import json
from enum import Enum
from pathlib import Path
from typing import NamedTuple
from unittest import mock

import numpy as np
import pandas as pd
import pytest

from src.complementability.schur import SchurRoute
from src.operators.blockops import NormSandwich
from src.operators.douglas import InfCheck
from src.pipeline.report import SCHURKIT_VERSION, build_report, dumps_report, to_jsonable, write_report


class Pair(NamedTuple):
    left: int
    right: float


class Color(Enum):
    RED = "red"


class TestToJsonable:
    """Tests for converting report content."""

    def test_scalars(self):
        assert to_jsonable(None) is None
        assert to_jsonable(True) is True
        assert to_jsonable(np.bool_(False)) is False
        assert to_jsonable(np.int64(3)) == 3
        assert to_jsonable("x") == "x"
        assert to_jsonable(Color.RED) == "red"
        assert to_jsonable(SchurRoute.CLASSICAL) == "classical"
        assert to_jsonable(Path("a/b.json")) == str(Path("a/b.json"))

    def test_non_finite_floats_become_strings(self):
        assert to_jsonable(float("inf")) == "inf"
        assert to_jsonable(-np.inf) == "-inf"
        assert to_jsonable(float("nan")) == "nan"

    def test_containers(self):
        out = to_jsonable({"m": np.array([[1, 2]]), "t": Pair(1, 2.5), 3: [np.int32(4)]})

        assert out["m"] == [[1, 2]]
        assert out["t"]["left"] == 1
        assert out["3"] == [4]

    def test_dataclass(self):
        out = to_jsonable(InfCheck(inf_lambda=4.0, norm_c=2.0, matches_sq_norm=True, matches_linear_norm=False))

        assert set(out) == {"inf_lambda", "norm_c", "matches_sq_norm", "matches_linear_norm"}
        assert out["matches_linear_norm"] is False

    def test_named_tuple(self):
        out = to_jsonable(NormSandwich(lower=1.0, norm=2.0, upper=3.0, holds=True))

        assert set(out) == {"lower", "norm", "upper", "holds"}
        assert out["holds"] is True

    def test_dataframe_as_records(self):
        frame = pd.DataFrame({"n": [1, 2], "gap": [0.5, np.inf]})
        out = to_jsonable(frame)

        assert len(out) == 2
        assert out[0]["n"] == 1
        assert out[1]["gap"] == "inf"

    def test_unknown_type(self):
        with pytest.raises(TypeError, match="Cannot serialize object"):
            to_jsonable(object())


class TestDumpsReport:
    """Tests for the report text."""

    def test_seventeen_digits(self):
        text = dumps_report({"x": 0.1})

        assert "0.10000000000000001" in text
        assert json.loads(text)["x"] == 0.1

    def test_doubles_read_back_exactly(self):
        values = [1.0 / 3.0, 2.0**-40, 1e300, -7.25, np.float64(np.pi)]
        text = dumps_report({"values": values})

        assert json.loads(text)["values"] == [float(v) for v in values]

    def test_strings_are_untouched(self):
        text = dumps_report({"note": "inf", "value": float("inf")})
        data = json.loads(text)

        assert data == {"note": "inf", "value": "inf"}
        assert text.endswith("\n")


class TestBuildReport:
    """Tests for report assembly and writing."""

    @pytest.fixture
    def report(self):
        with mock.patch("src.pipeline.report.datetime") as mock_datetime:
            mock_datetime.now.return_value.isoformat.return_value = "2024-05-01T12:00:00"
            yield build_report(
                scenario={"name": "s"},
                tolerances={"range": 1e-8},
                verdicts={"complementable": True},
                certificates={"lambda_min": 4.0},
                assertions=[],
                tables={},
                exit_code=0,
            )

    def test_layout(self, report):
        assert report["schurkit"] == SCHURKIT_VERSION
        assert report["timestamp"] == "2024-05-01T12:00:00"
        assert report["passed"] is True
        assert report["notes"] == []
        assert set(report) == {
            "schurkit", "timestamp", "scenario", "tolerances", "verdicts",
            "certificates", "assertions", "passed", "exit_code", "notes", "tables",
        }

    def test_failed_exit_code(self):
        report = build_report({}, {}, {}, {}, [], {}, exit_code=1, notes=["n"])

        assert report["passed"] is False
        assert report["notes"] == ["n"]

    def test_write_creates_directories(self, report, tmp_path):
        path = write_report(report, tmp_path / "nested" / "s.json")

        assert path.exists()
        assert json.loads(path.read_text())["certificates"]["lambda_min"] == 4.0
