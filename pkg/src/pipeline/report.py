"""
RunReport serialization.

Floats are written with 17 significant digits so that every double reads
back bit-exactly; infinities and NaN are written as the strings "inf",
"-inf" and "nan".
"""

import dataclasses
import json
import math
import re
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

SCHURKIT_VERSION = "0.1.0"

_FLOAT_TOKEN = "__float17__"
_FLOAT_PATTERN = re.compile(rf'"{_FLOAT_TOKEN}([^"]*)"')


def _float_value(x: float) -> Any:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{_FLOAT_TOKEN}{format(x, '.17g')}"


def to_jsonable(obj: Any) -> Any:
    """
    Convert report content to JSON-ready values.

    Handles dataclasses, named tuples, enums, paths, numpy scalars and
    arrays and pandas DataFrames (as lists of records).
    """
    if obj is None or isinstance(obj, bool):
        return obj
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    if isinstance(obj, float):
        return _float_value(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return _float_value(float(obj))
    if isinstance(obj, np.ndarray):
        return [to_jsonable(x) for x in obj.tolist()]
    if isinstance(obj, pd.DataFrame):
        return [to_jsonable(record) for record in obj.to_dict(orient="records")]
    if isinstance(obj, pd.Series):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, Path):
        return str(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple) and hasattr(obj, "_asdict"):
        return to_jsonable(obj._asdict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list | tuple):
        return [to_jsonable(x) for x in obj]
    raise TypeError(f"Cannot serialize {type(obj).__name__} into a report")


def dumps_report(report: dict[str, Any]) -> str:
    """JSON text of a report with 17-digit floats."""
    text = json.dumps(to_jsonable(report), indent=2, ensure_ascii=False)
    return _FLOAT_PATTERN.sub(r"\1", text) + "\n"


def build_report(
    scenario: dict[str, Any],
    tolerances: dict[str, float],
    verdicts: dict[str, Any],
    certificates: dict[str, Any],
    assertions: list[dict[str, Any]],
    tables: dict[str, Any],
    exit_code: int,
    notes: list[str] | None = None,
) -> dict[str, Any]:
    """Assemble the report layout; the timestamp is the only run-dependent field."""
    return {
        "schurkit": SCHURKIT_VERSION,
        "timestamp": datetime.now().isoformat(),
        "scenario": scenario,
        "tolerances": tolerances,
        "verdicts": verdicts,
        "certificates": certificates,
        "assertions": assertions,
        "passed": exit_code == 0,
        "exit_code": exit_code,
        "notes": notes or [],
        "tables": tables,
    }


def write_report(report: dict[str, Any], path: str | Path) -> Path:
    """Write a report, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_report(report), encoding="utf-8")
    return path
