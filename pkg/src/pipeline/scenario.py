"""
Scenario files.

A scenario names one command, its inputs, optional tolerance overrides, a
seed and an ``expect`` block of assertions on the command's result. A file
holds either one scenario object or a list of them.
"""

import json
import re
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import Any

import numpy as np

from config.presets import get_preset
from src.convergence.generators import Profile, SequenceKind, SequenceParams
from src.errors import ScenarioError
from src.extractors.matrix_files import read_matrix
from src.linalg.numkernel import Mat, as_mat
from src.operators.blockops import Subspace, orthonormalize

CANONICAL_BASIS = re.compile(r"^e1\.\.e(\d+)$")


class Command(StrEnum):
    DECOMPOSE = "decompose"
    CHECK = "check"
    SCHUR = "schur"
    DOUGLAS = "douglas"
    WITNESSES = "witnesses"
    PHI = "phi"
    CONVERGE = "converge"
    CLOSURE = "closure"
    LAMBDA_GROWTH = "lambda-growth"
    SERIES = "series"
    PRODUCT_CLOSURE = "product-closure"


_SPLIT = ("matrix", "m_basis", "n_basis")

REQUIRED_INPUTS: dict[Command, tuple[str, ...]] = {
    Command.DECOMPOSE: _SPLIT,
    Command.CHECK: _SPLIT,
    Command.SCHUR: _SPLIT,
    Command.DOUGLAS: ("a", "b"),
    Command.WITNESSES: _SPLIT,
    Command.PHI: (*_SPLIT, "lambda"),
    Command.CONVERGE: ("sequence",),
    Command.CLOSURE: ("lambda", "trials"),
    Command.LAMBDA_GROWTH: ("dims",),
    Command.SERIES: (*_SPLIT, "lambda", "coeff", "n_max"),
    Command.PRODUCT_CLOSURE: ("t1", "t2", "m_basis", "n_basis", "lambda"),
}

SCHUR_ROUTES = ("classical", "reduced", "weak", "all")


@dataclass(frozen=True)
class Expectation:
    """
    One assertion on a named result field.

    A boolean or string target must match exactly. A numeric target is
    either {"value": x, "rel": r}, {"max": x} or {"min": x}; a bare number
    means {"value": x, "rel": 1e-9}.
    """

    key: str
    equals: Any = None
    value: float | None = None
    rel: float = 1e-9
    maximum: float | None = None
    minimum: float | None = None

    @classmethod
    def parse(cls, key: str, spec: Any) -> "Expectation":
        if isinstance(spec, bool | str):
            return cls(key, equals=spec)
        if isinstance(spec, int | float):
            return cls(key, value=float(spec))
        if isinstance(spec, dict):
            unknown = set(spec) - {"value", "rel", "max", "min"}
            if unknown or not spec:
                raise ScenarioError(f"Expectation '{key}' has unsupported keys {sorted(unknown)}")
            if "rel" in spec and "value" not in spec:
                raise ScenarioError(f"Expectation '{key}' gives 'rel' without 'value'")
            try:
                return cls(
                    key,
                    value=float(spec["value"]) if "value" in spec else None,
                    rel=float(spec.get("rel", 1e-9)),
                    maximum=float(spec["max"]) if "max" in spec else None,
                    minimum=float(spec["min"]) if "min" in spec else None,
                )
            except (TypeError, ValueError):
                raise ScenarioError(f"Expectation '{key}' needs numeric bounds, got {spec!r}") from None
        raise ScenarioError(f"Expectation '{key}' must be a boolean, string, number or object")

    def evaluate(self, observed: Any) -> bool:
        """Whether the observed value satisfies this expectation."""
        if self.equals is not None:
            return bool(observed == self.equals)
        if observed is None or isinstance(observed, bool | str):
            return False
        x = float(observed)
        if self.value is not None:
            if np.isinf(self.value):
                return bool(x == self.value)
            if not abs(x - self.value) <= self.rel * max(abs(self.value), 1.0):
                return False
        if self.maximum is not None and not x <= self.maximum:
            return False
        if self.minimum is not None and not x >= self.minimum:
            return False
        return True

    def to_dict(self) -> Any:
        if self.equals is not None:
            return self.equals
        out: dict[str, float] = {}
        if self.value is not None:
            out["value"] = self.value
            out["rel"] = self.rel
        if self.maximum is not None:
            out["max"] = self.maximum
        if self.minimum is not None:
            out["min"] = self.minimum
        return out


@dataclass(frozen=True)
class Scenario:
    """Validated scenario with paths resolved against the scenario file."""

    name: str
    command: Command
    inputs: dict[str, Any]
    tolerances: dict[str, float] = field(default_factory=dict)
    seed: int = 0
    output: str | None = None
    expect: tuple[Expectation, ...] = ()
    base_dir: Path = Path(".")
    # False when the file left the seed to the configured default
    seed_given: bool = False

    @classmethod
    def from_dict(cls, data: Any, base_dir: Path = Path(".")) -> "Scenario":
        """
        Validate a parsed scenario object.

        Raises:
            ScenarioError: On unknown commands, missing inputs or bad fields
        """
        if not isinstance(data, dict):
            raise ScenarioError(f"Scenario must be a JSON object, got {type(data).__name__}")
        name = data.get("name")
        if not isinstance(name, str) or not name:
            raise ScenarioError("Scenario needs a non-empty 'name'")
        try:
            command = Command(data.get("command"))
        except ValueError:
            raise ScenarioError(
                f"Scenario '{name}': unknown command {data.get('command')!r}. "
                f"Available commands: {[c.value for c in Command]}",
            ) from None

        inputs = data.get("inputs") or {}
        if not isinstance(inputs, dict):
            raise ScenarioError(f"Scenario '{name}': 'inputs' must be an object")
        missing = [key for key in REQUIRED_INPUTS[command] if key not in inputs]
        if missing:
            raise ScenarioError(f"Scenario '{name}': command '{command}' is missing inputs {missing}")
        if command == Command.SCHUR and inputs.get("route", "all") not in SCHUR_ROUTES:
            raise ScenarioError(f"Scenario '{name}': route must be one of {list(SCHUR_ROUTES)}")

        seed = data.get("seed", 0)
        seed_given = "seed" in data
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ScenarioError(f"Scenario '{name}': seed must be an integer, got {seed!r}")
        tolerances = data.get("tolerances") or {}
        if not isinstance(tolerances, dict):
            raise ScenarioError(f"Scenario '{name}': 'tolerances' must be an object")
        expect_raw = data.get("expect") or {}
        if not isinstance(expect_raw, dict):
            raise ScenarioError(f"Scenario '{name}': 'expect' must be an object")

        return cls(
            name=name,
            command=command,
            inputs=inputs,
            tolerances={k: float(v) for k, v in tolerances.items()},
            seed=seed,
            seed_given=seed_given,
            output=data.get("output"),
            expect=tuple(Expectation.parse(k, v) for k, v in expect_raw.items()),
            base_dir=base_dir,
        )

    def to_dict(self) -> dict[str, Any]:
        """Echo written into the report."""
        return {
            "name": self.name,
            "command": self.command.value,
            "inputs": self.inputs,
            "tolerances": self.tolerances,
            "seed": self.seed,
            "output": self.output,
            "expect": {e.key: e.to_dict() for e in self.expect},
        }

    def _path(self, ref: str) -> Path:
        path = Path(ref)
        return path if path.is_absolute() else self.base_dir / path

    def matrix(self, key: str) -> Mat:
        """
        Resolve a matrix input.

        Accepted forms are a file path, {"file": path}, {"preset": name} and
        an inline list of rows.
        """
        return self._resolve_matrix(self.inputs[key], key)

    def _resolve_matrix(self, ref: Any, key: str) -> Mat:
        if isinstance(ref, str):
            return read_matrix(self._path(ref))
        if isinstance(ref, dict) and "file" in ref:
            return read_matrix(self._path(ref["file"]))
        if isinstance(ref, dict) and "preset" in ref:
            try:
                return get_preset(ref["preset"])
            except ValueError as e:
                raise ScenarioError(f"Scenario '{self.name}': {e}") from e
        if isinstance(ref, list):
            try:
                return as_mat(np.array(ref, dtype=np.float64), key)
            except ValueError as e:
                raise ScenarioError(f"Scenario '{self.name}': input '{key}' is not a matrix: {e}") from e
        raise ScenarioError(f"Scenario '{self.name}': cannot read matrix input '{key}' from {ref!r}")

    def subspace(self, key: str, ambient_dim: int) -> Subspace:
        """
        Resolve a basis input to a subspace of R^ambient_dim.

        "e1..ek" selects the first k canonical vectors; any other form is a
        matrix whose columns span the subspace.
        """
        ref = self.inputs[key]
        if isinstance(ref, str):
            match = CANONICAL_BASIS.match(ref.strip())
            if match:
                k = int(match.group(1))
                if k > ambient_dim:
                    raise ScenarioError(
                        f"Scenario '{self.name}': {key} = {ref} does not fit in R^{ambient_dim}",
                    )
                return Subspace.canonical(ambient_dim, k)
        raw = self.matrix(key)
        if raw.shape[0] != ambient_dim:
            raise ScenarioError(
                f"Scenario '{self.name}': {key} has {raw.shape[0]} rows, expected {ambient_dim}",
            )
        return orthonormalize(raw)

    def number(self, key: str, default: float | None = None) -> float:
        value = self.inputs.get(key, default)
        if value is None:
            raise ScenarioError(f"Scenario '{self.name}': missing numeric input '{key}'")
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ScenarioError(f"Scenario '{self.name}': input '{key}' must be a number, got {value!r}") from None

    def integer(self, key: str, default: int | None = None) -> int:
        value = self.inputs.get(key, default)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ScenarioError(f"Scenario '{self.name}': input '{key}' must be an integer, got {value!r}")
        return value

    def sequence_params(self) -> SequenceParams:
        """Generator parameters from the ``sequence`` input."""
        raw = self.inputs["sequence"]
        if not isinstance(raw, dict) or "kind" not in raw:
            raise ScenarioError(f"Scenario '{self.name}': 'sequence' must be an object with a 'kind'")
        try:
            kind = SequenceKind(raw["kind"])
        except ValueError:
            raise ScenarioError(
                f"Scenario '{self.name}': unknown sequence kind {raw['kind']!r}. "
                f"Available kinds: {[k.value for k in SequenceKind]}",
            ) from None

        known = {
            "kind", "k", "n_max", "seed", "family", "profile", "rho", "split",
            "lambda_clamp", "growth", "rank_deficient", "terms", "limit", "m_dim", "n_dim",
        }
        unknown = set(raw) - known
        if unknown:
            raise ScenarioError(f"Scenario '{self.name}': unknown sequence parameters {sorted(unknown)}")

        options: dict[str, Any] = {k: v for k, v in raw.items() if k not in {"kind", "terms", "limit", "profile"}}
        options.setdefault("seed", self.seed)
        if "profile" in raw:
            try:
                options["profile"] = Profile(raw["profile"])
            except ValueError:
                raise ScenarioError(
                    f"Scenario '{self.name}': unknown profile {raw['profile']!r}. "
                    f"Available profiles: {[p.value for p in Profile]}",
                ) from None
        if kind == SequenceKind.EXPLICIT_LIST:
            terms = raw.get("terms") or []
            options["terms"] = tuple(self._resolve_matrix(t, f"terms[{i}]") for i, t in enumerate(terms))
            if "limit" in raw:
                options["limit"] = self._resolve_matrix(raw["limit"], "limit")
            options.setdefault("n_max", len(terms))
        return SequenceParams(kind=kind, **options)


def load_scenarios(path: str | Path) -> list[Scenario]:
    """
    Read a scenario file holding one scenario or a list of them.

    Raises:
        FileNotFoundError: If the file does not exist
        ScenarioError: If the JSON is malformed or a scenario is invalid
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from e
    items = data if isinstance(data, list) else [data]
    if not items:
        raise ScenarioError(f"{path}: scenario list is empty")
    return [Scenario.from_dict(item, base_dir=path.parent) for item in items]
