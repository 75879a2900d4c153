"""
Tolerance and run settings.

Values are layered in this order, later layers winning:
built-in defaults, the YAML config file, the SCHURKIT_TOL_RANGE environment
variable, a scenario's ``tolerances`` block and finally command-line flags.
"""

import os
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from src.linalg.numkernel import RankTolerance

DEFAULT_CONFIG_PATH = Path(__file__).parent / "schurkit.yaml"
TOL_RANGE_ENV = "SCHURKIT_TOL_RANGE"


@dataclass(frozen=True)
class Tolerances:
    """All numerical tolerances used by the predicates."""

    rank: RankTolerance = field(default_factory=RankTolerance)
    range: float = 1e-8
    douglas: float = 1e-8
    conv: float = 1e-6
    psd: float = 1e-10

    def to_dict(self) -> dict[str, float]:
        """Flat view echoed into every report."""
        return {
            "rank_rel": self.rank.rel,
            "rank_abs": self.rank.abs_floor,
            "range": self.range,
            "douglas": self.douglas,
            "conv": self.conv,
            "psd": self.psd,
        }

    def with_overrides(self, **overrides: float | None) -> "Tolerances":
        """
        Copy with selected fields replaced.

        Accepts the flat keys of to_dict(); None values are ignored.

        Raises:
            ValueError: On unknown keys or non-positive values
        """
        values = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(values) - set(self.to_dict())
        if unknown:
            raise ValueError(
                f"Unknown tolerance keys {sorted(unknown)}. "
                f"Available keys: {sorted(self.to_dict())}",
            )
        for key, value in values.items():
            if not float(value) > 0:
                raise ValueError(f"Tolerance '{key}' must be positive, got {value}")

        rank = RankTolerance(
            rel=float(values.pop("rank_rel", self.rank.rel)),
            abs_floor=float(values.pop("rank_abs", self.rank.abs_floor)),
        )
        return replace(self, rank=rank, **{k: float(v) for k, v in values.items()})


@dataclass(frozen=True)
class Settings:
    """Effective settings for one invocation."""

    tolerances: Tolerances = field(default_factory=Tolerances)
    output_dir: Path = Path("data/reports")
    seed: int = 0
    samples: int = 2000
    jobs: int = 1

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["tolerances"] = self.tolerances.to_dict()
        data["output_dir"] = str(self.output_dir)
        return data


def load_settings(
    path: Path | None = None,
    env: Mapping[str, str] | None = None,
) -> Settings:
    """
    Load settings from a YAML file and the environment.

    Args:
        path: YAML config path; the bundled config/schurkit.yaml when None
        env: Environment mapping, os.environ when None

    Returns:
        Settings instance

    Raises:
        FileNotFoundError: If an explicit path does not exist
        ValueError: If the file holds invalid tolerance values
    """
    env = os.environ if env is None else env
    config_path = path or DEFAULT_CONFIG_PATH

    raw: dict[str, Any] = {}
    if path is not None or config_path.exists():
        with open(config_path) as f:
            raw = yaml.safe_load(f) or {}

    tolerances = Tolerances().with_overrides(**(raw.get("tolerances") or {}))

    env_range = env.get(TOL_RANGE_ENV)
    if env_range:
        try:
            tolerances = tolerances.with_overrides(range=float(env_range))
        except ValueError as e:
            raise ValueError(f"Invalid {TOL_RANGE_ENV}={env_range!r}: {e}") from e

    output = raw.get("output") or {}
    return Settings(
        tolerances=tolerances,
        output_dir=Path(output.get("directory", "data/reports")),
        seed=int(raw.get("seed", 0)),
        samples=int(raw.get("samples", 2000)),
        jobs=int(raw.get("jobs", 1)),
    )
