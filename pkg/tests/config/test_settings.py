from pathlib import Path

import pytest
import yaml

from config.settings import DEFAULT_CONFIG_PATH, TOL_RANGE_ENV, Settings, Tolerances, load_settings
from src.linalg.numkernel import RankTolerance


class TestTolerances:
    """Tests for tolerance overrides."""

    def test_defaults(self):
        tol = Tolerances()

        assert tol.range == 1e-8
        assert tol.conv == 1e-6
        assert tol.rank == RankTolerance()

    def test_flat_keys(self):
        assert set(Tolerances().to_dict()) == {"rank_rel", "rank_abs", "range", "douglas", "conv", "psd"}

    def test_overrides(self):
        tol = Tolerances().with_overrides(range=1e-6, rank_abs=1e-9, conv=None)

        assert tol.range == 1e-6
        assert tol.rank.abs_floor == 1e-9
        assert tol.conv == 1e-6

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="Unknown tolerance keys \\['ranged'\\]"):
            Tolerances().with_overrides(ranged=1.0)

    def test_non_positive(self):
        with pytest.raises(ValueError, match="must be positive"):
            Tolerances().with_overrides(range=0.0)


class TestLoadSettings:
    """Tests for the configuration layers."""

    def test_bundled_config(self):
        settings = load_settings(env={})

        assert DEFAULT_CONFIG_PATH.exists()
        assert settings.tolerances.range == 1e-8
        assert settings.output_dir == Path("data/reports")
        assert settings.jobs == 1
        assert settings.seed == 0
        assert settings.samples == 2000
        assert settings.tolerances.psd == 1e-10

    def test_config_file(self, tmp_path):
        path = tmp_path / "custom.yaml"
        path.write_text(
            yaml.safe_dump({"tolerances": {"range": 1e-5}, "output": {"directory": "out"}, "jobs": 3}),
        )
        settings = load_settings(path, env={})

        assert settings.tolerances.range == 1e-5
        assert settings.output_dir == Path("out")
        assert settings.jobs == 3

    def test_environment_wins_over_file(self, tmp_path):
        path = tmp_path / "custom.yaml"
        path.write_text(yaml.safe_dump({"tolerances": {"range": 1e-5}}))

        settings = load_settings(path, env={TOL_RANGE_ENV: "1e-4"})
        assert settings.tolerances.range == 1e-4

    def test_invalid_environment(self):
        with pytest.raises(ValueError, match=TOL_RANGE_ENV):
            load_settings(env={TOL_RANGE_ENV: "-1"})

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_settings(tmp_path / "absent.yaml", env={})

    def test_to_dict(self):
        data = Settings().to_dict()

        assert data["output_dir"] == "data/reports"
        assert data["tolerances"]["range"] == 1e-8
