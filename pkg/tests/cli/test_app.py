import json

import pytest
from typer.testing import CliRunner

from src.cli.app import app


@pytest.fixture
def cli():
    return CliRunner()


@pytest.fixture
def scenario_file(tmp_path):
    def write(scenarios, name="scenarios.json"):
        path = tmp_path / name
        path.write_text(json.dumps(scenarios))
        return path

    return write


def last_json(output):
    return json.loads(output.strip().splitlines()[-1])


INVERSE_LIMIT = {
    "name": "limit",
    "command": "check",
    "inputs": {"matrix": {"preset": "inverse_limit"}, "m_basis": "e1..e1", "n_basis": "e1..e1"},
    "expect": {"complementable": False},
}


class TestRun:
    """Tests for the run command."""

    def test_passing_scenario(self, cli, scenario_file, tmp_path):
        path = scenario_file(INVERSE_LIMIT)
        out = tmp_path / "reports"
        result = cli.invoke(app, ["run", str(path), "--out", str(out), "--log-level", "WARNING"])

        assert result.exit_code == 0
        assert "limit: exit 0" in result.stdout
        assert json.loads((out / "limit.json").read_text())["passed"] is True

    def test_failed_assertion(self, cli, scenario_file, tmp_path):
        path = scenario_file({**INVERSE_LIMIT, "expect": {"complementable": True}})
        result = cli.invoke(app, ["run", str(path), "--out", str(tmp_path)])

        assert result.exit_code == 1

    def test_seed_and_tolerance_flags(self, cli, scenario_file, tmp_path):
        path = scenario_file(INVERSE_LIMIT)
        args = ["run", str(path), "--out", str(tmp_path), "--seed", "9", "--tol-range", "1e-6"]
        result = cli.invoke(app, args)

        report = json.loads((tmp_path / "limit.json").read_text())
        assert result.exit_code == 0
        assert report["scenario"]["seed"] == 9
        assert report["tolerances"]["range"] == 1e-6

    def test_parallel_batch(self, cli, scenario_file, tmp_path):
        path = scenario_file([{**INVERSE_LIMIT, "name": f"limit-{i}"} for i in range(3)])
        result = cli.invoke(app, ["run", str(path), "--out", str(tmp_path), "--jobs", "2"])

        assert result.exit_code == 0
        assert sorted(p.name for p in tmp_path.glob("limit-*.json")) == ["limit-0.json", "limit-1.json", "limit-2.json"]

    def test_invalid_json(self, cli, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{")

        result = cli.invoke(app, ["run", str(path), "--out", str(tmp_path)])

        assert result.exit_code == 2

    def test_missing_file(self, cli, tmp_path):
        result = cli.invoke(app, ["run", str(tmp_path / "absent.json")])

        assert result.exit_code == 2

    def test_bad_scenario_in_batch(self, cli, scenario_file, tmp_path):
        bad = {**INVERSE_LIMIT, "name": "bad", "inputs": {**INVERSE_LIMIT["inputs"], "matrix": {"preset": "nope"}}}
        path = scenario_file([INVERSE_LIMIT, bad])
        result = cli.invoke(app, ["run", str(path), "--out", str(tmp_path)])

        assert result.exit_code == 2
        assert "bad: exit 2" in result.stdout

    def test_missing_config(self, cli, scenario_file, tmp_path):
        path = scenario_file(INVERSE_LIMIT)
        result = cli.invoke(app, ["run", str(path), "--config", str(tmp_path / "absent.yaml")])

        assert result.exit_code == 2

    def test_invalid_environment_tolerance(self, cli, scenario_file, tmp_path):
        path = scenario_file(INVERSE_LIMIT)
        result = cli.invoke(app, ["run", str(path), "--out", str(tmp_path)], env={"SCHURKIT_TOL_RANGE": "-1"})

        assert result.exit_code == 2


class TestDirectCommands:
    """Tests for check, schur and decompose."""

    def test_check_preset(self, cli):
        args = ["check", "--matrix", "preset:inverse_limit", "--m-basis", "e1..e1", "--n-basis", "e1..e1"]
        result = cli.invoke(app, args)

        assert result.exit_code == 0
        payload = last_json(result.stdout)
        assert payload["verdicts"]["complementable"] is False
        assert payload["exit_code"] == 0

    def test_check_matrix_file_with_lambda(self, cli, tmp_path):
        matrix = tmp_path / "member.txt"
        matrix.write_text("2 2\n1 1\n1.5 0.5\n")
        args = ["check", "--matrix", str(matrix), "--m-basis", "e1..e1", "--n-basis", "e1..e1", "--lambda", "2"]
        result = cli.invoke(app, args)

        payload = last_json(result.stdout)
        assert result.exit_code == 0
        assert payload["verdicts"]["complementable"] is True
        assert payload["verdicts"]["in_psi"] is False

    def test_check_missing_matrix(self, cli, tmp_path):
        args = ["check", "--matrix", str(tmp_path / "absent.txt"), "--m-basis", "e1..e1", "--n-basis", "e1..e1"]
        result = cli.invoke(app, args)

        assert result.exit_code == 2

    def test_check_malformed_matrix(self, cli, tmp_path):
        matrix = tmp_path / "bad.txt"
        matrix.write_text("2 2\n1 1\n")
        args = ["check", "--matrix", str(matrix), "--m-basis", "e1..e1", "--n-basis", "e1..e1"]

        assert cli.invoke(app, args).exit_code == 2

    def test_check_binary_matrix_file(self, cli, tmp_path):
        matrix = tmp_path / "binary.txt"
        matrix.write_bytes(b"2 2\n1 \xff\n0 1\n")
        args = ["check", "--matrix", str(matrix), "--m-basis", "e1..e1", "--n-basis", "e1..e1"]

        assert cli.invoke(app, args).exit_code == 2

    def test_schur_single_route(self, cli):
        args = ["schur", "--matrix", "preset:schur_scalar", "--m-basis", "e1..e1", "--n-basis", "e1..e1", "--route", "classical"]
        result = cli.invoke(app, args)

        assert result.exit_code == 0
        assert last_json(result.stdout)["verdicts"]["routes"] == ["classical"]

    def test_schur_unknown_route(self, cli):
        args = ["schur", "--matrix", "preset:schur_scalar", "--m-basis", "e1..e1", "--n-basis", "e1..e1", "--route", "fast"]

        assert cli.invoke(app, args).exit_code == 2

    def test_decompose_writes_report(self, cli, tmp_path):
        args = ["decompose", "--matrix", "preset:identity_4", "--m-basis", "e1..e2", "--n-basis", "e1..e3", "--out", str(tmp_path)]
        result = cli.invoke(app, args)

        assert result.exit_code == 0
        assert last_json(result.stdout)["verdicts"]["roundtrip_ok"] is True
        assert (tmp_path / "decompose-identity_4.json").exists()

    def test_basis_does_not_fit(self, cli):
        args = ["decompose", "--matrix", "preset:identity_4", "--m-basis", "e1..e5", "--n-basis", "e1..e1"]

        assert cli.invoke(app, args).exit_code == 2
