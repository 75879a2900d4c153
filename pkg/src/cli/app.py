"""
Command-line front end.

    schurkit run SCENARIO.json [--jobs N] [--out DIR]
    schurkit check|schur|decompose --matrix FILE --m-basis B --n-basis B

Exit codes: 0 when every assertion passed, 1 when a verdict contradicted the
scenario, 2 on invalid input.
"""

import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any

import typer
import yaml

from config.settings import Settings, load_settings
from src.errors import SchurkitError
from src.pipeline.runner import RunResult, ScenarioRunner
from src.pipeline.scenario import Scenario, load_scenarios


class LogLevel(str, Enum):
    """Log level options for the CLI."""

    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"


app = typer.Typer(help="Complementable operator toolkit")

INPUT_ERRORS = (SchurkitError, ValueError, FileNotFoundError, yaml.YAMLError)


def setup_logging(log_level: LogLevel) -> None:
    """Configure logging.

    Args:
        log_level: The log level to use
    """
    logging.basicConfig(
        level=getattr(logging, log_level),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


def _settings(config: Path | None) -> Settings:
    try:
        return load_settings(config)
    except INPUT_ERRORS as e:
        logging.error(f"Invalid configuration: {e}")
        raise typer.Exit(code=2) from e


def _summary(result: RunResult) -> str:
    if result.report is None:
        return f"{result.name}: exit {result.exit_code} ({result.error})"
    verdicts = {k: v for k, v in result.report["verdicts"].items() if not isinstance(v, list | dict)}
    return f"{result.name}: exit {result.exit_code} {json.dumps(verdicts, default=str)}"


@app.callback()
def callback() -> None:
    """Decide complementability, compute Schur complements and run operator-sequence scenarios."""
    pass


@app.command()
def run(
    scenario_path: Path = typer.Argument(..., help="Scenario JSON file (object or list)"),
    jobs: int | None = typer.Option(None, "--jobs", "-j", help="Parallel scenarios (overrides config)"),
    out: Path | None = typer.Option(None, "--out", "-o", help="Report directory (overrides config)"),
    config: Path | None = typer.Option(None, "--config", "-c", help="Path to config file"),
    tol_range: float | None = typer.Option(None, "--tol-range", help="Range inclusion tolerance"),
    seed: int | None = typer.Option(None, "--seed", help="Seed for every scenario"),
    log_level: LogLevel = typer.Option(LogLevel.INFO, "--log-level", "-l", help="Log level"),
) -> None:
    """Run a scenario file and write one report per scenario."""
    setup_logging(log_level)
    settings = _settings(config)

    try:
        scenarios = load_scenarios(scenario_path)
    except INPUT_ERRORS as e:
        logging.error(f"Cannot load scenarios: {e}")
        raise typer.Exit(code=2) from e

    runner = ScenarioRunner(
        settings,
        out_dir=out,
        tol_range=tol_range,
        seed=seed,
        progress=log_level in (LogLevel.DEBUG, LogLevel.INFO),
    )
    results = runner.run_batch(scenarios, jobs=jobs or settings.jobs)
    for result in results:
        typer.echo(_summary(result))

    code = max(r.exit_code for r in results)
    logging.info(f"Finished {len(results)} scenario(s) with exit code {code}")
    if code:
        raise typer.Exit(code=code)


def _matrix_ref(value: str) -> Any:
    if value.startswith("preset:"):
        return {"preset": value.removeprefix("preset:")}
    return str(Path(value).resolve())


def _basis_ref(value: str) -> Any:
    return value if value.startswith("e1..") else _matrix_ref(value)


def _direct(
    command: str,
    matrix: str,
    m_basis: str,
    n_basis: str,
    extra: dict[str, Any],
    out: Path | None,
    config: Path | None,
    tol_range: float | None,
    seed: int | None,
    log_level: LogLevel,
) -> None:
    setup_logging(log_level)
    settings = _settings(config)
    name = f"{command}-{Path(matrix.removeprefix('preset:')).stem}"
    data = {
        "name": name,
        "command": command,
        "inputs": {"matrix": _matrix_ref(matrix), "m_basis": _basis_ref(m_basis), "n_basis": _basis_ref(n_basis), **extra},
    }
    runner = ScenarioRunner(
        settings,
        out_dir=out,
        tol_range=tol_range,
        seed=seed,
        progress=False,
        write=out is not None,
    )
    try:
        result = runner.run(Scenario.from_dict(data))
    except INPUT_ERRORS as e:
        logging.error(f"{command} failed: {e}")
        raise typer.Exit(code=2) from e

    assert result.report is not None
    typer.echo(json.dumps({"verdicts": result.report["verdicts"], "exit_code": result.exit_code}, default=str))
    if result.exit_code:
        raise typer.Exit(code=result.exit_code)


MATRIX_HELP = "Matrix file, or preset:NAME"
BASIS_HELP = "Basis matrix file, preset:NAME or e1..ek"


@app.command()
def check(
    matrix: str = typer.Option(..., "--matrix", "-m", help=MATRIX_HELP),
    m_basis: str = typer.Option(..., "--m-basis", help=BASIS_HELP),
    n_basis: str = typer.Option(..., "--n-basis", help=BASIS_HELP),
    lam: float | None = typer.Option(None, "--lambda", help="Also decide membership in ψ(M, N, λ)"),
    out: Path | None = typer.Option(None, "--out", "-o", help="Report directory"),
    config: Path | None = typer.Option(None, "--config", "-c", help="Path to config file"),
    tol_range: float | None = typer.Option(None, "--tol-range", help="Range inclusion tolerance"),
    seed: int | None = typer.Option(None, "--seed", help="Seed"),
    log_level: LogLevel = typer.Option(LogLevel.WARNING, "--log-level", "-l", help="Log level"),
) -> None:
    """Decide (M, N)-complementability and report the minimal λ."""
    extra = {} if lam is None else {"lambda": lam}
    _direct("check", matrix, m_basis, n_basis, extra, out, config, tol_range, seed, log_level)


@app.command()
def schur(
    matrix: str = typer.Option(..., "--matrix", "-m", help=MATRIX_HELP),
    m_basis: str = typer.Option(..., "--m-basis", help=BASIS_HELP),
    n_basis: str = typer.Option(..., "--n-basis", help=BASIS_HELP),
    route: str = typer.Option("all", "--route", help="classical, reduced, weak or all"),
    out: Path | None = typer.Option(None, "--out", "-o", help="Report directory"),
    config: Path | None = typer.Option(None, "--config", "-c", help="Path to config file"),
    tol_range: float | None = typer.Option(None, "--tol-range", help="Range inclusion tolerance"),
    seed: int | None = typer.Option(None, "--seed", help="Seed"),
    log_level: LogLevel = typer.Option(LogLevel.WARNING, "--log-level", "-l", help="Log level"),
) -> None:
    """Compute the Schur complement by the requested routes."""
    _direct("schur", matrix, m_basis, n_basis, {"route": route}, out, config, tol_range, seed, log_level)


@app.command()
def decompose(
    matrix: str = typer.Option(..., "--matrix", "-m", help=MATRIX_HELP),
    m_basis: str = typer.Option(..., "--m-basis", help=BASIS_HELP),
    n_basis: str = typer.Option(..., "--n-basis", help=BASIS_HELP),
    out: Path | None = typer.Option(None, "--out", "-o", help="Report directory"),
    config: Path | None = typer.Option(None, "--config", "-c", help="Path to config file"),
    tol_range: float | None = typer.Option(None, "--tol-range", help="Range inclusion tolerance"),
    seed: int | None = typer.Option(None, "--seed", help="Seed"),
    log_level: LogLevel = typer.Option(LogLevel.WARNING, "--log-level", "-l", help="Log level"),
) -> None:
    """Split an operator into blocks and verify the round trip and norm bounds."""
    _direct("decompose", matrix, m_basis, n_basis, {}, out, config, tol_range, seed, log_level)


if __name__ == "__main__":
    app()
