import functools
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import click
import numpy as np
from pydantic import ValidationError

from ibclab import config
from ibclab.crud.reports import report_crud
from ibclab.exceptions import ConfigError, IbcLabError
from ibclab.routers import framework, polaron, relations, sweep
from ibclab.routers.base import RunContext, SuiteRouter, default_tolerance, params_from_input
from ibclab.schemas.run_config import RunConfig
from ibclab.services.numkernel import eigenvalues, hermitian_eig
from ibclab.services.relations import DIRICHLET_IBC
from ibclab.services.robin import assemble_ibc, assemble_robin

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

suites = SuiteRouter()

# Include routers
suites.include_router(framework.router)
suites.include_router(relations.router)
suites.include_router(polaron.router)
suites.include_router(sweep.router)


def load_run_config(path: str, seed: Optional[int] = None, **defaults) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    for key, value in defaults.items():
        data.setdefault(key, value)
    if seed is not None:
        data["seed"] = seed
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid config {path}:\n{exc}") from exc


def run_suite(run_config: RunConfig, tol: Optional[float] = None, out: Optional[str] = None) -> int:
    """Runs the configured suite, writes the report (and table) and returns the exit code."""
    ctx = RunContext(run_config, default_tolerance(tol, run_config))
    result = suites.run(ctx)
    report_path = out or run_config.report_path
    if report_path:
        report_crud.save_report(result.report, report_path)
    else:
        click.echo(report_crud.dumps(result.report), nl=False)
    if result.table is not None and run_config.csv_path:
        report_crud.save_table(result.table, run_config.csv_path)
    for record in result.report.failed_checks:
        logger.warning("FAILED %s [%s] residual=%s %s", record.name, record.anchor, record.residual,
                       record.error or record.detail or "")
    return EXIT_OK if result.report.passed else EXIT_FAILED


def operator_spectrum(ctx: RunContext) -> np.ndarray:
    s = ctx.setting
    kind = ctx.config.operator
    if kind == "L":
        return hermitian_eig(s.L)[0]
    if kind == "T":
        return hermitian_eig(s.T)[0]
    if kind == "robin":
        p = ctx.boundary_params()[0]
        realized = assemble_robin(s, p.alpha, p.beta)
    else:
        p = DIRICHLET_IBC if kind == "H01" or not ctx.config.params else params_from_input(ctx.config.params[0])
        realized = assemble_ibc(s, p)
    if realized.hermiticity() <= ctx.tol:
        return hermitian_eig(0.5 * (realized.matrix + realized.matrix.H), tol=1e-6)[0]
    return eigenvalues(realized.matrix)


def _exit_on_error(func):
    """Maps configuration problems to exit code 2."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            code = func(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            code = EXIT_CONFIG
        sys.exit(code)

    return wrapper


@click.group()
@click.option("--log-level", default=None, help="Overrides IBCLAB_LOG_LEVEL.")
def cli(log_level: Optional[str]):
    """Verification lab for interior-boundary conditions on finite-dimensional settings."""
    logging.basicConfig(
        level=(log_level or config.LOG_LEVEL).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="RunConfig JSON.")
@click.option("--out", default=None, help="Report JSON path (default: report_path or stdout).")
@click.option("--seed", default=None, type=click.IntRange(0, 2**64 - 1))
@click.option("--tol", default=None, type=float, help="Overrides tolerance and IBCLAB_TOL.")
@_exit_on_error
def run(config_path: str, out: Optional[str], seed: Optional[int], tol: Optional[float]) -> int:
    """Run the suite named in the config."""
    return run_suite(load_run_config(config_path, seed), tol, out)


@cli.command(name="sweep")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", default=None, help="CSV path (default: csv_path from the config).")
@click.option("--seed", default=None, type=click.IntRange(0, 2**64 - 1))
@click.option("--tol", default=None, type=float)
@_exit_on_error
def sweep_command(config_path: str, out: Optional[str], seed: Optional[int], tol: Optional[float]) -> int:
    """Sweep (alpha, beta, gamma, delta) and write one CSV row per quadruple."""
    run_config = load_run_config(config_path, seed, suite="sweep")
    if run_config.suite.value != "sweep":
        raise ConfigError(f"sweep command got suite {run_config.suite.value!r}")
    csv_path = out or run_config.csv_path
    if not csv_path:
        raise ConfigError("sweep needs --out or csv_path")
    return run_suite(run_config.model_copy(update={"csv_path": csv_path}), tol)


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", default=None, help="CSV path (default: csv_path from the config).")
@click.option("--seed", default=None, type=click.IntRange(0, 2**64 - 1))
@click.option("--tol", default=None, type=float)
@_exit_on_error
def spectrum(config_path: str, out: Optional[str], seed: Optional[int], tol: Optional[float]) -> int:
    """Eigenvalues of L, T, H_IBC^{0,1} or a configured realization as CSV."""
    run_config = load_run_config(config_path, seed, suite="assumptions")
    ctx = RunContext(run_config, default_tolerance(tol, run_config))
    try:
        values = operator_spectrum(ctx)
    except ConfigError:
        raise
    except IbcLabError as exc:
        click.echo(f"spectrum failed: {type(exc).__name__}: {exc}", err=True)
        return EXIT_FAILED
    frame = report_crud.spectrum_frame(values)
    csv_path = out or run_config.csv_path
    if csv_path:
        report_crud.save_table(frame, csv_path)
    else:
        click.echo(frame.to_csv(index=False), nl=False)
    return EXIT_OK


@cli.command()
def schema():
    """Print the JSON schema of run configs."""
    click.echo(json.dumps(RunConfig.model_json_schema(), indent=2))


if __name__ == "__main__":
    cli()
