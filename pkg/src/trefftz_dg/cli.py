"""
Command line entry point: ``trefftz-dg {run,convergence,rho-sweep,properties}``.
"""

import logging
import sys

import click
import pandas as pd

from trefftz_dg.config import RunConfig, load_config
from trefftz_dg.errors import ConfigError, SingularBlockError
from trefftz_dg.experiments import run, run_convergence, run_rho_sweep
from trefftz_dg.io import write_table
from trefftz_dg.logs import setup_logging
from trefftz_dg.properties import first_failure, run_properties

log = logging.getLogger(__name__)

EXIT_PROPERTY = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _common(func):
    func = click.option(
        "-v", "--verbose", count=True, help="Verbosity, -v (CRITICAL) to -vvvvv (DEBUG); INFO by default."
    )(func)
    func = click.option(
        "--out", "out", default=None, help="Output CSV path or URL; standard output by default."
    )(func)
    func = click.option(
        "--config", "config_path", required=True, help="Run configuration file (local path or URL)."
    )(func)
    return func


def _prepare(config_path: str, verbose: int) -> RunConfig:
    # No flag means INFO; -v .. -vvvvv select CRITICAL .. DEBUG. Tables own stdout.
    try:
        setup_logging(verbose or 4, stream=sys.stderr)
    except ValueError as e:
        raise click.UsageError(str(e)) from e
    try:
        return load_config(config_path)
    except ConfigError as e:
        click.echo(f"Configuration error: {e}", err=True)
        sys.exit(EXIT_CONFIG)


def _execute(driver, config: RunConfig, out: str | None):
    try:
        table = driver(config)
    except SingularBlockError as e:
        click.echo(f"Solver failure: {e}", err=True)
        sys.exit(EXIT_SOLVER)
    except ValueError as e:
        click.echo(f"Configuration error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    write_table(table, out or config.output)


@click.group()
def cli():
    """Space-time Trefftz DG experiments for anisotropic acoustic waves."""


@cli.command("run")
@_common
def run_command(config_path: str, out: str | None, verbose: int):
    """Single solve at the sweep level."""
    config = _prepare(config_path, verbose)
    _execute(run, config, out)


@cli.command("convergence")
@_common
def convergence_command(config_path: str, out: str | None, verbose: int):
    """h-convergence table over the configured levels."""
    config = _prepare(config_path, verbose)
    _execute(run_convergence, config, out)


@cli.command("rho-sweep")
@_common
def rho_sweep_command(config_path: str, out: str | None, verbose: int):
    """Error growth over the configured tensor.lambda1 values."""
    config = _prepare(config_path, verbose)
    _execute(run_rho_sweep, config, out)


@cli.command("properties")
@_common
def properties_command(config_path: str, out: str | None, verbose: int):
    """Run the property suite; exit 1 naming the first failing property."""
    config = _prepare(config_path, verbose)
    try:
        results = run_properties(config)
    except SingularBlockError as e:
        click.echo(f"Solver failure: {e}", err=True)
        sys.exit(EXIT_SOLVER)
    table = pd.DataFrame(
        [(r.name, r.passed, r.value, r.limit) for r in results],
        columns=["property", "passed", "value", "limit"],
    )
    write_table(table, out or config.output)
    failure = first_failure(results)
    if failure is not None:
        click.echo(f"Property failed: {failure.name} ({failure.value:.3e} > {failure.limit:.3e})", err=True)
        sys.exit(EXIT_PROPERTY)


if __name__ == "__main__":
    cli()
