import json
import logging
import pathlib
from enum import Enum
from typing import Callable, Optional

import typer
from typing_extensions import Annotated

# Tell ruff to not delete the unused import by rexporting it using as
# See https://docs.astral.sh/ruff/rules/unused-import/
from sievelab import logging_config as logging_config
from sievelab.commands import (
    cmd_consistency,
    cmd_entropy_correlated,
    cmd_entropy_exact,
    cmd_entropy_quadratic,
    cmd_kernel_table,
    cmd_sieve,
)
from sievelab.config import load_config
from sievelab.errors import ReportIOError, SievelabError
from sievelab.reports import CsvReport, write_reports

logger = logging.getLogger(__name__)


class LoggingLevels(str, Enum):
    CRITICAL = "CRITICAL"
    DEBUG = "DEBUG"
    ERROR = "ERROR"
    INFO = "INFO"
    NOTSET = "NOTSET"
    WARNING = "WARNING"


app = typer.Typer(
    help="First-order entropy production and predictability sieve for open harmonic oscillators."
)

ConfigOption = Annotated[
    pathlib.Path,
    typer.Option("--config", help="The JSON run configuration.", dir_okay=False),
]
OutOption = Annotated[
    Optional[pathlib.Path],
    typer.Option("--out", help="Write the CSV here instead of the configured output."),
]
ThreadsOption = Annotated[
    int, typer.Option("--threads", min=1, help="Workers for independent sweep points.")
]


@app.callback()
def main(
    loglevel: Annotated[
        LoggingLevels, typer.Option("--loglevel", "-l")
    ] = LoggingLevels.INFO,
):
    logging.getLogger("sievelab").setLevel(loglevel.value)


def run(
    command: Callable[..., CsvReport],
    config_path: pathlib.Path,
    out: pathlib.Path | None,
    threads: int,
):
    """Load, echo the effective config to stderr, run, write; errors become exit codes."""
    try:
        config = load_config(config_path)
        typer.echo(json.dumps(config.effective, indent=2, sort_keys=True), err=True)
        report = command(config, threads=threads)
        write_reports(report, out or config.output, config.sha256, config.kernel_table.spectrum_out)
    except SievelabError as e:
        if e.partial_report is not None:
            try:
                e.partial_report.write(out or config.output, config.sha256)
            except ReportIOError as io_error:
                logger.error(str(io_error))
        logger.error(f"{type(e).__name__}: {e}")
        raise typer.Exit(code=e.exit_code)


@app.command()
def entropy_quadratic(config: ConfigOption, out: OutOption = None, threads: ThreadsOption = 1):
    """
    Closed-form first-order entropy production under quadratic channels
    """
    run(cmd_entropy_quadratic, config, out, threads)


@app.command()
def entropy_exact(config: ConfigOption, out: OutOption = None, threads: ThreadsOption = 1):
    """
    Linear entropy along a brute-force master-equation trajectory
    """
    run(cmd_entropy_exact, config, out, threads)


@app.command()
def entropy_correlated(config: ConfigOption, out: OutOption = None, threads: ThreadsOption = 1):
    """
    First-order entropy production under a spatially correlated potential
    """
    run(cmd_entropy_correlated, config, out, threads)


@app.command()
def sieve(config: ConfigOption, out: OutOption = None, threads: ThreadsOption = 1):
    """
    Minimum entropy production over squeezed coherent states
    """
    run(cmd_sieve, config, out, threads)


@app.command()
def consistency(config: ConfigOption, out: OutOption = None, threads: ThreadsOption = 1):
    """
    Residual of the first-order prediction against exact integration
    """
    run(cmd_consistency, config, out, threads)


@app.command()
def kernel_table(config: ConfigOption, out: OutOption = None, threads: ThreadsOption = 1):
    """
    Correlation kernel, decoherence function and spectral density tables
    """
    run(cmd_kernel_table, config, out, threads)


if __name__ == "__main__":
    app()
