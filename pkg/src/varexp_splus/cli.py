"""varexp-splus CLI entry point.

Usage:
    varexp-splus init converge                     # Write a sample configuration
    varexp-splus show --config converge.yaml       # Print the resolved configuration
    varexp-splus run --config converge.yaml        # Run and write CSV/JSON artifacts
    varexp-splus run --config probe.yaml --seed 7 --out results/probe

Exit codes: 0 verdict passed, 1 verdict failed, 2 configuration or runtime error.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click
import yaml
from rich.console import Console
from rich.logging import RichHandler

from . import __version__
from .config import COMMANDS, SAMPLE_CONFIGS, load_config
from .errors import ConfigError, VarExpError
from .experiments import ExperimentRouter, write_artifacts
from .reporting import render_summary, render_table

logger = logging.getLogger(__name__)

EXIT_PASSED = 0
EXIT_FAILED = 1
EXIT_ERROR = 2
MAX_DISPLAY_ROWS = 40


def _configure_logging(quiet: bool, verbose: bool) -> None:
    level = logging.WARNING if quiet else logging.DEBUG if verbose else logging.INFO
    handler = RichHandler(
        console=Console(stderr=True),
        show_path=False,
        rich_tracebacks=False,
    )
    root = logging.getLogger("varexp_splus")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """varexp-splus - variable-exponent Sobolev spaces and the S+ property.

    Declare an experiment in a YAML file, then 'run' it.
    Use 'init' for a commented starting point.
    """


# =============================================================================
# Init Command
# =============================================================================


@main.command("init")
@click.argument("command", type=click.Choice(list(COMMANDS)))
@click.option(
    "--path",
    "-p",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Where to write the configuration (default: <command>.yaml)",
)
@click.option("--force", "-f", is_flag=True, help="Overwrite an existing file")
def init_config(command: str, path: Path | None, force: bool) -> None:
    """Write a sample configuration for COMMAND.

    Examples:

        varexp-splus init converge

        varexp-splus init check-kernel --path kernels.yaml
    """
    target = path or Path(f"{command}.yaml")
    if target.exists() and not force:
        click.echo(f"Configuration already exists at {target}")
        click.echo("Use --force to overwrite it.")
        sys.exit(EXIT_ERROR)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(SAMPLE_CONFIGS[command], encoding="utf-8")
    click.echo(f"✓ Configuration saved to {target}")
    click.echo(f"\nTo run it:\n  varexp-splus run --config {target}")


# =============================================================================
# Show Command
# =============================================================================


@main.command("show")
@click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Experiment configuration file",
)
def show_config(config_path: Path) -> None:
    """Print the resolved configuration, defaults filled in."""
    try:
        config = load_config(config_path)
    except ConfigError as exc:
        click.echo(exc.diagnostic(), err=True)
        sys.exit(EXIT_ERROR)
    click.echo(f"Configuration file: {config_path}\n")
    click.echo(yaml.safe_dump(config.to_dict(), default_flow_style=False, sort_keys=False))


# =============================================================================
# Run Command
# =============================================================================


@main.command("run")
@click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Experiment configuration file",
)
@click.option(
    "--out",
    "output",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Output directory (overrides config)",
)
@click.option("--seed", type=int, default=None, help="Random seed (overrides config)")
@click.option("--quiet", "-q", is_flag=True, help="Only log warnings and errors")
@click.option("--verbose", "-v", is_flag=True, help="Log solver iterations")
def run_command(
    config_path: Path,
    output: Path | None,
    seed: int | None,
    quiet: bool,
    verbose: bool,
) -> None:
    """Run the experiment declared in a configuration file.

    Examples:

        varexp-splus run --config converge.yaml

        varexp-splus run --config check-kernel.yaml --seed 3 --out results/k3
    """
    _configure_logging(quiet, verbose)
    console = Console(quiet=quiet)

    try:
        config = load_config(config_path).with_overrides(seed=seed, output=output)
        result = ExperimentRouter().route(config)
        write_artifacts(result, config.output)
    except ConfigError as exc:
        logger.error(exc.diagnostic())
        click.echo(exc.diagnostic(), err=True)
        sys.exit(EXIT_ERROR)
    except VarExpError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    except Exception as exc:  # noqa: BLE001
        logger.error(f"unexpected {type(exc).__name__}: {exc}")
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_ERROR)

    for table in result.tables:
        if table.rows:
            render_table(console, table.name, table.rows[:MAX_DISPLAY_ROWS], table.fieldnames)
    render_summary(console, f"{config.command}: {result.status.value}", result.summary)
    if result.message:
        console.print(result.message)
    for path in result.artifacts:
        console.print(f"  wrote {path}")

    sys.exit(EXIT_PASSED if result.passed else EXIT_FAILED)


if __name__ == "__main__":
    main()
