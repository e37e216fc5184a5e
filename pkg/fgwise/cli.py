#!/usr/bin/env python3
"""
Command line interface for fgwise - truncated Fefferman-Graham expansions.

This module provides a CLI built with Click for expanding scattering data,
computing obstruction tensors, verifying expansions and tabulating
indicial roots.
"""

import json
import logging
import sys
from typing import Any, Callable, Optional

import click

from fgwise.config import MODES, ConfigError, parse_config
from fgwise.runner import EXIT_CONFIG_ERROR, EXIT_OK, roots_table, run


def verbose_option() -> Callable[[Any], Any]:
    return click.option("--verbose", "-v", is_flag=True, default=False, help="Log per-order progress")


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


@click.group()
@click.version_option(version="0.1.0")
def cli() -> None:
    """
    fgwise: truncated Fefferman-Graham expansions of de Sitter-like Einstein metrics.

    This CLI provides commands for running configured expansions and
    inspecting indicial roots.
    """


@cli.command(name="run")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="Path to a JSON run configuration")
@click.option("--mode", type=click.Choice(list(MODES)), help="Override the configured mode")
@click.option("--out", type=click.Path(file_okay=False, writable=True), help="Override the output directory")
@click.option("--tol-scale", type=float, help="Scale every tolerance by this factor")
@click.option("--seed", type=int, help="Seed for randomized verification checks")
@verbose_option()
def run_command(config_path: str, mode: Optional[str], out: Optional[str], tol_scale: Optional[float], seed: Optional[int], verbose: bool) -> None:
    """
    Run an expansion, obstruction, verification or roots job.

    Exit codes: 0 ok, 2 configuration error, 3 solvability or parity
    violation, 4 verification failure.
    """
    _configure_logging(verbose)
    try:
        config = parse_config(config_path).with_overrides(mode=mode, output_dir=out, tol_scale=tol_scale, seed=seed)
        report = run(config)
    except ConfigError as e:
        click.echo(f"Configuration error: {e}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)

    click.echo(f"Mode {report.mode}: {report.status} (report {report.output_dir / 'report.json'})")
    if report.error is not None:
        click.echo(f"Error: {report.error['message']}", err=True)
    click.echo(f"Report hash {report.report_hash}")
    sys.exit(report.exit_code)


@cli.command()
@click.option("--n", "n", required=True, type=click.IntRange(min=3), help="Spatial dimension")
@click.option("--json", "as_json", is_flag=True, default=False, help="Print the full table as JSON")
def roots(n: int, as_json: bool) -> None:
    """Print the indicial roots for spatial dimension n."""
    table = roots_table(n)
    if as_json:
        click.echo(json.dumps(table, indent=2, sort_keys=True))
        sys.exit(EXIT_OK)
    click.echo(f"Gauged Einstein operator, n={n}: roots {table['gauged_roots']}")
    click.echo(f"  det = {table['gauged_determinant']}")
    click.echo(f"Ricci indicial family: generic rank {table['ricci_indicial']['generic_rank']}")
    for entry, value in table["ricci_indicial"]["entries"].items():
        click.echo(f"  [{entry}] {value}")
    click.echo(f"Gauge propagation: roots {table['gauge_propagation_roots']}")


def main() -> Any:
    """Entry point for the CLI."""
    return cli()


if __name__ == "__main__":
    main()
