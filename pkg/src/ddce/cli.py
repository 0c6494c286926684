"""Command-line entry points for running experiments."""

from __future__ import annotations

import dataclasses
import logging
from pathlib import Path

import click

from .errors import ConfigError
from .harness import (
    MODES,
    dump_default_config,
    load_config,
    run_experiment,
    write_outputs,
)


@click.group()
def main():
    """Delay-Doppler channel estimation experiment runner."""


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="YAML experiment config.")
@click.option("--output", type=click.Path(file_okay=False), default=None,
              help="Output directory (overrides the config).")
@click.option("--seed", type=int, default=None, help="Master seed override.")
@click.option("--no-ipi", is_flag=True, help="Disable inter-path interference elimination.")
@click.option("--trials", type=int, default=None, help="Trials per sweep point override.")
@click.option("--mode", type=click.Choice(MODES), default=None, help="Experiment mode override.")
@click.option("--workers", type=int, default=1, show_default=True,
              help="Worker processes for trial execution.")
@click.option("--no-plot", is_flag=True, help="Skip rendering the summary figure.")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def run(config_path, output, seed, no_ipi, trials, mode, workers, no_plot, verbose):
    """Run the configured sweep and write CSV, manifest, and figure."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(config_path)
        overrides = {}
        if seed is not None:
            overrides["seed"] = seed
        if trials is not None:
            overrides["trials"] = trials
        if mode is not None:
            overrides["mode"] = mode
        if no_ipi:
            overrides["ipi_elimination"] = False
        if overrides:
            cfg = dataclasses.replace(cfg, **overrides)
        result = run_experiment(cfg, workers=workers)
        outdir = Path(output or cfg.output or "results")
        paths = write_outputs(cfg, result, outdir, plot=not no_plot)
    except ConfigError as exc:
        raise click.ClickException(str(exc))
    for name, p in paths.items():
        click.echo(f"{name}: {p}")


@main.command("print-default-config")
@click.option("--mode", type=click.Choice(MODES), default="nmse", show_default=True,
              help="Mode whose reference configuration to print.")
def print_default_config(mode):
    """Print a ready-to-edit YAML configuration to stdout."""
    click.echo(dump_default_config(mode), nl=False)


if __name__ == "__main__":
    main()
