"""Command-line entry point: ``parabiss run | presets | validate``."""

from __future__ import annotations

import dataclasses
import json
import os
import sys
import traceback
from pathlib import Path

import click

from .config import ConfigError, load_config
from .presets import list_presets
from .runner import dumps, make_run_dir, run_experiment, write_artifacts

OUT_ENV = "PARABISS_OUT"
EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


@click.group()
@click.version_option(package_name="parabiss")
def main():
    """Monotone parabolic solver and ISS experiment harness."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False),
              help="Experiment config (INI-style, schema 1).")
@click.option("--out", "out_root", type=click.Path(file_okay=False), default=None,
              help=f"Output root; defaults to ${OUT_ENV} or ./runs.")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None,
              help="Battery seed; overrides the config.")
def run(config_path, out_root, seed):
    """Run one experiment and write its artifacts."""
    try:
        cfg = load_config(config_path)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    root = Path(out_root or os.environ.get(OUT_ENV) or "runs")
    run_dir = make_run_dir(root, cfg.kind)
    run_id = run_dir.name
    try:
        result = run_experiment(cfg)
    except Exception as e:  # surfaced with the run id; details kept in the run dir
        (run_dir / "error.txt").write_text(traceback.format_exc(), encoding="utf-8")
        click.echo(f"run {run_id} failed: {type(e).__name__}: {e}", err=True)
        sys.exit(EXIT_SOLVER)
    write_artifacts(run_dir, cfg, result)
    status = "PASS" if result.passed else "FAIL"
    click.echo(f"{status} {cfg.kind} run={run_id} dir={run_dir}")
    click.echo(json.dumps(json.loads(dumps(result.checks)), sort_keys=True))
    sys.exit(EXIT_OK if result.passed else EXIT_FAILED)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
def validate(config_path):
    """Parse and check a config without running it."""
    try:
        cfg = load_config(config_path)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(dumps(cfg.to_dict()), nl=False)


@main.command()
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
def presets(as_json):
    """List problem presets with their one-sided Lipschitz certificates."""
    cat = list_presets()
    if as_json:
        click.echo(dumps(cat), nl=False)
        return
    for p in cat:
        params = ", ".join(f"{k}={v:g} in [{lo:g}, {hi:g}]" for k, v in p["defaults"].items()
                           for lo, hi in [p["ranges"][k]])
        click.echo(f"{p['name']:<20} {p['formula']:<24} {params}  "
                   f"W=[{p['W'][0]:g}, {p['W'][1]:g}] k(W)={p['k(W)']:g}")


if __name__ == "__main__":
    main()
