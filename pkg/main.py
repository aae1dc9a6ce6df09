"""
Main entry point for the dronerf project.

Subcommands: gen-data -> train-central / train-fed -> eval -> report, runs

Examples:
    python main.py gen-data --per-class 250 --snr-min -10 --snr-max 10 --snr-step 10 --out runs/data
    python main.py --config configs/centralized_closed_set.yaml train-central
    python main.py --config configs/federated_clients_per_round.yaml --seed 3 train-fed
    python main.py eval --checkpoint runs/<run>/model.ckpt --config runs/<run>/config.yaml
    python main.py report runs/<run>
    python main.py runs --status completed
"""

import logging
import sys
from pathlib import Path

import click

from dronerf.src.database.connection import DEFAULT_OUTPUT_ROOT, REGISTRY_FILENAME
from dronerf.src.errors import DronerfError, ReportError, StageError
from dronerf.src.experimenting.config.config import DESK_PER_CLASS, STAGES
from dronerf.src.generating.config.config import CLASS_LABELS
from dronerf.src.utils.run_logger import configure_console


# Exit codes by failing stage; 1 is any other dronerf error
STAGE_EXIT_CODES = {stage: 3 + i for i, stage in enumerate(STAGES)}
STAGE_EXIT_CODES["report"] = 3 + len(STAGES)


def _fail(stage, message):
    click.echo(f"\nError in stage '{stage}': {message}", err=True)
    sys.exit(STAGE_EXIT_CODES.get(stage, 1))


def _load(ctx, config_path, mode=None):
    """Experiment config with CLI overrides applied (mode, --seed)."""
    from dronerf.src.experimenting.config.experiment_config import load_config

    path = config_path or ctx.obj["config"]
    if not path:
        _fail("config", "no experiment config given (use --config)")
    overrides = {}
    if mode:
        overrides["mode"] = mode
    if ctx.obj["seed"] is not None:
        overrides["seeds.master"] = ctx.obj["seed"]
    try:
        return load_config(path, overrides)
    except DronerfError as e:
        _fail("config", e)


config_option = click.option(
    "--config", "config_path", type=click.Path(dir_okay=False), default=None,
    help="Experiment YAML (overrides the global --config).",
)


@click.group()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="Experiment YAML file.")
@click.option("--seed", type=int, default=None, help="Master seed override.")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Output root (default $DRONERF_OUTPUT_DIR or ./runs).")
@click.option("--verbose/--quiet", default=True, help="Banner output and progress bars.")
@click.pass_context
def cli(ctx, config_path, seed, out, verbose):
    """Federated open-set RF emitter authentication experiments."""
    configure_console(logging.INFO if verbose else logging.WARNING)
    ctx.ensure_object(dict)
    ctx.obj.update(config=config_path, seed=seed, out=out, verbose=verbose)


@cli.command("gen-data")
@click.option("--classes", default=",".join(CLASS_LABELS), show_default=True,
              help="Comma-separated class labels.")
@click.option("--per-class", type=int, default=DESK_PER_CLASS, show_default=True)
@click.option("--snr-min", type=float, default=-10.0, show_default=True)
@click.option("--snr-max", type=float, default=10.0, show_default=True)
@click.option("--snr-step", type=float, default=10.0, show_default=True)
@click.option("--seed", "local_seed", type=int, default=None, help="Dataset seed (default: global --seed or 0).")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", "data_out", type=click.Path(file_okay=False), default=None,
              help="Dataset directory (default <output root>/data-<seed>).")
@click.pass_context
def gen_data(ctx, classes, per_class, snr_min, snr_max, snr_step, local_seed, workers, data_out):
    """Synthesize a labeled window dataset and write it to disk."""
    from dronerf.src.generating.pipeline.orchestrator import generate_dataset

    seed = local_seed if local_seed is not None else (ctx.obj["seed"] or 0)
    root = Path(ctx.obj["out"]) if ctx.obj["out"] else DEFAULT_OUTPUT_ROOT
    out_dir = Path(data_out) if data_out else root / f"data-{seed}"
    labels = [c.strip() for c in classes.split(",") if c.strip()]
    try:
        generate_dataset(out_dir, per_class, snr_min, snr_max, snr_step, seed,
                         classes=labels, workers=workers)
    except (DronerfError, ValueError) as e:
        _fail("data", e)
    click.echo(f"\nDataset written to {out_dir}")


def _train(ctx, config_path, mode):
    from dronerf.src.experimenting.pipeline.experiment_runner import run_experiment

    config = _load(ctx, config_path, mode)
    try:
        run_dir = run_experiment(config, output_root=ctx.obj["out"],
                                 show_progress=ctx.obj["verbose"], verbose=ctx.obj["verbose"])
    except StageError as e:
        _fail(e.stage, e)
    click.echo(f"\nRun directory: {run_dir}")


@cli.command("train-central")
@config_option
@click.pass_context
def train_central(ctx, config_path):
    """Run a centralized experiment (data -> spectrograms -> SGD -> evaluation)."""
    _train(ctx, config_path, "centralized")


@cli.command("train-fed")
@config_option
@click.pass_context
def train_fed(ctx, config_path):
    """Run a zero-trust federated experiment."""
    _train(ctx, config_path, "federated")


@cli.command("eval")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@config_option
@click.option("--eval-out", type=click.Path(file_okay=False), default=None,
              help="Output directory (default next to the checkpoint).")
@click.pass_context
def eval_checkpoint(ctx, checkpoint, config_path, eval_out):
    """Evaluate a stored checkpoint on the test split of a config."""
    from dronerf.src.experimenting.pipeline.experiment_runner import evaluate_checkpoint

    config = _load(ctx, config_path)
    try:
        _, out_dir = evaluate_checkpoint(checkpoint, config, eval_out, verbose=ctx.obj["verbose"])
    except StageError as e:
        _fail(e.stage, e)
    click.echo(f"\nEvaluation written to {out_dir}")


@cli.command("report")
@click.argument("run_dir", type=click.Path(file_okay=False))
@click.pass_context
def report(ctx, run_dir):
    """Export summary tables and plots for a run or sweep directory."""
    from dronerf.src.experimenting.reporting.report_exporter import export_report

    try:
        paths = export_report(run_dir)
    except ReportError as e:
        _fail("report", e)
    for name, path in paths.items():
        click.echo(f"  {name:<28} {path}")


def _fmt(value):
    return "-" if value is None else f"{value:.4f}"


@cli.command("runs")
@click.option("--status", type=click.Choice(["completed", "failed"]), default=None)
@click.option("--run-id", default=None, help="Show one run and its federation rounds.")
@click.pass_context
def runs(ctx, status, run_id):
    """List registered runs with their final accuracy and AUROC."""
    from dronerf.src.experimenting.database.queries import (
        get_metric,
        get_round_records,
        get_run,
        get_run_count,
        list_runs,
    )

    root = Path(ctx.obj["out"]) if ctx.obj["out"] else DEFAULT_OUTPUT_ROOT
    if not (root / REGISTRY_FILENAME).is_file():
        _fail("report", f"no run registry under {root}")

    if run_id:
        run = get_run(run_id, root)
        if run is None:
            _fail("report", f"run {run_id} is not registered under {root}")
        for key, value in run.items():
            click.echo(f"  {key:<14} {value}")
        for record in get_round_records(run_id, root):
            click.echo(
                f"  round {record['round_index']:>4}  selected {record['selected']}  "
                f"rejected {record['rejected_count']}  norm {_fmt(record['aggregate_norm'])}  "
                f"acc {_fmt(record['accuracy'])}"
            )
        return

    click.echo(f"{get_run_count(status, root)} registered run(s) under {root}")
    for run in list_runs(status, root):
        accuracy = get_metric(run["run_id"], "accuracy", stage="evaluation", output_root=root)
        auroc = get_metric(run["run_id"], "auroc", stage="evaluation", output_root=root)
        click.echo(f"  {run['run_id']:<44} {run['mode']:<12} {run['status']:<10} "
                   f"acc {_fmt(accuracy)}  auroc {_fmt(auroc)}")


if __name__ == "__main__":
    cli()
