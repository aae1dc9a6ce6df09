"""
Experiment runner.

Runs one experiment (or a sweep of them) end to end:
data -> spectrograms -> centralized or federated training -> evaluation.

Every run lives in its own directory named by its deterministic run id and
holds the config snapshot, checkpoints, metrics CSVs, the federation round
log and a manifest with seeds and code version. A failing stage keeps
whatever was written so far and is named in the manifest.
"""

import os
import shutil
import time
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path

import pandas as pd
import torch
import yaml

from dronerf import __version__
from dronerf.src.errors import StageError
from dronerf.src.evaluating.pipeline.evaluator import evaluate_model, model_logits, write_report
from dronerf.src.experimenting.config.config import (
    CHECKPOINT_DIR,
    CONFIG_SNAPSHOT,
    DATA_SUMMARY_FILENAME,
    EVALUATION_DIR,
    METRIC_COLUMNS,
    METRICS_FILENAME,
    MODEL_FILENAME,
    NUM_THREADS_ENV,
    REJECTIONS_FILENAME,
    RUN_LOG_FILENAME,
    RUN_MANIFEST,
    SPECTROGRAM_DIR,
    SWEEP_FILENAME,
    VALIDATION_SPLIT,
)
from dronerf.src.experimenting.config.experiment_config import (
    ExperimentConfig,
    load_config,
    save_config,
)
from dronerf.src.experimenting.database.operations import (
    finish_run,
    insert_metrics,
    insert_round_records,
    upsert_run,
)
from dronerf.src.experimenting.database.schema import initialize_database
from dronerf.src.experimenting.pipeline.statistics import ExperimentStats
from dronerf.src.federating.config.config import HISTORY_FILENAME, REGISTRY_FILENAME, STREAM_INIT
from dronerf.src.federating.pipeline.orchestrator import run_federation
from dronerf.src.generating.pipeline.dataset_builder import build_dataset
from dronerf.src.generating.pipeline.dataset_store import load_external
from dronerf.src.modeling.loss.class_anchor import calibrate_threshold, make_centers, predict_and_score
from dronerf.src.modeling.lsnet.checkpoint import load_checkpoint, save_checkpoint
from dronerf.src.modeling.lsnet.network import param_count, storage_bytes
from dronerf.src.modeling.training.centralized_trainer import train_centralized
from dronerf.src.preprocessing.spectrogram_cache import SpectrogramCache
from dronerf.src.preprocessing.spectrogram_transformer import stack_inputs, transform_dataset
from dronerf.src.utils.run_logger import attach_json_file, detach_handler, get_run_logger
from dronerf.src.utils.seeding import derive_seed


SWEEP_COLUMNS = ["sweep_key", "sweep_value", "run_id", "status", "overall_accuracy", "auroc",
                 "openness", "n_known_classes", "n_unknown_classes", "unknown_classes"]


# ============================================================================
# ENVIRONMENT
# ============================================================================

def configure_determinism():
    """Deterministic torch kernels; thread count from DRONERF_NUM_THREADS."""
    torch.use_deterministic_algorithms(True)
    threads = os.environ.get(NUM_THREADS_ENV)
    if threads:
        torch.set_num_threads(int(threads))
    return torch.get_num_threads()


def code_version():
    """
    Git commit of the working tree (suffixed +dirty), else the package version.
    """
    try:
        from git import Repo
        from git.exc import InvalidGitRepositoryError, NoSuchPathError

        try:
            repo = Repo(Path(__file__).resolve().parent, search_parent_directories=True)
            version = repo.head.commit.hexsha
            return f"{version}+dirty" if repo.is_dirty() else version
        except (InvalidGitRepositoryError, NoSuchPathError, ValueError):
            pass
    except ImportError:
        # GitPython refuses to import without a git executable
        pass
    return f"dronerf-{__version__}"


# ============================================================================
# STAGES
# ============================================================================

@contextmanager
def _stage(name, stats, run_logger):
    started = time.perf_counter()
    run_logger.info("stage started", extra={"stage": name})
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        stats.record_failure(name, str(e))
        run_logger.error("stage failed", extra={"stage": name, "error": str(e)})
        raise StageError(name, str(e)) from e
    finally:
        seconds = time.perf_counter() - started
        stats.record_stage(name, seconds)
        run_logger.info("stage finished", extra={"stage": name, "seconds": round(seconds, 3)})


def load_data(config, run_dir, show_progress=False):
    """
    Synthesize or ingest the windows of every known and unknown class.

    Writes data_summary.csv (label, split, count) and, for external data,
    rejections.csv listing skipped files.
    """
    known, unknown = config.classes
    if config.dataset.source == "external":
        dataset = load_external(config.dataset.path, config.dataset.manifest)
        if dataset.rejections:
            pd.DataFrame(dataset.rejections, columns=["file", "reason"]) \
                .to_csv(run_dir / REJECTIONS_FILENAME, index=False)
        dataset = dataset.select(known + unknown)
        if len(dataset) == 0:
            raise ValueError(f"No usable windows for classes {known + unknown} in {config.dataset.path}")
    else:
        dataset = build_dataset(config.dataset_spec(), show_progress=show_progress)

    summary = pd.DataFrame({"label": dataset.labels, "split": [item.split for item in dataset]})
    summary = summary.groupby(["label", "split"]).size().reset_index(name="count")
    summary.to_csv(run_dir / DATA_SUMMARY_FILENAME, index=False)
    return dataset


def make_spectrograms(config, dataset, run_dir, show_progress=False):
    """Convert every window; optionally cache the images in the run directory."""
    params = config.spectrogram_params()
    spectra = transform_dataset(dataset, params, workers=config.dataset.workers,
                                show_progress=show_progress)
    if config.dataset.cache:
        SpectrogramCache(run_dir / SPECTROGRAM_DIR, params).write(spectra)
    return spectra


def split_sets(config, spectra):
    """
    Named subsets used by training and evaluation.

    Returns:
        dict: train, known_test, unknown_test (None for closed-set runs) and
            validation (None unless a validation split exists)
    """
    known, unknown = config.classes
    test = spectra.subset("test")
    sets = {
        "train": spectra.subset("train").select(known),
        "known_test": test.select(known),
        "unknown_test": test.select(unknown) if unknown else None,
        "validation": None,
    }
    if VALIDATION_SPLIT in config.dataset.splits:
        sets["validation"] = spectra.subset(VALIDATION_SPLIT).select(known)
    return sets


def _metric_rows(stage, rows):
    return [{"stage": stage, **row} for row in rows]


def train_model(config, sets, run_dir, run_id, show_progress=False, verbose=True):
    """
    Centralized or federated training.

    Returns:
        tuple: (model, metric rows, round record dicts)
    """
    known, _ = config.classes
    seed = int(config.seeds.master)
    rows = []
    round_records = []

    if config.mode == "centralized":
        model, stats = train_centralized(
            sets["train"], known, config.lsnet_config(), config.training_config(), seed,
            show_progress=show_progress, verbose=verbose,
        )
        rows.extend({"metric": "loss", "group": f"epoch={epoch}", "value": loss}
                    for epoch, loss in stats.epoch_losses)
    else:
        centers = make_centers(len(known), config.loss.alpha)

        def evaluate(model, round_index):
            report = evaluate_model(model, sets["known_test"], sets["unknown_test"], centers, known,
                                    config.evaluation.score_kind)
            metrics = {"accuracy": report.overall_accuracy}
            if report.auroc is not None:
                metrics["auroc"] = report.auroc
            return metrics

        checkpoint_dir = run_dir / CHECKPOINT_DIR if config.output.checkpoints else None
        model, history, stats = run_federation(
            sets["train"], known, config.lsnet_config(), config.federation_config(), seed,
            evaluate=evaluate if config.evaluation.per_round else None,
            history_path=run_dir / HISTORY_FILENAME,
            checkpoint_dir=checkpoint_dir,
            registry_path=run_dir / REGISTRY_FILENAME,
            run_id=run_id,
            show_progress=show_progress,
            verbose=verbose,
        )
        for record in history:
            round_records.append(record.to_dict())
            for metric, value in sorted(record.metrics.items()):
                rows.append({"metric": metric, "group": f"round={record.round_index + 1}", "value": value})
        rows.append({"metric": "accepted_updates", "group": "total", "value": float(stats.accepted)})
        for reason, count in sorted(stats.rejections.items()):
            rows.append({"metric": "rejected_updates", "group": reason, "value": float(count)})
        rows.append({"metric": "carried_forward_rounds", "group": "total",
                     "value": float(len(stats.carried_forward))})

    rows.append({"metric": "parameters", "group": "model", "value": float(param_count(model))})
    rows.append({"metric": "storage_bytes", "group": "model", "value": float(storage_bytes(model))})

    save_checkpoint(model, run_dir / MODEL_FILENAME, extra={
        "run_id": run_id, "classes": known, "alpha": config.loss.alpha, "mode": config.mode,
    })
    return model, _metric_rows("training", rows), round_records


def evaluate_run(config, model, sets, directory):
    """
    Final evaluation with an optional calibrated rejection threshold.

    Returns:
        tuple: (EvaluationReport, metric rows)
    """
    known, _ = config.classes
    centers = make_centers(len(known), config.loss.alpha)
    threshold = None
    if config.evaluation.calibrate:
        validation = sets["validation"]
        if validation is None or len(validation) == 0:
            raise ValueError("Threshold calibration needs a non-empty validation split")
        decision = predict_and_score(model_logits(model, stack_inputs(validation)), centers,
                                     kind=config.evaluation.score_kind)
        threshold = calibrate_threshold(decision.score.numpy(), config.evaluation.true_accept_rate)

    report = evaluate_model(model, sets["known_test"], sets["unknown_test"], centers, known,
                            config.evaluation.score_kind, threshold)
    write_report(report, directory)
    return report, _metric_rows("evaluation", report.to_rows())


# ============================================================================
# RUN ARTEFACTS
# ============================================================================

def write_metrics(run_id, rows, path):
    """Long-format metrics CSV: run_id, stage, metric, group, value."""
    frame = pd.DataFrame([{"run_id": run_id, **row} for row in rows], columns=METRIC_COLUMNS)
    frame.to_csv(path, index=False)
    return path


def write_manifest(config, stats, run_dir, started_at, error=None):
    """Run manifest: identity, seeds, code version, status and outputs."""
    known, unknown = config.classes
    manifest = {
        "run_id": config.run_id,
        "name": config.name,
        "mode": config.mode,
        "status": stats.status,
        "failed_stage": stats.failed_stage,
        "error": error,
        "config_hash": config.config_hash,
        "config_snapshot": CONFIG_SNAPSHOT,
        "seeds": {
            "master": int(config.seeds.master),
            "data": config.seeds.data_seed,
            "init": derive_seed(config.seeds.master, STREAM_INIT),
        },
        "classes": {"known": known, "unknown": unknown},
        "code_version": code_version(),
        "versions": {"torch": str(torch.__version__), "pandas": str(pd.__version__)},
        "threads": torch.get_num_threads(),
        "started_at": started_at.isoformat(timespec="seconds"),
        "finished_at": datetime.now().isoformat(timespec="seconds"),
        "stage_seconds": {k: round(v, 3) for k, v in stats.stage_seconds.items()},
        "outputs": sorted(str(Path(p).relative_to(run_dir)) for p in stats.outputs
                          if Path(p).is_relative_to(run_dir)),
    }
    path = run_dir / RUN_MANIFEST
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(manifest, f, sort_keys=False)
    return path


def prepare_run_dir(run_dir):
    """
    Empty an earlier run of the same id so re-runs start clean.

    Raises:
        StageError: the directory exists, is not empty and is not a run
    """
    if run_dir.exists() and any(run_dir.iterdir()):
        if not (run_dir / RUN_MANIFEST).exists():
            raise StageError("config", f"{run_dir} exists and is not a dronerf run directory")
        shutil.rmtree(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def _store_in_registry(config, registry_root, metrics, round_records, stats):
    success, message = insert_metrics(config.run_id, metrics, registry_root)
    if success:
        success, message = insert_round_records(config.run_id, round_records, registry_root)
    if success:
        success, message = finish_run(config.run_id, stats.status, stats.failed_stage, registry_root)
    if not success:
        print(f"  Warning: {message}")


# ============================================================================
# ORCHESTRATION
# ============================================================================

def _as_config(config):
    if isinstance(config, (str, Path)):
        return load_config(config)
    return ExperimentConfig.from_dict(config)


def run_single(config, run_dir, registry_root=None, show_progress=False, verbose=True):
    """
    Run one experiment into run_dir.

    Returns:
        tuple: (run directory, EvaluationReport or None)

    Raises:
        StageError: a stage failed; outputs written so far are kept
    """
    run_dir = prepare_run_dir(Path(run_dir))
    run_id = config.run_id
    stats = ExperimentStats(run_id)
    started_at = datetime.now()
    threads = configure_determinism()

    run_logger = get_run_logger(run_id)
    handler = attach_json_file(run_logger, run_dir / RUN_LOG_FILENAME, {"run_id": run_id})

    if verbose:
        print("\n" + "=" * 70)
        print(f"EXPERIMENT - {config.name} ({config.mode})")
        print("=" * 70)
        print(f"Started at: {started_at.strftime('%Y-%m-%d %H:%M:%S')}\n")
        known, unknown = config.classes
        print("-" * 70)
        print(f"Run id: {run_id}")
        print(f"Known: {', '.join(known)}")
        print(f"Unknown: {', '.join(unknown) or '-'}")
        print(f"Seed: {config.seeds.master} | threads: {threads}")
        print("-" * 70 + "\n")

    metrics = []
    round_records = []
    report = None
    error = None
    registry_ready = False

    try:
        with _stage("config", stats, run_logger):
            stats.record_output(save_config(config, run_dir / CONFIG_SNAPSHOT))
            registry_ready = initialize_database(registry_root)
            if registry_ready:
                success, message = upsert_run({
                    "run_id": run_id, "name": config.name, "mode": config.mode,
                    "run_dir": run_dir, "config_hash": config.config_hash,
                    "seed": config.seeds.master, "code_version": code_version(),
                }, registry_root)
                if not success:
                    registry_ready = False
                    print(f"  Warning: {message}")

        with _stage("data", stats, run_logger):
            dataset = load_data(config, run_dir, show_progress)
            stats.record_output(run_dir / DATA_SUMMARY_FILENAME)

        with _stage("spectrograms", stats, run_logger):
            spectra = make_spectrograms(config, dataset, run_dir, show_progress)
            del dataset
            sets = split_sets(config, spectra)

        with _stage("training", stats, run_logger):
            model, rows, round_records = train_model(config, sets, run_dir, run_id, show_progress, verbose)
            metrics.extend(rows)
            stats.record_output(run_dir / MODEL_FILENAME)
            if config.mode == "federated":
                stats.record_output(run_dir / HISTORY_FILENAME)
                stats.record_output(run_dir / REGISTRY_FILENAME)

        with _stage("evaluation", stats, run_logger):
            report, rows = evaluate_run(config, model, sets, run_dir / EVALUATION_DIR)
            metrics.extend(rows)
            stats.record_output(run_dir / EVALUATION_DIR)

    except StageError as e:
        error = str(e)
        raise

    finally:
        stats.record_output(write_metrics(run_id, metrics, run_dir / METRICS_FILENAME))
        stats.finish()
        write_manifest(config, stats, run_dir, started_at, error)
        if registry_ready:
            _store_in_registry(config, registry_root, metrics, round_records, stats)
        detach_handler(run_logger, handler)

        if verbose:
            print("\n" + "=" * 70)
            print("EXPERIMENT COMPLETE" if not stats.failed_stage else f"EXPERIMENT FAILED ({stats.failed_stage})")
            print("=" * 70)
            print(f"\nCompleted at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
            stats.print_summary()

    return run_dir, report


def run_sweep(config, output_root, show_progress=False, verbose=True):
    """
    Run one experiment per sweep value under a shared sweep directory.

    Writes sweep.csv with one summary row per child run (partial on failure).

    Returns:
        Path: sweep directory
    """
    sweep_dir = Path(output_root) / config.run_id
    sweep_dir.mkdir(parents=True, exist_ok=True)
    save_config(config, sweep_dir / CONFIG_SNAPSHOT)

    rows = []
    try:
        for value, child in config.expand_sweep():
            row = {"sweep_key": config.sweep.key, "sweep_value": value, "run_id": child.run_id}
            try:
                _, report = run_single(child, sweep_dir / child.run_id, output_root, show_progress, verbose)
            except StageError:
                rows.append({**row, "status": "failed"})
                raise
            known, unknown = child.classes
            rows.append({
                **row,
                "status": "completed",
                "overall_accuracy": report.overall_accuracy,
                "auroc": report.auroc,
                "openness": report.openness,
                "n_known_classes": len(known),
                "n_unknown_classes": len(unknown),
                "unknown_classes": ";".join(unknown),
            })
    finally:
        pd.DataFrame(rows, columns=SWEEP_COLUMNS).to_csv(sweep_dir / SWEEP_FILENAME, index=False)
    return sweep_dir


def run_experiment(config, output_root=None, show_progress=False, verbose=True):
    """
    Main experiment pipeline.

    Coordinates:
    1. Validate the configuration (before any compute)
    2. Build or load the data and convert it to spectrograms
    3. Train centrally or through the zero-trust federation
    4. Evaluate known-class accuracy and unknown rejection
    5. Write metrics, manifest and registry rows

    Args:
        config (ExperimentConfig, dict or path): experiment description
        output_root (str/Path): overrides output.root

    Returns:
        Path: run directory (sweep directory for sweeps)

    Raises:
        StageError: stage identifier plus message of the first failure
    """
    try:
        config = _as_config(config).validate()
    except Exception as e:
        raise StageError("config", str(e)) from e

    root = Path(output_root) if output_root else config.output.root_path
    if config.sweep.key:
        return run_sweep(config, root, show_progress, verbose)
    run_dir, _ = run_single(config, root / config.run_id, root, show_progress, verbose)
    return run_dir


def evaluate_checkpoint(checkpoint, config, out_dir=None, verbose=True):
    """
    Evaluate a stored model on the test split its config describes.

    The data is regenerated from the config seeds, so a checkpoint from a
    synthetic run is scored on exactly the test windows of that run.

    Returns:
        tuple: (EvaluationReport, output directory)

    Raises:
        StageError: config, data or evaluation failure
    """
    checkpoint = Path(checkpoint)
    try:
        config = _as_config(config).validate()
        model, _ = load_checkpoint(checkpoint)
    except Exception as e:
        raise StageError("config", str(e)) from e

    known, _ = config.classes
    if model.config.num_classes != len(known):
        raise StageError("config", f"Checkpoint has {model.config.num_classes} classes, "
                                   f"config has {len(known)} known classes")

    out_dir = Path(out_dir) if out_dir else checkpoint.parent / f"eval_{checkpoint.stem}"
    out_dir.mkdir(parents=True, exist_ok=True)
    configure_determinism()

    if verbose:
        print("\n" + "=" * 70)
        print(f"EVALUATION - {checkpoint.name}")
        print("=" * 70)
        print(f"Started at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}\n")

    stage = "data"
    try:
        dataset = load_data(config, out_dir)
        stage = "spectrograms"
        sets = split_sets(config, make_spectrograms(config, dataset, out_dir))
        stage = "evaluation"
        report, rows = evaluate_run(config, model, sets, out_dir)
        write_metrics(config.run_id, rows, out_dir / METRICS_FILENAME)
    except Exception as e:
        raise StageError(stage, str(e)) from e

    if verbose:
        print("-" * 70)
        for name, value in report.summary().items():
            print(f"  {name:<25} {value}")
        print("-" * 70)
        print(f"\nCompleted at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    return report, out_dir
