"""Experiment config, runner, registry and report export."""

from pathlib import Path

import pandas as pd
import pytest
import yaml

from dronerf.src.errors import ConfigurationError, ReportError, StageError, ValidationError
from dronerf.src.evaluating.metrics.open_set import openness
from dronerf.src.experimenting.config.config import (
    DEFAULT_KNOWN,
    DEFAULT_UNKNOWN,
    METRIC_COLUMNS,
    UNKNOWN_ORDER,
)
from dronerf.src.experimenting.config.experiment_config import (
    ExperimentConfig,
    load_config,
    save_config,
)
from dronerf.src.experimenting.database.queries import (
    get_metric,
    get_round_records,
    get_run,
    get_run_count,
)
from dronerf.src.experimenting.pipeline.experiment_runner import (
    evaluate_checkpoint,
    run_experiment,
)
from dronerf.src.experimenting.reporting.report_exporter import export_report
from dronerf.src.federating.config.config import REASON_DIGEST
from dronerf.src.generating.config.config import CLASS_LABELS


CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


# ============================================================================
# CONFIG
# ============================================================================

def test_default_split_holds_out_noise_and_taranis():
    known, unknown = ExperimentConfig().classes
    assert unknown == DEFAULT_UNKNOWN == ["Noise", "Taranis"]
    assert known == DEFAULT_KNOWN == ["DJI", "FutabaT7", "FutabaT14", "Graupner", "Turnigy"]


@pytest.mark.parametrize("count", range(0, 7))
def test_unknown_count_takes_prefix_of_fixed_order(count):
    known, unknown = ExperimentConfig.from_dict({"split": {"unknown_count": count}}).classes
    assert set(unknown) == set(UNKNOWN_ORDER[:count])
    assert len(known) + len(unknown) == 7
    assert not set(known) & set(unknown)


def test_explicit_lists_override_unknown_count():
    config = ExperimentConfig.from_dict({"split": {"unknown": ["Taranis"], "unknown_count": 4}})
    assert config.classes[1] == ["Taranis"]


@pytest.mark.parametrize("split", [
    {"known": ["DJI", "Noise"], "unknown": ["Noise"]},
    {"known": ["DJI", "Parrot"], "unknown": []},
    {"known": ["DJI"], "unknown": ["Noise"]},
    {"unknown_count": 9},
])
def test_bad_splits_rejected(tiny_experiment, split):
    data = tiny_experiment()
    data["split"] = split
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict(data).validate()


@pytest.mark.parametrize("section, values", [
    ("loss", {"alpha": 0.0}),
    ("loss", {"lam": -1.0}),
    ("optimizer", {"batch_size": 1}),
    ("optimizer", {"lr": -0.1}),
    ("evaluation", {"score_kind": "cosine"}),
    ("evaluation", {"calibrate": True}),
    ("dataset", {"per_class": 0}),
    ("dataset", {"splits": {"train": 0.5, "test": 0.2}}),
    ("model", {"stage_channels": [6, 8, 8]}),
])
def test_out_of_range_values_rejected(tiny_experiment, section, values):
    with pytest.raises((ConfigurationError, ValidationError)):
        ExperimentConfig.from_dict(tiny_experiment(**{section: values})).validate()


def test_unknown_keys_rejected(tiny_experiment):
    with pytest.raises(ConfigurationError, match="Unknown keys"):
        ExperimentConfig.from_dict(tiny_experiment(optimizer={"learning_rate": 0.1}))
    with pytest.raises(ConfigurationError, match="top-level"):
        ExperimentConfig.from_dict({**tiny_experiment(), "trainer": {}})
    with pytest.raises(ConfigurationError, match="model"):
        ExperimentConfig.from_dict(tiny_experiment(model={"width": 3})).validate()


def test_federated_settings_validated(tiny_experiment):
    data = tiny_experiment(mode="federated", federated={"n_clients": 2, "clients_per_round": 3})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict(data).validate()


def test_all_clients_per_round(tiny_experiment):
    config = ExperimentConfig.from_dict(
        tiny_experiment(mode="federated", federated={"n_clients": 4, "clients_per_round": "all"})
    ).validate()
    assert config.federation_config().clients_per_round == 4


def test_external_path_must_exist(tiny_experiment, tmp_path):
    data = tiny_experiment(dataset={"source": "external", "path": str(tmp_path / "missing")})
    with pytest.raises(ValidationError):
        ExperimentConfig.from_dict(data).validate()


def test_learning_rate_follows_mode(tiny_experiment):
    central = ExperimentConfig.from_dict(tiny_experiment())
    federated = ExperimentConfig.from_dict(tiny_experiment(mode="federated"))
    assert central.learning_rate == 0.01
    assert federated.learning_rate == 0.05
    explicit = ExperimentConfig.from_dict(tiny_experiment(optimizer={"lr": 0.2}))
    assert explicit.training_config().lr == 0.2


def test_run_id_is_deterministic_and_ignores_output_root(tiny_experiment, tmp_path):
    a = ExperimentConfig.from_dict(tiny_experiment())
    b = ExperimentConfig.from_dict(tiny_experiment(output={"root": str(tmp_path / "elsewhere")}))
    c = ExperimentConfig.from_dict(tiny_experiment(seeds={"master": 4}))
    assert a.run_id == b.run_id
    assert a.run_id != c.run_id
    assert a.run_id.startswith("tiny-") and len(a.run_id) == len("tiny-") + 10


def test_with_override(tiny_experiment):
    config = ExperimentConfig.from_dict(tiny_experiment())
    changed = config.with_override("federated.rounds", 9)
    assert changed.federated.rounds == 9
    assert config.federated.rounds == 2
    with pytest.raises(ConfigurationError):
        config.with_override("federated.round_count", 9)


def test_expand_sweep(tiny_experiment):
    config = ExperimentConfig.from_dict(
        tiny_experiment(sweep={"key": "federated.clients_per_round", "values": [1, 2]})
    )
    children = config.expand_sweep()
    assert [value for value, _ in children] == [1, 2]
    assert [child.federated.clients_per_round for _, child in children] == [1, 2]
    assert all(not child.sweep.key for _, child in children)
    assert children[0][1].name == "tiny-clients_per_round=1"
    assert children[0][1].run_id != children[1][1].run_id


def test_yaml_round_trip(tiny_experiment, tmp_path):
    config = ExperimentConfig.from_dict(tiny_experiment(federated={"behaviours": {1: "tamper"}}))
    path = save_config(config, tmp_path / "config.yaml")
    loaded = load_config(path)
    assert loaded.to_dict() == config.to_dict()
    assert loaded.run_id == config.run_id


def test_load_config_errors(tmp_path):
    with pytest.raises(ValidationError):
        load_config(tmp_path / "absent.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("- just\n- a list\n")
    with pytest.raises(ValidationError):
        load_config(bad)


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.yaml")), ids=lambda p: p.name)
def test_shipped_configs_validate(path):
    config = load_config(path)
    assert config.mode in ("centralized", "federated")


# ============================================================================
# RUNS
# ============================================================================

def test_centralized_run_writes_artefacts(tiny_experiment):
    config = ExperimentConfig.from_dict(tiny_experiment())
    run_dir = run_experiment(config, verbose=False)

    assert run_dir.name == config.run_id
    for name in ("config.yaml", "manifest.yaml", "metrics.csv", "model.ckpt", "data_summary.csv",
                 "run.log.jsonl", "evaluation/per_snr_accuracy.csv", "evaluation/confusion.csv",
                 "evaluation/roc.csv"):
        assert (run_dir / name).is_file(), name

    manifest = yaml.safe_load((run_dir / "manifest.yaml").read_text())
    assert manifest["status"] == "completed"
    assert manifest["failed_stage"] is None
    assert manifest["seeds"]["master"] == 3
    assert manifest["classes"] == {"known": ["DJI", "Graupner"], "unknown": ["Noise"]}
    assert manifest["code_version"]

    metrics = pd.read_csv(run_dir / "metrics.csv")
    assert list(metrics.columns) == METRIC_COLUMNS
    assert set(metrics["run_id"]) == {config.run_id}
    assert {"training", "evaluation"} <= set(metrics["stage"])
    final = metrics[(metrics["stage"] == "evaluation") & (metrics["metric"] == "openness")]
    assert final["value"].iloc[0] == pytest.approx(openness(2, 3))
    size = metrics[metrics["group"] == "model"].set_index("metric")["value"]
    assert size["parameters"] > 0
    assert size["storage_bytes"] > 4 * size["parameters"]

    summary = pd.read_csv(run_dir / "data_summary.csv")
    assert summary["count"].sum() == 30

    # snapshot reproduces the run identity
    assert load_config(run_dir / "config.yaml").run_id == config.run_id


def test_run_is_registered(tiny_experiment, tmp_path):
    config = ExperimentConfig.from_dict(tiny_experiment())
    run_experiment(config, verbose=False)
    root = tmp_path / "runs"

    row = get_run(config.run_id, root)
    assert row["status"] == "completed"
    assert row["mode"] == "centralized"
    assert get_run_count(output_root=root) == 1
    accuracy = pd.read_csv(Path(row["run_dir"]) / "evaluation" / "metrics.csv")
    expected = accuracy[(accuracy["metric"] == "accuracy") & (accuracy["group"] == "overall")]["value"].iloc[0]
    assert get_metric(config.run_id, "accuracy", stage="evaluation", output_root=root) == pytest.approx(expected)


def test_rerun_gives_identical_metrics(tiny_experiment, tmp_path):
    config = ExperimentConfig.from_dict(tiny_experiment())
    first = (run_experiment(config, verbose=False) / "metrics.csv").read_bytes()
    second_dir = run_experiment(config, verbose=False)
    assert (second_dir / "metrics.csv").read_bytes() == first
    assert get_run_count(output_root=tmp_path / "runs") == 1


def test_federated_run_with_tampering_client(tiny_experiment, tmp_path):
    config = ExperimentConfig.from_dict(tiny_experiment(
        mode="federated", federated={"behaviours": {1: "tamper"}},
    ))
    run_dir = run_experiment(config, verbose=False)

    history = pd.read_json(run_dir / "rounds.jsonl", lines=True)
    assert list(history["round"]) == [0, 1]
    for record in history.to_dict(orient="records"):
        verdicts = {v["client"]: v for v in record["verdicts"]}
        assert verdicts[0]["accepted"]
        assert verdicts[1]["reason"] == REASON_DIGEST
    assert (run_dir / "key_registry.yaml").is_file()
    assert sorted(p.name for p in (run_dir / "checkpoints").iterdir()) == ["round_0001.ckpt", "round_0002.ckpt"]

    metrics = pd.read_csv(run_dir / "metrics.csv")
    rejected = metrics[(metrics["metric"] == "rejected_updates") & (metrics["group"] == REASON_DIGEST)]
    assert rejected["value"].iloc[0] == 2
    per_round = metrics[(metrics["stage"] == "training") & (metrics["metric"] == "accuracy")]
    assert list(per_round["group"]) == ["round=1", "round=2"]

    records = get_round_records(config.run_id, tmp_path / "runs")
    assert [r["round_index"] for r in records] == [0, 1]
    assert all(r["rejected_count"] == 1 for r in records)


def test_failed_stage_is_recorded(tiny_experiment, tmp_path):
    # 2 clients cannot each hold 4 windows of every class with 6 training windows per class
    config = ExperimentConfig.from_dict(tiny_experiment(
        mode="federated", federated={"min_shard_per_class": 4},
    ))
    with pytest.raises(StageError) as info:
        run_experiment(config, verbose=False)
    assert info.value.stage == "training"

    run_dir = tmp_path / "runs" / config.run_id
    manifest = yaml.safe_load((run_dir / "manifest.yaml").read_text())
    assert manifest["status"] == "failed"
    assert manifest["failed_stage"] == "training"
    assert (run_dir / "data_summary.csv").is_file()
    assert get_run(config.run_id, tmp_path / "runs")["failed_stage"] == "training"


def test_invalid_config_fails_before_compute(tiny_experiment, tmp_path):
    with pytest.raises(StageError) as info:
        run_experiment(tiny_experiment(loss={"alpha": -1.0}), verbose=False)
    assert info.value.stage == "config"
    assert not (tmp_path / "runs").exists()


def test_sweep_writes_one_row_per_value(tiny_experiment):
    config = ExperimentConfig.from_dict(tiny_experiment(
        split={"known": None, "unknown": None, "unknown_count": None},
        sweep={"key": "split.unknown_count", "values": [1, 2]},
        dataset={"per_class": 6, "splits": {"train": 0.5, "test": 0.5}},
    ))
    sweep_dir = run_experiment(config, verbose=False)
    sweep = pd.read_csv(sweep_dir / "sweep.csv")
    assert list(sweep["sweep_value"]) == [1, 2]
    assert list(sweep["status"]) == ["completed", "completed"]
    assert list(sweep["openness"].round(4)) == [0.0392, 0.0871]
    for run_id in sweep["run_id"]:
        assert (sweep_dir / run_id / "metrics.csv").is_file()


def test_evaluate_checkpoint_matches_run(tiny_experiment, tmp_path):
    config = ExperimentConfig.from_dict(tiny_experiment())
    run_dir = run_experiment(config, verbose=False)
    report, out_dir = evaluate_checkpoint(run_dir / "model.ckpt", run_dir / "config.yaml", verbose=False)

    stored = pd.read_csv(run_dir / "evaluation" / "metrics.csv")
    accuracy = stored[(stored["metric"] == "accuracy") & (stored["group"] == "overall")]["value"].iloc[0]
    assert report.overall_accuracy == pytest.approx(accuracy)
    assert (out_dir / "confusion.csv").is_file()


def test_evaluate_checkpoint_rejects_class_mismatch(tiny_experiment, tmp_path):
    run_dir = run_experiment(ExperimentConfig.from_dict(tiny_experiment()), verbose=False)
    other = tiny_experiment(split={"known": ["DJI", "Graupner", "Turnigy"], "unknown": ["Noise"]})
    with pytest.raises(StageError) as info:
        evaluate_checkpoint(run_dir / "model.ckpt", other, verbose=False)
    assert info.value.stage == "config"


# ============================================================================
# REPORTS
# ============================================================================

def test_report_from_federated_run(tiny_experiment):
    run_dir = run_experiment(ExperimentConfig.from_dict(tiny_experiment(mode="federated")), verbose=False)
    paths = export_report(run_dir)
    for name in ("summary", "accuracy_vs_round", "accuracy_vs_round_plot", "roc_plot", "confusion",
                 "confusion_plot", "per_snr_plot", "verdicts"):
        assert Path(paths[name]).is_file(), name
    curve = pd.read_csv(paths["accuracy_vs_round"])
    assert list(curve["round"]) == [1, 2]


def test_report_csvs_are_deterministic(tiny_experiment, tmp_path):
    run_dir = run_experiment(ExperimentConfig.from_dict(tiny_experiment()), verbose=False)
    first = export_report(run_dir, tmp_path / "a")
    second = export_report(run_dir, tmp_path / "b")
    for name, path in first.items():
        if str(path).endswith(".csv"):
            assert Path(path).read_bytes() == Path(second[name]).read_bytes()


def test_empty_directory_has_nothing_to_report(tmp_path):
    with pytest.raises(ReportError, match="nothing to report"):
        export_report(tmp_path)
    with pytest.raises(ReportError, match="nothing to report"):
        export_report(tmp_path / "missing")


# ============================================================================
# DESK-SCALE RUNS (slow)
# ============================================================================

def _desk(tiny_experiment, **sections):
    """Desk-scale run: 200/50 windows per class at 0 and 10 dB, default LSNet."""
    base = {
        "dataset": {"per_class": 250, "snr_grid": [0, 10], "splits": {"train": 0.8, "test": 0.2}},
        "model": None,
        "optimizer": {"epochs": 10, "batch_size": 64},
    }
    base.update(sections)
    return tiny_experiment(**base)


def _final(run_dir, metric):
    stored = pd.read_csv(Path(run_dir) / "evaluation" / "metrics.csv")
    return stored[(stored["metric"] == metric) & (stored["group"] == "overall")]["value"].iloc[0]


@pytest.mark.slow
def test_desk_closed_set_learns_synthetic_classes(tiny_experiment):
    data = _desk(tiny_experiment, split={"known": list(CLASS_LABELS), "unknown": []})
    run_dir = run_experiment(data, verbose=False)
    assert _final(run_dir, "accuracy") >= 0.90


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_desk_open_set_rejects_noise_and_taranis(tiny_experiment, seed):
    data = _desk(tiny_experiment, split={"known": None, "unknown": None}, seeds={"master": seed})
    run_dir = run_experiment(data, verbose=False)
    assert _final(run_dir, "auroc") >= 0.65


@pytest.mark.slow
def test_desk_full_participation_beats_single_client(tiny_experiment):
    gains = []
    for seed in (0, 1, 2):
        accuracy = {}
        for clients_per_round in (1, 5):
            data = _desk(
                tiny_experiment,
                name=f"participation-{clients_per_round}",
                mode="federated",
                split={"known": None, "unknown": None},
                federated={"n_clients": 5, "clients_per_round": clients_per_round, "rounds": 50,
                           "eval_every": 50},
                seeds={"master": seed},
            )
            accuracy[clients_per_round] = _final(run_experiment(data, verbose=False), "accuracy")
        gains.append(accuracy[5] - accuracy[1])
    assert sum(gains) / len(gains) >= 0.02
