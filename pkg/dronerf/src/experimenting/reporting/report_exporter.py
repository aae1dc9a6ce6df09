"""
Report export.

Aggregates the CSVs of a run (or a sweep) directory into summary tables and
static plots: accuracy vs round, ROC, per-SNR accuracy, confusion matrix and
sweep curves. Tables are a pure function of the run outputs, so two runs
with identical inputs export byte-identical CSVs.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from dronerf.src.errors import ReportError  # noqa: E402
from dronerf.src.experimenting.config.config import (  # noqa: E402
    EVALUATION_DIR,
    METRICS_FILENAME,
    REPORT_DIR,
    SWEEP_FILENAME,
)
from dronerf.src.federating.config.config import HISTORY_FILENAME  # noqa: E402
from dronerf.src.utils.run_logger import get_logger  # noqa: E402


logger = get_logger(__name__)

FIGSIZE = (8, 5)
DPI = 120


def _read_csv(path):
    """DataFrame for a non-empty CSV, else None."""
    path = Path(path)
    if not path.is_file() or path.stat().st_size == 0:
        return None
    frame = pd.read_csv(path)
    return frame if len(frame) else None


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def round_curve(metrics):
    """
    Per-round evaluation metrics from a long-format metrics frame.

    Returns:
        pd.DataFrame: round, accuracy[, auroc] sorted by round, or None
    """
    if metrics is None:
        return None
    rows = metrics[(metrics["stage"] == "training") & metrics["group"].astype(str).str.startswith("round=")]
    if rows.empty:
        return None
    rows = rows.assign(round=rows["group"].str.slice(len("round=")).astype(int))
    curve = rows.pivot_table(index="round", columns="metric", values="value", aggfunc="last")
    curve.columns.name = None
    return curve.reset_index().sort_values("round")


def verdict_table(history_path):
    """One row per (round, client) verdict from rounds.jsonl, or None."""
    path = Path(history_path)
    if not path.is_file() or path.stat().st_size == 0:
        return None
    history = pd.read_json(path, lines=True)
    rows = [
        {"round": int(record["round"]), "client": int(v["client"]), "accepted": bool(v["accepted"]),
         "reason": v["reason"] or "", "norm": v["norm"]}
        for record in history.to_dict(orient="records")
        for v in record["verdicts"]
    ]
    if not rows:
        return None
    return pd.DataFrame(rows).sort_values(["round", "client"]).reset_index(drop=True)


def plot_round_curves(curves, path, label_column=None):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    if label_column is None:
        ax.plot(curves["round"], curves["accuracy"], marker="o", label="accuracy")
        if "auroc" in curves:
            ax.plot(curves["round"], curves["auroc"], marker="s", label="AUROC")
    else:
        for value, group in curves.groupby(label_column, sort=True):
            ax.plot(group["round"], group["accuracy"], marker="o", label=f"{label_column}={value}")
    ax.set_xlabel("Round")
    ax.set_ylabel("Known-class accuracy")
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _save(fig, path)


def plot_roc(roc, auroc_value, path):
    fig, ax = plt.subplots(figsize=(6, 6))
    label = "ROC" if auroc_value is None else f"ROC (AUROC = {auroc_value:.3f})"
    ax.plot(roc["fpr"], roc["tpr"], label=label)
    ax.plot([0, 1], [0, 1], linestyle="--", color="gray", label="Chance")
    ax.set_xlabel("False positive rate (known flagged unknown)")
    ax.set_ylabel("True positive rate (unknown flagged unknown)")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right")
    return _save(fig, path)


def plot_per_snr(per_snr, path):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(per_snr["snr_db"], per_snr["accuracy"], marker="o")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("Accuracy")
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def plot_confusion(confusion, path):
    fig, ax = plt.subplots(figsize=(6, 5))
    image = ax.imshow(confusion.values, cmap="Blues")
    ax.set_xticks(range(len(confusion.columns)), labels=list(confusion.columns), rotation=45, ha="right")
    ax.set_yticks(range(len(confusion.index)), labels=list(confusion.index))
    ax.set_xlabel("Predicted")
    ax.set_ylabel("True")
    for i in range(confusion.shape[0]):
        for j in range(confusion.shape[1]):
            ax.text(j, i, int(confusion.values[i, j]), ha="center", va="center", fontsize=8)
    fig.colorbar(image, ax=ax)
    return _save(fig, path)


def plot_sweep(sweep, metric, path):
    frame = sweep.dropna(subset=[metric])
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(frame["sweep_value"].astype(str), frame[metric], marker="o")
    ax.set_xlabel(str(frame["sweep_key"].iloc[0]))
    ax.set_ylabel(metric)
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def _export_run(run_dir, out_dir, paths):
    metrics = _read_csv(run_dir / METRICS_FILENAME)
    evaluation = run_dir / EVALUATION_DIR

    if metrics is not None:
        final = metrics[metrics["stage"] == "evaluation"][["metric", "group", "value"]]
        if not final.empty:
            paths["summary"] = out_dir / "summary.csv"
            final.sort_values(["metric", "group"]).to_csv(paths["summary"], index=False)

    curve = round_curve(metrics)
    if curve is not None and "accuracy" in curve:
        paths["accuracy_vs_round"] = out_dir / "accuracy_vs_round.csv"
        curve.to_csv(paths["accuracy_vs_round"], index=False)
        paths["accuracy_vs_round_plot"] = plot_round_curves(curve, out_dir / "accuracy_vs_round.png")

    verdicts = verdict_table(run_dir / HISTORY_FILENAME)
    if verdicts is not None:
        paths["verdicts"] = out_dir / "verdicts.csv"
        verdicts.to_csv(paths["verdicts"], index=False)

    roc = _read_csv(evaluation / "roc.csv")
    if roc is not None:
        auroc_value = None
        if metrics is not None:
            match = metrics[(metrics["stage"] == "evaluation") & (metrics["metric"] == "auroc")]
            auroc_value = float(match["value"].iloc[-1]) if not match.empty else None
        paths["roc_plot"] = plot_roc(roc, auroc_value, out_dir / "roc.png")

    per_snr = _read_csv(evaluation / "per_snr_accuracy.csv")
    if per_snr is not None:
        paths["per_snr_accuracy"] = out_dir / "per_snr_accuracy.csv"
        per_snr.to_csv(paths["per_snr_accuracy"], index=False)
        paths["per_snr_plot"] = plot_per_snr(per_snr, out_dir / "per_snr_accuracy.png")

    if (evaluation / "confusion.csv").is_file():
        confusion = pd.read_csv(evaluation / "confusion.csv", index_col="true")
        paths["confusion"] = out_dir / "confusion.csv"
        confusion.to_csv(paths["confusion"])
        paths["confusion_plot"] = plot_confusion(confusion, out_dir / "confusion.png")


def _export_sweep(sweep_dir, sweep, out_dir, paths):
    sweep = sweep.sort_values("sweep_value", kind="stable").reset_index(drop=True)
    paths["sweep_summary"] = out_dir / "sweep_summary.csv"
    sweep.to_csv(paths["sweep_summary"], index=False)

    for metric in ("overall_accuracy", "auroc"):
        if metric in sweep and sweep[metric].notna().any():
            paths[f"sweep_{metric}_plot"] = plot_sweep(sweep, metric, out_dir / f"sweep_{metric}.png")

    curves = []
    for row in sweep.to_dict(orient="records"):
        curve = round_curve(_read_csv(sweep_dir / row["run_id"] / METRICS_FILENAME))
        if curve is not None and "accuracy" in curve:
            curves.append(curve.assign(sweep_value=row["sweep_value"]))
    if curves:
        combined = pd.concat(curves, ignore_index=True)
        combined = combined[["sweep_value"] + [c for c in combined.columns if c != "sweep_value"]]
        paths["accuracy_vs_round"] = out_dir / "accuracy_vs_round.csv"
        combined.to_csv(paths["accuracy_vs_round"], index=False)
        paths["accuracy_vs_round_plot"] = plot_round_curves(
            combined, out_dir / "accuracy_vs_round.png", label_column="sweep_value",
        )


def export_report(run_dir, out_dir=None):
    """
    Build the report bundle of a run or sweep directory.

    Args:
        run_dir (str/Path): run directory (or sweep directory with sweep.csv)
        out_dir (str/Path): target, default <run_dir>/report

    Returns:
        dict: artefact name -> path

    Raises:
        ReportError: the directory is missing or holds nothing to report
    """
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ReportError(f"nothing to report: {run_dir} does not exist")

    out_dir = Path(out_dir) if out_dir else run_dir / REPORT_DIR
    paths = {}

    sweep = _read_csv(run_dir / SWEEP_FILENAME)
    has_run = any([
        _read_csv(run_dir / METRICS_FILENAME) is not None,
        (run_dir / EVALUATION_DIR).is_dir(),
        (run_dir / HISTORY_FILENAME).is_file(),
    ])
    if sweep is None and not has_run:
        raise ReportError(f"nothing to report in {run_dir}")

    out_dir.mkdir(parents=True, exist_ok=True)
    if sweep is not None:
        _export_sweep(run_dir, sweep, out_dir, paths)
    if has_run:
        _export_run(run_dir, out_dir, paths)

    if not paths:
        raise ReportError(f"nothing to report in {run_dir}")
    logger.info("Exported %d report artefacts to %s", len(paths), out_dir)
    return paths
