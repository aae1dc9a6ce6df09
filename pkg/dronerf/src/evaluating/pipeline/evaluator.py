"""
Model evaluation and report serialization.

evaluate_model runs a trained LSNet over a known-class test set and an
unknown-class test set and fills an EvaluationReport. write_report turns the
report into CSV tables plus a YAML summary.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import torch
import yaml

from dronerf.src.errors import ValidationError
from dronerf.src.evaluating.metrics.accuracy import accuracy_report
from dronerf.src.evaluating.metrics.open_set import auroc, openness, roc_points
from dronerf.src.modeling.loss.class_anchor import predict_and_score
from dronerf.src.preprocessing.spectrogram_transformer import stack_inputs
from dronerf.src.utils.run_logger import get_logger


logger = get_logger(__name__)

EVAL_BATCH_SIZE = 256
METRIC_COLUMNS = ["metric", "group", "value"]


@dataclass
class EvaluationReport:
    classes: list
    overall_accuracy: float
    per_snr_accuracy: dict
    per_snr_counts: dict
    confusion: np.ndarray
    n_known: int
    auroc: float = None
    openness: float = None
    n_unknown: int = 0
    unknown_classes: list = field(default_factory=list)
    threshold: float = None
    unknown_rejection_rate: float = None
    known_scores: np.ndarray = None
    unknown_scores: np.ndarray = None

    def validate(self):
        rows = self.confusion.sum(axis=1)
        if int(rows.sum()) != self.n_known:
            raise ValidationError(f"Confusion rows sum to {int(rows.sum())}, expected {self.n_known}")
        if self.auroc is not None and not (0.0 <= self.auroc <= 1.0):
            raise ValidationError(f"AUROC {self.auroc} outside [0, 1]")
        return self

    def summary(self):
        """Scalar metrics as a plain dict."""
        data = {"overall_accuracy": self.overall_accuracy, "n_known": self.n_known}
        if self.auroc is not None:
            data.update(auroc=self.auroc, openness=self.openness, n_unknown=self.n_unknown)
        if self.unknown_rejection_rate is not None:
            data.update(threshold=self.threshold, unknown_rejection_rate=self.unknown_rejection_rate)
        return data

    def to_rows(self):
        """
        Long-format (metric, group, value) rows.

        Example:
            [{'metric': 'accuracy', 'group': 'overall', 'value': 0.93}, ...]
        """
        rows = [{"metric": "accuracy", "group": "overall", "value": self.overall_accuracy}]
        for snr, value in sorted(self.per_snr_accuracy.items()):
            rows.append({"metric": "accuracy", "group": f"snr={snr:g}", "value": value})
        for i, label in enumerate(self.classes):
            total = int(self.confusion[i].sum())
            if total:
                rows.append({"metric": "class_accuracy", "group": label,
                             "value": float(self.confusion[i, i] / total)})
        if self.auroc is not None:
            rows.append({"metric": "auroc", "group": "overall", "value": self.auroc})
            rows.append({"metric": "openness", "group": "overall", "value": self.openness})
        if self.unknown_rejection_rate is not None:
            rows.append({"metric": "unknown_rejection_rate", "group": "overall",
                         "value": self.unknown_rejection_rate})
        rows.append({"metric": "count", "group": "known", "value": float(self.n_known)})
        rows.append({"metric": "count", "group": "unknown", "value": float(self.n_unknown)})
        return rows


def model_logits(model, inputs, batch_size=EVAL_BATCH_SIZE):
    """Eval-mode logits for a stacked input array."""
    model.eval()
    outputs = []
    with torch.no_grad():
        for start in range(0, len(inputs), batch_size):
            batch = torch.from_numpy(np.ascontiguousarray(inputs[start:start + batch_size], dtype=np.float32))
            outputs.append(model(batch))
    if not outputs:
        return torch.zeros((0, model.config.num_classes))
    return torch.cat(outputs)


def evaluate_model(model, known_set, unknown_set, centers, classes,
                   score_kind="distance", threshold=None):
    """
    Evaluate a trained model.

    Args:
        model (LSNet): trained model (put into eval mode)
        known_set (LabeledDataset): test spectrograms of the known classes
        unknown_set (LabeledDataset): test spectrograms of unseen classes, or None
        centers (ClassCenters): class anchors used in training
        classes (list): known class order
        score_kind (str): 'distance' or 'softmin'
        threshold (float): optional rejection threshold

    Returns:
        EvaluationReport
    """
    known = predict_and_score(model_logits(model, stack_inputs(known_set)), centers,
                              threshold, score_kind)
    labels = known_set.label_indices(classes)
    fields = accuracy_report(known.predicted.numpy(), labels, known_set.snrs, len(classes))

    report = EvaluationReport(classes=list(classes), known_scores=known.score.numpy(), **fields)

    if unknown_set is not None and len(unknown_set) > 0:
        unknown = predict_and_score(model_logits(model, stack_inputs(unknown_set)), centers,
                                    threshold, score_kind)
        report.unknown_scores = unknown.score.numpy()
        report.unknown_classes = unknown_set.classes
        report.n_unknown = len(unknown_set)
        report.auroc = auroc(report.known_scores, report.unknown_scores)
        report.openness = openness(len(classes), len(classes) + len(report.unknown_classes))
        if threshold is not None:
            report.threshold = float(threshold)
            report.unknown_rejection_rate = float(unknown.unknown.float().mean())

    logger.info("Evaluation: accuracy=%.4f auroc=%s", report.overall_accuracy, report.auroc)
    return report.validate()


def write_report(report, directory):
    """
    Write metrics.csv, per_snr_accuracy.csv, confusion.csv, roc.csv and report.yaml.

    Returns:
        dict: artefact name -> path
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {}

    paths["metrics"] = directory / "metrics.csv"
    pd.DataFrame(report.to_rows(), columns=METRIC_COLUMNS).to_csv(paths["metrics"], index=False)

    paths["per_snr_accuracy"] = directory / "per_snr_accuracy.csv"
    pd.DataFrame({
        "snr_db": sorted(report.per_snr_accuracy),
        "accuracy": [report.per_snr_accuracy[s] for s in sorted(report.per_snr_accuracy)],
        "count": [report.per_snr_counts[s] for s in sorted(report.per_snr_accuracy)],
    }).to_csv(paths["per_snr_accuracy"], index=False)

    paths["confusion"] = directory / "confusion.csv"
    pd.DataFrame(report.confusion, index=report.classes, columns=report.classes) \
        .rename_axis("true") \
        .to_csv(paths["confusion"])

    if report.unknown_scores is not None:
        fpr, tpr, thresholds = roc_points(report.known_scores, report.unknown_scores)
        paths["roc"] = directory / "roc.csv"
        pd.DataFrame({"fpr": fpr, "tpr": tpr, "threshold": thresholds}).to_csv(paths["roc"], index=False)

    paths["report"] = directory / "report.yaml"
    with open(paths["report"], "w", encoding="utf-8") as f:
        yaml.safe_dump({
            "classes": list(report.classes),
            "unknown_classes": list(report.unknown_classes),
            "metrics": {k: float(v) for k, v in report.summary().items()},
            "per_snr_accuracy": {float(k): float(v) for k, v in sorted(report.per_snr_accuracy.items())},
            "confusion": report.confusion.tolist(),
        }, f, sort_keys=False)
    return paths
