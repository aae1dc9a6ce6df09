"""
Known-class accuracy: overall, per SNR cell, and confusion matrix.
"""

import numpy as np
from sklearn.metrics import confusion_matrix

from dronerf.src.errors import ValidationError


def accuracy_report(predictions, labels, snrs, num_classes):
    """
    Accuracy fields of an evaluation report.

    Args:
        predictions (array): predicted class indices
        labels (array): true class indices (known classes only)
        snrs (array): SNR of every sample in dB
        num_classes (int): K, size of the confusion matrix

    Returns:
        dict: overall_accuracy, per_snr_accuracy (only non-empty cells),
            per_snr_counts, confusion (K x K, rows = true class), n_known
    """
    predictions = np.asarray(predictions, dtype=np.int64).ravel()
    labels = np.asarray(labels, dtype=np.int64).ravel()
    snrs = np.asarray(snrs, dtype=np.float64).ravel()
    if not (len(predictions) == len(labels) == len(snrs)):
        raise ValidationError(
            f"Misaligned inputs: {len(predictions)} predictions, {len(labels)} labels, {len(snrs)} SNRs"
        )

    classes = np.arange(int(num_classes))
    if len(labels) == 0:
        return {
            "overall_accuracy": float("nan"),
            "per_snr_accuracy": {},
            "per_snr_counts": {},
            "confusion": np.zeros((len(classes), len(classes)), dtype=np.int64),
            "n_known": 0,
        }

    correct = predictions == labels
    per_snr = {}
    counts = {}
    for snr in np.unique(snrs):
        mask = snrs == snr
        per_snr[float(snr)] = float(correct[mask].mean())
        counts[float(snr)] = int(mask.sum())

    return {
        "overall_accuracy": float(correct.mean()),
        "per_snr_accuracy": per_snr,
        "per_snr_counts": counts,
        "confusion": confusion_matrix(labels, predictions, labels=classes).astype(np.int64),
        "n_known": int(len(labels)),
    }
