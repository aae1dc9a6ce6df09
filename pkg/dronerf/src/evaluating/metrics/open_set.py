"""
Open-set metrics: rejection AUROC and openness.

Scores are "unknown-positive": a higher score means the sample is more
likely from an unseen class (the minimum center distance has this
orientation already).
"""

import math

import numpy as np
from sklearn.metrics import roc_curve

from dronerf.src.errors import ValidationError


def _scores(values, name):
    array = np.asarray(values, dtype=np.float64).ravel()
    if array.size == 0:
        raise ValidationError(f"{name} scores are empty")
    if not np.isfinite(array).all():
        raise ValidationError(f"{name} scores contain NaN/Inf")
    return array


def auroc(known_scores, unknown_scores):
    """
    Area under the ROC curve for separating unknown from known samples.

    Computed as the rank statistic P(unknown > known) + 0.5 * P(tie), which is
    exactly the trapezoidal ROC area.

    Example:
        >>> round(auroc([1, 2, 3], [2, 3, 4]), 4)
        0.7778
    """
    known = np.sort(_scores(known_scores, "known"))
    unknown = _scores(unknown_scores, "unknown")
    below = np.searchsorted(known, unknown, side="left")
    not_above = np.searchsorted(known, unknown, side="right")
    ties = not_above - below
    wins = 2 * below.astype(np.int64) + ties
    return float(wins.sum() / (2.0 * known.size * unknown.size))


def roc_points(known_scores, unknown_scores):
    """
    (fpr, tpr, thresholds) with unknown as the positive class.
    """
    known = _scores(known_scores, "known")
    unknown = _scores(unknown_scores, "unknown")
    y_true = np.concatenate([np.zeros(known.size, dtype=int), np.ones(unknown.size, dtype=int)])
    fpr, tpr, thresholds = roc_curve(y_true, np.concatenate([known, unknown]), drop_intermediate=False)
    return fpr, tpr, thresholds


def openness(n_known_train, n_total_test_classes):
    """
    1 - sqrt(2 * N_tr / (N_tr + N_te)).

    Args:
        n_known_train (int): classes seen in training
        n_total_test_classes (int): classes present at test time (known + unknown)

    Example:
        >>> round(openness(5, 7), 4)
        0.0871
    """
    n_tr, n_te = int(n_known_train), int(n_total_test_classes)
    if n_tr < 1 or n_te < n_tr:
        raise ValidationError(f"Need 1 <= N_tr <= N_te, got N_tr={n_tr}, N_te={n_te}")
    return 1.0 - math.sqrt(2.0 * n_tr / (n_tr + n_te))
