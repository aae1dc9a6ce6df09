"""
Class-anchor loss and the open-set decision rule.

Class centers are fixed, scaled one-hot vectors c_i = alpha * e_i in logit
space. A logit vector z is mapped to its distances d_i = ||z - c_i|| and:

    tuplet  L_T  = log(1 + sum_{j != y} exp(d_y - d_j))   (= -log softmin(d)_y)
    anchor  L_A  = d_y
    CA      L_CA = L_T + lambda * L_A

At test time the predicted class is argmin d (lowest index on ties) and the
rejection score is min d (higher means more likely unknown).

All functions take torch tensors with the class dimension last; a 1-D z is
treated as a batch of one.
"""

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from dronerf.src.errors import ConfigurationError, NonFiniteError, ValidationError


DEFAULT_ALPHA = 0.1
DEFAULT_LAMBDA = 0.1
SCORE_KINDS = ("distance", "softmin")


@dataclass(frozen=True)
class ClassCenters:
    matrix: torch.Tensor     # (N, N); row i is alpha * e_i
    alpha: float

    @property
    def num_classes(self):
        return self.matrix.shape[0]


@dataclass
class OpenSetDecision:
    predicted: torch.Tensor   # (B,) int64
    score: torch.Tensor       # (B,) rejection score, >= 0
    unknown: torch.Tensor = None  # (B,) bool when a threshold was given


def make_centers(num_classes, alpha=DEFAULT_ALPHA, dtype=torch.float32):
    """
    Scaled standard basis centers.

    Raises:
        ConfigurationError: num_classes < 2 or alpha <= 0
    """
    if int(num_classes) < 2:
        raise ConfigurationError(f"Need at least 2 classes, got {num_classes}")
    if not alpha > 0:
        raise ConfigurationError(f"alpha must be > 0, got {alpha}")
    return ClassCenters(matrix=float(alpha) * torch.eye(int(num_classes), dtype=dtype), alpha=float(alpha))


def _as_batch(z):
    return z.unsqueeze(0) if z.dim() == 1 else z


def _as_targets(y, batch):
    y = torch.as_tensor(y, dtype=torch.int64)
    if y.dim() == 0:
        y = y.expand(batch)
    return y


def center_distances(z, centers):
    """
    Euclidean distances from each logit vector to every center.

    The square root is guarded so the gradient at d_i = 0 is 0 instead of NaN.

    Returns:
        torch.Tensor: (B, N)
    """
    z = _as_batch(z)
    matrix = centers.matrix.to(dtype=z.dtype, device=z.device)
    if z.shape[-1] != matrix.shape[0]:
        raise ValidationError(f"Logit width {z.shape[-1]} != number of centers {matrix.shape[0]}")
    squared = ((z.unsqueeze(1) - matrix.unsqueeze(0)) ** 2).sum(dim=-1)
    positive = squared > 0
    safe = torch.where(positive, squared, torch.ones_like(squared))
    return torch.where(positive, torch.sqrt(safe), torch.zeros_like(squared))


def _reduce(values, reduction):
    if reduction == "mean":
        return values.mean()
    if reduction == "sum":
        return values.sum()
    if reduction == "none":
        return values
    raise ValueError(f"Unknown reduction {reduction!r}")


def _pick(d, y):
    d = _as_batch(d)
    y = _as_targets(y, d.shape[0]).to(d.device)
    if y.min() < 0 or y.max() >= d.shape[-1]:
        raise ValidationError(f"Target outside 0..{d.shape[-1] - 1}")
    return d, y, d.gather(1, y.unsqueeze(1)).squeeze(1)


def tuplet_loss(d, y, reduction="mean"):
    """log(1 + sum_{j != y} exp(d_y - d_j)) as a shifted log-sum-exp."""
    d, y, d_y = _pick(d, y)
    if not torch.isfinite(d).all():
        raise NonFiniteError("non-finite distances in tuplet loss", where="tuplet_loss")
    return _reduce(torch.logsumexp(d_y.unsqueeze(1) - d, dim=1), reduction)


def anchor_loss(d, y, reduction="mean"):
    """Distance to the true class center."""
    _, _, d_y = _pick(d, y)
    return _reduce(d_y, reduction)


def ca_loss(d, y, lam=DEFAULT_LAMBDA, reduction="mean"):
    """Tuplet term plus lam times the anchor term."""
    return _reduce(
        tuplet_loss(d, y, reduction="none") + lam * anchor_loss(d, y, reduction="none"),
        reduction,
    )


def softmin(d):
    """exp(-d_i) / sum_j exp(-d_j) along the class dimension."""
    return torch.softmax(-_as_batch(d), dim=-1)


def rejection_scores(d, kind="distance"):
    """
    Unknown-ness score per sample (higher = more likely unknown).

    distance: min_i d_i
    softmin : 1 - max_i softmin(d)_i
    """
    d = _as_batch(d)
    if kind == "distance":
        return d.min(dim=-1).values
    if kind == "softmin":
        return 1.0 - softmin(d).max(dim=-1).values
    raise ConfigurationError(f"Unknown score kind {kind!r}; expected one of {SCORE_KINDS}")


def predict_and_score(z, centers, threshold=None, kind="distance"):
    """
    Open-set decision for a batch of logits.

    Args:
        z (torch.Tensor): (B, N) or (N,) logits
        centers (ClassCenters)
        threshold (float): reject (unknown) when score > threshold
        kind (str): 'distance' or 'softmin'

    Returns:
        OpenSetDecision: predicted = argmin d with ties to the lowest index
    """
    with torch.no_grad():
        d = center_distances(z, centers)
        # torch.argmin returns the first minimal index
        predicted = torch.argmin(d, dim=-1)
        score = rejection_scores(d, kind)
        unknown = score > threshold if threshold is not None else None
    return OpenSetDecision(predicted=predicted, score=score, unknown=unknown)


def calibrate_threshold(known_scores, true_accept_rate=0.95):
    """
    Smallest observed score that accepts at least true_accept_rate of the
    known-class validation scores (accept iff score <= threshold).
    """
    scores = np.asarray(known_scores, dtype=np.float64)
    if scores.size == 0:
        raise ValidationError("Cannot calibrate a threshold without validation scores")
    if not (0.0 < true_accept_rate <= 1.0):
        raise ConfigurationError(f"true_accept_rate must be in (0, 1], got {true_accept_rate}")
    return float(np.quantile(scores, true_accept_rate, method="higher"))


class ClassAnchorLoss(nn.Module):
    """Mean CA loss over a batch of logits, with the centers held as a buffer."""

    def __init__(self, num_classes, alpha=DEFAULT_ALPHA, lam=DEFAULT_LAMBDA):
        super().__init__()
        self.centers = make_centers(num_classes, alpha)
        self.lam = float(lam)
        self.register_buffer("anchor_matrix", self.centers.matrix.clone(), persistent=False)

    def distances(self, logits):
        return center_distances(logits, ClassCenters(self.anchor_matrix, self.centers.alpha))

    def forward(self, logits, targets):
        return ca_loss(self.distances(logits), targets, self.lam)
