"""Tests for class-anchor centers, losses and the open-set decision rule."""

import math

import numpy as np
import pytest
import torch
from scipy.stats import ortho_group

from dronerf.src.errors import ConfigurationError, ValidationError
from dronerf.src.modeling.loss.class_anchor import (
    ClassAnchorLoss,
    anchor_loss,
    ca_loss,
    calibrate_threshold,
    center_distances,
    make_centers,
    predict_and_score,
    rejection_scores,
    softmin,
    tuplet_loss,
)


def test_centers_are_scaled_basis():
    centers = make_centers(3, 0.1, dtype=torch.float64)
    assert torch.equal(centers.matrix, 0.1 * torch.eye(3, dtype=torch.float64))
    seven = make_centers(7, 0.1, dtype=torch.float64)
    assert torch.allclose(seven.matrix.norm(dim=1), torch.full((7,), 0.1, dtype=torch.float64))
    pairwise = torch.cdist(seven.matrix, seven.matrix)
    off_diagonal = pairwise[~torch.eye(7, dtype=torch.bool)]
    assert torch.allclose(off_diagonal, torch.full_like(off_diagonal, 0.1 * math.sqrt(2)))


@pytest.mark.parametrize("n, alpha", [(1, 0.1), (3, 0.0), (3, -1.0)])
def test_centers_reject_bad_arguments(n, alpha):
    with pytest.raises(ConfigurationError):
        make_centers(n, alpha)


def test_distances_special_points():
    centers = make_centers(4, 0.1, dtype=torch.float64)
    d = center_distances(centers.matrix[2], centers)[0]
    expected = torch.full((4,), 0.1 * math.sqrt(2), dtype=torch.float64)
    expected[2] = 0.0
    assert torch.allclose(d, expected)
    assert torch.allclose(center_distances(torch.zeros(4, dtype=torch.float64), centers)[0],
                          torch.full((4,), 0.1, dtype=torch.float64))


def test_distances_match_direct_norm():
    rng = np.random.default_rng(0)
    z = rng.standard_normal((16, 7))
    c = 0.1 * np.eye(7)
    oracle = np.sqrt(((z[:, None, :] - c[None]) ** 2).sum(-1))
    got = center_distances(torch.from_numpy(z), make_centers(7, 0.1, dtype=torch.float64)).numpy()
    np.testing.assert_allclose(got, oracle, rtol=0, atol=1e-12)


def test_distance_width_mismatch():
    with pytest.raises(ValidationError):
        center_distances(torch.zeros(2, 5), make_centers(7))


def test_tuplet_loss_reference_values():
    equal = torch.full((1, 7), 0.3, dtype=torch.float64)
    assert tuplet_loss(equal, 4).item() == pytest.approx(math.log(7), abs=1e-6)
    assert tuplet_loss(equal, 4).item() == pytest.approx(1.945910, abs=1e-6)

    centers = make_centers(2, 0.1, dtype=torch.float64)
    d = center_distances(centers.matrix[0], centers)
    assert tuplet_loss(d, 0).item() == pytest.approx(0.624925, abs=1e-6)

    margin = torch.tensor([[0.0, 200.0, 300.0]], dtype=torch.float64)
    value = tuplet_loss(margin, 0).item()
    assert 0.0 <= value < 1e-80


def test_tuplet_loss_is_stable_for_large_gaps():
    d = torch.tensor([[1000.0, 0.0]], dtype=torch.float64)
    assert tuplet_loss(d, 0).item() == pytest.approx(1000.0)


def test_softmin_properties():
    uniform = softmin(torch.full((5,), 2.0))
    assert torch.allclose(uniform, torch.full((1, 5), 0.2))
    peaked = softmin(torch.tensor([0.0, 100.0], dtype=torch.float64))
    assert peaked[0, 0].item() == pytest.approx(1.0)
    d = torch.tensor([[0.5, 0.1, 0.9]])
    p = softmin(d)
    assert torch.equal(torch.argsort(p, dim=1, descending=True), torch.argsort(d, dim=1))


def test_negative_log_softmin_equals_tuplet_loss():
    gen = torch.Generator().manual_seed(0)
    for draw in range(1000):
        n = (2, 5, 7)[draw % 3]
        d = torch.rand(1, n, generator=gen, dtype=torch.float64) * 5.0
        y = int(torch.randint(n, (1,), generator=gen))
        identity = -torch.log(softmin(d)[0, y])
        assert abs(identity.item() - tuplet_loss(d, y).item()) < 1e-10


def test_anchor_and_ca_loss():
    centers = make_centers(5, 0.1, dtype=torch.float64)
    assert anchor_loss(center_distances(centers.matrix[3], centers), 3).item() == 0.0
    assert anchor_loss(center_distances(torch.zeros(5, dtype=torch.float64), centers), 1).item() \
        == pytest.approx(0.1)

    z = torch.randn(6, 5, dtype=torch.float64, generator=torch.Generator().manual_seed(1))
    y = torch.tensor([0, 1, 2, 3, 4, 0])
    d = center_distances(z, centers)
    assert torch.allclose(anchor_loss(d, y, reduction="none"), d[torch.arange(6), y])
    assert ca_loss(d, y, lam=0.0).item() == tuplet_loss(d, y).item()
    assert ca_loss(d, y, lam=1.0).item() == pytest.approx(
        tuplet_loss(d, y).item() + anchor_loss(d, y).item(), abs=1e-15)
    assert (ca_loss(d, y, reduction="none") >= 0).all()


def test_target_out_of_range():
    with pytest.raises(ValidationError):
        tuplet_loss(torch.zeros(1, 3), 3)


def test_ca_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    eps = 1e-6
    for _ in range(100):
        n = int(rng.choice([2, 5, 7]))
        centers = make_centers(n, 0.1, dtype=torch.float64)
        y = int(rng.integers(n))
        lam = float(rng.uniform(0.0, 2.0))
        z0 = rng.standard_normal(n) * 0.5
        if np.linalg.norm(z0 - 0.1 * np.eye(n)[y]) < 1e-3:
            continue

        z = torch.tensor(z0, requires_grad=True)
        ca_loss(center_distances(z, centers), y, lam).backward()
        analytic = z.grad.numpy()

        numeric = np.empty(n)
        for i in range(n):
            step = np.zeros(n)
            step[i] = eps
            plus = ca_loss(center_distances(torch.tensor(z0 + step), centers), y, lam).item()
            minus = ca_loss(center_distances(torch.tensor(z0 - step), centers), y, lam).item()
            numeric[i] = (plus - minus) / (2 * eps)

        error = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12)
        assert error < 1e-6


def test_gradient_at_center_is_finite():
    centers = make_centers(3, 0.1, dtype=torch.float64)
    z = centers.matrix[1].clone().requires_grad_(True)
    ca_loss(center_distances(z, centers), 1).backward()
    assert torch.isfinite(z.grad).all()


def test_descent_converges_to_true_center():
    centers = make_centers(4, 0.1, dtype=torch.float64)
    z = torch.tensor([0.7, -0.4, 0.2, 0.5], dtype=torch.float64, requires_grad=True)
    optimizer = torch.optim.SGD([z], lr=0.02)
    schedule = torch.optim.lr_scheduler.ExponentialLR(optimizer, gamma=0.998)
    for _ in range(5000):
        optimizer.zero_grad()
        ca_loss(center_distances(z, centers), 2, lam=10.0).backward()
        optimizer.step()
        schedule.step()
    assert torch.linalg.norm(z.detach() - centers.matrix[2]).item() < 1e-3


def test_predict_and_score_rules():
    centers = make_centers(5, 0.1)
    decision = predict_and_score(centers.matrix[3], centers)
    assert decision.predicted.tolist() == [3]
    assert decision.score.item() == 0.0
    assert decision.unknown is None

    far = predict_and_score(torch.full((5,), 10.0), centers, threshold=0.1 * math.sqrt(2))
    assert far.score.item() > 0.1
    assert far.unknown.tolist() == [True]

    tie = predict_and_score(torch.zeros(5), centers)
    assert tie.predicted.tolist() == [0]


def test_argmin_is_rotation_invariant():
    rotation = torch.from_numpy(ortho_group.rvs(7, random_state=3))
    centers = make_centers(7, 0.1, dtype=torch.float64)
    z = torch.randn(50, 7, dtype=torch.float64, generator=torch.Generator().manual_seed(5))
    rotated = type(centers)(matrix=centers.matrix @ rotation.T, alpha=centers.alpha)
    before = torch.argmin(center_distances(z, centers), dim=1)
    after = torch.argmin(center_distances(z @ rotation.T, rotated), dim=1)
    assert torch.equal(before, after)


def test_softmin_score_alternative():
    d = torch.tensor([[0.0, 10.0], [1.0, 1.0]], dtype=torch.float64)
    scores = rejection_scores(d, "softmin")
    assert scores[0].item() == pytest.approx(0.0, abs=1e-4)
    assert scores[1].item() == pytest.approx(0.5)
    with pytest.raises(ConfigurationError):
        rejection_scores(d, "energy")


def test_calibrate_threshold_accepts_target_fraction():
    scores = np.arange(100, dtype=float)
    threshold = calibrate_threshold(scores, 0.95)
    assert np.mean(scores <= threshold) >= 0.95
    assert threshold == 95.0
    with pytest.raises(ValidationError):
        calibrate_threshold([], 0.95)


def test_loss_module_matches_functional():
    module = ClassAnchorLoss(3, alpha=0.1, lam=0.1)
    logits = torch.randn(8, 3, generator=torch.Generator().manual_seed(2))
    targets = torch.randint(3, (8,), generator=torch.Generator().manual_seed(3))
    expected = ca_loss(center_distances(logits, make_centers(3, 0.1)), targets, 0.1)
    assert torch.allclose(module(logits, targets), expected)
