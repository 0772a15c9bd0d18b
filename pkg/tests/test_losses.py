import math

import numpy as np
import pytest

from defectqa.losses import (
    LossWeights,
    bce_grad,
    bce_loss,
    ce_loss,
    combined_mask_loss,
    combined_mask_loss_grad,
    dice_grad,
    dice_loss,
    finite_difference_grad,
    max_relative_grad_error,
    run_loss_check,
)


def test_ce_uniform_logits_is_log_vocab():
    for v in (2, 5, 33):
        loss = ce_loss(np.zeros((4, v)), [0, 1, 0, v - 1])
        assert loss == pytest.approx(math.log(v), abs=1e-9)


def test_ce_vanishes_with_growing_margin():
    ids = np.array([2, 0, 1])
    losses = []
    for scale in (1.0, 10.0, 100.0):
        logits = np.full((3, 4), -scale)
        logits[np.arange(3), ids] = scale
        losses.append(ce_loss(logits, ids))
    assert losses[0] > losses[1] > losses[2]
    assert losses[2] < 1e-9


def test_ce_matches_per_position_softmax():
    rng = np.random.default_rng(2)
    logits = rng.normal(size=(3, 5))
    ids = np.array([4, 0, 2])
    expected = 0.0
    for row, target in zip(logits, ids):
        probs = np.exp(row) / np.exp(row).sum()
        expected += -math.log(probs[target])
    assert ce_loss(logits, ids) == pytest.approx(expected / 3, rel=1e-12)


def test_ce_input_validation():
    with pytest.raises(ValueError, match="2D"):
        ce_loss(np.zeros(5), [0])
    with pytest.raises(ValueError, match="one id per"):
        ce_loss(np.zeros((2, 5)), [0, 1, 2])
    with pytest.raises(ValueError, match="vocabulary"):
        ce_loss(np.zeros((2, 5)), [0, 5])
    with pytest.raises(ValueError, match="finite"):
        ce_loss(np.array([[np.inf, 0.0]]), [0])


def test_bce_half_probability_is_log_two():
    assert bce_loss([0.5, 0.5], [1, 0]) == pytest.approx(math.log(2), abs=1e-12)


def test_bce_single_confident_positive():
    assert bce_loss([0.9], [1]) == pytest.approx(-math.log(0.9), abs=1e-12)


def test_bce_perfect_prediction_is_clamp_limited():
    gt = np.array([1.0, 0.0, 1.0, 1.0])
    assert bce_loss(gt, gt) <= -math.log(1 - 1e-7) + 1e-12


def test_bce_permutation_invariant():
    rng = np.random.default_rng(3)
    p = rng.uniform(0.1, 0.9, size=24)
    g = (rng.random(24) < 0.5).astype(float)
    perm = rng.permutation(24)
    assert bce_loss(p, g) == pytest.approx(bce_loss(p[perm], g[perm]), rel=1e-12)


def test_dice_perfect_binary_prediction():
    gt = np.array([1.0, 0.0, 1.0])
    assert dice_loss(gt, gt, eps=0.0) == 0.0


def test_dice_half_on_uniform_half_probs():
    assert dice_loss([0.5, 0.5], [1, 0], eps=0.0) == pytest.approx(0.5, abs=1e-12)


def test_dice_approaches_one_for_missed_defect():
    gt = np.ones(8)
    assert dice_loss(np.full(8, 1e-9), gt, eps=1e-12) > 0.999


def test_dice_bounded_unit_interval():
    rng = np.random.default_rng(5)
    for _ in range(50):
        p = rng.uniform(0, 1, size=30)
        g = (rng.random(30) < 0.5).astype(float)
        value = dice_loss(p, g, eps=1.0)
        assert 0.0 <= value <= 1.0


def test_combined_equals_dice_when_bce_weight_zero():
    rng = np.random.default_rng(6)
    p = rng.uniform(0.1, 0.9, size=(4, 4))
    g = (rng.random((4, 4)) < 0.5).astype(float)
    w = LossWeights(lambda_bce=0.0, lambda_dice=1.0, smooth_eps=1.0)
    assert combined_mask_loss(p, g, w) == pytest.approx(dice_loss(p, g, eps=1.0), rel=1e-12)


def test_combined_hand_evaluated_case():
    w = LossWeights(lambda_bce=2.0, lambda_dice=0.5, smooth_eps=0.0)
    value = combined_mask_loss([0.5, 0.5], [1.0, 0.0], w)
    assert value == pytest.approx(2 * math.log(2) + 0.5 * 0.5, abs=1e-6)
    assert value == pytest.approx(1.636294, abs=1e-6)


def test_combined_perfect_prediction_near_zero():
    gt = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert combined_mask_loss(gt, gt) <= 1e-6


def test_combined_linear_in_weights():
    rng = np.random.default_rng(7)
    p = rng.uniform(0.1, 0.9, size=16)
    g = (rng.random(16) < 0.5).astype(float)
    b = bce_loss(p, g)
    d = dice_loss(p, g, eps=1.0)
    for lb, ld in [(1.0, 1.0), (2.5, 0.1), (0.0, 3.0)]:
        w = LossWeights(lambda_bce=lb, lambda_dice=ld, smooth_eps=1.0)
        assert combined_mask_loss(p, g, w) == pytest.approx(lb * b + ld * d, rel=1e-12)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(8)
    for _ in range(10):
        p = rng.uniform(0.05, 0.95, size=(8, 8))
        g = (rng.random((8, 8)) < 0.5).astype(float)
        w = LossWeights(
            lambda_bce=float(rng.uniform(0.5, 3.0)),
            lambda_dice=float(rng.uniform(0.1, 1.0)),
            smooth_eps=1.0,
        )
        for analytic, fn in [
            (bce_grad(p, g), lambda q: bce_loss(q, g)),
            (dice_grad(p, g, eps=1.0), lambda q: dice_loss(q, g, eps=1.0)),
            (combined_mask_loss_grad(p, g, w), lambda q: combined_mask_loss(q, g, w)),
        ]:
            numeric = finite_difference_grad(fn, p, h=1e-5)
            assert max_relative_grad_error(analytic, numeric) < 1e-4


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError, match="shape"):
        bce_loss(np.zeros((2, 3)) + 0.5, np.zeros((3, 2)))
    with pytest.raises(ValueError, match="shape"):
        dice_loss(np.zeros(4) + 0.5, np.zeros(5))


def test_invalid_probabilities_rejected():
    with pytest.raises(ValueError):
        bce_loss([1.2], [1])
    with pytest.raises(ValueError):
        dice_loss([-0.1], [0])
    with pytest.raises(ValueError, match="binary"):
        bce_loss([0.5], [0.3])


def test_weight_validation():
    with pytest.raises(ValueError):
        LossWeights(lambda_bce=-1.0)
    with pytest.raises(ValueError):
        LossWeights(lambda_bce=0.0, lambda_dice=0.0)


def test_run_loss_check_passes_on_smooth_cases():
    fixture = {
        "grad_tol": 1e-4,
        "cases": [
            {"name": "a", "pred": [[0.3, 0.7], [0.5, 0.2]], "gt": [[0, 1], [1, 0]]},
            {"name": "b", "pred": [[0.9, 0.1]], "gt": [[1, 0]],
             "lambda_bce": 1.0, "lambda_dice": 2.0, "smooth_eps": 0.5},
        ],
    }
    result = run_loss_check(fixture)
    assert result.ok
    assert [c.name for c in result.cases] == ["a", "b"]
    assert all(c.grad_error < 1e-4 for c in result.cases)


def test_run_loss_check_fails_on_impossible_tolerance():
    fixture = {
        "grad_tol": 0.0,
        "cases": [{"name": "a", "pred": [[0.4, 0.6]], "gt": [[1, 0]]}],
    }
    assert not run_loss_check(fixture).ok
