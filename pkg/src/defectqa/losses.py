"""Reference numerics for the training objectives.

Verifiable scalar implementations of autoregressive cross-entropy,
binary cross-entropy, DICE and their weighted combination, with analytic
gradients for checking external training code against central finite
differences. All reductions are means over elements, so values compare
across image sizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS_CLAMP = 1e-7  # probability clamp for log stability


@dataclass(frozen=True)
class LossWeights:
    """Weights of the combined mask objective: bce term + dice term."""

    lambda_bce: float = 2.0
    lambda_dice: float = 0.5
    smooth_eps: float = 1.0

    def __post_init__(self) -> None:
        if self.lambda_bce < 0 or self.lambda_dice < 0:
            raise ValueError("loss weights must be non-negative")
        if self.lambda_bce + self.lambda_dice <= 0:
            raise ValueError("at least one loss weight must be positive")
        if self.smooth_eps < 0:
            raise ValueError("smooth_eps must be non-negative")


def _as_probs(pred) -> np.ndarray:
    p = np.asarray(pred, dtype=np.float64)
    if not np.isfinite(p).all():
        raise ValueError("probabilities must be finite")
    if p.size and (p.min() < 0.0 or p.max() > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    return p


def _as_binary(gt) -> np.ndarray:
    g = np.asarray(gt)
    if g.dtype == np.bool_:
        return g.astype(np.float64)
    g = g.astype(np.float64)
    if not np.isin(g, (0.0, 1.0)).all():
        raise ValueError("ground truth must be binary")
    return g


def _check_shapes(p: np.ndarray, g: np.ndarray) -> None:
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: pred {p.shape} vs gt {g.shape}")


def ce_loss(logits, token_ids) -> float:
    """Mean over positions of -log softmax(logits)[target id]."""
    z = np.asarray(logits, dtype=np.float64)
    ids = np.asarray(token_ids, dtype=np.int64)
    if z.ndim != 2:
        raise ValueError("logits must be 2D (positions, vocabulary)")
    if ids.ndim != 1 or ids.shape[0] != z.shape[0]:
        raise ValueError("token ids must be 1D with one id per logit row")
    if not np.isfinite(z).all():
        raise ValueError("logits must be finite")
    if ids.size and (ids.min() < 0 or ids.max() >= z.shape[1]):
        raise ValueError("token id outside vocabulary bounds")
    zmax = z.max(axis=1, keepdims=True)
    logsumexp = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    target = z[np.arange(z.shape[0]), ids]
    return float(np.mean(logsumexp - target))


def bce_loss(pred, gt, eps_clamp: float = EPS_CLAMP) -> float:
    """Mean binary cross-entropy with probabilities clamped away from {0,1}."""
    p = _as_probs(pred)
    g = _as_binary(gt)
    _check_shapes(p, g)
    p = np.clip(p, eps_clamp, 1.0 - eps_clamp)
    return float(np.mean(-(g * np.log(p) + (1.0 - g) * np.log(1.0 - p))))


def bce_grad(pred, gt, eps_clamp: float = EPS_CLAMP) -> np.ndarray:
    """d bce_loss / d pred; zero where the clamp is active."""
    p = _as_probs(pred)
    g = _as_binary(gt)
    _check_shapes(p, g)
    inside = (p > eps_clamp) & (p < 1.0 - eps_clamp)
    pc = np.clip(p, eps_clamp, 1.0 - eps_clamp)
    grad = (-g / pc + (1.0 - g) / (1.0 - pc)) / p.size
    return np.where(inside, grad, 0.0)


def dice_loss(pred, gt, eps: float = 1.0) -> float:
    """1 - (2 sum(p*g) + eps) / (sum(p) + sum(g) + eps)."""
    p = _as_probs(pred)
    g = _as_binary(gt)
    _check_shapes(p, g)
    num = 2.0 * np.sum(p * g) + eps
    den = np.sum(p) + np.sum(g) + eps
    return float(1.0 - num / den)


def dice_grad(pred, gt, eps: float = 1.0) -> np.ndarray:
    p = _as_probs(pred)
    g = _as_binary(gt)
    _check_shapes(p, g)
    num = 2.0 * np.sum(p * g) + eps
    den = np.sum(p) + np.sum(g) + eps
    return (num - 2.0 * g * den) / (den * den)


def combined_mask_loss(pred, gt, weights: LossWeights = LossWeights()) -> float:
    """Weighted sum of the bce and dice terms."""
    return (
        weights.lambda_bce * bce_loss(pred, gt)
        + weights.lambda_dice * dice_loss(pred, gt, eps=weights.smooth_eps)
    )


def combined_mask_loss_grad(pred, gt, weights: LossWeights = LossWeights()) -> np.ndarray:
    return (
        weights.lambda_bce * bce_grad(pred, gt)
        + weights.lambda_dice * dice_grad(pred, gt, eps=weights.smooth_eps)
    )


def finite_difference_grad(fn, pred, h: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar loss with respect to each element.

    Probabilities must sit at least h inside (0, 1) so the perturbed
    points remain valid inputs.
    """
    p = np.asarray(pred, dtype=np.float64)
    grad = np.zeros_like(p)
    it = np.nditer(p, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        plus = p.copy()
        minus = p.copy()
        plus[idx] += h
        minus[idx] -= h
        grad[idx] = (fn(plus) - fn(minus)) / (2.0 * h)
    return grad


def max_relative_grad_error(analytic, numeric) -> float:
    """Worst elementwise |a - n| / max(|a|, |n|, 1e-8)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
    return float(np.max(np.abs(a - n) / scale))


@dataclass(frozen=True)
class LossCheckCase:
    name: str
    bce: float
    dice: float
    combined: float
    grad_error: float


@dataclass(frozen=True)
class LossCheckResult:
    cases: tuple[LossCheckCase, ...]
    grad_tol: float

    @property
    def ok(self) -> bool:
        return all(c.grad_error < self.grad_tol for c in self.cases)


def run_loss_check(fixture: dict) -> LossCheckResult:
    """Evaluate every fixture case and its analytic-vs-numeric gradient gap.

    Fixture schema:
      {"grad_tol": 1e-4,
       "cases": [{"name": "...", "pred": [[...]], "gt": [[...]],
                  "lambda_bce": 2.0, "lambda_dice": 0.5, "smooth_eps": 1.0}]}
    """
    if "cases" not in fixture or not isinstance(fixture["cases"], list):
        raise ValueError("fixture must contain a list under 'cases'")
    grad_tol = float(fixture.get("grad_tol", 1e-4))
    results = []
    for i, case in enumerate(fixture["cases"]):
        name = case.get("name", f"case{i}")
        pred = np.asarray(case["pred"], dtype=np.float64)
        gt = np.asarray(case["gt"], dtype=np.float64)
        weights = LossWeights(
            lambda_bce=float(case.get("lambda_bce", 2.0)),
            lambda_dice=float(case.get("lambda_dice", 0.5)),
            smooth_eps=float(case.get("smooth_eps", 1.0)),
        )
        analytic = combined_mask_loss_grad(pred, gt, weights)
        numeric = finite_difference_grad(
            lambda p: combined_mask_loss(p, gt, weights), pred
        )
        results.append(
            LossCheckCase(
                name=name,
                bce=bce_loss(pred, gt),
                dice=dice_loss(pred, gt, eps=weights.smooth_eps),
                combined=combined_mask_loss(pred, gt, weights),
                grad_error=max_relative_grad_error(analytic, numeric),
            )
        )
    return LossCheckResult(tuple(results), grad_tol)
