"""Streaming pixel-level anomaly-segmentation metrics.

Computes AUROC, F1-max and AP over pixels pooled from arbitrarily many
images. An accumulator ingests (score, label) observations and can be
merged with compatible accumulators, so pixels may be partitioned across
workers in any way without changing the result.

Two modes:
  exact  - retains every observation; metrics are exact (desk scale).
  binned - fixed-width histogram over a known score range; constant
           memory, cheap merges, documented error bound from bin width.

Conventions: a score at or above a threshold predicts anomalous; AUROC
counts ties as half; AP is the step-interpolated area under the
precision-recall curve.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import BinaryMask, decode_mask_file
from .scoremap import ScoreMap, read_score_map

DEFAULT_BINS = 4096


class MetricsError(Exception):
    """Base class for metric computation failures."""


class AccumulatorMismatchError(MetricsError):
    """Accumulators with different configurations cannot be merged."""


class DegenerateMetricsError(MetricsError):
    """Metrics need at least one positive and one negative pixel."""


@dataclass(frozen=True)
class SegMetrics:
    auroc: float
    f1_max: float
    ap: float
    pixels_pos: int
    pixels_neg: int

    def to_json(self) -> str:
        """Fixed 6-decimal rendering, parseable as JSON."""
        return (
            '{"auroc":%.6f,"f1_max":%.6f,"ap":%.6f,'
            '"pixels_pos":%d,"pixels_neg":%d}'
            % (self.auroc, self.f1_max, self.ap, self.pixels_pos, self.pixels_neg)
        )


class MetricAccumulator:
    """Mergeable sink of (score, label) pixel observations."""

    def __init__(
        self,
        mode: str = "binned",
        bins: int = DEFAULT_BINS,
        lo: float | None = None,
        hi: float | None = None,
    ):
        if mode not in ("exact", "binned"):
            raise ValueError(f"mode must be 'exact' or 'binned', got {mode!r}")
        self.mode = mode
        if mode == "binned":
            if lo is None or hi is None:
                raise ValueError("binned mode requires an explicit score range [lo, hi]")
            lo, hi = float(lo), float(hi)
            if not np.isfinite([lo, hi]).all() or hi <= lo:
                raise ValueError(f"invalid score range [{lo}, {hi}]")
            if bins < 1:
                raise ValueError("bin count must be >= 1")
            self.bins = int(bins)
            self.lo = lo
            self.hi = hi
            self.pos_counts = np.zeros(self.bins, dtype=np.int64)
            self.neg_counts = np.zeros(self.bins, dtype=np.int64)
        else:
            self.bins = 0
            self.lo = None
            self.hi = None
            self._scores: list[np.ndarray] = []
            self._labels: list[np.ndarray] = []
        self.n_pos = 0
        self.n_neg = 0

    # -- ingestion -----------------------------------------------------

    def add(self, score_map: ScoreMap, gt: BinaryMask) -> None:
        """Add one image: every pixel contributes one observation."""
        if (score_map.width, score_map.height) != (gt.width, gt.height):
            raise ValueError(
                f"dimension mismatch: scores {score_map.width}x{score_map.height}, "
                f"mask {gt.width}x{gt.height}"
            )
        self.add_pixels(score_map.scores.ravel(), gt.pixels.ravel())

    def add_pixels(self, scores, labels) -> None:
        """Add flat arrays of scores and boolean/0-1 labels."""
        scores = np.asarray(scores, dtype=np.float64).ravel()
        labels = np.asarray(labels).ravel().astype(bool)
        if scores.shape != labels.shape:
            raise ValueError("scores and labels must have the same length")
        if scores.size == 0:
            return
        if not np.isfinite(scores).all():
            raise ValueError("scores must be finite (no NaN/Inf)")
        if self.mode == "binned":
            if scores.min() < self.lo or scores.max() > self.hi:
                raise ValueError(
                    f"score outside binned range [{self.lo}, {self.hi}]"
                )
            idx = np.floor((scores - self.lo) * (self.bins / (self.hi - self.lo)))
            idx = idx.astype(np.int64)
            np.clip(idx, 0, self.bins - 1, out=idx)  # score exactly at hi
            self.pos_counts += np.bincount(idx[labels], minlength=self.bins)
            self.neg_counts += np.bincount(idx[~labels], minlength=self.bins)
        else:
            self._scores.append(scores)
            self._labels.append(labels)
        pos = int(labels.sum())
        self.n_pos += pos
        self.n_neg += labels.size - pos

    # -- composition ---------------------------------------------------

    def _compatible(self, other: "MetricAccumulator") -> bool:
        if self.mode != other.mode:
            return False
        if self.mode == "binned":
            return (self.bins, self.lo, self.hi) == (other.bins, other.lo, other.hi)
        return True

    def merge(self, other: "MetricAccumulator") -> "MetricAccumulator":
        """New accumulator holding both observation sets."""
        if not self._compatible(other):
            raise AccumulatorMismatchError(
                "cannot merge accumulators with different mode or binning"
            )
        if self.mode == "binned":
            out = MetricAccumulator("binned", self.bins, self.lo, self.hi)
            out.pos_counts = self.pos_counts + other.pos_counts
            out.neg_counts = self.neg_counts + other.neg_counts
        else:
            out = MetricAccumulator("exact")
            out._scores = self._scores + other._scores
            out._labels = self._labels + other._labels
        out.n_pos = self.n_pos + other.n_pos
        out.n_neg = self.n_neg + other.n_neg
        return out

    # -- finalization --------------------------------------------------

    def finalize(self) -> SegMetrics:
        if self.n_pos < 1 or self.n_neg < 1:
            raise DegenerateMetricsError(
                f"need at least one positive and one negative pixel "
                f"(have pos={self.n_pos}, neg={self.n_neg})"
            )
        if self.mode == "exact":
            scores = np.concatenate(self._scores)
            labels = np.concatenate(self._labels)
            auroc = _auroc_by_rank(scores, labels)
            tp, fp = _exact_threshold_groups(scores, labels)
        else:
            # Sweep thresholds at bin edges, highest bin first.
            tp = np.cumsum(self.pos_counts[::-1])
            fp = np.cumsum(self.neg_counts[::-1])
            auroc = _auroc_trapezoid(tp, fp, self.n_pos, self.n_neg)
        f1_max, ap = _f1max_and_ap(tp, fp, self.n_pos)
        return SegMetrics(float(auroc), float(f1_max), float(ap),
                          self.n_pos, self.n_neg)


def _auroc_by_rank(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mann-Whitney statistic with midranks: P(pos > neg) + 0.5 P(tie)."""
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    starts = np.r_[0, np.nonzero(s[1:] != s[:-1])[0] + 1]
    ends = np.r_[starts[1:], s.size]
    # average of the 1-based ranks start+1 .. end, repeated per tie group
    mid = (starts + ends + 1) / 2.0
    ranks = np.empty(s.size, dtype=np.float64)
    ranks[order] = np.repeat(mid, ends - starts)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def _exact_threshold_groups(scores: np.ndarray, labels: np.ndarray):
    """Cumulative TP/FP at every distinct score, descending."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    last = np.r_[np.nonzero(s[1:] != s[:-1])[0], s.size - 1]
    tp = np.cumsum(y.astype(np.int64))[last]
    fp = (last + 1) - tp
    return tp, fp


def _auroc_trapezoid(tp: np.ndarray, fp: np.ndarray, n_pos: int, n_neg: int) -> float:
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def _f1max_and_ap(tp: np.ndarray, fp: np.ndarray, n_pos: int):
    tp = tp.astype(np.float64)
    fp = fp.astype(np.float64)
    # F1 of the anomalous class with rule "score >= threshold":
    # 2TP / (2TP + FP + FN) == 2TP / (TP + FP + n_pos)
    f1 = 2.0 * tp / (tp + fp + n_pos)
    recall = tp / n_pos
    predicted = tp + fp
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    ap = np.sum(np.diff(np.r_[0.0, recall]) * precision)
    return float(f1.max()), float(ap)


# -- directory evaluation ----------------------------------------------


@dataclass(frozen=True)
class ScorePair:
    stem: str
    score_path: Path
    mask_path: Path


def pair_score_maps(pred_dir, gt_dir) -> list[ScorePair]:
    """Pair score-map files with ground-truth mask PNGs by filename stem."""
    pred_dir = Path(pred_dir)
    gt_dir = Path(gt_dir)
    pairs = []
    files = sorted(p for p in pred_dir.iterdir() if p.is_file())
    if not files:
        raise MetricsError(f"no score maps found in {pred_dir}")
    for path in files:
        mask_path = gt_dir / f"{path.stem}.png"
        if not mask_path.is_file():
            raise MetricsError(f"no ground-truth mask for {path.name} in {gt_dir}")
        pairs.append(ScorePair(path.stem, path, mask_path))
    return pairs


def _load_pair(pair: ScorePair) -> tuple[ScoreMap, BinaryMask]:
    score_map = read_score_map(pair.score_path)
    mask = decode_mask_file(pair.mask_path)
    if (score_map.width, score_map.height) != (mask.width, mask.height):
        raise MetricsError(
            f"{pair.stem}: score map {score_map.width}x{score_map.height} does not "
            f"match mask {mask.width}x{mask.height}"
        )
    return score_map, mask


def score_range(pairs) -> tuple[float, float]:
    """Global [min, max] over all score maps (first pass of binned mode)."""
    lo = np.inf
    hi = -np.inf
    for pair in pairs:
        scores = read_score_map(pair.score_path).scores
        if not np.isfinite(scores).all():
            raise MetricsError(f"{pair.stem}: non-finite score values")
        lo = min(lo, float(scores.min()))
        hi = max(hi, float(scores.max()))
    if hi <= lo:
        hi = lo + 1.0  # constant scores: any single-bin split works
    return lo, hi


def evaluate_pairs(
    pairs,
    mode: str = "binned",
    bins: int = DEFAULT_BINS,
) -> SegMetrics:
    """Pool every pixel of every pair into one accumulator and finalize."""
    if mode == "binned":
        lo, hi = score_range(pairs)
        acc = MetricAccumulator("binned", bins=bins, lo=lo, hi=hi)
    else:
        acc = MetricAccumulator("exact")
    for pair in pairs:
        score_map, mask = _load_pair(pair)
        acc.add(score_map, mask)
    return acc.finalize()


def evaluate_pairs_per_image(pairs) -> SegMetrics:
    """Alternative convention: average exact per-image metrics.

    Images whose mask is entirely normal or entirely anomalous carry no
    per-image ranking signal and are skipped.
    """
    per_image = []
    pos_total = 0
    neg_total = 0
    for pair in pairs:
        score_map, mask = _load_pair(pair)
        acc = MetricAccumulator("exact")
        acc.add(score_map, mask)
        if acc.n_pos < 1 or acc.n_neg < 1:
            continue
        per_image.append(acc.finalize())
        pos_total += acc.n_pos
        neg_total += acc.n_neg
    if not per_image:
        raise DegenerateMetricsError(
            "no image has both anomalous and normal pixels"
        )
    return SegMetrics(
        auroc=float(np.mean([m.auroc for m in per_image])),
        f1_max=float(np.mean([m.f1_max for m in per_image])),
        ap=float(np.mean([m.ap for m in per_image])),
        pixels_pos=pos_total,
        pixels_neg=neg_total,
    )
