"""Scores model answer files against generated QA ground truth.

Choice tasks are scored by parsed option letter; DFM answers are parsed
as bounding-box literals and gated by IoU against the ground-truth box.
Missing predictions count as incorrect, so selective answering cannot
inflate accuracy.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .geometry import BoundingBox
from .qagen import QaRecord

# Rendering order of the task columns in every report format.
REPORT_ORDER = ("AD", "DC", "RDL", "DFM")

# A bare letter, or a letter followed by "." or ")" and anything after.
_CHOICE_RE = re.compile(r"^\s*([A-Za-z])(?:\s*$|[.)].*$)", re.DOTALL)
_BBOX_RE = re.compile(
    r"^\s*\[\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*\]\s*$"
)


class ScoringError(Exception):
    """Prediction file violates the scoring preconditions."""


@dataclass(frozen=True)
class PredictionRecord:
    qid: str
    raw_answer: str


def read_predictions(path) -> list[PredictionRecord]:
    """JSON Lines of {"qid": ..., "answer": ...}."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                out.append(PredictionRecord(doc["qid"], str(doc["answer"])))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ScoringError(f"{path}:{n}: bad prediction line: {exc}") from None
    return out


def parse_choice(raw: str, n_options: int) -> str | None:
    """Extract the chosen option letter, or None on parse failure.

    Accepts a bare letter, "B.", "B)" or "B. <text>", case-insensitive,
    with leading whitespace ignored. The letter must index an existing
    option.
    """
    match = _CHOICE_RE.match(raw)
    if not match:
        return None
    letter = match.group(1).upper()
    if ord(letter) - ord("A") >= n_options:
        return None
    return letter


def parse_bbox_literal(raw: str) -> BoundingBox | None:
    match = _BBOX_RE.match(raw)
    if not match:
        return None
    x1, y1, x2, y2 = (int(g) for g in match.groups())
    if x1 > x2 or y1 > y2:
        return None
    return BoundingBox(x1, y1, x2, y2)


def score_dfm(raw: str, gt_bbox: BoundingBox, iou_threshold: float = 0.5) -> bool:
    """Correct iff the predicted box reaches the IoU threshold; malformed
    answers are incorrect."""
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError("iou threshold must be in (0, 1]")
    box = parse_bbox_literal(raw)
    if box is None:
        return False
    return box.iou(gt_bbox) >= iou_threshold


def _round1(value: float) -> float:
    """Half-up rounding to one decimal, matching printed table precision."""
    return float(Decimal(repr(value)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class TaskReport:
    totals: dict  # task -> question count
    corrects: dict  # task -> correct count

    @property
    def tasks(self) -> tuple[str, ...]:
        return tuple(t for t in REPORT_ORDER if self.totals.get(t, 0) > 0)

    def accuracy(self, task: str) -> float:
        return _round1(100.0 * self.corrects[task] / self.totals[task])

    @property
    def average(self) -> float:
        raw = [100.0 * self.corrects[t] / self.totals[t] for t in self.tasks]
        return _round1(sum(raw) / len(raw))


def _gt_bbox(record: QaRecord) -> BoundingBox:
    bbox = record.meta.get("bbox")
    if bbox is not None:
        return BoundingBox(*(int(v) for v in bbox))
    box = parse_bbox_literal(record.answer)
    if box is None:
        raise ScoringError(f"{record.qid}: ground-truth record has no usable bbox")
    return box


def score_run(
    preds: list[PredictionRecord],
    gt: list[QaRecord],
    iou_threshold: float = 0.5,
) -> TaskReport:
    """Score a prediction set against ground-truth records.

    Every ground-truth question counts; a missing prediction is scored
    incorrect. Duplicate or unknown qids in the predictions are errors.
    """
    known = {r.qid for r in gt}
    by_qid: dict[str, str] = {}
    for pred in preds:
        if pred.qid in by_qid:
            raise ScoringError(f"duplicate prediction for qid {pred.qid}")
        if pred.qid not in known:
            raise ScoringError(f"prediction for unknown qid {pred.qid}")
        by_qid[pred.qid] = pred.raw_answer

    totals: dict[str, int] = {}
    corrects: dict[str, int] = {}
    for record in gt:
        totals[record.task] = totals.get(record.task, 0) + 1
        raw = by_qid.get(record.qid)
        if raw is None:
            continue
        if record.task == "DFM":
            correct = score_dfm(raw, _gt_bbox(record), iou_threshold)
        else:
            correct = parse_choice(raw, len(record.options or ())) == record.answer
        if correct:
            corrects[record.task] = corrects.get(record.task, 0) + 1
    for task in totals:
        corrects.setdefault(task, 0)
    if not totals:
        raise ScoringError("ground-truth file contains no records")
    return TaskReport(totals, corrects)


def render_table(report: TaskReport, fmt: str = "text") -> str:
    """Render per-task accuracies; tasks absent from the run show as "-"."""
    cells = {
        task: (f"{report.accuracy(task):.1f}" if task in report.tasks else "-")
        for task in REPORT_ORDER
    }
    average = f"{report.average:.1f}"
    if fmt == "json":
        doc = {
            "accuracy": {t: report.accuracy(t) for t in report.tasks},
            "counts": {t: report.totals[t] for t in report.tasks},
            "average": report.average,
        }
        return json.dumps(doc, separators=(",", ":"))
    headers = list(REPORT_ORDER) + ["Average"]
    values = [cells[t] for t in REPORT_ORDER] + [average]
    if fmt == "markdown":
        head = "| " + " | ".join(headers) + " |"
        rule = "|" + "|".join(" --- " for _ in headers) + "|"
        row = "| " + " | ".join(values) + " |"
        return "\n".join([head, rule, row])
    if fmt == "text":
        widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
        head = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
        row = "  ".join(v.ljust(w) for v, w in zip(values, widths))
        return "\n".join([head.rstrip(), row.rstrip()])
    raise ValueError(f"unknown report format {fmt!r}")
