"""Deterministic generation of the four defect QA tasks.

Task types:
  AD  - anomaly discrimination, yes/no (2 options)
  RDL - rough defect localization on a 3x3 grid (4 options)
  DFM - defect fine mapping, open bounding-box answer
  DC  - defect classification (4 options)

Every record's randomness (option order, distractor choice) comes from a
generator keyed by (build seed, qid), so output is independent of sample
order and of how work is parallelized. Question wording is configuration:
fixed English templates with a single {object_class} placeholder.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field

from .geometry import (
    REGION_NAMES,
    BinaryMask,
    EmptyMaskError,
    MaskDecodeError,
    decode_mask,
    grid_region,
    tight_bbox,
)
from .manifest import DatasetManifest, DefectInstance, SampleRecord

TASKS = ("AD", "RDL", "DFM", "DC")
OPTION_LETTERS = "ABCD"

QUESTION_TEMPLATES = {
    "AD": "Is there any defect in the {object_class}?",
    "RDL": "Which region of the {object_class} contains the defect?",
    "DFM": (
        "Locate the defect in the {object_class} and answer with its bounding box "
        "as [x_min,y_min,x_max,y_max] in pixel coordinates."
    ),
    "DC": "What type of defect is present in the {object_class}?",
}


class OptionPoolError(Exception):
    """Not enough distinct distractors exist, even with the fallback pool."""


@dataclass(frozen=True)
class BuildConfig:
    seed: int = 42
    tasks: tuple[str, ...] = TASKS
    fallback_defect_classes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not self.tasks:
            raise ValueError("at least one task must be enabled")
        unknown = [t for t in self.tasks if t not in TASKS]
        if unknown:
            raise ValueError(f"unknown tasks: {unknown}")


@dataclass(frozen=True)
class QaRecord:
    qid: str
    image: str
    task: str
    question: str
    options: tuple[str, ...] | None  # None for DFM
    answer: str  # option letter, or "[x1,y1,x2,y2]" for DFM
    meta: dict = field(default_factory=dict)

    def to_json_line(self) -> str:
        doc = {"qid": self.qid, "image": self.image, "task": self.task,
               "question": self.question}
        if self.options is not None:
            doc["options"] = list(self.options)
        doc["answer"] = self.answer
        doc["meta"] = self.meta
        return json.dumps(doc, separators=(",", ":"))

    @classmethod
    def from_json_line(cls, line: str) -> "QaRecord":
        doc = json.loads(line)
        options = doc.get("options")
        return cls(
            qid=doc["qid"],
            image=doc["image"],
            task=doc["task"],
            question=doc["question"],
            options=tuple(options) if options is not None else None,
            answer=doc["answer"],
            meta=doc.get("meta", {}),
        )


def make_qid(dataset_name: str, sample_id: str, task: str, defect_index: int | None = None) -> str:
    """Stable content-derived record id; identical on every machine."""
    payload = "\x1f".join(
        [dataset_name, sample_id, task, "" if defect_index is None else str(defect_index)]
    )
    digest = hashlib.blake2b(payload.encode("utf-8"), digest_size=8).hexdigest()
    return f"{task.lower()}-{digest}"


def record_rng(seed: int, qid: str) -> random.Random:
    """Per-record generator derived by keyed hashing of (seed, qid)."""
    key = seed.to_bytes(8, "little")
    digest = hashlib.blake2b(qid.encode("utf-8"), digest_size=8, key=key).digest()
    return random.Random(int.from_bytes(digest, "little"))


def _labeled_options(texts: list[str]) -> tuple[str, ...]:
    return tuple(f"{OPTION_LETTERS[i]}. {t}" for i, t in enumerate(texts))


def _choice_record(
    qid: str,
    sample: SampleRecord,
    task: str,
    correct: str,
    distractors: list[str],
    rng: random.Random,
    meta: dict,
) -> QaRecord:
    texts = [correct] + distractors
    rng.shuffle(texts)
    letter = OPTION_LETTERS[texts.index(correct)]
    return QaRecord(
        qid=qid,
        image=sample.image,
        task=task,
        question=QUESTION_TEMPLATES[task].format(object_class=sample.object_class),
        options=_labeled_options(texts),
        answer=letter,
        meta=meta,
    )


def _instance_mask(manifest: DatasetManifest, defect: DefectInstance) -> BinaryMask:
    with open(manifest.resolve(defect.mask), "rb") as fh:
        return decode_mask(fh.read())


def gen_ad(sample: SampleRecord, manifest: DatasetManifest, cfg: BuildConfig) -> QaRecord:
    """Binary anomaly question; answer is Yes iff the sample is anomalous."""
    qid = make_qid(manifest.dataset_name, sample.id, "AD")
    rng = record_rng(cfg.seed, qid)
    correct = "Yes" if sample.anomalous else "No"
    distractor = "No" if sample.anomalous else "Yes"
    return _choice_record(
        qid, sample, "AD", correct, [distractor], rng,
        meta={"object_class": sample.object_class},
    )


def gen_rdl(
    sample: SampleRecord,
    defect: DefectInstance,
    defect_index: int,
    manifest: DatasetManifest,
    cfg: BuildConfig,
    mask: BinaryMask | None = None,
) -> QaRecord:
    """Grid-region question; the correct option is the dominant 3x3 cell."""
    qid = make_qid(manifest.dataset_name, sample.id, "RDL", defect_index)
    rng = record_rng(cfg.seed, qid)
    if mask is None:
        mask = _instance_mask(manifest, defect)
    region = grid_region(mask).name
    distractors = rng.sample([n for n in REGION_NAMES if n != region], 3)
    meta = {
        "object_class": sample.object_class,
        "defect_class": defect.defect_class,
        "region": region,
        "defect_index": defect_index,
    }
    return _choice_record(qid, sample, "RDL", region, distractors, rng, meta)


def gen_dfm(
    sample: SampleRecord,
    defect: DefectInstance,
    defect_index: int,
    manifest: DatasetManifest,
    cfg: BuildConfig,
    mask: BinaryMask | None = None,
) -> QaRecord:
    """Open bounding-box question over the instance's full mask."""
    qid = make_qid(manifest.dataset_name, sample.id, "DFM", defect_index)
    if mask is None:
        mask = _instance_mask(manifest, defect)
    box = tight_bbox(mask)
    return QaRecord(
        qid=qid,
        image=sample.image,
        task="DFM",
        question=QUESTION_TEMPLATES["DFM"].format(object_class=sample.object_class),
        options=None,
        answer=box.as_answer(),
        meta={
            "object_class": sample.object_class,
            "defect_class": defect.defect_class,
            "bbox": box.as_list(),
            "defect_index": defect_index,
        },
    )


def gen_dc(
    sample: SampleRecord,
    defect: DefectInstance,
    defect_index: int,
    manifest: DatasetManifest,
    cfg: BuildConfig,
) -> QaRecord:
    """Defect-class question; distractors come from the manifest vocabulary.

    When fewer than 3 other classes exist there, the remainder is drawn
    from cfg.fallback_defect_classes (duplicates excluded).
    """
    qid = make_qid(manifest.dataset_name, sample.id, "DC", defect_index)
    rng = record_rng(cfg.seed, qid)
    correct = defect.defect_class
    pool = [c for c in manifest.defect_classes if c != correct]
    if len(pool) >= 3:
        distractors = rng.sample(pool, 3)
    else:
        distractors = list(pool)
        extra = [
            c for c in cfg.fallback_defect_classes
            if c != correct and c not in distractors
        ]
        need = 3 - len(distractors)
        if len(extra) < need:
            raise OptionPoolError(
                f"sample {sample.id!r}: only {len(distractors) + len(extra)} distinct "
                "distractor classes available, need 3"
            )
        distractors += rng.sample(extra, need)
    meta = {
        "object_class": sample.object_class,
        "defect_class": correct,
        "defect_index": defect_index,
    }
    return _choice_record(qid, sample, "DC", correct, distractors, rng, meta)


@dataclass(frozen=True)
class BuildIssue:
    sample_id: str
    task: str
    defect_index: int | None
    reason: str


@dataclass(frozen=True)
class BuildResult:
    records: tuple[QaRecord, ...]  # sorted by qid
    issues: tuple[BuildIssue, ...]


def build_dataset(manifest: DatasetManifest, cfg: BuildConfig) -> BuildResult:
    """Generate all enabled tasks for every sample in the manifest.

    AD yields one record per sample; RDL, DFM and DC yield one record per
    defect instance of each anomalous sample. Records that fail (bad mask
    file, exhausted option pool) are skipped and reported as issues.
    The record list is sorted by qid, so identical (manifest, cfg) give
    identical output regardless of sample order.
    """
    records: list[QaRecord] = []
    issues: list[BuildIssue] = []
    tasks = set(cfg.tasks)

    for sample in manifest.samples:
        if "AD" in tasks:
            records.append(gen_ad(sample, manifest, cfg))
        if not sample.anomalous or not (tasks & {"RDL", "DFM", "DC"}):
            continue
        for j, defect in enumerate(sample.defects):
            mask = None
            mask_error = None
            if tasks & {"RDL", "DFM"}:
                try:
                    mask = _instance_mask(manifest, defect)
                except (OSError, MaskDecodeError) as exc:
                    mask_error = str(exc)
            for task in ("RDL", "DFM", "DC"):
                if task not in tasks:
                    continue
                try:
                    if task == "DC":
                        records.append(gen_dc(sample, defect, j, manifest, cfg))
                    elif mask_error is not None:
                        raise MaskDecodeError(mask_error)
                    elif task == "RDL":
                        records.append(gen_rdl(sample, defect, j, manifest, cfg, mask))
                    else:
                        records.append(gen_dfm(sample, defect, j, manifest, cfg, mask))
                except (MaskDecodeError, EmptyMaskError, OptionPoolError) as exc:
                    issues.append(BuildIssue(sample.id, task, j, str(exc)))

    records.sort(key=lambda r: r.qid)
    qids = [r.qid for r in records]
    if len(set(qids)) != len(qids):
        dupes = sorted({q for q in qids if qids.count(q) > 1})
        raise ValueError(f"qid collision in build output: {dupes[:3]}")
    return BuildResult(tuple(records), tuple(issues))


def write_qa_jsonl(records, path) -> None:
    """One JSON object per line, keys in fixed order, UTF-8."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(record.to_json_line())
            fh.write("\n")


def read_qa_jsonl(path) -> list[QaRecord]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(QaRecord.from_json_line(line))
    return out
