"""Dataset manifest loading and validation.

A manifest is a single JSON document describing one source anomaly
dataset: its class vocabularies and one record per image, each with an
anomaly flag and zero or more defect instances (one binary mask file
per instance). Relative paths inside the manifest are resolved against
the manifest's own directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import MaskDecodeError, decode_mask


class ManifestError(Exception):
    """Base class for manifest failures."""


class ManifestParseError(ManifestError):
    """The file is not valid JSON."""


class ManifestSchemaError(ManifestError):
    """A field is missing or has the wrong type."""


class ManifestIntegrityError(ManifestError):
    """The document is well-formed but violates a dataset invariant."""


@dataclass(frozen=True)
class DefectInstance:
    """One defect: a binary mask file plus its defect class."""

    mask: str  # path relative to the manifest directory
    defect_class: str


@dataclass(frozen=True)
class SampleRecord:
    """One image with its object class, anomaly flag and defect annotations."""

    id: str
    image: str  # path relative to the manifest directory
    width: int
    height: int
    object_class: str
    anomalous: bool
    defects: tuple[DefectInstance, ...] = ()


@dataclass(frozen=True)
class DatasetManifest:
    dataset_name: str
    object_classes: tuple[str, ...]
    defect_classes: tuple[str, ...]
    samples: tuple[SampleRecord, ...]
    root: Path = field(default_factory=Path)

    def resolve(self, relpath: str) -> Path:
        """Absolute path for a manifest-relative path."""
        return self.root / relpath


@dataclass(frozen=True)
class MaskCheck:
    """Outcome of validating one defect instance's mask file."""

    sample_id: str
    defect_index: int
    mask: str
    ok: bool
    reason: str | None = None


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[MaskCheck, ...]

    @property
    def failures(self) -> tuple[MaskCheck, ...]:
        return tuple(c for c in self.checks if not c.ok)

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        lines = [
            f"{c.sample_id} defect[{c.defect_index}] {c.mask}: {c.reason}"
            for c in self.failures
        ]
        lines.append(f"{len(self.checks)} masks checked, {len(self.failures)} failures")
        return "\n".join(lines)


def _typed(obj: dict, key: str, kind: type, ctx: str):
    if key not in obj:
        raise ManifestSchemaError(f"{ctx}: missing field {key!r}")
    value = obj[key]
    # bool is an int subclass; never let a flag pass as a count
    if kind is int and isinstance(value, bool):
        raise ManifestSchemaError(f"{ctx}: field {key!r} must be {kind.__name__}")
    if not isinstance(value, kind):
        raise ManifestSchemaError(f"{ctx}: field {key!r} must be {kind.__name__}")
    return value


def _string_list(obj: dict, key: str, ctx: str) -> tuple[str, ...]:
    values = _typed(obj, key, list, ctx)
    if not all(isinstance(v, str) for v in values):
        raise ManifestSchemaError(f"{ctx}: field {key!r} must be a list of strings")
    return tuple(values)


def _parse_sample(raw: dict, index: int) -> SampleRecord:
    ctx = f"samples[{index}]"
    if not isinstance(raw, dict):
        raise ManifestSchemaError(f"{ctx}: must be an object")
    sample_id = _typed(raw, "id", str, ctx)
    ctx = f"sample {sample_id!r}"
    width = _typed(raw, "width", int, ctx)
    height = _typed(raw, "height", int, ctx)
    if width < 1 or height < 1:
        raise ManifestIntegrityError(f"{ctx}: width and height must be >= 1")
    defects = []
    for j, d in enumerate(_typed(raw, "defects", list, ctx)):
        dctx = f"{ctx} defects[{j}]"
        if not isinstance(d, dict):
            raise ManifestSchemaError(f"{dctx}: must be an object")
        defects.append(
            DefectInstance(
                mask=_typed(d, "mask", str, dctx),
                defect_class=_typed(d, "defect_class", str, dctx),
            )
        )
    return SampleRecord(
        id=sample_id,
        image=_typed(raw, "image", str, ctx),
        width=width,
        height=height,
        object_class=_typed(raw, "object_class", str, ctx),
        anomalous=_typed(raw, "anomalous", bool, ctx),
        defects=tuple(defects),
    )


def load_manifest(path) -> DatasetManifest:
    """Load and validate a manifest JSON file.

    Checks structure, class vocabularies, sample id uniqueness and the
    anomalous-flag/defect consistency. Mask files themselves are not
    opened here; run :func:`validate_masks` for that.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestParseError(f"{path}: malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ManifestSchemaError(f"{path}: top-level value must be an object")

    name = _typed(doc, "dataset", str, "manifest")
    object_classes = _string_list(doc, "object_classes", "manifest")
    defect_classes = _string_list(doc, "defect_classes", "manifest")
    raw_samples = _typed(doc, "samples", list, "manifest")
    samples = tuple(_parse_sample(s, i) for i, s in enumerate(raw_samples))

    seen: set[str] = set()
    object_vocab = set(object_classes)
    defect_vocab = set(defect_classes)
    for sample in samples:
        if sample.id in seen:
            raise ManifestIntegrityError(f"duplicate sample id {sample.id!r}")
        seen.add(sample.id)
        if sample.object_class not in object_vocab:
            raise ManifestIntegrityError(
                f"sample {sample.id!r}: object class {sample.object_class!r} "
                "not in object_classes"
            )
        if sample.anomalous != bool(sample.defects):
            raise ManifestIntegrityError(
                f"sample {sample.id!r}: anomalous={sample.anomalous} but "
                f"{len(sample.defects)} defects listed"
            )
        for defect in sample.defects:
            if defect.defect_class not in defect_vocab:
                raise ManifestIntegrityError(
                    f"sample {sample.id!r}: defect class {defect.defect_class!r} "
                    "not in defect_classes"
                )
    return DatasetManifest(
        dataset_name=name,
        object_classes=object_classes,
        defect_classes=defect_classes,
        samples=samples,
        root=path.resolve().parent,
    )


def validate_masks(manifest: DatasetManifest) -> ValidationReport:
    """Decode every defect mask and check it against its sample.

    Each instance yields one check: the mask must decode, match the
    sample's width x height, and contain at least one anomalous pixel.
    Unreadable files are reported per instance and do not abort the sweep.
    """
    checks = []
    for sample in manifest.samples:
        for j, defect in enumerate(sample.defects):
            reason = None
            try:
                with open(manifest.resolve(defect.mask), "rb") as fh:
                    mask = decode_mask(fh.read())
            except OSError as exc:
                reason = f"unreadable mask file: {exc}"
            except MaskDecodeError as exc:
                reason = str(exc)
            else:
                if (mask.width, mask.height) != (sample.width, sample.height):
                    reason = (
                        f"dimension mismatch: mask {mask.width}x{mask.height}, "
                        f"sample {sample.width}x{sample.height}"
                    )
                elif mask.is_empty():
                    reason = "empty mask"
            checks.append(
                MaskCheck(sample.id, j, defect.mask, ok=reason is None, reason=reason)
            )
    return ValidationReport(tuple(checks))
