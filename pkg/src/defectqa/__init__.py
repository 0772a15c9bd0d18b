"""Defect QA dataset construction and evaluation toolchain."""

from .geometry import (
    BinaryMask,
    BoundingBox,
    GridRegion,
    connected_components,
    decode_mask,
    decode_mask_file,
    grid_region,
    tight_bbox,
)
from .losses import (
    LossWeights,
    bce_loss,
    ce_loss,
    combined_mask_loss,
    dice_loss,
)
from .manifest import (
    DatasetManifest,
    DefectInstance,
    SampleRecord,
    ValidationReport,
    load_manifest,
    validate_masks,
)
from .qagen import (
    BuildConfig,
    QaRecord,
    build_dataset,
    gen_ad,
    gen_dc,
    gen_dfm,
    gen_rdl,
    read_qa_jsonl,
    write_qa_jsonl,
)
from .scoremap import ScoreMap, read_score_map, write_score_map
from .scoring import PredictionRecord, TaskReport, parse_choice, score_dfm, score_run
from .segmetrics import MetricAccumulator, SegMetrics

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "BoundingBox",
    "BuildConfig",
    "DatasetManifest",
    "DefectInstance",
    "GridRegion",
    "LossWeights",
    "MetricAccumulator",
    "PredictionRecord",
    "QaRecord",
    "SampleRecord",
    "ScoreMap",
    "SegMetrics",
    "TaskReport",
    "ValidationReport",
    "bce_loss",
    "build_dataset",
    "ce_loss",
    "combined_mask_loss",
    "connected_components",
    "decode_mask",
    "decode_mask_file",
    "dice_loss",
    "gen_ad",
    "gen_dc",
    "gen_dfm",
    "gen_rdl",
    "grid_region",
    "load_manifest",
    "parse_choice",
    "read_qa_jsonl",
    "read_score_map",
    "score_dfm",
    "score_run",
    "tight_bbox",
    "validate_masks",
    "write_qa_jsonl",
    "write_score_map",
]
