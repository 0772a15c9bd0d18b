"""Synthetic manifest generation for self-contained checks and demos.

Writes a manifest plus one rectangular defect mask per anomalous sample.
Image files are not materialized: no subcommand reads image pixels, only
masks and metadata.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

import numpy as np
from PIL import Image

DEFAULT_OBJECT_CLASSES = ("widget", "bracket", "gear", "housing")
DEFAULT_DEFECT_CLASSES = (
    "scratch",
    "dent",
    "crack",
    "hole",
    "contamination",
    "pit",
    "chip",
    "discoloration",
)


def write_mask_png(path, pixels: np.ndarray) -> None:
    """Write a boolean array as an 8-bit grayscale mask (255 = anomalous)."""
    img = Image.fromarray(np.where(pixels, 255, 0).astype(np.uint8), mode="L")
    img.save(path, format="PNG")


def make_synthetic_manifest(
    root,
    n_samples: int = 200,
    anomaly_rate: float = 0.5,
    size: int = 24,
    seed: int = 7,
    object_classes=DEFAULT_OBJECT_CLASSES,
    defect_classes=DEFAULT_DEFECT_CLASSES,
) -> Path:
    """Create masks/ and manifest.json under root; returns the manifest path.

    Exactly round(n_samples * anomaly_rate) samples are anomalous, each
    with one rectangular defect, so question counts are predictable.
    """
    root = Path(root)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    anomalous_ids = set(rng.sample(range(n_samples), round(n_samples * anomaly_rate)))

    samples = []
    for i in range(n_samples):
        sid = f"s{i:06d}"
        sample = {
            "id": sid,
            "image": f"images/{sid}.png",
            "width": size,
            "height": size,
            "object_class": rng.choice(object_classes),
            "anomalous": i in anomalous_ids,
            "defects": [],
        }
        if i in anomalous_ids:
            x0 = rng.randrange(size)
            y0 = rng.randrange(size)
            x1 = min(size - 1, x0 + rng.randrange(1, max(2, size // 3)))
            y1 = min(size - 1, y0 + rng.randrange(1, max(2, size // 3)))
            pixels = np.zeros((size, size), dtype=bool)
            pixels[y0 : y1 + 1, x0 : x1 + 1] = True
            mask_rel = f"masks/{sid}_0.png"
            write_mask_png(root / mask_rel, pixels)
            sample["defects"].append(
                {"mask": mask_rel, "defect_class": rng.choice(defect_classes)}
            )
        samples.append(sample)

    manifest = {
        "dataset": "synthetic",
        "object_classes": list(object_classes),
        "defect_classes": list(defect_classes),
        "samples": samples,
    }
    path = root / "manifest.json"
    path.write_text(json.dumps(manifest), encoding="utf-8")
    return path
