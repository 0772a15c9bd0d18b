import json

import numpy as np
import pytest

from defectqa.synthetic import write_mask_png


def rect(height, width, y0, y1, x0, x1):
    """Boolean canvas with an inclusive-rectangle of anomalous pixels."""
    arr = np.zeros((height, width), dtype=bool)
    arr[y0 : y1 + 1, x0 : x1 + 1] = True
    return arr


@pytest.fixture
def write_mask(tmp_path):
    def _write(relpath, pixels):
        path = tmp_path / relpath
        path.parent.mkdir(parents=True, exist_ok=True)
        write_mask_png(path, np.asarray(pixels, dtype=bool))
        return path

    return _write


@pytest.fixture
def make_manifest(tmp_path):
    """Write a manifest JSON into tmp_path and return its path."""

    def _make(
        samples,
        object_classes=("widget", "gear"),
        defect_classes=("scratch", "dent", "crack", "hole"),
        dataset="unit",
        filename="manifest.json",
    ):
        doc = {
            "dataset": dataset,
            "object_classes": list(object_classes),
            "defect_classes": list(defect_classes),
            "samples": samples,
        }
        path = tmp_path / filename
        path.write_text(json.dumps(doc), encoding="utf-8")
        return path

    return _make


def sample_entry(sid, *, size=20, object_class="widget", defects=()):
    return {
        "id": sid,
        "image": f"images/{sid}.png",
        "width": size,
        "height": size,
        "object_class": object_class,
        "anomalous": bool(defects),
        "defects": list(defects),
    }
