"""Binary score-map files: per-pixel anomaly scores for one image.

Layout: 16-byte header (8-byte magic ``EIADSM01``, then width and height
as little-endian uint32), followed by row-major 32-bit floats.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"EIADSM01"
_HEADER = struct.Struct("<8sII")


class ScoreMapFormatError(Exception):
    """File is not a valid score map."""


@dataclass(frozen=True)
class ScoreMap:
    """Per-pixel real-valued anomaly scores."""

    scores: np.ndarray  # float32, shape (height, width)

    def __post_init__(self) -> None:
        if self.scores.ndim != 2:
            raise ValueError("score map must be 2D (height, width)")
        if self.scores.dtype != np.float32:
            object.__setattr__(self, "scores", self.scores.astype(np.float32))

    @property
    def width(self) -> int:
        return self.scores.shape[1]

    @property
    def height(self) -> int:
        return self.scores.shape[0]


def write_score_map(path, scores) -> None:
    arr = np.ascontiguousarray(scores, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError("score map must be 2D (height, width)")
    height, width = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, width, height))
        fh.write(arr.tobytes())


def read_score_map(path) -> ScoreMap:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ScoreMapFormatError(f"{path}: truncated header")
        magic, width, height = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ScoreMapFormatError(f"{path}: bad magic {magic!r}")
        payload = fh.read()
    expected = 4 * width * height
    if len(payload) != expected:
        raise ScoreMapFormatError(
            f"{path}: expected {expected} payload bytes for {width}x{height}, "
            f"got {len(payload)}"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(height, width)
    return ScoreMap(arr.copy())
