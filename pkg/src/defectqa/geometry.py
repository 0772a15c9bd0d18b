"""Pure geometric analysis of binary defect masks.

Masks are 8-bit single-channel PNGs where 0 is normal and any value
greater than 0 is anomalous. Coordinates are (x, y) with the origin at
the top-left corner, x growing rightward and y growing downward.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage


class MaskDecodeError(Exception):
    """Mask bytes could not be decoded as an 8-bit single-channel PNG."""


class EmptyMaskError(ValueError):
    """Operation requires at least one anomalous pixel."""


# Row-major names of the 3x3 grid cells.
REGION_NAMES = (
    "top left corner",
    "top",
    "top right corner",
    "left",
    "center",
    "right",
    "bottom left corner",
    "bottom",
    "bottom right corner",
)

_STRUCTURES = {
    4: np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool),
    8: np.ones((3, 3), dtype=bool),
}


@dataclass(frozen=True)
class BinaryMask:
    """Boolean pixel grid, True where anomalous."""

    pixels: np.ndarray  # bool, shape (height, width)

    def __post_init__(self) -> None:
        if self.pixels.ndim != 2:
            raise ValueError("mask array must be 2D (height, width)")
        if self.pixels.dtype != np.bool_:
            object.__setattr__(self, "pixels", self.pixels.astype(bool))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def count(self) -> int:
        """Number of anomalous pixels."""
        return int(self.pixels.sum())

    def is_empty(self) -> bool:
        return not self.pixels.any()

    def pixel_set(self) -> set[tuple[int, int]]:
        """Anomalous pixels as a set of (x, y) tuples."""
        ys, xs = np.nonzero(self.pixels)
        return {(int(x), int(y)) for x, y in zip(xs, ys)}

    @classmethod
    def from_pixels(cls, width: int, height: int, pts) -> "BinaryMask":
        """Build a mask of the given canvas size from (x, y) coordinates."""
        arr = np.zeros((height, width), dtype=bool)
        for x, y in pts:
            if not (0 <= x < width and 0 <= y < height):
                raise ValueError(f"pixel ({x},{y}) outside {width}x{height} canvas")
            arr[y, x] = True
        return cls(arr)


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box with inclusive pixel coordinates on all edges."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self) -> None:
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"degenerate box {self.as_list()}")

    def as_list(self) -> list[int]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    def as_answer(self) -> str:
        """Canonical literal form ``[x_min,y_min,x_max,y_max]``."""
        return f"[{self.x_min},{self.y_min},{self.x_max},{self.y_max}]"

    @property
    def area(self) -> int:
        return (self.x_max - self.x_min + 1) * (self.y_max - self.y_min + 1)

    def iou(self, other: "BoundingBox") -> float:
        """Intersection over union on inclusive pixel areas."""
        iw = min(self.x_max, other.x_max) - max(self.x_min, other.x_min) + 1
        ih = min(self.y_max, other.y_max) - max(self.y_min, other.y_min) + 1
        if iw <= 0 or ih <= 0:
            return 0.0
        inter = iw * ih
        return inter / (self.area + other.area - inter)


@dataclass(frozen=True)
class GridRegion:
    """One cell of the 3x3 grid, named in row-major order."""

    row: int
    col: int

    def __post_init__(self) -> None:
        if not (0 <= self.row <= 2 and 0 <= self.col <= 2):
            raise ValueError(f"grid cell ({self.row},{self.col}) out of range")

    @property
    def name(self) -> str:
        return REGION_NAMES[self.row * 3 + self.col]


def decode_mask(data: bytes) -> BinaryMask:
    """Decode mask PNG bytes; a pixel is anomalous iff its stored value > 0."""
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise MaskDecodeError(f"cannot decode mask image: {exc}") from None
    if img.mode != "L":
        raise MaskDecodeError(
            f"mask must be 8-bit single-channel (mode 'L'), got mode {img.mode!r}"
        )
    return BinaryMask(np.asarray(img) > 0)


def decode_mask_file(path) -> BinaryMask:
    with open(path, "rb") as fh:
        return decode_mask(fh.read())


def connected_components(mask: BinaryMask, connectivity: int = 8) -> list[BinaryMask]:
    """Split a mask into connected components on the same canvas.

    Components use 8-connectivity by default (diagonal pixels touch);
    pass ``connectivity=4`` for edge-only adjacency. The returned list is
    ordered by each component's smallest (y, x) pixel, outputs are
    pairwise disjoint, and their union equals the input pixel set.
    """
    if connectivity not in _STRUCTURES:
        raise ValueError("connectivity must be 4 or 8")
    labeled, n = ndimage.label(mask.pixels, structure=_STRUCTURES[connectivity])
    if n == 0:
        return []
    values, first_flat = np.unique(labeled.ravel(), return_index=True)
    order = sorted(
        (int(first), int(value)) for value, first in zip(values, first_flat) if value != 0
    )
    return [BinaryMask(labeled == value) for _, value in order]


def tight_bbox(mask: BinaryMask) -> BoundingBox:
    """Smallest box containing every anomalous pixel (inclusive edges)."""
    if mask.is_empty():
        raise EmptyMaskError("cannot compute bounding box of an empty mask")
    ys, xs = np.nonzero(mask.pixels)
    return BoundingBox(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))


def grid_cell_edges(extent: int) -> list[int]:
    """Start offsets of the three grid cells along one axis.

    Cell c covers [floor(c*extent/3), floor((c+1)*extent/3) - 1], so every
    pixel belongs to exactly one cell even when extent % 3 != 0.
    """
    return [c * extent // 3 for c in range(3)]


def grid_region(mask: BinaryMask) -> GridRegion:
    """Cell of the 3x3 grid holding the most anomalous pixels.

    Ties break toward the smallest row-major cell index.
    """
    if mask.is_empty():
        raise EmptyMaskError("cannot locate an empty mask on the grid")
    ys, xs = np.nonzero(mask.pixels)
    col_edges = np.array(grid_cell_edges(mask.width)[1:])
    row_edges = np.array(grid_cell_edges(mask.height)[1:])
    cols = np.searchsorted(col_edges, xs, side="right")
    rows = np.searchsorted(row_edges, ys, side="right")
    counts = np.bincount(rows * 3 + cols, minlength=9)
    winner = int(np.argmax(counts))  # argmax takes the first max: row-major tie-break
    return GridRegion(winner // 3, winner % 3)
