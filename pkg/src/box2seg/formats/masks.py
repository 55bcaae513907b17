"""Instance masks, semantic maps, and their file forms.

Pixel boxes use the exclusive convention: bbox = [x0, y0, x1, y1] where
x1 = max column + 1, so a single pixel at row r, column c has the box
[c, r, c+1, r+1]. Semantic map files are single-channel indexed PNGs with
index = category id and 0 = background; display colors live in a sidecar
palette, not in the label values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import MaskError
from ..geometry import HBox
from .rle import RleMask, rle_decode, rle_encode


@dataclass(frozen=True)
class InstanceMask:
    """One segmented instance: RLE payload plus derived summary fields."""

    rle: RleMask
    area: int
    bbox: HBox
    score: float
    valid: bool

    def __post_init__(self):
        if self.area != self.rle.area:
            raise MaskError(f"area {self.area} != RLE 1-count {self.rle.area}")
        if not 0.0 <= self.score <= 1.0:
            raise MaskError(f"score {self.score} outside [0, 1]")
        if self.valid and self.area == 0:
            raise MaskError("valid mask with zero area")

    @classmethod
    def from_bitmap(cls, bitmap: np.ndarray, score: float, valid: bool | None = None) -> "InstanceMask":
        """Build from a binary grid; empty grids come back invalid with a zero bbox."""
        grid = np.asarray(bitmap, dtype=bool)
        rle = rle_encode(grid)
        area = int(grid.sum())
        if area == 0:
            return cls(rle=rle, area=0, bbox=HBox(0, 0, 0, 0), score=score, valid=False)
        rows, cols = np.nonzero(grid)
        bbox = HBox(
            float(cols.min()), float(rows.min()),
            float(cols.max()) + 1.0, float(rows.max()) + 1.0,
        )
        return cls(rle=rle, area=area, bbox=bbox, score=score,
                   valid=True if valid is None else valid)

    def decode(self) -> np.ndarray:
        return rle_decode(self.rle)


@dataclass(frozen=True)
class SemanticMap:
    """Per-pixel category indices (0 = background), stored as an 8-bit grid."""

    labels: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.labels)
        if grid.ndim != 2:
            raise MaskError(f"semantic map must be 2-D, got shape {grid.shape}")
        grid = grid.astype(np.uint8, casting="safe") if grid.dtype != np.uint8 else grid
        grid = np.array(grid, dtype=np.uint8, order="C")
        grid.setflags(write=False)
        object.__setattr__(self, "labels", grid)

    @property
    def height(self) -> int:
        return int(self.labels.shape[0])

    @property
    def width(self) -> int:
        return int(self.labels.shape[1])

    def category_ids(self) -> set[int]:
        return {int(v) for v in np.unique(self.labels) if v != 0}


def render_semantic_map(
    instances: list[tuple[InstanceMask, int]],
    dims: tuple[int, int],
) -> SemanticMap:
    """Paint instances onto a blank canvas, larger areas first.

    Painting in decreasing-area order lets smaller instances overwrite
    larger ones wherever they overlap; equal areas keep input order, so
    later instances win ties. dims is (height, width).
    """
    height, width = int(dims[0]), int(dims[1])
    canvas = np.zeros((height, width), dtype=np.uint8)
    order = sorted(range(len(instances)), key=lambda i: -instances[i][0].area)
    for i in order:
        mask, category_id = instances[i]
        if mask.rle.height != height or mask.rle.width != width:
            raise MaskError(
                f"mask dims {mask.rle.height}x{mask.rle.width} "
                f"do not match canvas {height}x{width}"
            )
        if not 1 <= category_id <= 255:
            raise MaskError(f"category id {category_id} outside the 8-bit label range")
        if mask.area == 0:
            continue
        canvas[mask.decode()] = category_id
    return SemanticMap(labels=canvas)


def parse_hrsc_gt(
    mask_image: np.ndarray,
    value_table: dict[int, int],
) -> list[tuple[InstanceMask, int]]:
    """Split a ground-truth mask image into per-instance masks.

    Each distinct nonzero pixel value is one instance; value_table maps
    pixel values to category ids.
    """
    grid = np.asarray(mask_image)
    if grid.ndim != 2:
        raise MaskError(f"ground-truth mask must be 2-D, got shape {grid.shape}")
    out: list[tuple[InstanceMask, int]] = []
    for value in np.unique(grid):
        v = int(value)
        if v == 0:
            continue
        if v not in value_table:
            raise MaskError(f"pixel value {v} absent from the instance value table")
        mask = InstanceMask.from_bitmap(grid == value, score=1.0)
        out.append((mask, value_table[v]))
    return out


# ---------------------------------------------------------------------------
# File forms: per-tile instance JSON and indexed semantic map PNGs.
# ---------------------------------------------------------------------------

def instances_to_json(size: tuple[int, int], instances: list[tuple[InstanceMask, int]]) -> dict:
    """Per-tile instance document: {"size": [H, W], "instances": [...]}."""
    height, width = int(size[0]), int(size[1])
    rows = []
    for mask, category_id in instances:
        if mask.rle.height != height or mask.rle.width != width:
            raise MaskError(
                f"mask dims {mask.rle.height}x{mask.rle.width} "
                f"do not match tile {height}x{width}"
            )
        rows.append(
            {
                "category": int(category_id),
                "rle": [int(c) for c in mask.rle.counts],
                "score": float(mask.score),
                "valid": bool(mask.valid),
                "bbox": [
                    mask.bbox.x_min, mask.bbox.y_min,
                    mask.bbox.x_max, mask.bbox.y_max,
                ],
            }
        )
    return {"size": [height, width], "instances": rows}


def instances_from_json(doc: dict) -> tuple[tuple[int, int], list[tuple[InstanceMask, int]]]:
    try:
        height, width = (int(v) for v in doc["size"])
        rows = doc["instances"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MaskError(f"malformed instance document: {exc}") from exc
    out: list[tuple[InstanceMask, int]] = []
    for row in rows:
        rle = RleMask(height=height, width=width, counts=tuple(row["rle"]))
        bbox = HBox(*row["bbox"])
        mask = InstanceMask(
            rle=rle,
            area=rle.area,
            bbox=bbox,
            score=float(row["score"]),
            valid=bool(row["valid"]),
        )
        out.append((mask, int(row["category"])))
    return (height, width), out


def write_instances_json(path: Path, size: tuple[int, int],
                         instances: list[tuple[InstanceMask, int]]) -> None:
    doc = instances_to_json(size, instances)
    path.write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n",
                    encoding="utf-8")


def read_instances_json(path: Path) -> tuple[tuple[int, int], list[tuple[InstanceMask, int]]]:
    return instances_from_json(json.loads(path.read_text(encoding="utf-8")))


def build_palette(num_categories: int) -> list[tuple[int, int, int]]:
    """Deterministic display colors for category indices; 0 stays black."""
    palette = [(0, 0, 0)]
    for i in range(1, num_categories + 1):
        palette.append(((37 * i + 29) % 256, (97 * i + 71) % 256, (151 * i + 13) % 256))
    return palette


def write_semantic_png(path: Path, sem: SemanticMap, num_categories: int = 255) -> None:
    """Write the map as an indexed 8-bit PNG; index = category id."""
    img = Image.fromarray(sem.labels, mode="P")
    flat: list[int] = []
    palette = build_palette(min(num_categories, 255))
    for entry in palette:
        flat.extend(entry)
    flat.extend([0] * (768 - len(flat)))
    img.putpalette(flat)
    img.save(path, format="PNG")


def read_semantic_png(path: Path) -> SemanticMap:
    with Image.open(path) as img:
        if img.mode != "P":
            raise MaskError(f"{path}: semantic maps must be indexed PNGs, got mode {img.mode}")
        return SemanticMap(labels=np.asarray(img, dtype=np.uint8))
