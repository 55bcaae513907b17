"""Model backends: a deterministic stub and a real checkpoint adapter.

A model takes one RGB image and one prompt and returns candidate masks with
confidence scores.  The stub needs no heavyweight dependencies and behaves
like a crude segmenter (prompt region refined by image brightness), which
is enough to exercise the protocol end to end and to produce sensible
masks on synthetic images.  The checkpoint adapter wraps a promptable
segmentation model loaded from disk; its dependencies are optional and
imported lazily.
"""

from __future__ import annotations

import threading
from pathlib import Path

import numpy as np
from PIL import Image

from .config import ServerConfig
from .errors import ModelError
from .protocol import Prompt, ScoreGrid

Candidate = tuple[np.ndarray, float]  # (bool mask (H, W), score)


def _box_region(box: tuple[float, float, float, float],
                height: int, width: int) -> np.ndarray:
    x0, y0, x1, y1 = box
    cols = np.arange(width, dtype=np.float64) + 0.5
    rows = np.arange(height, dtype=np.float64) + 0.5
    return np.outer((rows >= y0) & (rows <= y1), (cols >= x0) & (cols <= x1))


def _point_region(x: float, y: float, radius: float,
                  height: int, width: int) -> np.ndarray:
    cols = np.arange(width, dtype=np.float64) + 0.5
    rows = np.arange(height, dtype=np.float64) + 0.5
    return ((rows - y) ** 2)[:, None] + ((cols - x) ** 2)[None, :] <= radius ** 2


def _mask_region(grid: ScoreGrid, height: int, width: int) -> np.ndarray:
    gh, gw = grid.positive.shape
    rows = np.minimum(((np.arange(height) + 0.5) * gh / height).astype(int), gh - 1)
    cols = np.minimum(((np.arange(width) + 0.5) * gw / width).astype(int), gw - 1)
    return grid.positive[np.ix_(rows, cols)]


def _shrink(mask: np.ndarray) -> np.ndarray:
    """One step of 4-neighbour erosion, zero beyond the border."""
    out = mask.copy()
    padded = np.zeros((mask.shape[0] + 2, mask.shape[1] + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask
    for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        out &= padded[1 + dy:padded.shape[0] - 1 + dy,
                      1 + dx:padded.shape[1] - 1 + dx]
    return out


class StubModel:
    """Deterministic stand-in: prompt region, refined by image brightness.

    The designated region (box first, else mask grid, else a disc around
    the point) is intersected with the pixels at or above the region's
    mean grayscale value; if that refinement empties the mask, the raw
    region is returned instead.  On a flat background with a bright
    object, a box prompt therefore recovers the object.
    """

    name = "stub"
    lock = None  # stateless; safe under concurrency
    point_radius = 8.0

    def predict(self, image: np.ndarray, prompt: Prompt,
                multimask: bool) -> list[Candidate]:
        height, width = image.shape[:2]
        if prompt.box is not None:
            region = _box_region(prompt.box, height, width)
        elif prompt.mask is not None:
            region = _mask_region(prompt.mask, height, width)
        else:
            x, y, label = prompt.point
            region = _point_region(x, y, self.point_radius, height, width)
            if label == 0:  # a background point designates nothing
                region = np.zeros_like(region)
        gray = np.asarray(image, dtype=np.float64).mean(axis=2)
        refined = region & (gray >= (gray[region].mean() if region.any() else 0.0))
        best = refined if refined.any() else region
        candidates = [(best, 0.9)]
        if multimask:
            candidates.append((region, 0.75))
            candidates.append((_shrink(best), 0.6))
        return candidates


class CheckpointModel:
    """Adapter over a promptable segmentation checkpoint.

    Requires the optional `sam` extra (torch plus the segmentation model
    package).  Prompts map one-to-one onto the model's native inputs; the
    mask-prompt score grid is resized server-side to the model's expected
    low-resolution input so clients never need to know model internals.
    """

    _SIZES = {"vit_h": "vit_h", "vit_l": "vit_l", "vit_b": "vit_b"}
    _GRID = (256, 256)  # model's low-res mask input (height, width)

    def __init__(self, checkpoint: Path, device: str = "cpu",
                 model_type: str | None = None):
        try:
            from segment_anything import SamPredictor, sam_model_registry
        except ImportError as exc:
            raise ModelError(
                "checkpoint models need the optional dependencies; "
                f"install the 'sam' extra (pip install refserver[sam]): {exc}"
            )
        if model_type is None:
            stem = Path(checkpoint).stem.lower()
            model_type = next(
                (t for t in self._SIZES if t in stem),
                "vit_h",  # largest size by default; recorded via `name`
            )
        if model_type not in self._SIZES:
            raise ModelError(f"unknown model type {model_type!r}")
        try:
            sam = sam_model_registry[model_type](checkpoint=str(checkpoint))
        except Exception as exc:
            raise ModelError(f"could not load checkpoint {checkpoint}: {exc}")
        sam.to(device)
        self._predictor = SamPredictor(sam)
        self.name = f"sam:{model_type}"
        # set_image/predict share state inside the predictor: serialize.
        self.lock = threading.Lock()
        self._image_key: int | None = None

    def _mask_input(self, grid: ScoreGrid) -> np.ndarray:
        positive = grid.positive
        if positive.shape != self._GRID:
            img = Image.fromarray(positive.astype(np.uint8) * 255)
            img = img.resize((self._GRID[1], self._GRID[0]), Image.NEAREST)
            positive = np.asarray(img) > 127
        m = np.float32(grid.magnitude)
        return np.where(positive, m, -m).astype(np.float32)[None, :, :]

    def predict(self, image: np.ndarray, prompt: Prompt,
                multimask: bool) -> list[Candidate]:
        if self._image_key != id(image):
            self._predictor.set_image(image)
            self._image_key = id(image)
        point_coords = point_labels = box = mask_input = None
        if prompt.point is not None:
            x, y, label = prompt.point
            point_coords = np.array([[x, y]], dtype=np.float64)
            point_labels = np.array([label], dtype=np.int64)
        if prompt.box is not None:
            box = np.array(prompt.box, dtype=np.float64)
        if prompt.mask is not None:
            mask_input = self._mask_input(prompt.mask)
        masks, scores, _ = self._predictor.predict(
            point_coords=point_coords,
            point_labels=point_labels,
            box=box,
            mask_input=mask_input,
            multimask_output=multimask,
        )
        return [
            (np.asarray(masks[i], dtype=bool), float(scores[i]))
            for i in range(masks.shape[0])
        ]


def build_model(config: ServerConfig, model_type: str | None = None):
    """Stub when no checkpoint is configured, adapter otherwise."""
    config.validate_checkpoint()
    if config.checkpoint is None:
        return StubModel()
    return CheckpointModel(config.checkpoint, device=config.device,
                           model_type=model_type)
