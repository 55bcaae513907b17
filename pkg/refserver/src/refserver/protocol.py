"""Wire-protocol parsing and validation for /v1/segment.

Request shape::

    {
      "id": "...",
      "image_png_b64": "<base64 PNG>",
      "multimask": false,
      "prompts": [
        {"point": {"x": 1.0, "y": 2.0, "label": 1} | null,
         "box":   [x0, y0, x1, y1] | null,
         "mask":  {"width": W, "height": H, "magnitude": m,
                   "positive_rle": [...]} | null}
      ]
    }

Every prompt needs at least one non-null member.  Geometry is validated
against the decoded image: points inside [0, W] x [0, H], boxes ordered and
inside the image.  Mask prompts come in as the run-length encoding of the
positive region plus a magnitude, and are reconstructed into the +-m score
grid the model consumes.
"""

from __future__ import annotations

import base64
import binascii
import io
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import rle
from .errors import RequestError


@dataclass(frozen=True)
class ScoreGrid:
    """Low-resolution mask prompt: +magnitude on the region, -magnitude off it."""

    positive: np.ndarray  # bool, (height, width)
    magnitude: float

    @property
    def scores(self) -> np.ndarray:
        m = np.float32(self.magnitude)
        return np.where(self.positive, m, -m).astype(np.float32)


@dataclass(frozen=True)
class Prompt:
    point: tuple[float, float, int] | None = None  # (x, y, label)
    box: tuple[float, float, float, float] | None = None
    mask: ScoreGrid | None = None


@dataclass(frozen=True)
class SegmentTask:
    request_id: str
    image: np.ndarray  # uint8, (H, W, 3)
    multimask: bool
    prompts: tuple[Prompt, ...]


def _require(doc: dict, key: str, kind, where: str):
    if key not in doc:
        raise RequestError(f"{where}: missing required field '{key}'")
    value = doc[key]
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise RequestError(
            f"{where}: field '{key}' must be {getattr(kind, '__name__', kind)}"
        )
    return value


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RequestError(f"{where} must be a number, got {type(value).__name__}")
    out = float(value)
    if not math.isfinite(out):
        raise RequestError(f"{where} must be finite, got {out}")
    return out


def decode_image(b64: str) -> np.ndarray:
    try:
        raw = base64.b64decode(b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise RequestError(f"image_png_b64 is not valid base64: {exc}")
    try:
        with Image.open(io.BytesIO(raw)) as img:
            if img.format != "PNG":
                raise RequestError(f"image must be PNG, got {img.format}")
            return np.asarray(img.convert("RGB"))
    except UnidentifiedImageError:
        raise RequestError("image_png_b64 does not decode to an image")


def _parse_point(doc, width: int, height: int) -> tuple[float, float, int]:
    if not isinstance(doc, dict):
        raise RequestError("prompt point must be an object")
    x = _number(doc.get("x"), "point.x") if "x" in doc else None
    y = _number(doc.get("y"), "point.y") if "y" in doc else None
    if x is None or y is None:
        raise RequestError("prompt point needs numeric 'x' and 'y'")
    label = doc.get("label", 1)
    if label not in (0, 1) or isinstance(label, bool):
        raise RequestError(f"point label must be 0 or 1, got {label!r}")
    if not (0.0 <= x <= width and 0.0 <= y <= height):
        raise RequestError(
            f"point ({x}, {y}) lies outside the {width}x{height} image"
        )
    return (x, y, int(label))


def _parse_box(doc, width: int, height: int) -> tuple[float, float, float, float]:
    if not isinstance(doc, list) or len(doc) != 4:
        raise RequestError("prompt box must be a 4-element [x0, y0, x1, y1] list")
    x0, y0, x1, y1 = (_number(v, f"box[{i}]") for i, v in enumerate(doc))
    if x0 > x1 or y0 > y1:
        raise RequestError(f"box corners are not ordered: {doc}")
    if x0 < 0 or y0 < 0 or x1 > width or y1 > height:
        raise RequestError(
            f"box {doc} exceeds the {width}x{height} image bounds"
        )
    return (x0, y0, x1, y1)


def _parse_mask(doc) -> ScoreGrid:
    if not isinstance(doc, dict):
        raise RequestError("prompt mask must be an object")
    grid_w = _require(doc, "width", int, "mask")
    grid_h = _require(doc, "height", int, "mask")
    magnitude = _number(doc.get("magnitude"), "mask.magnitude") \
        if "magnitude" in doc else None
    if magnitude is None or magnitude <= 0:
        raise RequestError(f"mask magnitude must be a positive number, got {magnitude}")
    counts = _require(doc, "positive_rle", list, "mask")
    for c in counts:
        if isinstance(c, bool) or not isinstance(c, int):
            raise RequestError("positive_rle must hold integers")
    positive = rle.decode(counts, grid_h, grid_w)
    return ScoreGrid(positive=positive, magnitude=magnitude)


def parse_task(doc) -> SegmentTask:
    """Validate a decoded request body into a SegmentTask; RequestError on
    any protocol violation."""
    if not isinstance(doc, dict):
        raise RequestError("request body must be a JSON object")
    request_id = _require(doc, "id", str, "request")
    image = decode_image(_require(doc, "image_png_b64", str, "request"))
    height, width = image.shape[:2]
    multimask = doc.get("multimask", False)
    if not isinstance(multimask, bool):
        raise RequestError("multimask must be a boolean")
    raw_prompts = _require(doc, "prompts", list, "request")
    prompts = []
    for i, entry in enumerate(raw_prompts):
        if not isinstance(entry, dict):
            raise RequestError(f"prompts[{i}] must be an object")
        point = entry.get("point")
        box = entry.get("box")
        mask = entry.get("mask")
        if point is None and box is None and mask is None:
            raise RequestError(f"prompts[{i}] carries no point, box, or mask")
        prompts.append(Prompt(
            point=_parse_point(point, width, height) if point is not None else None,
            box=_parse_box(box, width, height) if box is not None else None,
            mask=_parse_mask(mask) if mask is not None else None,
        ))
    return SegmentTask(
        request_id=request_id,
        image=image,
        multimask=multimask,
        prompts=tuple(prompts),
    )


def candidate_json(mask: np.ndarray, score: float) -> dict:
    """One predicted mask as its wire representation."""
    grid = np.asarray(mask, dtype=bool)
    h, w = grid.shape
    return {"size": [int(h), int(w)], "rle": rle.encode(grid), "score": float(score)}
