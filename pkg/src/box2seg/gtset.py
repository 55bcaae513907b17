"""Ground-truth sets for the ablation harness.

Directory layout:

    <root>/images/<image_id>.png     8-bit grayscale or RGB tile
    <root>/gt/<image_id>.json        {"size": [H, W], "instances": [...]}

Each instance record carries its id, category, optional hbox
[x0, y0, x1, y1], optional rbox [[x, y] * 4], and the ground-truth mask
as column-major RLE counts. ``synthesize_box_set`` builds deterministic
sets whose masks are exact box interiors, so a fill-oracle run scores
1.0 by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ManifestError
from .formats.masks import InstanceMask
from .formats.records import InstanceAnnotation
from .formats.rle import RleMask, rle_decode
from .geometry import HBox, RBox


@dataclass(frozen=True)
class GtInstance:
    instance_id: str
    category_id: int
    mask: InstanceMask
    hbox: HBox | None = None
    rbox: RBox | None = None

    def __post_init__(self):
        if self.hbox is None and self.rbox is None:
            raise ManifestError(f"{self.instance_id}: ground truth needs a box")

    def annotation(self) -> InstanceAnnotation:
        return InstanceAnnotation(
            category_id=self.category_id,
            hbox=self.hbox,
            rbox=self.rbox,
            source_instance_id=self.instance_id,
        )


@dataclass(frozen=True, eq=False)
class GtImage:
    image_id: str
    image: np.ndarray
    instances: tuple[GtInstance, ...]

    @property
    def dims(self) -> tuple[int, int]:
        return int(self.image.shape[0]), int(self.image.shape[1])


def _instance_to_json(inst: GtInstance) -> dict:
    return {
        "id": inst.instance_id,
        "category": inst.category_id,
        "hbox": (
            [inst.hbox.x_min, inst.hbox.y_min, inst.hbox.x_max, inst.hbox.y_max]
            if inst.hbox is not None else None
        ),
        "rbox": ([list(p) for p in inst.rbox.corners] if inst.rbox is not None else None),
        "rle": [int(c) for c in inst.mask.rle.counts],
        "score": inst.mask.score,
    }


def _instance_from_json(data: dict, height: int, width: int) -> GtInstance:
    rle = RleMask(height=height, width=width, counts=tuple(data["rle"]))
    mask = InstanceMask.from_bitmap(rle_decode(rle), score=float(data.get("score", 1.0)))
    hbox = HBox(*data["hbox"]) if data.get("hbox") is not None else None
    rbox = (
        RBox(tuple((p[0], p[1]) for p in data["rbox"]))
        if data.get("rbox") is not None else None
    )
    return GtInstance(
        instance_id=data["id"],
        category_id=int(data["category"]),
        mask=mask,
        hbox=hbox,
        rbox=rbox,
    )


def write_gt_set(root: Path, images: list[GtImage]) -> None:
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "gt").mkdir(parents=True, exist_ok=True)
    for gti in images:
        Image.fromarray(gti.image).save(root / "images" / f"{gti.image_id}.png")
        height, width = gti.dims
        doc = {
            "size": [height, width],
            "instances": [_instance_to_json(i) for i in gti.instances],
        }
        (root / "gt" / f"{gti.image_id}.json").write_text(
            json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )


def load_gt_set(root: Path) -> list[GtImage]:
    gt_dir = root / "gt"
    img_dir = root / "images"
    if not gt_dir.is_dir() or not img_dir.is_dir():
        raise ManifestError(f"{root}: expected images/ and gt/ subdirectories")
    out: list[GtImage] = []
    for gt_path in sorted(gt_dir.glob("*.json")):
        image_id = gt_path.stem
        img_path = img_dir / f"{image_id}.png"
        if not img_path.exists():
            raise ManifestError(f"{img_path}: image missing for ground truth {gt_path.name}")
        with Image.open(img_path) as img:
            pixels = np.asarray(img)
        doc = json.loads(gt_path.read_text(encoding="utf-8"))
        height, width = (int(v) for v in doc["size"])
        if (height, width) != pixels.shape[:2]:
            raise ManifestError(
                f"{gt_path}: declared size {height}x{width} "
                f"does not match image {pixels.shape[:2]}"
            )
        instances = tuple(_instance_from_json(d, height, width) for d in doc["instances"])
        out.append(GtImage(image_id=image_id, image=pixels, instances=instances))
    return out


def synthesize_box_set(
    n_images: int,
    instances_per_image: int,
    height: int = 128,
    width: int = 128,
    seed: int = 0,
    include_rbox: bool = False,
    category_ids: tuple[int, ...] = (1,),
) -> list[GtImage]:
    """Deterministic synthetic GT: integer boxes whose masks are the exact
    interior pixels, drawn onto the image at distinct intensities.

    With ``include_rbox`` each instance also gets the inscribed diamond
    (corners at the box's edge midpoints), whose circumscribed horizontal
    rectangle is the original box again.
    """
    rng = np.random.default_rng(seed)
    out: list[GtImage] = []
    for n in range(n_images):
        image_id = f"synth{n:03d}"
        pixels = np.zeros((height, width), dtype=np.uint8)
        instances = []
        for k in range(instances_per_image):
            w = int(rng.integers(8, max(9, width // 3)))
            h = int(rng.integers(8, max(9, height // 3)))
            x0 = int(rng.integers(0, width - w))
            y0 = int(rng.integers(0, height - h))
            hbox = HBox(x0, y0, x0 + w, y0 + h)
            grid = np.zeros((height, width), dtype=bool)
            grid[y0:y0 + h, x0:x0 + w] = True
            pixels[grid] = 80 + (37 * k) % 160
            rbox = None
            if include_rbox:
                rbox = RBox((
                    (x0 + w / 2.0, y0),
                    (x0 + w, y0 + h / 2.0),
                    (x0 + w / 2.0, y0 + h),
                    (x0, y0 + h / 2.0),
                ))
            instances.append(
                GtInstance(
                    instance_id=f"{image_id}:{k}",
                    category_id=category_ids[k % len(category_ids)],
                    mask=InstanceMask.from_bitmap(grid, score=1.0),
                    hbox=hbox,
                    rbox=rbox,
                )
            )
        out.append(GtImage(image_id=image_id, image=pixels, instances=tuple(instances)))
    return out
