#!/usr/bin/env python3
"""Turn an HRSC2016 checkout into a ground-truth set for the ablation tools.

Keeps exactly the images that have BOTH a segmentation mask and a box
annotation file (the subset suitable for scoring predicted masks), decodes
each distinct nonzero mask value into one instance, and attaches boxes:

  * the horizontal box is taken from the annotation object whose horizontal
    box overlaps the mask instance best (fallback: the mask's own bounding
    box when no annotation matches),
  * the rotated box is derived from that object's center/size/angle fields
    when they are present.

Every instance is a ship (category 1).  The output layout is the one
`box2seg.gtset.load_gt_set` reads, so afterwards you can run, e.g.:

    box2seg ablate --gt OUT --backend http://localhost:8500 \
        --combos hbox,rhbox,rbox-m,hbox-m,cp

Expected input layout (flags let you point at other arrangements):
    ROOT/AllImages/<id>.bmp        source images
    ROOT/Annotations/<id>.xml      HRS_Object records with box fields
    ROOT/Segmentations/<id>.png    per-instance value masks
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
from PIL import Image

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from box2seg.formats.masks import parse_hrsc_gt
from box2seg.geometry import HBox, RBox
from box2seg.gtset import GtImage, GtInstance, write_gt_set

log = logging.getLogger("prepare_hrsc_gtset")

SHIP = 1


def _float_of(node: ET.Element, tag: str) -> float | None:
    child = node.find(tag)
    if child is None or child.text is None:
        return None
    try:
        return float(child.text)
    except ValueError:
        return None


def _boxes_from_xml(path: Path) -> list[tuple[HBox | None, RBox | None]]:
    """(horizontal box, rotated box) per annotated object, either may be None."""
    root = ET.parse(path).getroot()
    out: list[tuple[HBox | None, RBox | None]] = []
    for obj in root.iter("HRS_Object"):
        xs = [_float_of(obj, t) for t in ("box_xmin", "box_ymin", "box_xmax", "box_ymax")]
        hbox = None
        if None not in xs and xs[0] < xs[2] and xs[1] < xs[3]:
            hbox = HBox(xs[0], xs[1], xs[2], xs[3])
        rbox = None
        cx = _float_of(obj, "mbox_cx")
        cy = _float_of(obj, "mbox_cy")
        w = _float_of(obj, "mbox_w")
        h = _float_of(obj, "mbox_h")
        ang = _float_of(obj, "mbox_ang")
        if None not in (cx, cy, w, h, ang) and w > 0 and h > 0:
            c, s = math.cos(ang), math.sin(ang)
            half = [(-w / 2, -h / 2), (w / 2, -h / 2), (w / 2, h / 2), (-w / 2, h / 2)]
            rbox = RBox(tuple(
                (cx + dx * c - dy * s, cy + dx * s + dy * c) for dx, dy in half
            ))
        if hbox is not None or rbox is not None:
            out.append((hbox, rbox))
    return out


def _overlap(a: HBox, b: HBox) -> float:
    inter = a.intersect(b)
    if inter is None:
        return 0.0
    return (inter.x_max - inter.x_min) * (inter.y_max - inter.y_min)


def _prepare_image(image_id: str, image_path: Path, mask_path: Path,
                   xml_path: Path | None) -> GtImage:
    with Image.open(image_path) as img:
        pixels = np.asarray(img.convert("RGB"))
    with Image.open(mask_path) as m:
        mask_values = np.asarray(m.convert("L") if m.mode not in ("L", "I", "P") else m)
    if mask_values.ndim == 3:
        mask_values = mask_values[:, :, 0]
    if mask_values.shape != pixels.shape[:2]:
        raise ValueError(
            f"{image_id}: mask {mask_values.shape} does not match "
            f"image {pixels.shape[:2]}"
        )

    table = {int(v): SHIP for v in np.unique(mask_values) if v != 0}
    parsed = parse_hrsc_gt(mask_values, table)

    boxes = _boxes_from_xml(xml_path) if xml_path is not None else []
    instances: list[GtInstance] = []
    for k, (mask, category) in enumerate(parsed):
        hbox, rbox = mask.bbox, None
        if boxes:
            best = max(boxes, key=lambda pair: _overlap(
                pair[0] if pair[0] is not None else mask.bbox, mask.bbox
            ))
            if best[0] is not None and _overlap(best[0], mask.bbox) > 0:
                hbox, rbox = best
        instances.append(GtInstance(
            instance_id=f"{image_id}:{k}",
            category_id=category,
            mask=mask,
            hbox=hbox,
            rbox=rbox,
        ))
    return GtImage(image_id=image_id, image=pixels, instances=tuple(instances))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        description=__doc__.splitlines()[0],
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    parser.add_argument("--root", type=Path, help="HRSC2016 checkout root")
    parser.add_argument("--images", type=Path, help="override: image directory")
    parser.add_argument("--masks", type=Path, help="override: mask directory")
    parser.add_argument("--annotations", type=Path,
                        help="override: annotation XML directory")
    parser.add_argument("--output", required=True, type=Path)
    parser.add_argument("--limit", type=int, default=0,
                        help="stop after N images (0 = all)")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    img_dir = args.images or (args.root / "AllImages" if args.root else None)
    mask_dir = args.masks or (args.root / "Segmentations" if args.root else None)
    ann_dir = args.annotations or (args.root / "Annotations" if args.root else None)
    if img_dir is None or mask_dir is None:
        parser.error("give --root, or --images and --masks explicitly")

    mask_by_id = {p.stem: p for p in sorted(mask_dir.iterdir()) if p.is_file()}
    prepared: list[GtImage] = []
    skipped = 0
    for image_path in sorted(img_dir.iterdir()):
        if not image_path.is_file():
            continue
        image_id = image_path.stem
        mask_path = mask_by_id.get(image_id)
        xml_path = ann_dir / f"{image_id}.xml" if ann_dir else None
        if xml_path is not None and not xml_path.exists():
            xml_path = None
        if mask_path is None or xml_path is None:
            skipped += 1  # needs both pixel labels and box annotations
            continue
        try:
            prepared.append(_prepare_image(image_id, image_path, mask_path, xml_path))
        except Exception as exc:
            log.warning("%s: skipped (%s)", image_id, exc)
            skipped += 1
            continue
        if args.limit and len(prepared) >= args.limit:
            break

    if not prepared:
        log.error("no usable images found under %s", img_dir)
        return 1
    write_gt_set(args.output, prepared)
    total = sum(len(im.instances) for im in prepared)
    print(f"wrote {len(prepared)} images / {total} instances to {args.output} "
          f"({skipped} images skipped)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
