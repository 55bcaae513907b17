"""Parsers and round-trip serializers for the three detection annotation families.

All three parsers resolve category names through a CategoryTable, number the
surviving instances by output position (stable across serialize/parse cycles),
and reject degenerate boxes with a logged warning instead of failing the file.
"""

from __future__ import annotations

import logging
import xml.etree.ElementTree as ET

from ..errors import GeometryError, ParseError
from ..geometry import HBox, RBox, rbox_to_rhbox
from .records import CategoryTable, InstanceAnnotation

log = logging.getLogger("box2seg.formats")

# Leading metadata keys seen in DOTA-style annotation files.
_DOTA_METADATA_KEYS = ("imagesource", "gsd")


def _record_reject(rejects: list[str] | None, message: str) -> None:
    log.warning("%s", message)
    if rejects is not None:
        rejects.append(message)


# ---------------------------------------------------------------------------
# DOTA-style plain text: 8 polygon coordinates, class name, difficulty.
# ---------------------------------------------------------------------------

def parse_dota(
    text: str,
    table: CategoryTable,
    *,
    rejects: list[str] | None = None,
) -> list[InstanceAnnotation]:
    """Parse DOTA-style text: one object per line, optional metadata header."""
    out: list[InstanceAnnotation] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        head = line.split(":", 1)[0].strip().lower()
        if ":" in line and head in _DOTA_METADATA_KEYS:
            continue
        tokens = line.split()
        if len(tokens) != 10:
            raise ParseError(
                f"expected 10 tokens (8 coordinates, category, difficulty), got {len(tokens)}",
                line=line_no,
            )
        try:
            coords = [float(t) for t in tokens[:8]]
        except ValueError as exc:
            raise ParseError(f"non-numeric coordinate: {exc}", line=line_no) from exc
        name = tokens[8]
        try:
            category_id = table.id_for(name)
        except KeyError as exc:
            raise ParseError(f"unknown category {name!r}", line=line_no) from exc
        try:
            difficulty = int(tokens[9])
        except ValueError as exc:
            raise ParseError(f"non-numeric difficulty {tokens[9]!r}", line=line_no) from exc
        corners = tuple(zip(coords[0::2], coords[1::2]))
        try:
            rbox = RBox(corners=corners)
        except GeometryError as exc:
            _record_reject(rejects, f"line {line_no}: degenerate box rejected ({exc})")
            continue
        out.append(
            InstanceAnnotation(
                category_id=category_id,
                rbox=rbox,
                difficulty=bool(difficulty),
                source_instance_id=str(len(out)),
            )
        )
    return out


def _fmt_num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def serialize_dota(instances: list[InstanceAnnotation], table: CategoryTable) -> str:
    """Inverse of parse_dota for round-trips; names keep the one-token format."""
    lines = []
    for inst in instances:
        corners = inst.rbox.corners if inst.rbox is not None else inst.hbox.corners()
        name = table.name_for(inst.category_id).replace(" ", "-")
        coord_part = " ".join(_fmt_num(v) for corner in corners for v in corner)
        lines.append(f"{coord_part} {name} {1 if inst.difficulty else 0}")
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# VOC-style XML: <object><name/><difficult/><bndbox>xmin..ymax</bndbox></object>
# ---------------------------------------------------------------------------

def _xml_root(text: str, family: str) -> ET.Element:
    try:
        return ET.fromstring(text)
    except ET.ParseError as exc:
        raise ParseError(f"{family}: malformed XML document ({exc})") from exc


def _child_text(obj: ET.Element, path: str, index: int, family: str) -> str:
    node = obj.find(path)
    if node is None or node.text is None:
        raise ParseError(f"{family}: object {index} missing <{path}>")
    return node.text.strip()


def parse_voc_xml(
    text: str,
    table: CategoryTable,
    *,
    rejects: list[str] | None = None,
) -> list[InstanceAnnotation]:
    """Parse VOC-style XML into horizontal-box-only instances."""
    root = _xml_root(text, "voc")
    out: list[InstanceAnnotation] = []
    for index, obj in enumerate(root.findall(".//object")):
        name = _child_text(obj, "name", index, "voc")
        try:
            category_id = table.id_for(name)
        except KeyError as exc:
            raise ParseError(f"voc: object {index}: unknown category {name!r}") from exc
        bndbox = obj.find("bndbox")
        if bndbox is None:
            raise ParseError(f"voc: object {index} missing <bndbox>")
        vals = {}
        for key in ("xmin", "ymin", "xmax", "ymax"):
            raw = _child_text(bndbox, key, index, "voc")
            try:
                vals[key] = float(raw)
            except ValueError as exc:
                raise ParseError(f"voc: object {index}: non-numeric {key} {raw!r}") from exc
        if vals["xmin"] > vals["xmax"] or vals["ymin"] > vals["ymax"]:
            raise ParseError(
                f"voc: object {index}: inverted box "
                f"({vals['xmin']},{vals['ymin']},{vals['xmax']},{vals['ymax']})"
            )
        hbox = HBox(vals["xmin"], vals["ymin"], vals["xmax"], vals["ymax"])
        if hbox.area == 0:
            _record_reject(rejects, f"voc: object {index}: degenerate box rejected (zero area)")
            continue
        difficult_node = obj.find("difficult")
        difficulty = bool(int(difficult_node.text.strip())) if (
            difficult_node is not None and difficult_node.text
        ) else False
        out.append(
            InstanceAnnotation(
                category_id=category_id,
                hbox=hbox,
                difficulty=difficulty,
                source_instance_id=str(len(out)),
            )
        )
    return out


def serialize_voc_xml(instances: list[InstanceAnnotation], table: CategoryTable) -> str:
    root = ET.Element("annotation")
    for inst in instances:
        hbox = inst.hbox if inst.hbox is not None else rbox_to_rhbox(inst.rbox)
        obj = ET.SubElement(root, "object")
        ET.SubElement(obj, "name").text = table.name_for(inst.category_id)
        ET.SubElement(obj, "difficult").text = "1" if inst.difficulty else "0"
        bndbox = ET.SubElement(obj, "bndbox")
        ET.SubElement(bndbox, "xmin").text = _fmt_num(hbox.x_min)
        ET.SubElement(bndbox, "ymin").text = _fmt_num(hbox.y_min)
        ET.SubElement(bndbox, "xmax").text = _fmt_num(hbox.x_max)
        ET.SubElement(bndbox, "ymax").text = _fmt_num(hbox.y_max)
    return ET.tostring(root, encoding="unicode")


# ---------------------------------------------------------------------------
# FAIR1M-style XML: <object><possibleresult><name/></possibleresult>
#                   <points><point>x,y</point> ×4</points></object>
# ---------------------------------------------------------------------------

def parse_fair1m_xml(
    text: str,
    table: CategoryTable,
    *,
    rejects: list[str] | None = None,
) -> list[InstanceAnnotation]:
    """Parse FAIR1M-style XML into rotated-box-only instances."""
    root = _xml_root(text, "fair1m")
    out: list[InstanceAnnotation] = []
    for index, obj in enumerate(root.findall(".//object")):
        name = _child_text(obj, "possibleresult/name", index, "fair1m")
        try:
            category_id = table.id_for(name)
        except KeyError as exc:
            raise ParseError(f"fair1m: object {index}: unknown category {name!r}") from exc
        points = obj.findall("points/point")
        if len(points) != 4:
            raise ParseError(
                f"fair1m: object {index}: expected 4 points, got {len(points)}"
            )
        corners = []
        for p in points:
            raw = (p.text or "").strip()
            parts = raw.split(",")
            if len(parts) != 2:
                raise ParseError(f"fair1m: object {index}: bad point {raw!r}")
            try:
                corners.append((float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise ParseError(
                    f"fair1m: object {index}: non-numeric point {raw!r}"
                ) from exc
        try:
            rbox = RBox(corners=tuple(corners))
        except GeometryError as exc:
            _record_reject(rejects, f"fair1m: object {index}: degenerate box rejected ({exc})")
            continue
        out.append(
            InstanceAnnotation(
                category_id=category_id,
                rbox=rbox,
                source_instance_id=str(len(out)),
            )
        )
    return out


def serialize_fair1m_xml(instances: list[InstanceAnnotation], table: CategoryTable) -> str:
    root = ET.Element("annotation")
    objects = ET.SubElement(root, "objects")
    for inst in instances:
        corners = inst.rbox.corners if inst.rbox is not None else inst.hbox.corners()
        obj = ET.SubElement(objects, "object")
        result = ET.SubElement(obj, "possibleresult")
        ET.SubElement(result, "name").text = table.name_for(inst.category_id)
        points = ET.SubElement(obj, "points")
        for x, y in corners:
            ET.SubElement(points, "point").text = f"{_fmt_num(x)},{_fmt_num(y)}"
    return ET.tostring(root, encoding="unicode")
