"""Box and polygon arithmetic plus construction of segmentation prompts.

Coordinates are continuous pixel positions in image (or tile) space,
x growing right and y growing down. All operations here are pure; the
returned values are immutable and safe to share between workers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import ConfigError, EmptyPromptError, GeometryError

if TYPE_CHECKING:
    from .formats.records import InstanceAnnotation

Point = tuple[float, float]


@dataclass(frozen=True)
class HBox:
    """Axis-aligned box given by min/max corners (x_min, y_min, x_max, y_max)."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        vals = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(v) for v in vals):
            raise GeometryError(f"non-finite box coordinates: {vals}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise GeometryError(f"inverted box: {vals}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Point:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def corners(self) -> tuple[Point, Point, Point, Point]:
        """Corner cycle starting at (x_min, y_min), clockwise in image coords."""
        return (
            (self.x_min, self.y_min),
            (self.x_max, self.y_min),
            (self.x_max, self.y_max),
            (self.x_min, self.y_max),
        )

    def contains_point(self, x: float, y: float) -> bool:
        """Membership test with the boundary counted as inside."""
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def intersect(self, other: "HBox") -> "HBox | None":
        """Interval intersection per axis; None when the boxes do not meet."""
        x0 = max(self.x_min, other.x_min)
        y0 = max(self.y_min, other.y_min)
        x1 = min(self.x_max, other.x_max)
        y1 = min(self.y_max, other.y_max)
        if x0 > x1 or y0 > y1:
            return None
        return HBox(x0, y0, x1, y1)

    def translate(self, dx: float, dy: float) -> "HBox":
        return HBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)


def polygon_area(corners: Sequence[Point]) -> float:
    """Unsigned shoelace area of a closed polygon given by its vertex cycle."""
    acc = 0.0
    n = len(corners)
    for i in range(n):
        x1, y1 = corners[i]
        x2, y2 = corners[(i + 1) % n]
        acc += x1 * y2 - x2 * y1
    return abs(acc) / 2.0


def _orient(a: Point, b: Point, c: Point) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _segments_cross(p1: Point, p2: Point, p3: Point, p4: Point) -> bool:
    # Proper (interior) crossing only; shared endpoints do not count.
    d1 = _orient(p3, p4, p1)
    d2 = _orient(p3, p4, p2)
    d3 = _orient(p1, p2, p3)
    d4 = _orient(p1, p2, p4)
    return d1 * d2 < 0 and d3 * d4 < 0


@dataclass(frozen=True)
class RBox:
    """Rotated box stored as an ordered quadrilateral of four corners.

    The corner cycle may run clockwise or counter-clockwise but must
    describe a simple (non-self-intersecting) quadrilateral of positive
    area; anything else is rejected with :class:`GeometryError`.
    """

    corners: tuple[Point, Point, Point, Point]

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.corners)
        object.__setattr__(self, "corners", pts)
        if len(pts) != 4:
            raise GeometryError(f"quadrilateral needs 4 corners, got {len(pts)}")
        if not all(math.isfinite(x) and math.isfinite(y) for x, y in pts):
            raise GeometryError(f"non-finite corner in {pts}")
        if _segments_cross(pts[0], pts[1], pts[2], pts[3]) or _segments_cross(
            pts[1], pts[2], pts[3], pts[0]
        ):
            raise GeometryError(f"self-intersecting quadrilateral: {pts}")
        if polygon_area(pts) <= 0.0:
            raise GeometryError(f"degenerate quadrilateral (zero area): {pts}")

    @property
    def area(self) -> float:
        return polygon_area(self.corners)

    @property
    def centroid(self) -> Point:
        """Arithmetic mean of the four corners."""
        xs = [p[0] for p in self.corners]
        ys = [p[1] for p in self.corners]
        return (sum(xs) / 4.0, sum(ys) / 4.0)

    def translate(self, dx: float, dy: float) -> "RBox":
        return RBox(tuple((x + dx, y + dy) for x, y in self.corners))


FOREGROUND = 1


@dataclass(frozen=True)
class CenterPoint:
    """A single foreground point prompt. Background points are not supported."""

    x: float
    y: float
    label: int = FOREGROUND

    def __post_init__(self):
        if self.label != FOREGROUND:
            raise GeometryError("point prompts are foreground-only")


@dataclass(frozen=True, eq=False)
class MaskPrompt:
    """Low-resolution score grid marking the active region of a prompt.

    ``positive`` is a boolean (height, width) grid; cell scores are
    +magnitude where True and -magnitude elsewhere. At least one positive
    cell is required.
    """

    positive: np.ndarray
    magnitude: float = 1000.0

    def __post_init__(self):
        arr = np.array(self.positive, dtype=bool, order="C")
        arr.setflags(write=False)
        object.__setattr__(self, "positive", arr)
        if arr.ndim != 2 or arr.size == 0:
            raise GeometryError(f"mask grid must be 2-D and non-empty, got {arr.shape}")
        if not (self.magnitude > 0 and math.isfinite(self.magnitude)):
            raise GeometryError(f"magnitude must be positive and finite: {self.magnitude}")
        if not arr.any():
            raise EmptyPromptError("mask prompt has no positive cells")

    @property
    def height(self) -> int:
        return self.positive.shape[0]

    @property
    def width(self) -> int:
        return self.positive.shape[1]

    def scores(self) -> np.ndarray:
        """The +/-magnitude score grid, shape (height, width), float32."""
        m = np.float32(self.magnitude)
        return np.where(self.positive, m, -m)

    def __eq__(self, other):
        if not isinstance(other, MaskPrompt):
            return NotImplemented
        return self.magnitude == other.magnitude and np.array_equal(
            self.positive, other.positive
        )

    def __hash__(self):
        return hash((self.magnitude, self.positive.shape, self.positive.tobytes()))


@dataclass(frozen=True)
class PromptSet:
    """Concrete prompt payload for one instance: point and/or box and/or mask."""

    point: CenterPoint | None = None
    box: HBox | None = None
    mask: MaskPrompt | None = None
    combo_id: str = ""

    def __post_init__(self):
        if self.point is None and self.box is None and self.mask is None:
            raise GeometryError("prompt set needs at least one of point/box/mask")


class PromptKind(enum.Enum):
    """The six basic prompts an annotation can be turned into."""

    CP = "cp"
    HBOX = "hbox"
    RHBOX = "rhbox"
    HBOX_M = "hbox-m"
    RBOX_M = "rbox-m"
    RHBOX_M = "rhbox-m"


_COMBO_ORDER = [
    PromptKind.CP,
    PromptKind.HBOX,
    PromptKind.RHBOX,
    PromptKind.HBOX_M,
    PromptKind.RBOX_M,
    PromptKind.RHBOX_M,
]
_BOX_KINDS = {PromptKind.HBOX, PromptKind.RHBOX}
_MASK_KINDS = {PromptKind.HBOX_M, PromptKind.RBOX_M, PromptKind.RHBOX_M}


def combo_id(combo: Iterable[PromptKind]) -> str:
    """Canonical identifier for a prompt combination, e.g. ``cp+hbox``."""
    members = set(combo)
    return "+".join(k.value for k in _COMBO_ORDER if k in members)


def parse_combo(text: str) -> frozenset[PromptKind]:
    """Parse a ``+``-joined combo id; hyphens/underscores interchangeable."""
    kinds = set()
    for token in text.split("+"):
        token = token.strip().lower().replace("_", "-")
        try:
            kinds.add(PromptKind(token))
        except ValueError:
            valid = ", ".join(k.value for k in PromptKind)
            raise ConfigError(f"unknown prompt kind {token!r} (valid: {valid})") from None
    if not kinds:
        raise ConfigError("empty prompt combination")
    return frozenset(kinds)


class BoxSource(enum.Enum):
    """Which box of an annotation a derived value (e.g. the CP) comes from."""

    HBOX = "hbox"
    RBOX = "rbox"
    RHBOX = "rhbox"


@dataclass(frozen=True)
class PromptConfig:
    """Which prompts to build and how to rasterize mask prompts.

    ``point_source`` picks the box the center point derives from; None
    means the horizontal box when present, else the rotated one.
    """

    combo: frozenset[PromptKind]
    mask_grid: tuple[int, int] = (256, 256)  # (width, height) cells
    magnitude: float = 1000.0
    point_source: BoxSource | None = None
    multimask: bool = False

    def __post_init__(self):
        object.__setattr__(self, "combo", frozenset(self.combo))
        if not self.combo:
            raise ConfigError("prompt combination must name at least one prompt")
        if len(self.combo & _BOX_KINDS) > 1:
            raise ConfigError("a prompt set carries at most one box prompt")
        if len(self.combo & _MASK_KINDS) > 1:
            raise ConfigError("a prompt set carries at most one mask prompt")
        gw, gh = self.mask_grid
        if gw <= 0 or gh <= 0:
            raise ConfigError(f"mask grid dims must be positive: {self.mask_grid}")
        if not (self.magnitude > 0 and math.isfinite(self.magnitude)):
            raise ConfigError(f"magnitude must be positive and finite: {self.magnitude}")

    @property
    def id(self) -> str:
        return combo_id(self.combo)


def rbox_to_rhbox(r: RBox) -> HBox:
    """Minimum circumscribed horizontal rectangle: per-axis min/max of corners."""
    xs = [p[0] for p in r.corners]
    ys = [p[1] for p in r.corners]
    return HBox(min(xs), min(ys), max(xs), max(ys))


def center_point(a: "InstanceAnnotation", source: BoxSource) -> CenterPoint:
    """Foreground center point of the annotation, per the requested box.

    HBOX and RHBOX use the box midpoint; RBOX uses the corner mean
    (identical for rectangles, cheap and deterministic for general quads).
    """
    if source is BoxSource.HBOX:
        if a.hbox is None:
            raise ConfigError("center point from hbox requested but annotation has none")
        x, y = a.hbox.center
    elif source is BoxSource.RHBOX:
        if a.rbox is None:
            raise ConfigError("center point from rhbox requested but annotation has no rbox")
        x, y = rbox_to_rhbox(a.rbox).center
    elif source is BoxSource.RBOX:
        if a.rbox is None:
            raise ConfigError("center point from rbox requested but annotation has none")
        x, y = a.rbox.centroid
    else:  # pragma: no cover - enum is closed
        raise ConfigError(f"unknown box source {source!r}")
    return CenterPoint(x, y)


def points_in_hbox(points: np.ndarray, box: HBox) -> np.ndarray:
    """Vectorized membership for an (N, 2) point array, boundary inclusive."""
    x, y = points[:, 0], points[:, 1]
    return (
        (box.x_min <= x) & (x <= box.x_max) & (box.y_min <= y) & (y <= box.y_max)
    )


def points_in_polygon(points: np.ndarray, corners: Sequence[Point]) -> np.ndarray:
    """Even-odd point-in-polygon for an (N, 2) array, boundary inclusive.

    Points exactly on an edge (zero cross product within the edge's
    coordinate range) count as inside, so zero-interior shapes still
    rasterize.
    """
    x, y = points[:, 0], points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    on_edge = np.zeros(len(points), dtype=bool)
    n = len(corners)
    for k in range(n):
        x1, y1 = corners[k]
        x2, y2 = corners[(k + 1) % n]
        cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
        in_range = (
            (np.minimum(x1, x2) <= x)
            & (x <= np.maximum(x1, x2))
            & (np.minimum(y1, y2) <= y)
            & (y <= np.maximum(y1, y2))
        )
        on_edge |= (cross == 0.0) & in_range
        spans = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_hit = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= spans & (x < x_hit)
    return inside | on_edge


def _as_extent(image: "HBox | tuple[float, float]") -> HBox:
    if isinstance(image, HBox):
        return image
    w, h = image
    if w <= 0 or h <= 0:
        raise GeometryError(f"image dims must be positive: {image}")
    return HBox(0.0, 0.0, float(w), float(h))


def rasterize_mask_prompt(
    shape: HBox | RBox,
    grid: tuple[int, int],
    image: HBox | tuple[float, float],
    magnitude: float = 1000.0,
) -> MaskPrompt:
    """Rasterize a box onto a score grid spanning the image extent.

    A cell is positive iff its center, mapped from grid space to image
    space by per-axis uniform scaling, falls inside the shape (boundary
    inclusive). Raises :class:`EmptyPromptError` when no cell qualifies.
    """
    gw, gh = grid
    if gw <= 0 or gh <= 0:
        raise GeometryError(f"grid dims must be positive: {grid}")
    extent = _as_extent(image)
    cx = extent.x_min + (np.arange(gw) + 0.5) * (extent.width / gw)
    cy = extent.y_min + (np.arange(gh) + 0.5) * (extent.height / gh)
    xx, yy = np.meshgrid(cx, cy)
    centers = np.column_stack([xx.ravel(), yy.ravel()])
    if isinstance(shape, HBox):
        hit = points_in_hbox(centers, shape)
    else:
        hit = points_in_polygon(centers, shape.corners)
    positive = hit.reshape(gh, gw)
    if not positive.any():
        raise EmptyPromptError(
            f"shape {shape} rasterizes to zero positive cells on a {gw}x{gh} grid"
        )
    return MaskPrompt(positive=positive, magnitude=magnitude)


def build_prompt_set(
    a: "InstanceAnnotation",
    cfg: PromptConfig,
    image_size: HBox | tuple[float, float],
) -> PromptSet:
    """Assemble the prompt set a configuration requests from one annotation.

    Deterministic composition of the primitives above; raises
    :class:`ConfigError` when the combo needs a box the annotation lacks.
    ``image_size`` is the tile extent mask prompts are rasterized over.
    """
    combo = cfg.combo

    def need_hbox() -> HBox:
        if a.hbox is None:
            raise ConfigError("combo requires an hbox but the annotation has none")
        return a.hbox

    def need_rbox() -> RBox:
        if a.rbox is None:
            raise ConfigError("combo requires an rbox but the annotation has none")
        return a.rbox

    box = None
    if PromptKind.HBOX in combo:
        box = need_hbox()
    elif PromptKind.RHBOX in combo:
        box = rbox_to_rhbox(need_rbox())

    mask = None
    if PromptKind.HBOX_M in combo:
        mask_shape: HBox | RBox = need_hbox()
    elif PromptKind.RBOX_M in combo:
        mask_shape = need_rbox()
    elif PromptKind.RHBOX_M in combo:
        mask_shape = rbox_to_rhbox(need_rbox())
    else:
        mask_shape = None  # type: ignore[assignment]
    if mask_shape is not None:
        mask = rasterize_mask_prompt(mask_shape, cfg.mask_grid, image_size, cfg.magnitude)

    point = None
    if PromptKind.CP in combo:
        source = cfg.point_source
        if source is None:
            source = BoxSource.HBOX if a.hbox is not None else BoxSource.RBOX
        point = center_point(a, source)

    return PromptSet(point=point, box=box, mask=mask, combo_id=combo_id(combo))


def _as_polygon(poly: HBox | RBox | Sequence[Point]) -> list[Point]:
    if isinstance(poly, HBox):
        return list(poly.corners())
    if isinstance(poly, RBox):
        return list(poly.corners)
    return [(float(x), float(y)) for x, y in poly]


def clip_polygon_to_rect(
    poly: HBox | RBox | Sequence[Point], rect: HBox
) -> list[Point]:
    """Clip a polygon against an axis-aligned window (Sutherland-Hodgman).

    Returns the clipped vertex cycle (at most n + 4 vertices for a convex
    input of n), or an empty list when there is no overlap. A degenerate
    (zero-area) result is a value, not an error.
    """
    verts = _as_polygon(poly)

    def clip_plane(vs: list[Point], keep, cut) -> list[Point]:
        out: list[Point] = []
        n = len(vs)
        for i in range(n):
            cur, prev = vs[i], vs[i - 1]
            cur_in, prev_in = keep(cur), keep(prev)
            if cur_in:
                if not prev_in:
                    out.append(cut(prev, cur))
                out.append(cur)
            elif prev_in:
                out.append(cut(prev, cur))
        return out

    def cut_x(a: float):
        def cut(p: Point, q: Point) -> Point:
            t = (a - p[0]) / (q[0] - p[0])
            return (a, p[1] + t * (q[1] - p[1]))

        return cut

    def cut_y(a: float):
        def cut(p: Point, q: Point) -> Point:
            t = (a - p[1]) / (q[1] - p[1])
            return (p[0] + t * (q[0] - p[0]), a)

        return cut

    planes = [
        (lambda p: p[0] >= rect.x_min, cut_x(rect.x_min)),
        (lambda p: p[0] <= rect.x_max, cut_x(rect.x_max)),
        (lambda p: p[1] >= rect.y_min, cut_y(rect.y_min)),
        (lambda p: p[1] <= rect.y_max, cut_y(rect.y_max)),
    ]
    for keep, cut in planes:
        verts = clip_plane(verts, keep, cut)
        if len(verts) < 3:
            return []
    deduped: list[Point] = []
    for v in verts:
        if not deduped or v != deduped[-1]:
            deduped.append(v)
    if len(deduped) > 1 and deduped[0] == deduped[-1]:
        deduped.pop()
    return deduped
