"""Fixed-size tiling of large source images and annotation clipping.

Tile origins follow the stride grid {0, S, 2S, ...}; any origin whose tile
would overrun the image is replaced by dim - T, so edge tiles are anchored
to the image border rather than padded. Images smaller than T produce a
single tile at the origin and are zero-padded at crop time.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, GeometryError, TilingError
from .formats.records import InstanceAnnotation
from .geometry import HBox, RBox, clip_polygon_to_rect, polygon_area


@dataclass(frozen=True)
class TileSpec:
    """One planned tile: origin and size in source pixels plus provenance."""

    origin: tuple[int, int]
    tile_size: int
    source_image_id: str
    tile_index: tuple[int, int]
    image_width: int
    image_height: int
    padded: bool

    def __post_init__(self):
        if self.tile_size <= 0:
            raise TilingError(f"tile size must be positive, got {self.tile_size}")
        object.__setattr__(self, "origin", (int(self.origin[0]), int(self.origin[1])))
        object.__setattr__(
            self, "tile_index", (int(self.tile_index[0]), int(self.tile_index[1]))
        )
        ox, oy = self.origin
        if ox < 0 or oy < 0:
            raise TilingError(f"negative tile origin {self.origin}")
        for off, dim in ((ox, self.image_width), (oy, self.image_height)):
            if dim >= self.tile_size and off + self.tile_size > dim:
                raise TilingError(
                    f"tile at {self.origin} size {self.tile_size} overruns "
                    f"{self.image_width}x{self.image_height} image"
                )
            if dim < self.tile_size and off != 0:
                raise TilingError("undersized images must keep the tile at the origin")

    @property
    def name(self) -> str:
        row, col = self.tile_index
        return f"{self.source_image_id}__{row}_{col}"

    @property
    def window(self) -> HBox:
        ox, oy = self.origin
        return HBox(ox, oy, ox + self.tile_size, oy + self.tile_size)


@dataclass(frozen=True)
class TilingPolicy:
    """Tile size, stride, and the instance-retention rule for clipping."""

    tile_size: int
    stride: int
    retention: float = 0.5
    # Images smaller than tile_size: only zero-padding is implemented; the
    # knob exists so the choice is recorded in the manifest config snapshot.
    small_image_mode: str = "pad"

    def __post_init__(self):
        if self.tile_size <= 0:
            raise ConfigError(f"tile size must be positive, got {self.tile_size}")
        if not 0 < self.stride <= self.tile_size:
            raise ConfigError(
                f"stride must satisfy 0 < S <= T, got S={self.stride} T={self.tile_size}"
            )
        if not 0.0 < self.retention <= 1.0:
            raise ConfigError(f"retention must be in (0, 1], got {self.retention}")
        if self.small_image_mode != "pad":
            raise ConfigError(
                f"unsupported small-image mode {self.small_image_mode!r} (only 'pad')"
            )


def _axis_origins(dim: int, tile_size: int, stride: int) -> list[int]:
    if dim <= tile_size:
        return [0]
    origins = list(range(0, dim - tile_size + 1, stride))
    if origins[-1] != dim - tile_size:
        origins.append(dim - tile_size)
    return origins


def plan_tiles(
    image_width: int,
    image_height: int,
    policy: TilingPolicy,
    source_image_id: str = "",
) -> list[TileSpec]:
    """Plan the tile grid for one image, row-major."""
    if image_width <= 0 or image_height <= 0:
        raise TilingError(f"image dims must be positive, got {image_width}x{image_height}")
    xs = _axis_origins(image_width, policy.tile_size, policy.stride)
    ys = _axis_origins(image_height, policy.tile_size, policy.stride)
    padded = image_width < policy.tile_size or image_height < policy.tile_size
    tiles = []
    for row, oy in enumerate(ys):
        for col, ox in enumerate(xs):
            tiles.append(
                TileSpec(
                    origin=(ox, oy),
                    tile_size=policy.tile_size,
                    source_image_id=source_image_id,
                    tile_index=(row, col),
                    image_width=image_width,
                    image_height=image_height,
                    padded=padded,
                )
            )
    return tiles


def _clamp(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def _clamped_rbox(rbox: RBox, window: HBox) -> RBox | None:
    """Vertex-wise clamp of the corners into the window; None when degenerate."""
    corners = tuple(
        (_clamp(x, window.x_min, window.x_max), _clamp(y, window.y_min, window.y_max))
        for x, y in rbox.corners
    )
    try:
        return RBox(corners=corners)
    except GeometryError:
        return None


def crop_annotations(
    instances: list[InstanceAnnotation],
    tile: TileSpec,
    policy: TilingPolicy,
    *,
    dropped: list[str] | None = None,
) -> list[InstanceAnnotation]:
    """Clip instances to the tile window and shift them to tile-local coords.

    The retention test uses the instance's reference box (the rotated box
    when present, else the horizontal box): clipped area / original area
    below the policy threshold drops the instance. Survivors keep their
    source_instance_id.
    """
    window = tile.window
    ox, oy = tile.origin
    out: list[InstanceAnnotation] = []
    for inst in instances:
        if inst.rbox is not None:
            ref_corners = inst.rbox.corners
            ref_area = inst.rbox.area
        else:
            ref_corners = inst.hbox.corners()
            ref_area = inst.hbox.area
        if ref_area <= 0.0:
            # Degenerate reference box: contained in no tile.
            continue
        clipped = clip_polygon_to_rect(ref_corners, window)
        clipped_area = polygon_area(clipped) if len(clipped) >= 3 else 0.0
        if clipped_area == 0.0:
            # Not in this tile at all; only intersecting instances are
            # accounted for (kept or dropped) against it.
            continue
        if clipped_area / ref_area < policy.retention:
            if dropped is not None:
                dropped.append(inst.source_instance_id)
            continue
        new_hbox = None
        if inst.hbox is not None:
            isect = inst.hbox.intersect(window)
            if isect is not None and isect.area > 0.0:
                new_hbox = isect.translate(-ox, -oy)
        new_rbox = None
        if inst.rbox is not None:
            clamped = _clamped_rbox(inst.rbox, window)
            if clamped is not None:
                new_rbox = clamped.translate(-ox, -oy)
        if new_hbox is None and new_rbox is None:
            if dropped is not None:
                dropped.append(inst.source_instance_id)
            continue
        out.append(replace(inst, hbox=new_hbox, rbox=new_rbox))
    return out


def crop_image(image: np.ndarray, tile: TileSpec) -> np.ndarray:
    """Copy the tile window out of the source image, zero-padding overhang."""
    arr = np.asarray(image)
    if arr.ndim not in (2, 3):
        raise TilingError(f"expected a 2-D or 3-D pixel array, got ndim={arr.ndim}")
    height, width = arr.shape[:2]
    if width != tile.image_width or height != tile.image_height:
        raise TilingError(
            f"image is {width}x{height} but tile was planned for "
            f"{tile.image_width}x{tile.image_height}"
        )
    t = tile.tile_size
    ox, oy = tile.origin
    out_shape = (t, t) + arr.shape[2:]
    out = np.zeros(out_shape, dtype=arr.dtype)
    y_end = min(oy + t, height)
    x_end = min(ox + t, width)
    out[: y_end - oy, : x_end - ox] = arr[oy:y_end, ox:x_end]
    return out
