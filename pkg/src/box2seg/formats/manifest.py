"""Dataset manifest: one JSON document tying tiles, masks, and config together.

The summary block is always computed from the tile records rather than
stored independently, so the "summary equals the sum over tiles" invariant
holds by construction. Key order in the file is sorted for stable diffs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import ManifestError, VersionError
from .records import CategoryTable

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TileCounts:
    """Per-tile accounting: every instance intersecting the tile ends up as
    recorded (valid or invalid), dropped by the retention rule, or failed
    at the backend."""

    instances: int
    valid: int
    invalid: int
    dropped: int = 0
    failed: int = 0

    def __post_init__(self):
        if min(self.instances, self.valid, self.invalid, self.dropped, self.failed) < 0:
            raise ManifestError("negative instance counts")
        if self.valid + self.invalid != self.instances:
            raise ManifestError(
                f"counts do not add up: {self.valid} + {self.invalid} != {self.instances}"
            )

    @property
    def considered(self) -> int:
        return self.instances + self.dropped + self.failed


@dataclass(frozen=True)
class TileRecord:
    source_image_id: str
    tile_index: tuple[int, int]
    origin: tuple[int, int]
    tile_size: int
    image_file: str
    sem_map_file: str
    instances_file: str
    counts: TileCounts

    def __post_init__(self):
        if self.tile_size <= 0:
            raise ManifestError(f"tile size must be positive, got {self.tile_size}")
        object.__setattr__(self, "tile_index", tuple(int(v) for v in self.tile_index))
        object.__setattr__(self, "origin", tuple(int(v) for v in self.origin))


@dataclass(frozen=True)
class DatasetManifest:
    dataset: str
    categories: CategoryTable
    tiles: tuple[TileRecord, ...]
    config: dict
    tool_version: str

    def summary(self) -> dict:
        return {
            "tiles": len(self.tiles),
            "instances": sum(t.counts.instances for t in self.tiles),
            "valid": sum(t.counts.valid for t in self.tiles),
            "invalid": sum(t.counts.invalid for t in self.tiles),
            "dropped": sum(t.counts.dropped for t in self.tiles),
            "failed": sum(t.counts.failed for t in self.tiles),
        }


def _tile_to_json(tile: TileRecord) -> dict:
    return {
        "source_image_id": tile.source_image_id,
        "tile_index": list(tile.tile_index),
        "origin": list(tile.origin),
        "tile_size": tile.tile_size,
        "image_file": tile.image_file,
        "sem_map_file": tile.sem_map_file,
        "instances_file": tile.instances_file,
        "counts": {
            "instances": tile.counts.instances,
            "valid": tile.counts.valid,
            "invalid": tile.counts.invalid,
            "dropped": tile.counts.dropped,
            "failed": tile.counts.failed,
        },
    }


def _tile_from_json(data: dict) -> TileRecord:
    counts = data["counts"]
    return TileRecord(
        source_image_id=data["source_image_id"],
        tile_index=tuple(data["tile_index"]),
        origin=tuple(data["origin"]),
        tile_size=data["tile_size"],
        image_file=data["image_file"],
        sem_map_file=data["sem_map_file"],
        instances_file=data["instances_file"],
        counts=TileCounts(
            instances=counts["instances"],
            valid=counts["valid"],
            invalid=counts["invalid"],
            dropped=counts.get("dropped", 0),
            failed=counts.get("failed", 0),
        ),
    )


def manifest_to_json(manifest: DatasetManifest) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "dataset": manifest.dataset,
        "tool_version": manifest.tool_version,
        "categories": manifest.categories.to_json(),
        "config": manifest.config,
        "summary": manifest.summary(),
        "tiles": [_tile_to_json(t) for t in manifest.tiles],
    }


def write_manifest(path: Path, manifest: DatasetManifest) -> None:
    doc = manifest_to_json(manifest)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_manifest(path: Path, strict: bool = False) -> DatasetManifest:
    """Load a manifest; strict additionally requires every mask file to exist."""
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"{path}: unreadable manifest ({exc})") from exc
    version = doc.get("schema_version")
    if version is None:
        raise VersionError(f"{path}: manifest missing schema_version")
    if version != SCHEMA_VERSION:
        raise VersionError(
            f"{path}: schema version {version} unsupported (expected {SCHEMA_VERSION})"
        )
    try:
        manifest = DatasetManifest(
            dataset=doc["dataset"],
            categories=CategoryTable.from_json(doc["categories"]),
            tiles=tuple(_tile_from_json(t) for t in doc["tiles"]),
            config=doc["config"],
            tool_version=doc["tool_version"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"{path}: malformed manifest ({exc})") from exc
    if strict:
        root = path.parent
        for tile in manifest.tiles:
            for ref in (tile.instances_file, tile.sem_map_file):
                if not (root / ref).exists():
                    raise ManifestError(f"{path}: referenced mask file missing: {ref}")
    return manifest
