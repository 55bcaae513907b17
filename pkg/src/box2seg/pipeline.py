"""End-to-end dataset conversion and dataset statistics.

convert_dataset drives tiler -> geometry -> segmenter -> formats over an
input tree

    <input>/images/*.png|jpg|...
    <input>/labels/<image stem>.txt|.xml

and writes the output tree

    <output>/images/      tile pixels
    <output>/sem_maps/    indexed semantic maps (valid masks only)
    <output>/instances/   per-tile instance JSON (valid and invalid masks)
    <output>/manifest.json
    <output>/stats.json

Conversion is checkpointed per source image (checkpoint.jsonl) so large
runs can resume; the checkpoint is removed on success so finished trees
are byte-identical whether or not a run was interrupted, and regardless
of worker count.
"""

from __future__ import annotations

import json
import logging
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from . import __version__
from .errors import (
    BackendError,
    ConfigError,
    FailureBudgetExceeded,
    ManifestError,
    MetricError,
    ParseError,
)
from .formats.manifest import (
    DatasetManifest,
    TileCounts,
    TileRecord,
    read_manifest,
    write_manifest,
)
from .formats.masks import (
    InstanceMask,
    read_instances_json,
    read_semantic_png,
    render_semantic_map,
    write_instances_json,
    write_semantic_png,
)
from .formats.parsers import parse_dota, parse_fair1m_xml, parse_voc_xml
from .formats.records import CategoryTable, InstanceAnnotation, builtin_table
from .geometry import PromptConfig, PromptKind, build_prompt_set, rbox_to_rhbox
from .segmenter import (
    Backend,
    SegmentRequest,
    TransportError,
    segment,
    select_mask,
    validate_mask,
)
from .tiler import TileSpec, TilingPolicy, crop_annotations, crop_image, plan_tiles

log = logging.getLogger("box2seg.pipeline")

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")

# Reference converted-image counts for the three built-in recipes; runs are
# compared against these informationally (a warning beyond +-5%, never an
# error) because the source crop stride is a free parameter.
REFERENCE_TILE_COUNTS = {"SOTA": 17480, "SIOR": 23463, "FAST": 64147}

# Backend failures may not exceed this fraction of considered instances
# (with a small-run floor) before the run aborts as misconfigured.
FAILURE_BUDGET_FRACTION = 0.05
FAILURE_BUDGET_FLOOR = 20


@dataclass(frozen=True)
class ConversionRecipe:
    """Everything a conversion run needs besides the input/output paths."""

    name: str
    input_format: str
    tiling: TilingPolicy
    prompt_mode: PromptKind
    table: CategoryTable
    derive_hbox: bool = False
    mask_grid: tuple[int, int] = (256, 256)
    magnitude: float = 1000.0
    workers: int = 4

    def __post_init__(self):
        if self.input_format not in ("dota", "voc", "fair1m"):
            raise ConfigError(f"unknown input format {self.input_format!r}")
        if self.prompt_mode not in (PromptKind.HBOX, PromptKind.RHBOX):
            raise ConfigError(
                f"conversion prompts are box prompts (hbox or rhbox), "
                f"got {self.prompt_mode.value!r}"
            )
        if self.input_format == "fair1m" and self.prompt_mode is PromptKind.HBOX:
            raise ConfigError(
                "fair1m inputs carry rotated boxes only; this recipe uses the "
                "circumscribed rhbox prompt, not hbox"
            )
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    def prompt_config(self) -> PromptConfig:
        return PromptConfig(
            combo=frozenset({self.prompt_mode}),
            mask_grid=self.mask_grid,
            magnitude=self.magnitude,
        )


_RECIPE_ALIASES = {
    "sota": "sota",
    "dota": "sota",
    "sior": "sior",
    "dior": "sior",
    "fast": "fast",
    "fair1m": "fast",
}


def builtin_recipe(tag: str) -> ConversionRecipe:
    """The three built-in recipes, addressable by subset or source name."""
    key = _RECIPE_ALIASES.get(tag.strip().lower())
    if key is None:
        raise ConfigError(
            f"unknown recipe {tag!r} (have sota/dota, sior/dior, fast/fair1m)"
        )
    if key == "sota":
        return ConversionRecipe(
            name="SOTA",
            input_format="dota",
            tiling=TilingPolicy(tile_size=1024, stride=824),
            prompt_mode=PromptKind.HBOX,
            table=builtin_table("sota"),
        )
    if key == "sior":
        return ConversionRecipe(
            name="SIOR",
            input_format="voc",
            tiling=TilingPolicy(tile_size=800, stride=800),
            prompt_mode=PromptKind.HBOX,
            table=builtin_table("sior"),
        )
    return ConversionRecipe(
        name="FAST",
        input_format="fair1m",
        tiling=TilingPolicy(tile_size=600, stride=600),
        prompt_mode=PromptKind.RHBOX,
        table=builtin_table("fast"),
    )


def recipe_from_json(doc: dict) -> ConversionRecipe:
    """Build a recipe from a JSON document (see load_recipe)."""
    try:
        table_spec = doc["categories"]
        table = (
            builtin_table(table_spec)
            if isinstance(table_spec, str)
            else CategoryTable.from_json(table_spec)
        )
        tiling = TilingPolicy(
            tile_size=int(doc["tile_size"]),
            stride=int(doc["stride"]),
            retention=float(doc.get("retention", 0.5)),
        )
        mode = doc.get("prompt_mode", "hbox").strip().lower().replace("_", "-")
        grid = doc.get("mask_grid", [256, 256])
        return ConversionRecipe(
            name=doc["name"],
            input_format=doc["input_format"],
            tiling=tiling,
            prompt_mode=PromptKind(mode),
            table=table,
            derive_hbox=bool(doc.get("derive_hbox", False)),
            mask_grid=(int(grid[0]), int(grid[1])),
            magnitude=float(doc.get("magnitude", 1000.0)),
            workers=int(doc.get("workers", 4)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad recipe document: {exc}") from exc


def load_recipe(spec: str) -> ConversionRecipe:
    """Resolve a recipe: a built-in name, or a path to a recipe JSON file."""
    path = Path(spec)
    if spec.endswith(".json") or path.is_file():
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"unreadable recipe file {spec}: {exc}") from exc
        return recipe_from_json(doc)
    return builtin_recipe(spec)


# ---------------------------------------------------------------------------
# Input discovery and parsing.
# ---------------------------------------------------------------------------

_LABEL_SUFFIX = {"dota": ".txt", "voc": ".xml", "fair1m": ".xml"}


def _discover_inputs(input_dir: Path, input_format: str) -> list[tuple[str, Path, Path]]:
    images_dir = input_dir / "images"
    labels_dir = input_dir / "labels"
    if not images_dir.is_dir():
        raise ConfigError(f"unreadable input: {images_dir} is not a directory")
    if not labels_dir.is_dir():
        raise ConfigError(f"unreadable input: {labels_dir} is not a directory")
    suffix = _LABEL_SUFFIX[input_format]
    out = []
    for img_path in sorted(images_dir.iterdir()):
        if img_path.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        label_path = labels_dir / (img_path.stem + suffix)
        if not label_path.exists():
            raise ConfigError(f"unreadable input: missing annotations {label_path}")
        out.append((img_path.stem, img_path, label_path))
    if not out:
        raise ConfigError(f"unreadable input: no images under {images_dir}")
    return out


def _parse_labels(
    text: str, input_format: str, table: CategoryTable, rejects: list[str]
) -> list[InstanceAnnotation]:
    if input_format == "dota":
        return parse_dota(text, table, rejects=rejects)
    if input_format == "voc":
        return parse_voc_xml(text, table, rejects=rejects)
    return parse_fair1m_xml(text, table, rejects=rejects)


def _load_pixels(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        if img.mode not in ("L", "RGB"):
            img = img.convert("RGB")
        return np.asarray(img)


def _prepare_annotations(
    anns: list[InstanceAnnotation], recipe: ConversionRecipe
) -> list[InstanceAnnotation]:
    """Enforce that the recipe's prompt mode is realizable on this input."""
    out = []
    for a in anns:
        if recipe.prompt_mode is PromptKind.HBOX and a.hbox is None:
            if not recipe.derive_hbox:
                raise ConfigError(
                    "input provides only rotated boxes but the recipe prompts with "
                    "hbox; rerun with derive_hbox (--derive-hbox) to use each box's "
                    "circumscribed rectangle"
                )
            a = replace(a, hbox=rbox_to_rhbox(a.rbox))
        if recipe.prompt_mode is PromptKind.RHBOX and a.rbox is None:
            raise ConfigError(
                "recipe prompts with rhbox but the input has no rotated boxes"
            )
        out.append(a)
    return out


# ---------------------------------------------------------------------------
# Conversion.
# ---------------------------------------------------------------------------


def _validity_box(ps, a: InstanceAnnotation):
    if ps.box is not None:
        return ps.box
    if a.hbox is not None:
        return a.hbox
    return rbox_to_rhbox(a.rbox)


def _process_tile(
    tile: TileSpec,
    pixels: np.ndarray,
    anns: list[InstanceAnnotation],
    recipe: ConversionRecipe,
    cfg: PromptConfig,
    backend: Backend,
    out_dir: Path,
) -> TileRecord:
    t = recipe.tiling.tile_size
    dropped_ids: list[str] = []
    local = crop_annotations(anns, tile, recipe.tiling, dropped=dropped_ids)
    tile_pixels = crop_image(pixels, tile)
    prompt_sets = [build_prompt_set(a, cfg, (t, t)) for a in local]
    req = SegmentRequest(image=tile_pixels, prompt_sets=tuple(prompt_sets))
    try:
        results: Sequence[tuple] = segment(backend, req).results
    except TransportError as exc:
        log.warning("tile %s: backend failed after retries: %s", tile.name, exc)
        results = tuple(() for _ in prompt_sets)

    recorded: list[tuple[InstanceMask, int]] = []
    valid = invalid = failed = 0
    for a, ps, cands in zip(local, prompt_sets, results):
        chosen = select_mask(cands)
        if chosen is None:
            failed += 1
            continue
        ok = validate_mask(chosen, _validity_box(ps, a), (t, t))
        recorded.append((replace(chosen, valid=ok), a.category_id))
        if ok:
            valid += 1
        else:
            invalid += 1

    name = tile.name
    Image.fromarray(tile_pixels).save(out_dir / "images" / f"{name}.png", format="PNG")
    sem = render_semantic_map([(m, c) for m, c in recorded if m.valid], (t, t))
    write_semantic_png(out_dir / "sem_maps" / f"{name}.png", sem, len(recipe.table))
    write_instances_json(out_dir / "instances" / f"{name}.json", (t, t), recorded)

    return TileRecord(
        source_image_id=tile.source_image_id,
        tile_index=tile.tile_index,
        origin=tile.origin,
        tile_size=t,
        image_file=f"images/{name}.png",
        sem_map_file=f"sem_maps/{name}.png",
        instances_file=f"instances/{name}.json",
        counts=TileCounts(
            instances=len(recorded),
            valid=valid,
            invalid=invalid,
            dropped=len(dropped_ids),
            failed=failed,
        ),
    )


def _tile_record_to_checkpoint(t: TileRecord) -> dict:
    from .formats.manifest import _tile_to_json

    return _tile_to_json(t)


def _tile_record_from_checkpoint(d: dict) -> TileRecord:
    from .formats.manifest import _tile_from_json

    return _tile_from_json(d)


def _check_budget(failed: int, considered: int) -> None:
    if failed >= FAILURE_BUDGET_FLOOR and failed > FAILURE_BUDGET_FRACTION * considered:
        raise FailureBudgetExceeded(
            f"{failed} of {considered} instances failed at the backend "
            f"(> {FAILURE_BUDGET_FRACTION:.0%}); aborting instead of writing a "
            f"degraded dataset"
        )


def convert_dataset(
    recipe: ConversionRecipe,
    input_dir: Path,
    output_dir: Path,
    backend: Backend,
    *,
    resume: bool = False,
    progress: bool = False,
    seed: int = 0,
) -> DatasetManifest:
    """Convert a detection dataset into tiles with per-instance masks.

    Per-instance backend failures are recorded and the run continues; the
    run aborts only when failures pass the budget, when the backend is
    structurally misbehaving (protocol errors), or when input is unreadable.
    """
    input_dir = Path(input_dir)
    output_dir = Path(output_dir)
    inputs = _discover_inputs(input_dir, recipe.input_format)

    health = getattr(backend, "health", None)
    if callable(health):
        doc = health()
        if not doc.get("ready"):
            raise BackendError(f"backend not ready: {doc!r}")

    for sub in ("images", "sem_maps", "instances"):
        (output_dir / sub).mkdir(parents=True, exist_ok=True)

    checkpoint_path = output_dir / "checkpoint.jsonl"
    completed: dict[str, list[TileRecord]] = {}
    if resume and checkpoint_path.exists():
        for line in checkpoint_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            entry = json.loads(line)
            completed[entry["image_id"]] = [
                _tile_record_from_checkpoint(d) for d in entry["tiles"]
            ]
        log.info("resuming: %d images already converted", len(completed))
    elif checkpoint_path.exists():
        checkpoint_path.unlink()

    cfg = recipe.prompt_config()
    parse_rejected = 0
    all_tiles: list[TileRecord] = []
    failed_total = 0
    considered_total = 0

    iterator: Iterable[tuple[str, Path, Path]] = inputs
    if progress:
        from tqdm import tqdm

        iterator = tqdm(inputs, desc="images", unit="img")

    with checkpoint_path.open("a", encoding="utf-8") as ckpt, ThreadPoolExecutor(
        max_workers=recipe.workers
    ) as pool:
        for image_id, img_path, label_path in iterator:
            if image_id in completed:
                all_tiles.extend(completed[image_id])
                for t in completed[image_id]:
                    failed_total += t.counts.failed
                    considered_total += t.counts.considered
                continue
            try:
                text = label_path.read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"unreadable input: {label_path} ({exc})") from exc
            rejects: list[str] = []
            try:
                anns = _parse_labels(text, recipe.input_format, recipe.table, rejects)
            except ParseError as exc:
                # Input that does not parse under the recipe's format is a
                # recipe/input mismatch; abort naming the file.
                raise ConfigError(f"unreadable input: {label_path} ({exc})") from exc
            parse_rejected += len(rejects)
            anns = _prepare_annotations(anns, recipe)
            pixels = _load_pixels(img_path)
            height, width = pixels.shape[:2]
            tiles = plan_tiles(width, height, recipe.tiling, image_id)
            futures = [
                pool.submit(
                    _process_tile, tile, pixels, anns, recipe, cfg, backend, output_dir
                )
                for tile in tiles
            ]
            records = [f.result() for f in futures]
            for rec in records:
                failed_total += rec.counts.failed
                considered_total += rec.counts.considered
            all_tiles.extend(records)
            ckpt.write(
                json.dumps(
                    {
                        "image_id": image_id,
                        "tiles": [_tile_record_to_checkpoint(r) for r in records],
                    },
                    sort_keys=True,
                )
                + "\n"
            )
            ckpt.flush()
            _check_budget(failed_total, considered_total)

    all_tiles.sort(key=lambda t: (t.source_image_id, t.tile_index))
    config = {
        "recipe": recipe.name,
        "input_format": recipe.input_format,
        "tile_size": recipe.tiling.tile_size,
        "stride": recipe.tiling.stride,
        "retention": recipe.tiling.retention,
        "small_image_mode": recipe.tiling.small_image_mode,
        "prompt_mode": recipe.prompt_mode.value,
        "mask_grid": list(recipe.mask_grid),
        "magnitude": recipe.magnitude,
        "derive_hbox": recipe.derive_hbox,
        "backend": backend.name,
        "seed": seed,
        "parse_rejected": parse_rejected,
    }
    manifest = DatasetManifest(
        dataset=recipe.name,
        categories=recipe.table,
        tiles=tuple(all_tiles),
        config=config,
        tool_version=__version__,
    )
    write_manifest(output_dir / "manifest.json", manifest)

    stats = compute_stats(manifest, output_dir)
    write_stats(output_dir / "stats.json", stats, recipe.table)

    checkpoint_path.unlink(missing_ok=True)

    reference = REFERENCE_TILE_COUNTS.get(recipe.name)
    if reference is not None:
        deviation = abs(len(manifest.tiles) - reference) / reference
        if deviation > 0.05:
            log.warning(
                "converted %d tiles for %s; reference run reports %d (%.1f%% off, "
                "crop stride is a free parameter)",
                len(manifest.tiles), recipe.name, reference, 100 * deviation,
            )
    return manifest


# ---------------------------------------------------------------------------
# Statistics.
# ---------------------------------------------------------------------------

DEFAULT_SIZE_EDGES = (0, 100, 500, 1000, 5000, 10000, 50000, 100000)


def mask_size_histogram(
    areas: Iterable[int], edges: Sequence[int] = DEFAULT_SIZE_EDGES
) -> tuple[int, ...]:
    """Counts per half-open bin [e_k, e_{k+1}); the last bin is unbounded.

    Values below edges[0] fall outside every bin and are not counted; the
    default edges start at 0 so non-negative areas are always covered.
    """
    edges = tuple(edges)
    if len(edges) < 1 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise MetricError(f"bin edges must be strictly increasing, got {edges}")
    counts = [0] * len(edges)
    for area in areas:
        i = bisect_right(edges, area) - 1
        if i >= 0:
            counts[i] += 1
    return tuple(counts)


@dataclass(frozen=True)
class StatsReport:
    """Category/pixel/instance/mask-size profile of a converted dataset.

    Pixel counts come from the semantic maps (after overlap resolution);
    instance counts and the size histogram come from valid instance masks
    only.
    """

    per_category_pixels: dict[int, int]
    per_category_instances: dict[int, int]
    histogram_edges: tuple[int, ...]
    histogram_counts: tuple[int, ...]
    total_valid: int
    total_invalid: int
    dropped: int
    failed: int

    def __post_init__(self):
        if sum(self.per_category_instances.values()) != self.total_valid:
            raise MetricError("per-category instance counts do not sum to the total")
        if sum(self.histogram_counts) != self.total_valid:
            raise MetricError("histogram counts do not sum to the valid-instance total")


def compute_stats(
    manifest: DatasetManifest,
    root: Path,
    edges: Sequence[int] = DEFAULT_SIZE_EDGES,
) -> StatsReport:
    """Recount everything from the written files (not the manifest totals)."""
    root = Path(root)
    pixels: dict[int, int] = {}
    instances: dict[int, int] = {}
    areas: list[int] = []
    total_valid = 0
    total_invalid = 0
    for tile in manifest.tiles:
        sem_path = root / tile.sem_map_file
        inst_path = root / tile.instances_file
        for p in (sem_path, inst_path):
            if not p.exists():
                raise ManifestError(f"missing mask file: {p}")
        sem = read_semantic_png(sem_path)
        values, value_counts = np.unique(sem.labels, return_counts=True)
        for v, c in zip(values, value_counts):
            if v != 0:
                pixels[int(v)] = pixels.get(int(v), 0) + int(c)
        _, recorded = read_instances_json(inst_path)
        for mask, category_id in recorded:
            if mask.valid:
                total_valid += 1
                instances[category_id] = instances.get(category_id, 0) + 1
                areas.append(mask.area)
            else:
                total_invalid += 1
    return StatsReport(
        per_category_pixels=pixels,
        per_category_instances=instances,
        histogram_edges=tuple(edges),
        histogram_counts=mask_size_histogram(areas, edges),
        total_valid=total_valid,
        total_invalid=total_invalid,
        dropped=sum(t.counts.dropped for t in manifest.tiles),
        failed=sum(t.counts.failed for t in manifest.tiles),
    )


def stats_to_json(stats: StatsReport, table: CategoryTable) -> dict:
    categories = []
    for entry in table:
        categories.append(
            {
                "id": entry.id,
                "name": entry.name,
                "abbreviation": entry.abbreviation,
                "pixels": stats.per_category_pixels.get(entry.id, 0),
                "instances": stats.per_category_instances.get(entry.id, 0),
            }
        )
    return {
        "per_category": categories,
        "mask_size_histogram": {
            "edges": list(stats.histogram_edges),
            "counts": list(stats.histogram_counts),
        },
        "totals": {
            "valid": stats.total_valid,
            "invalid": stats.total_invalid,
            "dropped": stats.dropped,
            "failed": stats.failed,
        },
    }


def write_stats(path: Path, stats: StatsReport, table: CategoryTable) -> None:
    path.write_text(
        json.dumps(stats_to_json(stats, table), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )


def validate_output(root: Path) -> list[str]:
    """Integrity check of a converted tree; returns a list of problems."""
    root = Path(root)
    problems: list[str] = []
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        return [f"missing manifest: {manifest_path}"]
    try:
        manifest = read_manifest(manifest_path, strict=True)
    except Exception as exc:
        return [f"manifest unreadable: {exc}"]
    for tile in manifest.tiles:
        img_path = root / tile.image_file
        if not img_path.exists():
            problems.append(f"missing tile image: {tile.image_file}")
        try:
            _, recorded = read_instances_json(root / tile.instances_file)
        except Exception as exc:
            problems.append(f"{tile.instances_file}: unreadable ({exc})")
            continue
        valid = sum(1 for m, _ in recorded if m.valid)
        invalid = len(recorded) - valid
        if (len(recorded), valid, invalid) != (
            tile.counts.instances, tile.counts.valid, tile.counts.invalid,
        ):
            problems.append(
                f"{tile.instances_file}: counts {len(recorded)}/{valid}/{invalid} "
                f"disagree with manifest {tile.counts.instances}/"
                f"{tile.counts.valid}/{tile.counts.invalid}"
            )
    try:
        compute_stats(manifest, root)
    except Exception as exc:
        problems.append(f"stats recount failed: {exc}")
    return problems
