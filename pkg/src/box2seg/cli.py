"""Command-line entry point.

Data goes to stdout (--json for machine-readable form), progress and
diagnostics go to stderr, so runs compose in shell pipelines. Exit codes:
0 success, 1 validation/run failure, 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from .errors import Box2SegError, ConfigError
from .formats.manifest import read_manifest
from .geometry import PromptConfig, parse_combo
from .gtset import load_gt_set
from .metrics import run_ablation
from .pipeline import (
    compute_stats,
    convert_dataset,
    load_recipe,
    stats_to_json,
    validate_output,
)
from .segmenter import Backend, ErosionOracle, FillOracle, RemoteBackend
from .tiler import TilingPolicy

log = logging.getLogger("box2seg.cli")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


@dataclass(frozen=True)
class CliConfig:
    """Options shared by every subcommand, resolved from parsed args."""

    subcommand: str
    backend_spec: str | None
    workers: int
    seed: int
    as_json: bool
    log_level: str

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "CliConfig":
        return cls(
            subcommand=args.command,
            backend_spec=getattr(args, "backend", None),
            workers=getattr(args, "workers", 1),
            seed=getattr(args, "seed", 0),
            as_json=getattr(args, "json", False),
            log_level=args.log_level,
        )

    def make_backend(self) -> Backend:
        spec = self.backend_spec
        if spec is None:
            raise ConfigError("no --backend given")
        if spec.startswith(("http://", "https://")):
            return RemoteBackend(spec)
        if spec == "oracle:fill":
            return FillOracle()
        if spec == "oracle:erosion":
            return ErosionOracle(seed=self.seed)
        raise ConfigError(
            f"backend must be a URL, oracle:fill, or oracle:erosion, got {spec!r}"
        )


def _parse_mask_grid(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"mask grid must look like 256x256, got {text!r}")
    try:
        return (int(parts[0]), int(parts[1]))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="box2seg",
        description="Convert box-annotated detection datasets into "
        "segmentation datasets via a promptable backend.",
    )
    parser.add_argument(
        "--log-level",
        default="warning",
        choices=["debug", "info", "warning", "error"],
        help="diagnostic verbosity on stderr",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_convert = sub.add_parser("convert", help="convert a dataset end to end")
    p_convert.add_argument("--recipe", required=True,
                           help="built-in recipe name or recipe JSON path")
    p_convert.add_argument("--input", required=True, type=Path,
                           help="dataset root with images/ and labels/")
    p_convert.add_argument("--output", required=True, type=Path)
    p_convert.add_argument("--backend", required=True,
                           help="server URL, oracle:fill, or oracle:erosion")
    p_convert.add_argument("--workers", type=int, default=4)
    p_convert.add_argument("--tile-size", type=int, default=None)
    p_convert.add_argument("--stride", type=int, default=None)
    p_convert.add_argument("--retention", type=float, default=None)
    p_convert.add_argument("--mask-grid", type=_parse_mask_grid, default=None)
    p_convert.add_argument("--magnitude", type=float, default=None)
    p_convert.add_argument("--derive-hbox", action="store_true",
                           help="derive horizontal boxes from rotated ones when absent")
    p_convert.add_argument("--seed", type=int, default=0)
    p_convert.add_argument("--resume", action="store_true",
                           help="continue from an interrupted run's checkpoint")
    p_convert.add_argument("--json", action="store_true")
    p_convert.set_defaults(func=cmd_convert)

    p_ablate = sub.add_parser("ablate", help="score prompt combinations on a GT set")
    p_ablate.add_argument("--gt", required=True, type=Path,
                          help="ground-truth set root (images/ and gt/)")
    p_ablate.add_argument("--backend", required=True)
    p_ablate.add_argument("--combos", required=True,
                          help="comma-separated combo ids, e.g. hbox,cp,cp+hbox")
    p_ablate.add_argument("--mask-grid", type=_parse_mask_grid, default=(256, 256))
    p_ablate.add_argument("--magnitude", type=float, default=1000.0)
    p_ablate.add_argument("--multimask", action="store_true")
    p_ablate.add_argument("--seed", type=int, default=0)
    p_ablate.add_argument("--json", action="store_true")
    p_ablate.set_defaults(func=cmd_ablate)

    p_stats = sub.add_parser("stats", help="recount statistics from a converted tree")
    p_stats.add_argument("--manifest", required=True, type=Path,
                         help="manifest.json path or the output directory")
    p_stats.add_argument("--json", action="store_true")
    p_stats.set_defaults(func=cmd_stats)

    p_validate = sub.add_parser("validate", help="integrity-check a converted tree")
    p_validate.add_argument("--manifest", required=True, type=Path,
                            help="manifest.json path or the output directory")
    p_validate.add_argument("--json", action="store_true")
    p_validate.set_defaults(func=cmd_validate)

    return parser


def _manifest_root(path: Path) -> Path:
    return path.parent if path.is_file() else path


def cmd_convert(args: argparse.Namespace) -> int:
    cli = CliConfig.from_args(args)
    recipe = load_recipe(args.recipe)
    tiling = recipe.tiling
    if args.tile_size is not None or args.stride is not None or args.retention is not None:
        tiling = TilingPolicy(
            tile_size=args.tile_size if args.tile_size is not None else tiling.tile_size,
            stride=args.stride if args.stride is not None else tiling.stride,
            retention=args.retention if args.retention is not None else tiling.retention,
        )
    overrides = {"tiling": tiling, "workers": args.workers}
    if args.mask_grid is not None:
        overrides["mask_grid"] = args.mask_grid
    if args.magnitude is not None:
        overrides["magnitude"] = args.magnitude
    if args.derive_hbox:
        overrides["derive_hbox"] = True
    recipe = dataclasses.replace(recipe, **overrides)
    backend = cli.make_backend()
    manifest = convert_dataset(
        recipe,
        args.input,
        args.output,
        backend,
        resume=args.resume,
        progress=sys.stderr.isatty(),
        seed=cli.seed,
    )
    summary = manifest.summary()
    if cli.as_json:
        doc = {"manifest": str(Path(args.output) / "manifest.json"), "summary": summary}
        print(json.dumps(doc, sort_keys=True))
    else:
        print(f"converted {summary['tiles']} tiles from {args.input}")
        print(
            f"instances: {summary['valid']} valid, {summary['invalid']} invalid, "
            f"{summary['dropped']} dropped, {summary['failed']} failed"
        )
        print(f"manifest: {Path(args.output) / 'manifest.json'}")
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    cli = CliConfig.from_args(args)
    combos = []
    for token in args.combos.split(","):
        token = token.strip()
        if token:
            combos.append(
                PromptConfig(
                    combo=parse_combo(token),
                    mask_grid=args.mask_grid,
                    magnitude=args.magnitude,
                    multimask=args.multimask,
                )
            )
    if not combos:
        raise ConfigError("--combos named no prompt combinations")
    backend = cli.make_backend()
    gt_images = load_gt_set(args.gt)
    report = run_ablation(gt_images, combos, backend, dataset=str(args.gt))
    if cli.as_json:
        print(json.dumps(report.to_json(), sort_keys=True))
    else:
        print(report.format_table())
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    cli = CliConfig.from_args(args)
    root = _manifest_root(args.manifest)
    manifest = read_manifest(root / "manifest.json")
    stats = compute_stats(manifest, root)
    doc = stats_to_json(stats, manifest.categories)
    if cli.as_json:
        print(json.dumps(doc, sort_keys=True))
    else:
        print(f"dataset: {manifest.dataset} ({len(manifest.tiles)} tiles)")
        totals = doc["totals"]
        print(
            f"instances: {totals['valid']} valid, {totals['invalid']} invalid, "
            f"{totals['dropped']} dropped, {totals['failed']} failed"
        )
        for row in doc["per_category"]:
            if row["instances"] or row["pixels"]:
                print(
                    f"  {row['abbreviation']:>4} {row['name']:<28} "
                    f"{row['instances']:>8} instances {row['pixels']:>12} px"
                )
        hist = doc["mask_size_histogram"]
        print(f"mask sizes: edges={hist['edges']} counts={hist['counts']}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    cli = CliConfig.from_args(args)
    root = _manifest_root(args.manifest)
    problems = validate_output(root)
    if cli.as_json:
        print(json.dumps({"ok": not problems, "problems": problems}, sort_keys=True))
    else:
        for p in problems:
            print(p, file=sys.stderr)
        print("ok" if not problems else f"{len(problems)} problem(s) found")
    return EXIT_OK if not problems else EXIT_FAILURE


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, args.log_level.upper()),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        print("interrupted; partial progress is checkpointed, rerun with --resume",
              file=sys.stderr)
        return EXIT_FAILURE
    except Box2SegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
