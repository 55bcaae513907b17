#!/usr/bin/env python3
"""End-to-end smoke run: synthesize ground truth, ablate with the oracles.

Builds a small synthetic set, runs the prompt-combination ablation against
both built-in oracle backends, and prints the two tables.  The fill oracle
must score exactly 100.00/100.00 on the box combo; the erosion oracle must
land strictly below it.  Exits nonzero if either invariant is violated, so
this doubles as an installation check.

Example:
    python scripts/run_oracle_ablation.py --combos hbox,rhbox,cp --seed 5
"""

from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from box2seg.geometry import PromptConfig, parse_combo
from box2seg.gtset import load_gt_set, synthesize_box_set, write_gt_set
from box2seg.metrics import run_ablation
from box2seg.segmenter import ErosionOracle, FillOracle


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--gt", type=Path, default=None,
                        help="existing ground-truth set; a synthetic one is "
                             "generated when omitted")
    parser.add_argument("--images", type=int, default=10)
    parser.add_argument("--instances", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--combos", default="hbox,rhbox,cp",
                        help="comma-separated prompt combinations")
    args = parser.parse_args(argv)

    combos = [
        PromptConfig(combo=parse_combo(token.strip()))
        for token in args.combos.split(",") if token.strip()
    ]

    if args.gt is not None:
        images = load_gt_set(args.gt)
        label = str(args.gt)
    else:
        images = synthesize_box_set(
            n_images=args.images, instances_per_image=args.instances,
            seed=args.seed, include_rbox=True,
        )
        with tempfile.TemporaryDirectory() as tmp:
            # round-trip through disk so the run exercises the file layer too
            write_gt_set(Path(tmp), images)
            images = load_gt_set(Path(tmp))
        label = f"synthetic({args.images}x{args.instances}, seed={args.seed})"

    ok = True
    for backend in (FillOracle(), ErosionOracle()):
        report = run_ablation(images, combos, backend, dataset=label)
        print(f"backend: {backend.name}")
        print(report.format_table())
        print()
        by_id = {e.combo_id: e for e in report.entries}
        box_entry = by_id.get("hbox")
        if box_entry is not None:
            inst = box_entry.result.miou_instance
            if isinstance(backend, FillOracle) and inst != 1.0:
                print(f"FAIL: fill oracle scored {inst} on the box combo, wanted 1.0",
                      file=sys.stderr)
                ok = False
            if isinstance(backend, ErosionOracle) and not inst < 1.0:
                print(f"FAIL: erosion oracle scored {inst}, expected below 1.0",
                      file=sys.stderr)
                ok = False
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
