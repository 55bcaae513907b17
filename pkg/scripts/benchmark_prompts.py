#!/usr/bin/env python3
"""Score every prompt combination against a live segmentation server.

Runs the five standard single-prompt configurations (H-Box, RH-Box,
R-Box-M, H-Box-M, CP) over a prepared ground-truth set and prints the
score table, optionally comparing against expected values with a
tolerance.  Use scripts/prepare_hrsc_gtset.py (or make_synthetic_set.py)
to produce the ground-truth directory and the sibling `refserver` package
to stand up a compatible server.

Example:
    python scripts/benchmark_prompts.py --gt /data/hrsc_gt \
        --backend http://localhost:8500 \
        --expect hbox=89.97:79.40 --expect rhbox=88.85:76.42 --tolerance 1.5
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from box2seg.geometry import PromptConfig, parse_combo
from box2seg.gtset import load_gt_set
from box2seg.metrics import run_ablation
from box2seg.segmenter import RemoteBackend

DEFAULT_COMBOS = "hbox,rhbox,rbox-m,hbox-m,cp"


def _parse_expectation(text: str) -> tuple[str, float, float]:
    try:
        combo, scores = text.split("=")
        inst, pixel = scores.split(":")
        return combo.strip(), float(inst), float(pixel)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected COMBO=INST:PIXEL (percent scores), got {text!r}"
        )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--gt", required=True, type=Path,
                        help="prepared ground-truth set")
    parser.add_argument("--backend", required=True,
                        help="http(s) URL of the segmentation server")
    parser.add_argument("--combos", default=DEFAULT_COMBOS)
    parser.add_argument("--timeout", type=float, default=120.0)
    parser.add_argument("--expect", action="append", type=_parse_expectation,
                        default=[], metavar="COMBO=INST:PIXEL",
                        help="expected percent scores; may repeat")
    parser.add_argument("--tolerance", type=float, default=1.5,
                        help="allowed absolute deviation in points")
    args = parser.parse_args(argv)

    images = load_gt_set(args.gt)
    combos = [
        PromptConfig(combo=parse_combo(token.strip()))
        for token in args.combos.split(",") if token.strip()
    ]
    backend = RemoteBackend(args.backend, timeout=args.timeout)
    report = run_ablation(images, combos, backend, dataset=str(args.gt))
    print(report.format_table())

    by_id = {e.combo_id: e for e in report.entries}
    failures = 0
    for combo, want_inst, want_pixel in args.expect:
        entry = by_id.get(combo)
        if entry is None:
            print(f"EXPECT {combo}: combo was not run", file=sys.stderr)
            failures += 1
            continue
        got_inst = entry.result.miou_instance * 100
        got_pixel = entry.result.miou_pixel * 100
        ok = (abs(got_inst - want_inst) <= args.tolerance
              and abs(got_pixel - want_pixel) <= args.tolerance)
        status = "ok" if ok else "FAIL"
        print(f"EXPECT {combo}: got {got_inst:.2f}/{got_pixel:.2f}, "
              f"want {want_inst:.2f}/{want_pixel:.2f} ±{args.tolerance} -> {status}")
        failures += 0 if ok else 1
    return 0 if failures == 0 else 1


if __name__ == "__main__":
    raise SystemExit(main())
