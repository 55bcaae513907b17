#!/usr/bin/env python3
"""Emit the shared RLE conformance vectors consumed by the refserver tests.

Writes a JSON file of (dims, packed pixels, expected counts) triples produced
by this package's mask encoder.  Any other implementation of the wire
protocol can use the file to prove byte-level agreement without importing
this package.  The output is deterministic; regenerate only when the
normative encoding itself changes (it shouldn't).

Example:
    python scripts/make_rle_vectors.py --output refserver/tests/data/rle_vectors.json
"""

from __future__ import annotations

import argparse
import base64
import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from box2seg.formats.rle import rle_encode


def _vector(grid: np.ndarray) -> dict:
    r = rle_encode(grid)
    return {
        "height": r.height,
        "width": r.width,
        "pixels_b64": base64.b64encode(
            np.packbits(grid.astype(np.uint8), axis=None)
        ).decode("ascii"),
        "counts": list(r.counts),
    }


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--output", required=True, type=Path)
    parser.add_argument("--cases", type=int, default=200)
    parser.add_argument("--seed", type=int, default=12345)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    vectors = [
        _vector(np.zeros((1, 1), dtype=bool)),
        _vector(np.ones((1, 1), dtype=bool)),
        _vector(np.zeros((7, 3), dtype=bool)),
        _vector(np.ones((3, 7), dtype=bool)),
        _vector(np.eye(5, dtype=bool)),
    ]
    single = np.zeros((4, 4), dtype=bool)
    single[1, 0] = True
    vectors.append(_vector(single))
    while len(vectors) < args.cases:
        h = int(rng.integers(1, 64))
        w = int(rng.integers(1, 64))
        density = float(rng.uniform(0.0, 1.0))
        vectors.append(_vector(rng.random((h, w)) < density))

    args.output.parent.mkdir(parents=True, exist_ok=True)
    args.output.write_text(json.dumps(vectors, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {len(vectors)} vectors to {args.output}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
