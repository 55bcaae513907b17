"""Shared fixtures and independent oracle helpers for the test suite.

The helpers here deliberately re-derive results through a different code
path than the library (per-pixel counting, scipy morphology, crossing-number
point tests) so the tests act as oracles rather than mirrors.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    print_blob=True,
)
settings.load_profile("suite")


# ---------------------------------------------------------------------------
# Independent oracles
# ---------------------------------------------------------------------------


def brute_iou(a: np.ndarray, b: np.ndarray) -> tuple[int, int]:
    """Intersection and union by direct per-pixel counting (python loop free,
    but no shared code with the metrics module)."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    inter = int(np.count_nonzero(a & b))
    union = int(np.count_nonzero(a | b))
    return inter, union


def crossing_number_inside(px: float, py: float, corners) -> bool:
    """Point-in-polygon by the classic crossing-number rule (independent of
    the library's half-plane implementation)."""
    n = len(corners)
    inside = False
    for i in range(n):
        x1, y1 = corners[i]
        x2, y2 = corners[(i + 1) % n]
        if (y1 > py) != (y2 > py):
            xcross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < xcross:
                inside = not inside
    return inside


def random_bitmask(rng: np.random.Generator, height: int, width: int,
                   density: float = 0.4) -> np.ndarray:
    return rng.random((height, width)) < density


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def sior_table():
    from box2seg.formats.records import builtin_table

    return builtin_table("SIOR")


def make_voc_input(root: Path, n_images: int = 3, seed: int = 0,
                   size: int = 96) -> None:
    """Write a small VOC-style input tree (images/ + labels/) with axis-
    aligned boxes drawn from the 20-category roster."""
    from PIL import Image

    rng = np.random.default_rng(seed)
    names = ["bridge", "ship", "vehicle", "harbor", "stadium"]
    (root / "images").mkdir(parents=True)
    (root / "labels").mkdir(parents=True)
    for n in range(n_images):
        pixels = rng.integers(0, 255, size=(size, size), dtype=np.uint8)
        Image.fromarray(pixels, mode="L").save(root / "images" / f"img{n:02d}.png")
        objects = []
        for k in range(int(rng.integers(2, 5))):
            w = int(rng.integers(8, size // 3))
            h = int(rng.integers(8, size // 3))
            x0 = int(rng.integers(0, size - w))
            y0 = int(rng.integers(0, size - h))
            name = names[(n + k) % len(names)]
            objects.append(
                f"<object><name>{name}</name><bndbox>"
                f"<xmin>{x0}</xmin><ymin>{y0}</ymin>"
                f"<xmax>{x0 + w}</xmax><ymax>{y0 + h}</ymax>"
                f"</bndbox></object>"
            )
        (root / "labels" / f"img{n:02d}.xml").write_text(
            "<annotation>" + "".join(objects) + "</annotation>"
        )


@pytest.fixture()
def voc_input(tmp_path: Path) -> Path:
    src = tmp_path / "input"
    make_voc_input(src)
    return src


@pytest.fixture(scope="session")
def converted_tree(tmp_path_factory) -> Path:
    """One small conversion with the fill oracle, shared across read-only
    tests (manifest/stats/validate consumers)."""
    import dataclasses

    from box2seg.pipeline import builtin_recipe, convert_dataset
    from box2seg.segmenter import FillOracle
    from box2seg.tiler import TilingPolicy

    base = tmp_path_factory.mktemp("converted")
    src = base / "input"
    make_voc_input(src, n_images=3, seed=7)
    out = base / "output"
    recipe = dataclasses.replace(
        builtin_recipe("SIOR"),
        tiling=TilingPolicy(tile_size=64, stride=48),
        workers=2,
    )
    convert_dataset(recipe, src, out, FillOracle())
    return out
