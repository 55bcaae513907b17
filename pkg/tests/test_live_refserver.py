"""Cross-package integration: the HTTP client against the reference server.

Spins up the sibling `refserver` package (stub model) on an ephemeral port
inside this process and drives it through the same client code the
conversion pipeline uses.  The two packages interact only over the wire —
neither imports the other.  Skips when refserver is not installed.
"""

from __future__ import annotations

import dataclasses
import socket
import threading
import time

import numpy as np
import pytest

refserver_app = pytest.importorskip(
    "refserver.app", reason="refserver package is not installed"
)
uvicorn = pytest.importorskip("uvicorn")

from box2seg.formats.rle import rle_decode
from box2seg.geometry import HBox, PromptConfig, PromptSet, parse_combo
from box2seg.gtset import synthesize_box_set
from box2seg.metrics import run_ablation
from box2seg.pipeline import builtin_recipe, convert_dataset, validate_output
from box2seg.segmenter import RemoteBackend, SegmentRequest, segment
from box2seg.tiler import TilingPolicy

from conftest import make_voc_input


@pytest.fixture(scope="module")
def server_url():
    from refserver.config import ServerConfig

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    app = refserver_app.create_app(ServerConfig(max_batch=256, port=port))
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("reference server did not start within 10s")
        time.sleep(0.02)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def test_health_over_the_wire(server_url):
    doc = RemoteBackend(server_url).health()
    assert doc == {"model": "stub", "ready": True}


def test_box_prompt_round_trip(server_url):
    image = np.full((48, 48), 15, dtype=np.uint8)
    image[10:30, 10:30] = 230
    req = SegmentRequest(
        image=image,
        prompt_sets=(PromptSet(box=HBox(10, 10, 30, 30), combo_id="hbox"),),
    )
    resp = segment(RemoteBackend(server_url), req)
    assert len(resp.results) == 1
    best = max(resp.results[0], key=lambda c: c.score)
    decoded = rle_decode(best.rle)
    truth = np.zeros((48, 48), dtype=bool)
    truth[10:30, 10:30] = True
    inter = np.count_nonzero(decoded & truth)
    union = np.count_nonzero(decoded | truth)
    assert inter / union > 0.9
    assert 0.0 <= best.score <= 1.0


def test_ablation_against_live_server(server_url):
    # One instance per image: the bright box interior is uniform, so the
    # stub's brightness refinement keeps exactly the prompted region and
    # the box combo scores a perfect 1.0 over the wire.
    images = synthesize_box_set(n_images=6, instances_per_image=1, seed=21)
    report = run_ablation(
        images,
        [PromptConfig(combo=parse_combo("hbox"))],
        RemoteBackend(server_url),
    )
    entry = report.entries[0]
    assert entry.result.n == 6
    assert entry.failed == 0
    assert entry.result.miou_instance == 1.0
    assert entry.result.miou_pixel == 1.0


def test_conversion_against_live_server(server_url, tmp_path):
    src = tmp_path / "input"
    make_voc_input(src, n_images=2, seed=9)
    out = tmp_path / "out"
    recipe = dataclasses.replace(
        builtin_recipe("sior"),
        tiling=TilingPolicy(tile_size=64, stride=48),
        workers=2,
    )
    manifest = convert_dataset(recipe, src, out, RemoteBackend(server_url))
    assert len(manifest.tiles) == 8
    assert manifest.config["backend"].startswith("remote:")
    assert validate_output(out) == []
