"""Shared helpers: synthetic PNG images and request builders."""

from __future__ import annotations

import base64
import io

import numpy as np
import pytest
from PIL import Image


def png_b64(pixels: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(pixels).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def square_image(size: int = 64, lo: int = 10, hi: int = 240,
                 box: tuple[int, int, int, int] = (16, 16, 48, 48)) -> np.ndarray:
    """Dark canvas with one bright square; the correct mask is known."""
    img = np.full((size, size, 3), lo, dtype=np.uint8)
    x0, y0, x1, y1 = box
    img[y0:y1, x0:x1] = hi
    return img


@pytest.fixture()
def client():
    from fastapi.testclient import TestClient

    from refserver.app import create_app
    from refserver.config import ServerConfig

    app = create_app(ServerConfig(max_batch=16))
    with TestClient(app) as c:
        yield c
