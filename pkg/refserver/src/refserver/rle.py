"""Column-major run-length encoding of binary masks.

The wire format: flatten the mask column by column, then store run lengths
starting with the zero-run (which may be 0 when the first pixel is set).
The minimal form is canonical — no interior zero-length runs — and every
encoder must produce it bit-for-bit; a shared test-vector file in the test
suite pins this implementation to the client's.
"""

from __future__ import annotations

import numpy as np

from .errors import RequestError


def encode(mask: np.ndarray) -> list[int]:
    """Binary mask -> canonical run lengths (column-major, zero-run first)."""
    grid = np.asarray(mask, dtype=bool)
    if grid.ndim != 2:
        raise RequestError(f"mask must be 2-D, got shape {grid.shape}")
    flat = grid.flatten(order="F")
    if flat.size == 0:
        raise RequestError("mask must not be empty")
    # Boundaries between runs sit where adjacent pixels differ.
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], changes, [flat.size]))
    counts = np.diff(edges).tolist()
    if flat[0]:
        counts.insert(0, 0)
    return [int(c) for c in counts]


def decode(counts: list[int], height: int, width: int) -> np.ndarray:
    """Run lengths -> binary mask; rejects non-canonical or ill-sized input."""
    if height <= 0 or width <= 0:
        raise RequestError(f"mask dims must be positive, got {height}x{width}")
    if not counts:
        raise RequestError("run-length payload is empty")
    if any(c < 0 for c in counts):
        raise RequestError(f"negative run length in {counts[:8]}...")
    if any(c == 0 for c in counts[1:]):
        raise RequestError("zero-length interior run: payload is not canonical")
    total = sum(counts)
    if total != height * width:
        raise RequestError(
            f"run lengths sum to {total}, expected {height * width} "
            f"for a {height}x{width} mask"
        )
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for run in counts:
        if value:
            flat[pos:pos + run] = True
        pos += run
        value = not value
    return flat.reshape((width, height)).T
