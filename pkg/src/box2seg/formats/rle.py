"""Run-length coding of binary masks.

The normative layout: pixels are walked in column-major order and counts
alternate runs of 0s then 1s, always starting with the 0-run (a leading 0
when the first pixel is set). The encoder emits the canonical minimal
form; the decoder tolerates non-canonical counts as long as they sum to
height*width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import RleError


@dataclass(frozen=True)
class RleMask:
    """Run-length encoded binary mask of a height x width pixel grid."""

    height: int
    width: int
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if self.height <= 0 or self.width <= 0:
            raise RleError(f"mask dims must be positive: {self.height}x{self.width}")
        if any(c < 0 for c in self.counts):
            raise RleError(f"negative run length in {self.counts}")

    @property
    def area(self) -> int:
        """Number of set pixels (1-runs sit at odd count indices)."""
        return sum(self.counts[1::2])


def rle_encode(bitmask: np.ndarray) -> RleMask:
    """Encode a 2-D binary grid into its canonical run-length form."""
    arr = np.asarray(bitmask)
    if arr.ndim != 2 or arr.size == 0:
        raise RleError(f"expected a non-empty 2-D grid, got shape {arr.shape}")
    h, w = arr.shape
    flat = arr.ravel(order="F").astype(np.int8)
    boundaries = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [flat.size]])
    counts = (ends - starts).tolist()
    if flat[0]:
        counts.insert(0, 0)
    return RleMask(height=h, width=w, counts=tuple(counts))


def rle_decode(r: RleMask) -> np.ndarray:
    """Decode back to a boolean (height, width) grid; exact inverse of encode."""
    total = sum(r.counts)
    if total != r.height * r.width:
        raise RleError(
            f"counts sum to {total}, expected {r.height}x{r.width}={r.height * r.width}"
        )
    values = (np.arange(len(r.counts)) % 2).astype(bool)
    flat = np.repeat(values, r.counts)
    return flat.reshape((r.height, r.width), order="F")
