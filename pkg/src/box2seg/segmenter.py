"""Backend contract for promptable segmentation plus two in-process oracles.

Backends take a batch of prompt sets against one tile and return one
candidate list per prompt set, order-aligned with the request. The two
oracles exist for testing: "fill" returns the prompt region exactly, and
"erosion" returns a deterministically degraded version of it, so metric
plumbing can be exercised with IoU below 1 without a real model.
"""

from __future__ import annotations

import base64
import io
import math
import threading
import time
import uuid
from dataclasses import dataclass, replace
from typing import Callable, Protocol, Sequence

import numpy as np
import requests
from PIL import Image

from .errors import MaskError, ProtocolError, TransportError
from .formats.masks import InstanceMask
from .formats.rle import RleMask, rle_decode, rle_encode
from .geometry import HBox, MaskPrompt, PromptSet


@dataclass(frozen=True, eq=False)
class SegmentRequest:
    """One tile image plus the prompt sets to segment on it."""

    image: np.ndarray
    prompt_sets: tuple[PromptSet, ...]
    multimask: bool = False

    def __post_init__(self):
        arr = np.asarray(self.image)
        if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] not in (1, 3)):
            raise MaskError(f"tile image must be HxW or HxWx{{1,3}}, got {arr.shape}")
        object.__setattr__(self, "image", arr)
        object.__setattr__(self, "prompt_sets", tuple(self.prompt_sets))
        height, width = arr.shape[:2]
        for i, ps in enumerate(self.prompt_sets):
            if ps.point is not None and not (
                0.0 <= ps.point.x <= width and 0.0 <= ps.point.y <= height
            ):
                raise MaskError(
                    f"prompt {i}: point ({ps.point.x}, {ps.point.y}) "
                    f"outside {width}x{height} tile"
                )
            if ps.box is not None and not (
                0.0 <= ps.box.x_min and ps.box.x_max <= width
                and 0.0 <= ps.box.y_min and ps.box.y_max <= height
            ):
                raise MaskError(f"prompt {i}: box {ps.box} outside {width}x{height} tile")

    @property
    def height(self) -> int:
        return int(self.image.shape[0])

    @property
    def width(self) -> int:
        return int(self.image.shape[1])


@dataclass(frozen=True)
class MaskCandidate:
    rle: RleMask
    score: float

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise MaskError(f"candidate score must be finite, got {self.score}")
        if not 0.0 <= self.score <= 1.0:
            raise MaskError(f"candidate score {self.score} outside [0, 1]")

    @property
    def area(self) -> int:
        return self.rle.area


@dataclass(frozen=True)
class SegmentResponse:
    """One candidate list per prompt set; empty list = backend failed there."""

    height: int
    width: int
    results: tuple[tuple[MaskCandidate, ...], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "results", tuple(tuple(cands) for cands in self.results)
        )
        for i, cands in enumerate(self.results):
            for c in cands:
                if c.rle.height != self.height or c.rle.width != self.width:
                    raise MaskError(
                        f"result {i}: candidate is {c.rle.height}x{c.rle.width}, "
                        f"tile is {self.height}x{self.width}"
                    )


class Backend(Protocol):
    name: str

    def segment(self, req: SegmentRequest) -> SegmentResponse: ...


def segment(backend: Backend, req: SegmentRequest) -> SegmentResponse:
    """Run one request and enforce request/response alignment."""
    resp = backend.segment(req)
    if len(resp.results) != len(req.prompt_sets):
        raise ProtocolError(
            f"backend returned {len(resp.results)} results "
            f"for {len(req.prompt_sets)} prompt sets"
        )
    if resp.height != req.height or resp.width != req.width:
        raise ProtocolError(
            f"backend answered {resp.height}x{resp.width} "
            f"for a {req.height}x{req.width} tile"
        )
    return resp


# ---------------------------------------------------------------------------
# Prompt regions and the two test oracles.
# ---------------------------------------------------------------------------

DEFAULT_POINT_RADIUS = 8.0


def _box_region(box: HBox, height: int, width: int) -> np.ndarray:
    cols = np.arange(width, dtype=np.float64) + 0.5
    rows = np.arange(height, dtype=np.float64) + 0.5
    in_x = (cols >= box.x_min) & (cols <= box.x_max)
    in_y = (rows >= box.y_min) & (rows <= box.y_max)
    return np.outer(in_y, in_x)


def _mask_region(mask: MaskPrompt, height: int, width: int) -> np.ndarray:
    # The prompt grid spans the whole tile; map each pixel center to its cell.
    gh, gw = mask.height, mask.width
    cols = np.minimum(((np.arange(width) + 0.5) * gw / width).astype(int), gw - 1)
    rows = np.minimum(((np.arange(height) + 0.5) * gh / height).astype(int), gh - 1)
    return mask.positive[np.ix_(rows, cols)]

def _point_region(x: float, y: float, radius: float, height: int, width: int) -> np.ndarray:
    cols = np.arange(width, dtype=np.float64) + 0.5
    rows = np.arange(height, dtype=np.float64) + 0.5
    dx2 = (cols - x) ** 2
    dy2 = (rows - y) ** 2
    return dy2[:, None] + dx2[None, :] <= radius * radius


def prompt_region(ps: PromptSet, height: int, width: int,
                  point_radius: float = DEFAULT_POINT_RADIUS) -> np.ndarray:
    """The pixel region a prompt set designates: box, else mask, else point disc."""
    if ps.box is not None:
        return _box_region(ps.box, height, width)
    if ps.mask is not None:
        return _mask_region(ps.mask, height, width)
    return _point_region(ps.point.x, ps.point.y, point_radius, height, width)


def erode(mask: np.ndarray, radius: int) -> np.ndarray:
    """Binary erosion by a (2r+1)^2 square element with a zero border."""
    grid = np.asarray(mask, dtype=bool)
    if radius <= 0:
        return grid.copy()
    h, w = grid.shape
    padded = np.zeros((h + 2 * radius, w + 2 * radius), dtype=bool)
    padded[radius:radius + h, radius:radius + w] = grid
    out = np.ones((h, w), dtype=bool)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            out &= padded[radius + dy:radius + dy + h, radius + dx:radius + dx + w]
    return out


@dataclass(frozen=True)
class FillOracle:
    """Returns the prompt region itself with score 1.0."""

    point_radius: float = DEFAULT_POINT_RADIUS
    name: str = "oracle:fill"

    def segment(self, req: SegmentRequest) -> SegmentResponse:
        results = []
        for ps in req.prompt_sets:
            region = prompt_region(ps, req.height, req.width, self.point_radius)
            results.append((MaskCandidate(rle=rle_encode(region), score=1.0),))
        return SegmentResponse(height=req.height, width=req.width,
                               results=tuple(results))


@dataclass(frozen=True)
class ErosionOracle:
    """Returns the prompt region eroded by a fixed radius with a fixed score.

    Fully deterministic: the seed is recorded configuration, and identical
    (image dims, prompt, seed) always produce the identical mask.
    """

    seed: int = 42
    radius: int = 1
    score: float = 0.9
    point_radius: float = DEFAULT_POINT_RADIUS
    name: str = "oracle:erosion"

    def segment(self, req: SegmentRequest) -> SegmentResponse:
        results = []
        for ps in req.prompt_sets:
            region = prompt_region(ps, req.height, req.width, self.point_radius)
            results.append(
                (MaskCandidate(rle=rle_encode(erode(region, self.radius)),
                               score=self.score),)
            )
        return SegmentResponse(height=req.height, width=req.width,
                               results=tuple(results))


# ---------------------------------------------------------------------------
# Candidate selection and validity.
# ---------------------------------------------------------------------------

def select_mask(candidates: Sequence[MaskCandidate]) -> InstanceMask | None:
    """Pick one candidate: highest score, then larger area, then input order.

    An RLE tie-break sits before input order so that permuting the list
    never changes the selected mask's payload.
    """
    if not candidates:
        return None
    best_i = min(
        range(len(candidates)),
        key=lambda i: (
            -candidates[i].score,
            -candidates[i].area,
            candidates[i].rle.counts,
            i,
        ),
    )
    chosen = candidates[best_i]
    grid = rle_decode(chosen.rle)
    mask = InstanceMask.from_bitmap(grid, score=chosen.score)
    if mask.rle != chosen.rle:
        raise MaskError("candidate RLE is not in canonical form")
    return mask


def validate_mask(mask: InstanceMask, prompt_box: HBox, dims: tuple[int, int]) -> bool:
    """Valid iff nonempty and its 1-pixels intersect the prompt box."""
    height, width = int(dims[0]), int(dims[1])
    if mask.rle.height != height or mask.rle.width != width:
        raise MaskError(
            f"mask dims {mask.rle.height}x{mask.rle.width} "
            f"do not match tile {height}x{width}"
        )
    if mask.area == 0:
        return False
    if mask.bbox.intersect(prompt_box) is None:
        return False
    region = _box_region(prompt_box, height, width)
    return bool((mask.decode() & region).any())


# ---------------------------------------------------------------------------
# Wire-protocol client.
# ---------------------------------------------------------------------------

def _png_b64(image: np.ndarray) -> str:
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        raise MaskError(f"tile pixels must be uint8 for transport, got {arr.dtype}")
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    img = Image.fromarray(arr)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _prompt_to_json(ps: PromptSet) -> dict:
    point = None
    if ps.point is not None:
        point = {"x": ps.point.x, "y": ps.point.y, "label": 1}
    box = None
    if ps.box is not None:
        box = [ps.box.x_min, ps.box.y_min, ps.box.x_max, ps.box.y_max]
    mask = None
    if ps.mask is not None:
        counts = rle_encode(ps.mask.positive).counts
        mask = {
            "width": ps.mask.width,
            "height": ps.mask.height,
            "magnitude": ps.mask.magnitude,
            "positive_rle": [int(c) for c in counts],
        }
    return {"point": point, "box": box, "mask": mask}


class RemoteBackend:
    """Client for an external segmentation server speaking the wire protocol.

    Transport failures are retried with exponential backoff (3 attempts,
    starting at 1 s); anything structurally wrong in an answer raises
    ProtocolError immediately.
    """

    def __init__(
        self,
        base_url: str,
        timeout: float = 60.0,
        attempts: int = 3,
        backoff: float = 1.0,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.attempts = attempts
        self.backoff = backoff
        self._sleep = sleeper
        self._local = threading.local()
        self.name = f"remote:{self.base_url}"

    def _session(self) -> requests.Session:
        if not hasattr(self._local, "session"):
            self._local.session = requests.Session()
        return self._local.session

    def _post(self, path: str, payload: dict) -> dict:
        url = f"{self.base_url}{path}"
        delay = self.backoff
        last: Exception | None = None
        for attempt in range(self.attempts):
            if attempt:
                self._sleep(delay)
                delay *= 2.0
            try:
                resp = self._session().post(url, json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                last = exc
                continue
            if resp.status_code >= 500:
                last = TransportError(f"{url}: server error {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise ProtocolError(f"{url}: unexpected status {resp.status_code}")
            try:
                return resp.json()
            except ValueError as exc:
                raise ProtocolError(f"{url}: non-JSON response ({exc})") from exc
        raise TransportError(
            f"{url}: transport failed after {self.attempts} attempts ({last})"
        )

    def health(self) -> dict:
        url = f"{self.base_url}/v1/health"
        try:
            resp = self._session().get(url, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"{url}: {exc}") from exc
        if resp.status_code != 200:
            raise ProtocolError(f"{url}: unexpected status {resp.status_code}")
        try:
            doc = resp.json()
        except ValueError as exc:
            raise ProtocolError(f"{url}: non-JSON response ({exc})") from exc
        if not isinstance(doc, dict) or "model" not in doc or "ready" not in doc:
            raise ProtocolError(f"{url}: malformed health document {doc!r}")
        return doc

    def segment(self, req: SegmentRequest) -> SegmentResponse:
        if not req.prompt_sets:
            return SegmentResponse(height=req.height, width=req.width, results=())
        request_id = uuid.uuid4().hex
        payload = {
            "id": request_id,
            "image_png_b64": _png_b64(req.image),
            "multimask": bool(req.multimask),
            "prompts": [_prompt_to_json(ps) for ps in req.prompt_sets],
        }
        doc = self._post("/v1/segment", payload)
        return self._parse_response(doc, request_id, req)

    def _parse_response(
        self, doc: dict, request_id: str, req: SegmentRequest
    ) -> SegmentResponse:
        if not isinstance(doc, dict):
            raise ProtocolError(f"response is not an object: {type(doc).__name__}")
        if doc.get("id") != request_id:
            raise ProtocolError(
                f"response id {doc.get('id')!r} does not echo request id {request_id!r}"
            )
        results_doc = doc.get("results")
        if not isinstance(results_doc, list) or len(results_doc) != len(req.prompt_sets):
            got = len(results_doc) if isinstance(results_doc, list) else "none"
            raise ProtocolError(
                f"expected {len(req.prompt_sets)} results, got {got}"
            )
        results = []
        for i, entry in enumerate(results_doc):
            if not isinstance(entry, dict) or not isinstance(entry.get("candidates"), list):
                raise ProtocolError(f"result {i}: missing candidates list")
            cands = []
            for j, cand in enumerate(entry["candidates"]):
                cands.append(self._parse_candidate(cand, i, j, req))
            results.append(tuple(cands))
        return SegmentResponse(height=req.height, width=req.width,
                               results=tuple(results))

    def _parse_candidate(
        self, cand: object, i: int, j: int, req: SegmentRequest
    ) -> MaskCandidate:
        where = f"result {i} candidate {j}"
        if not isinstance(cand, dict):
            raise ProtocolError(f"{where}: not an object")
        size = cand.get("size")
        if (
            not isinstance(size, list) or len(size) != 2
            or size[0] != req.height or size[1] != req.width
        ):
            raise ProtocolError(
                f"{where}: size {size!r} does not match tile "
                f"[{req.height}, {req.width}]"
            )
        counts = cand.get("rle")
        if not isinstance(counts, list):
            raise ProtocolError(f"{where}: missing rle counts")
        try:
            rle = RleMask(height=req.height, width=req.width,
                          counts=tuple(int(c) for c in counts))
            rle_decode(rle)
        except Exception as exc:
            raise ProtocolError(f"{where}: bad rle ({exc})") from exc
        score = cand.get("score")
        if not isinstance(score, (int, float)) or not math.isfinite(float(score)):
            raise ProtocolError(f"{where}: non-finite score {score!r}")
        clamped = min(max(float(score), 0.0), 1.0)
        return MaskCandidate(rle=rle, score=clamped)


def apply_validity(mask: InstanceMask, prompt_box: HBox,
                   dims: tuple[int, int]) -> InstanceMask:
    """Return the mask with its validity flag recomputed against the box."""
    return replace(mask, valid=validate_mask(mask, prompt_box, dims))
