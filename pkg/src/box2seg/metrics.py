"""Instance- and pixel-level mIOU plus the prompt-combination ablation harness.

Two related scores are computed over N instance pairs with intersection
I_i and union U_i:

    miou_instance = (1/N) * sum(I_i / U_i)      (mean of per-instance IoUs)
    miou_pixel    = sum(I_i) / sum(U_i)         (pooled pixel-level IoU)

Pairs with U_i = 0 are excluded from both and counted separately, since
0/0 has no meaningful value.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Collection, Sequence

from .errors import ConfigError, MetricError
from .formats.masks import InstanceMask
from .geometry import (
    BoxSource,
    PromptConfig,
    PromptKind,
    PromptSet,
    build_prompt_set,
    rbox_to_rhbox,
)
from .segmenter import Backend, SegmentRequest, segment, select_mask, validate_mask


@dataclass(frozen=True)
class IouSample:
    """One prediction/ground-truth pair reduced to pixel counts."""

    instance_id: str
    intersection: int
    union: int

    def __post_init__(self):
        if not 0 <= self.intersection <= self.union:
            raise MetricError(
                f"need 0 <= I <= U, got I={self.intersection} U={self.union}"
            )

    @property
    def iou(self) -> float:
        if self.union == 0:
            raise MetricError(f"{self.instance_id}: IoU undefined for U=0")
        return self.intersection / self.union


@dataclass(frozen=True)
class MiouResult:
    miou_instance: float
    miou_pixel: float
    n: int
    excluded: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise MetricError("a defined result needs at least one included sample")
        for name in ("miou_instance", "miou_pixel"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise MetricError(f"{name}={v} outside [0, 1]")


def iou_sample(pred: InstanceMask, gt: InstanceMask, instance_id: str = "") -> IouSample:
    """Pixel counts of intersection and union between two same-size masks."""
    if (pred.rle.height, pred.rle.width) != (gt.rle.height, gt.rle.width):
        raise MetricError(
            f"mask dims differ: {pred.rle.height}x{pred.rle.width} "
            f"vs {gt.rle.height}x{gt.rle.width}"
        )
    a = pred.decode()
    b = gt.decode()
    return IouSample(
        instance_id=instance_id,
        intersection=int((a & b).sum()),
        union=int((a | b).sum()),
    )


def miou(samples: Sequence[IouSample]) -> MiouResult:
    """Per-instance mean and pooled ratio over the included (U > 0) samples."""
    included = [s for s in samples if s.union > 0]
    excluded = len(samples) - len(included)
    if not included:
        raise MetricError("no included samples: every pair has U=0 (or none given)")
    n = len(included)
    inst = math.fsum(s.intersection / s.union for s in included) / n
    total_i = sum(s.intersection for s in included)
    total_u = sum(s.union for s in included)
    return MiouResult(
        miou_instance=inst,
        miou_pixel=total_i / total_u,
        n=n,
        excluded=excluded,
    )


_HBOX_LIKE = {BoxSource.HBOX, BoxSource.RHBOX}


def choose_prompt_mode(available: Collection[BoxSource]) -> PromptKind:
    """Pick the conversion prompt: rotated-only input gets the circumscribed
    horizontal box, anything with a horizontal box gets that directly."""
    kinds = set(available)
    if not kinds:
        raise ConfigError("no box kinds available: cannot choose a prompt mode")
    if kinds & _HBOX_LIKE:
        return PromptKind.HBOX
    return PromptKind.RHBOX


# ---------------------------------------------------------------------------
# Ablation harness: run every combo over a ground-truth set and tabulate.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AblationEntry:
    combo_id: str
    result: MiouResult
    penalized: int
    failed: int


@dataclass(frozen=True)
class AblationReport:
    entries: tuple[AblationEntry, ...]
    dataset: str
    backend: str

    def __post_init__(self):
        ids = [e.combo_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise MetricError(f"duplicate combo ids in report: {ids}")

    def to_json(self) -> dict:
        return {
            "dataset": self.dataset,
            "backend": self.backend,
            "rows": [
                {
                    "combo": e.combo_id,
                    "miou_instance": e.result.miou_instance,
                    "miou_pixel": e.result.miou_pixel,
                    "n": e.result.n,
                    "excluded": e.result.excluded,
                    "penalized": e.penalized,
                    "failed": e.failed,
                }
                for e in self.entries
            ],
        }

    def format_table(self) -> str:
        """Aligned text table: one flag column per prompt kind, then the scores."""
        kinds = [
            PromptKind.CP,
            PromptKind.HBOX,
            PromptKind.RHBOX,
            PromptKind.HBOX_M,
            PromptKind.RBOX_M,
            PromptKind.RHBOX_M,
        ]
        labels = {
            PromptKind.CP: "CP",
            PromptKind.HBOX: "H-Box",
            PromptKind.RHBOX: "RH-Box",
            PromptKind.HBOX_M: "H-Box-M",
            PromptKind.RBOX_M: "R-Box-M",
            PromptKind.RHBOX_M: "RH-Box-M",
        }
        header = [labels[k] for k in kinds] + ["mIOU_I", "mIOU_P"]
        rows = []
        for e in self.entries:
            members = set(e.combo_id.split("+"))
            flags = ["x" if k.value in members else "" for k in kinds]
            rows.append(flags + [
                f"{100.0 * e.result.miou_instance:.2f}",
                f"{100.0 * e.result.miou_pixel:.2f}",
            ])
        widths = [
            max(len(header[c]), *(len(r[c]) for r in rows)) if rows else len(header[c])
            for c in range(len(header))
        ]
        def fmt(cells):
            return "  ".join(c.rjust(widths[i]) for i, c in enumerate(cells))
        lines = [fmt(header), fmt(["-" * w for w in widths])]
        lines.extend(fmt(r) for r in rows)
        return "\n".join(lines)


def _validity_box(ps: PromptSet, hbox, rbox):
    """The box validity is judged against: the prompt's own box when it has
    one, else the instance's horizontal (or circumscribed) box."""
    if ps.box is not None:
        return ps.box
    if hbox is not None:
        return hbox
    return rbox_to_rhbox(rbox)


def run_ablation(
    gt_images: Sequence["GtImage"],
    combos: Sequence[PromptConfig],
    backend: Backend,
    dataset: str = "",
) -> AblationReport:
    """Segment every GT instance under every combo and tabulate both mIOUs.

    Predictions pair to ground truth by instance id. A backend failure
    (no candidates) excludes the instance and is counted in `failed`;
    an invalid predicted mask scores I=0, U=area(GT) and is counted in
    `penalized`, so failures are visible rather than silently dropped.
    """
    from .gtset import GtImage  # local import to avoid a module cycle

    entries = []
    for cfg in combos:
        samples: list[IouSample] = []
        penalized = 0
        failed = 0
        for image in gt_images:
            height, width = image.dims
            prompt_sets = [
                build_prompt_set(inst.annotation(), cfg, (width, height))
                for inst in image.instances
            ]
            req = SegmentRequest(
                image=image.image,
                prompt_sets=tuple(prompt_sets),
                multimask=cfg.multimask,
            )
            resp = segment(backend, req)
            by_id = {
                inst.instance_id: (inst, prompt_sets[i], resp.results[i])
                for i, inst in enumerate(image.instances)
            }
            for inst in image.instances:
                gt_inst, ps, candidates = by_id[inst.instance_id]
                pred = select_mask(candidates)
                if pred is None:
                    failed += 1
                    continue
                vbox = _validity_box(ps, gt_inst.hbox, gt_inst.rbox)
                if not validate_mask(pred, vbox, (height, width)):
                    penalized += 1
                    samples.append(
                        IouSample(
                            instance_id=gt_inst.instance_id,
                            intersection=0,
                            union=gt_inst.mask.area,
                        )
                    )
                    continue
                samples.append(iou_sample(pred, gt_inst.mask, gt_inst.instance_id))
        entries.append(
            AblationEntry(
                combo_id=cfg.id,
                result=miou(samples),
                penalized=penalized,
                failed=failed,
            )
        )
    return AblationReport(entries=tuple(entries), dataset=dataset, backend=backend.name)
