"""box2seg: turn box-annotated detection datasets into segmentation datasets.

The package feeds detection annotations (horizontal and rotated boxes)
as prompts to a promptable segmentation backend, then writes tiled
images, per-instance run-length masks, indexed semantic maps, and a
manifest, with quality metrics and an ablation harness for choosing
prompt configurations.
"""

__version__ = "0.1.0"

from .errors import Box2SegError
from .geometry import (
    BoxSource,
    CenterPoint,
    HBox,
    MaskPrompt,
    PromptConfig,
    PromptKind,
    PromptSet,
    RBox,
    build_prompt_set,
    center_point,
    clip_polygon_to_rect,
    parse_combo,
    rasterize_mask_prompt,
    rbox_to_rhbox,
)
from .metrics import (
    AblationReport,
    IouSample,
    MiouResult,
    choose_prompt_mode,
    iou_sample,
    miou,
    run_ablation,
)
from .pipeline import (
    ConversionRecipe,
    StatsReport,
    builtin_recipe,
    compute_stats,
    convert_dataset,
    mask_size_histogram,
)
from .segmenter import (
    ErosionOracle,
    FillOracle,
    RemoteBackend,
    SegmentRequest,
    SegmentResponse,
    segment,
    select_mask,
    validate_mask,
)
from .tiler import TileSpec, TilingPolicy, crop_annotations, crop_image, plan_tiles

__all__ = [
    "AblationReport",
    "Box2SegError",
    "BoxSource",
    "CenterPoint",
    "ConversionRecipe",
    "ErosionOracle",
    "FillOracle",
    "HBox",
    "IouSample",
    "MaskPrompt",
    "MiouResult",
    "PromptConfig",
    "PromptKind",
    "PromptSet",
    "RBox",
    "RemoteBackend",
    "SegmentRequest",
    "SegmentResponse",
    "StatsReport",
    "TileSpec",
    "TilingPolicy",
    "__version__",
    "build_prompt_set",
    "builtin_recipe",
    "center_point",
    "choose_prompt_mode",
    "clip_polygon_to_rect",
    "compute_stats",
    "convert_dataset",
    "crop_annotations",
    "crop_image",
    "iou_sample",
    "mask_size_histogram",
    "miou",
    "parse_combo",
    "plan_tiles",
    "rasterize_mask_prompt",
    "rbox_to_rhbox",
    "run_ablation",
    "segment",
    "select_mask",
    "validate_mask",
]
