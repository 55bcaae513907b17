"""Annotation parsing, mask codecs, and dataset manifests."""

from .manifest import (
    SCHEMA_VERSION,
    DatasetManifest,
    TileCounts,
    TileRecord,
    manifest_to_json,
    read_manifest,
    write_manifest,
)
from .masks import (
    InstanceMask,
    SemanticMap,
    build_palette,
    instances_from_json,
    instances_to_json,
    parse_hrsc_gt,
    read_instances_json,
    read_semantic_png,
    render_semantic_map,
    write_instances_json,
    write_semantic_png,
)
from .parsers import (
    parse_dota,
    parse_fair1m_xml,
    parse_voc_xml,
    serialize_dota,
    serialize_fair1m_xml,
    serialize_voc_xml,
)
from .records import (
    Category,
    CategoryTable,
    InstanceAnnotation,
    builtin_table,
    normalize_category,
)
from .rle import RleMask, rle_decode, rle_encode

__all__ = [
    "SCHEMA_VERSION",
    "Category",
    "CategoryTable",
    "DatasetManifest",
    "InstanceAnnotation",
    "InstanceMask",
    "RleMask",
    "SemanticMap",
    "TileCounts",
    "TileRecord",
    "build_palette",
    "builtin_table",
    "instances_from_json",
    "instances_to_json",
    "manifest_to_json",
    "normalize_category",
    "parse_dota",
    "parse_fair1m_xml",
    "parse_hrsc_gt",
    "parse_voc_xml",
    "read_instances_json",
    "read_manifest",
    "read_semantic_png",
    "render_semantic_map",
    "rle_decode",
    "rle_encode",
    "serialize_dota",
    "serialize_fair1m_xml",
    "serialize_voc_xml",
    "write_instances_json",
    "write_manifest",
    "write_semantic_png",
]
