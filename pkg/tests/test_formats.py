"""Annotation records, text parsers, RLE codec, mask containers, manifest."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from box2seg.errors import (
    GeometryError,
    ManifestError,
    MaskError,
    ParseError,
    RleError,
    VersionError,
)
from box2seg.formats import (
    Category,
    CategoryTable,
    DatasetManifest,
    InstanceAnnotation,
    InstanceMask,
    RleMask,
    SemanticMap,
    TileCounts,
    TileRecord,
    builtin_table,
    instances_from_json,
    instances_to_json,
    normalize_category,
    parse_dota,
    parse_fair1m_xml,
    parse_hrsc_gt,
    parse_voc_xml,
    read_instances_json,
    read_manifest,
    read_semantic_png,
    render_semantic_map,
    rle_decode,
    rle_encode,
    serialize_dota,
    serialize_fair1m_xml,
    serialize_voc_xml,
    write_instances_json,
    write_manifest,
    write_semantic_png,
)
from box2seg.geometry import HBox, RBox

from conftest import random_bitmask

# ---------------------------------------------------------------------------
# Records and category tables
# ---------------------------------------------------------------------------


class TestRecords:
    def test_annotation_requires_a_box(self):
        with pytest.raises(GeometryError):
            InstanceAnnotation(category_id=1)

    def test_normalize_category(self):
        assert normalize_category("  Storage_Tank ") == "storage tank"
        assert normalize_category("ground-track-field") == "ground track field"
        assert normalize_category("SHIP") == "ship"

    def test_builtin_table_sizes(self):
        assert len(builtin_table("SOTA").entries) == 18
        assert len(builtin_table("SIOR").entries) == 20
        assert len(builtin_table("FAST").entries) == 37

    def test_builtin_ids_contiguous_from_one(self):
        for tag in ("SOTA", "SIOR", "FAST"):
            table = builtin_table(tag)
            assert [c.id for c in table.entries] == list(range(1, len(table.entries) + 1))

    def test_lookup_by_name_abbreviation_and_variants(self):
        table = builtin_table("SOTA")
        wanted = table.id_for("storage tank")
        assert table.id_for("ST") == wanted
        assert table.id_for("storage-tank") == wanted
        assert table.id_for("Storage_Tank") == wanted

    def test_unknown_category_raises(self):
        with pytest.raises(KeyError):
            builtin_table("SOTA").id_for("zeppelin")

    def test_duplicate_abbreviation_rejected(self):
        with pytest.raises(ValueError):
            CategoryTable(
                dataset="X",
                entries=(
                    Category(1, "alpha", "A"),
                    Category(2, "beta", "A"),
                ),
            )

    def test_noncontiguous_ids_rejected(self):
        with pytest.raises(ValueError):
            CategoryTable(
                dataset="X",
                entries=(Category(1, "alpha", "A"), Category(3, "beta", "B")),
            )

    def test_table_json_round_trip(self):
        table = builtin_table("SIOR")
        again = CategoryTable.from_json(table.to_json())
        assert again == table


# ---------------------------------------------------------------------------
# Text parsers: DOTA-style, VOC-style, FAIR1M-style
# ---------------------------------------------------------------------------

DOTA_SAMPLE = """imagesource:GoogleEarth
gsd:0.146343590398
2753.0 2408.0 2861.0 2385.0 2888.0 2468.0 2805.0 2502.0 large-vehicle 1
0.0 0.0 8.0 0.0 8.0 8.0 0.0 8.0 plane 0
"""


class TestDotaParser:
    def test_sample_parses(self):
        table = builtin_table("SOTA")
        out = parse_dota(DOTA_SAMPLE, table)
        assert len(out) == 2
        assert out[0].category_id == table.id_for("large vehicle")
        assert out[0].difficulty is True
        assert out[1].rbox.corners[2] == (8.0, 8.0)
        assert out[1].difficulty is False

    def test_metadata_lines_skipped_only_at_known_keys(self):
        table = builtin_table("SOTA")
        with pytest.raises(ParseError) as err:
            parse_dota("unknownkey:value\n", table)
        assert "line 1" in str(err.value)

    def test_wrong_token_count(self):
        with pytest.raises(ParseError) as err:
            parse_dota("1 2 3 4 plane 0\n", builtin_table("SOTA"))
        assert "line 1" in str(err.value)

    def test_unknown_category(self):
        line = "0 0 8 0 8 8 0 8 zeppelin 0\n"
        with pytest.raises(ParseError):
            parse_dota(line, builtin_table("SOTA"))

    def test_degenerate_box_rejected_with_warning(self, caplog):
        bad = "0 0 1 1 2 2 3 3 plane 0\n0 0 8 0 8 8 0 8 plane 0\n"
        rejects: list[str] = []
        with caplog.at_level(logging.WARNING):
            out = parse_dota(bad, builtin_table("SOTA"), rejects=rejects)
        assert len(out) == 1
        assert len(rejects) == 1 and "line 1" in rejects[0]
        assert any("line 1" in rec.message for rec in caplog.records)

    def test_round_trip(self):
        table = builtin_table("SOTA")
        first = parse_dota(DOTA_SAMPLE, table)
        text = serialize_dota(first, table)
        assert parse_dota(text, table) == first


VOC_SAMPLE = """<annotation>
  <object>
    <name>ship</name>
    <difficult>1</difficult>
    <bndbox><xmin>10</xmin><ymin>20</ymin><xmax>30</xmax><ymax>60</ymax></bndbox>
  </object>
  <object>
    <name>bridge</name>
    <bndbox><xmin>0</xmin><ymin>0</ymin><xmax>5</xmax><ymax>5</ymax></bndbox>
  </object>
</annotation>
"""


class TestVocParser:
    def test_sample_parses(self):
        table = builtin_table("SIOR")
        out = parse_voc_xml(VOC_SAMPLE, table)
        assert len(out) == 2
        assert out[0].hbox == HBox(10, 20, 30, 60)
        assert out[0].difficulty is True and out[1].difficulty is False
        assert out[0].rbox is None

    def test_malformed_xml(self):
        with pytest.raises(ParseError):
            parse_voc_xml("<annotation><object>", builtin_table("SIOR"))

    def test_missing_bndbox_field(self):
        text = "<annotation><object><name>ship</name><bndbox><xmin>1</xmin></bndbox></object></annotation>"
        with pytest.raises(ParseError):
            parse_voc_xml(text, builtin_table("SIOR"))

    def test_inverted_box_is_a_parse_error(self):
        text = (
            "<annotation><object><name>ship</name><bndbox>"
            "<xmin>30</xmin><ymin>0</ymin><xmax>10</xmax><ymax>5</ymax>"
            "</bndbox></object></annotation>"
        )
        with pytest.raises(ParseError):
            parse_voc_xml(text, builtin_table("SIOR"))

    def test_zero_area_box_rejected_not_fatal(self, caplog):
        text = (
            "<annotation><object><name>ship</name><bndbox>"
            "<xmin>10</xmin><ymin>0</ymin><xmax>10</xmax><ymax>5</ymax>"
            "</bndbox></object>"
            "<object><name>ship</name><bndbox>"
            "<xmin>0</xmin><ymin>0</ymin><xmax>4</xmax><ymax>4</ymax>"
            "</bndbox></object></annotation>"
        )
        rejects: list[str] = []
        with caplog.at_level(logging.WARNING):
            out = parse_voc_xml(text, builtin_table("SIOR"), rejects=rejects)
        assert len(out) == 1 and len(rejects) == 1

    def test_round_trip(self):
        table = builtin_table("SIOR")
        first = parse_voc_xml(VOC_SAMPLE, table)
        assert parse_voc_xml(serialize_voc_xml(first, table), table) == first


FAIR1M_SAMPLE = """<annotation><objects>
  <object>
    <possibleresult><name>Boeing737</name></possibleresult>
    <points>
      <point>10.0,0.0</point>
      <point>20.0,5.0</point>
      <point>10.0,10.0</point>
      <point>0.0,5.0</point>
    </points>
  </object>
</objects></annotation>
"""


class TestFair1mParser:
    def test_sample_parses(self):
        table = builtin_table("FAST")
        out = parse_fair1m_xml(FAIR1M_SAMPLE, table)
        assert len(out) == 1
        assert out[0].rbox == RBox(((10, 0), (20, 5), (10, 10), (0, 5)))
        assert out[0].hbox is None
        assert out[0].category_id == table.id_for("boeing737")

    def test_five_point_closing_form_rejected(self):
        text = FAIR1M_SAMPLE.replace(
            "</points>", "<point>10.0,0.0</point></points>"
        )
        with pytest.raises(ParseError) as err:
            parse_fair1m_xml(text, builtin_table("FAST"))
        assert "4" in str(err.value)

    def test_bad_point_syntax(self):
        text = FAIR1M_SAMPLE.replace("10.0,0.0", "10.0;0.0")
        with pytest.raises(ParseError):
            parse_fair1m_xml(text, builtin_table("FAST"))

    def test_round_trip(self):
        table = builtin_table("FAST")
        first = parse_fair1m_xml(FAIR1M_SAMPLE, table)
        assert parse_fair1m_xml(serialize_fair1m_xml(first, table), table) == first


# Property: serialize∘parse is the identity on parser output, across random
# annotation files for each dialect.

names_sota = st.sampled_from(["plane", "ship", "harbor", "bridge", "roundabout"])
coord_int = st.integers(min_value=0, max_value=4000)


@st.composite
def dota_files(draw):
    lines = ["imagesource:synthetic", "gsd:1.0"]
    for _ in range(draw(st.integers(min_value=1, max_value=8))):
        x0 = draw(coord_int)
        y0 = draw(coord_int)
        w = draw(st.integers(min_value=1, max_value=500))
        h = draw(st.integers(min_value=1, max_value=500))
        name = draw(names_sota).replace(" ", "-")
        diff = draw(st.sampled_from([0, 1]))
        lines.append(
            f"{x0} {y0} {x0 + w} {y0} {x0 + w} {y0 + h} {x0} {y0 + h} {name} {diff}"
        )
    return "\n".join(lines) + "\n"


@given(dota_files())
@settings(max_examples=100)
def test_dota_round_trip_property(text):
    table = builtin_table("SOTA")
    first = parse_dota(text, table)
    assert parse_dota(serialize_dota(first, table), table) == first


@st.composite
def voc_files(draw):
    objs = []
    for _ in range(draw(st.integers(min_value=1, max_value=8))):
        x0, y0 = draw(coord_int), draw(coord_int)
        w = draw(st.integers(min_value=1, max_value=400))
        h = draw(st.integers(min_value=1, max_value=400))
        name = draw(st.sampled_from(["ship", "bridge", "vehicle", "harbor"]))
        objs.append(
            f"<object><name>{name}</name><bndbox><xmin>{x0}</xmin>"
            f"<ymin>{y0}</ymin><xmax>{x0 + w}</xmax><ymax>{y0 + h}</ymax>"
            f"</bndbox></object>"
        )
    return "<annotation>" + "".join(objs) + "</annotation>"


@given(voc_files())
@settings(max_examples=100)
def test_voc_round_trip_property(text):
    table = builtin_table("SIOR")
    first = parse_voc_xml(text, table)
    assert parse_voc_xml(serialize_voc_xml(first, table), table) == first


# ---------------------------------------------------------------------------
# RLE codec
# ---------------------------------------------------------------------------


class TestRle:
    def test_known_encoding_starts_with_zero_run(self):
        # Column-major: all-ones 2x2 grid -> leading zero-run of length 0.
        ones = np.ones((2, 2), dtype=bool)
        r = rle_encode(ones)
        assert r.counts[0] == 0
        assert r.counts == (0, 4)

    def test_single_pixel(self):
        grid = np.zeros((3, 3), dtype=bool)
        grid[1, 0] = True  # column-major offset 1
        assert rle_encode(grid).counts == (1, 1, 7)

    def test_empty_mask(self):
        r = rle_encode(np.zeros((4, 5), dtype=bool))
        assert r.counts == (20,)
        assert r.area == 0

    def test_canonical_no_interior_zero_runs(self, rng):
        for _ in range(50):
            r = rle_encode(random_bitmask(rng, 17, 13))
            assert all(c > 0 for c in r.counts[1:])
            assert sum(r.counts) == 17 * 13

    def test_round_trip_random(self, rng):
        for _ in range(200):
            h = int(rng.integers(1, 64))
            w = int(rng.integers(1, 64))
            grid = random_bitmask(rng, h, w)
            assert np.array_equal(rle_decode(rle_encode(grid)), grid)

    def test_decode_validates_total(self):
        with pytest.raises(RleError):
            rle_decode(RleMask(height=2, width=2, counts=(0, 3)))

    def test_area_counts_one_runs(self):
        r = RleMask(height=2, width=3, counts=(1, 2, 1, 2))
        assert r.area == 4


@given(st.integers(min_value=1, max_value=48), st.integers(min_value=1, max_value=48),
       st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=200)
def test_rle_round_trip_property(h, w, seed):
    grid = np.random.default_rng(seed).random((h, w)) < 0.35
    r = rle_encode(grid)
    assert np.array_equal(rle_decode(r), grid)
    # Canonical minimal form: no zero-length runs after the first entry.
    assert all(c > 0 for c in r.counts[1:])
    if len(r.counts) > 1:
        assert r.counts[-1] > 0


# ---------------------------------------------------------------------------
# InstanceMask and semantic maps
# ---------------------------------------------------------------------------


class TestInstanceMask:
    def test_from_bitmap_bbox_exclusive(self):
        grid = np.zeros((8, 8), dtype=bool)
        grid[2:5, 3:7] = True
        m = InstanceMask.from_bitmap(grid, score=0.5)
        assert m.bbox == HBox(3, 2, 7, 5)
        assert m.area == 12 and m.valid

    def test_empty_bitmap_is_invalid(self):
        m = InstanceMask.from_bitmap(np.zeros((4, 4), dtype=bool), score=0.5)
        assert m.area == 0 and not m.valid and m.bbox == HBox(0, 0, 0, 0)

    def test_area_mismatch_rejected(self):
        r = rle_encode(np.ones((2, 2), dtype=bool))
        with pytest.raises(MaskError):
            InstanceMask(rle=r, area=3, bbox=HBox(0, 0, 2, 2), score=0.5, valid=True)

    def test_score_range(self):
        grid = np.ones((2, 2), dtype=bool)
        with pytest.raises(MaskError):
            InstanceMask.from_bitmap(grid, score=1.5)

    def test_valid_zero_area_contradiction(self):
        r = rle_encode(np.zeros((2, 2), dtype=bool))
        with pytest.raises(MaskError):
            InstanceMask(rle=r, area=0, bbox=HBox(0, 0, 0, 0), score=0.5, valid=True)


class TestSemanticMap:
    def _mask(self, grid):
        return InstanceMask.from_bitmap(np.asarray(grid, dtype=bool), score=1.0)

    def test_paint_larger_first_smaller_wins_overlap(self):
        big = np.zeros((6, 6), dtype=bool)
        big[0:5, 0:5] = True
        small = np.zeros((6, 6), dtype=bool)
        small[2:4, 2:4] = True
        sem = render_semantic_map(
            [(self._mask(small), 2), (self._mask(big), 1)], (6, 6)
        )
        assert sem.labels[3, 3] == 2  # small overwrote big
        assert sem.labels[0, 0] == 1
        assert sem.labels[5, 5] == 0

    def test_equal_area_later_instance_wins(self):
        a = np.zeros((4, 4), dtype=bool)
        a[0:2, 0:2] = True
        b = np.zeros((4, 4), dtype=bool)
        b[0:2, 0:2] = True
        sem = render_semantic_map([(self._mask(a), 1), (self._mask(b), 2)], (4, 4))
        assert sem.labels[0, 0] == 2

    def test_label_conservation(self, rng):
        # Every painted pixel's label belongs to some instance covering it.
        masks = []
        for k in range(5):
            grid = random_bitmask(rng, 12, 12, density=0.3)
            if grid.any():
                masks.append((self._mask(grid), k + 1))
        sem = render_semantic_map(masks, (12, 12))
        union = np.zeros((12, 12), dtype=bool)
        for m, cid in masks:
            union |= m.decode()
        assert np.array_equal(sem.labels != 0, union)
        for m, cid in masks:
            covered = sem.labels[m.decode()]
            assert set(covered) <= {c for _, c in masks}

    def test_dims_mismatch(self):
        m = self._mask(np.ones((3, 3), dtype=bool))
        with pytest.raises(MaskError):
            render_semantic_map([(m, 1)], (4, 4))

    def test_category_range(self):
        m = self._mask(np.ones((3, 3), dtype=bool))
        with pytest.raises(MaskError):
            render_semantic_map([(m, 0)], (3, 3))
        with pytest.raises(MaskError):
            render_semantic_map([(m, 256)], (3, 3))


def test_parse_hrsc_gt_splits_by_pixel_value():
    grid = np.zeros((6, 6), dtype=np.uint8)
    grid[0:2, 0:2] = 7
    grid[4:6, 4:6] = 9
    out = parse_hrsc_gt(grid, {7: 1, 9: 1})
    assert len(out) == 2
    assert all(cid == 1 for _, cid in out)
    assert sorted(m.area for m, _ in out) == [4, 4]
    with pytest.raises(MaskError):
        parse_hrsc_gt(grid, {7: 1})


# ---------------------------------------------------------------------------
# File forms: instance JSON, semantic PNG
# ---------------------------------------------------------------------------


class TestFileForms:
    def test_instances_json_round_trip(self, rng, tmp_path):
        instances = []
        for k in range(4):
            grid = random_bitmask(rng, 10, 14, density=0.3)
            m = InstanceMask.from_bitmap(grid, score=float(rng.random()))
            instances.append((m, k + 1))
        path = tmp_path / "i.json"
        write_instances_json(path, (10, 14), instances)
        size, again = read_instances_json(path)
        assert size == (10, 14)
        assert again == instances

    def test_instances_json_shape(self, rng):
        grid = random_bitmask(rng, 4, 4)
        m = InstanceMask.from_bitmap(grid, score=0.25)
        doc = instances_to_json((4, 4), [(m, 3)])
        assert doc["size"] == [4, 4]
        row = doc["instances"][0]
        assert set(row) == {"category", "rle", "score", "valid", "bbox"}
        assert row["category"] == 3

    def test_instances_json_rejects_garbage(self):
        with pytest.raises(MaskError):
            instances_from_json({"instances": []})

    def test_semantic_png_round_trip(self, tmp_path, rng):
        labels = rng.integers(0, 5, size=(9, 11)).astype(np.uint8)
        sem = SemanticMap(labels=labels)
        path = tmp_path / "sem.png"
        write_semantic_png(path, sem, num_categories=5)
        again = read_semantic_png(path)
        assert np.array_equal(again.labels, labels)

    def test_semantic_png_requires_indexed_mode(self, tmp_path):
        from PIL import Image

        path = tmp_path / "rgb.png"
        Image.new("RGB", (4, 4)).save(path)
        with pytest.raises(MaskError):
            read_semantic_png(path)


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


def _tiny_manifest() -> DatasetManifest:
    counts = TileCounts(instances=3, valid=2, invalid=1, dropped=1, failed=0)
    tile = TileRecord(
        source_image_id="img00",
        tile_index=(0, 0),
        origin=(0, 0),
        tile_size=64,
        image_file="images/img00__0_0.png",
        sem_map_file="sem_maps/img00__0_0.png",
        instances_file="instances/img00__0_0.json",
        counts=counts,
    )
    return DatasetManifest(
        dataset="SIOR",
        categories=builtin_table("SIOR"),
        tiles=(tile,),
        config={"seed": 0},
        tool_version="0.1.0",
    )


class TestManifest:
    def test_round_trip(self, tmp_path):
        m = _tiny_manifest()
        path = tmp_path / "manifest.json"
        write_manifest(path, m)
        assert read_manifest(path) == m

    def test_summary_totals(self):
        m = _tiny_manifest()
        s = m.summary()
        assert s == {
            "tiles": 1, "instances": 3, "valid": 2,
            "invalid": 1, "dropped": 1, "failed": 0,
        }

    def test_counts_conservation_enforced(self):
        with pytest.raises(ManifestError):
            TileCounts(instances=3, valid=1, invalid=1)

    def test_counts_considered(self):
        c = TileCounts(instances=3, valid=2, invalid=1, dropped=2, failed=1)
        assert c.considered == 6

    def test_version_gate(self, tmp_path):
        path = tmp_path / "manifest.json"
        write_manifest(path, _tiny_manifest())
        doc = json.loads(path.read_text())
        doc["schema_version"] = 99
        path.write_text(json.dumps(doc))
        with pytest.raises(VersionError):
            read_manifest(path)
        del doc["schema_version"]
        path.write_text(json.dumps(doc))
        with pytest.raises(VersionError):
            read_manifest(path)

    def test_strict_checks_files_exist(self, tmp_path):
        path = tmp_path / "manifest.json"
        write_manifest(path, _tiny_manifest())
        with pytest.raises(ManifestError):
            read_manifest(path, strict=True)

    def test_manifest_json_is_sorted_and_stable(self, tmp_path):
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        write_manifest(p1, _tiny_manifest())
        write_manifest(p2, _tiny_manifest())
        assert p1.read_bytes() == p2.read_bytes()


@given(st.integers(min_value=0, max_value=50), st.integers(min_value=0, max_value=50),
       st.integers(min_value=0, max_value=20), st.integers(min_value=0, max_value=20))
def test_tile_counts_invariant_property(valid, invalid, dropped, failed):
    c = TileCounts(
        instances=valid + invalid, valid=valid, invalid=invalid,
        dropped=dropped, failed=failed,
    )
    assert c.considered == valid + invalid + dropped + failed
