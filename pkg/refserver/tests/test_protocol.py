"""Request parsing and validation rules."""

from __future__ import annotations

import base64

import numpy as np
import pytest

from refserver.errors import RequestError
from refserver.protocol import ScoreGrid, candidate_json, parse_task

from conftest import png_b64, square_image


def make_request(**overrides) -> dict:
    doc = {
        "id": "req-1",
        "image_png_b64": png_b64(square_image()),
        "multimask": False,
        "prompts": [{"point": None, "box": [16.0, 16.0, 48.0, 48.0], "mask": None}],
    }
    doc.update(overrides)
    return doc


class TestHappyPath:
    def test_box_prompt(self):
        task = parse_task(make_request())
        assert task.request_id == "req-1"
        assert task.image.shape == (64, 64, 3)
        assert task.multimask is False
        assert task.prompts[0].box == (16.0, 16.0, 48.0, 48.0)
        assert task.prompts[0].point is None and task.prompts[0].mask is None

    def test_point_prompt(self):
        task = parse_task(make_request(
            prompts=[{"point": {"x": 3.5, "y": 4.25, "label": 1}}]
        ))
        assert task.prompts[0].point == (3.5, 4.25, 1)

    def test_background_point_label(self):
        task = parse_task(make_request(prompts=[{"point": {"x": 1, "y": 1, "label": 0}}]))
        assert task.prompts[0].point == (1.0, 1.0, 0)

    def test_mask_prompt_reconstructs_score_grid(self):
        # positive region: left half of an 8x4 grid -> columns 0..1 set.
        # Column-major: 8*2 = 16 ones first.
        task = parse_task(make_request(prompts=[{
            "mask": {"width": 4, "height": 8, "magnitude": 500.0,
                     "positive_rle": [0, 16, 16]},
        }]))
        grid = task.prompts[0].mask
        assert grid.positive.shape == (8, 4)
        assert grid.positive[:, :2].all() and not grid.positive[:, 2:].any()
        scores = grid.scores
        assert scores.dtype == np.float32
        assert set(np.unique(scores)) == {np.float32(-500.0), np.float32(500.0)}

    def test_multiple_prompt_members_coexist(self):
        task = parse_task(make_request(prompts=[{
            "point": {"x": 32, "y": 32, "label": 1},
            "box": [16, 16, 48, 48],
            "mask": {"width": 2, "height": 2, "magnitude": 1.0,
                     "positive_rle": [0, 4]},
        }]))
        p = task.prompts[0]
        assert p.point and p.box and p.mask

    def test_empty_prompt_list_is_fine(self):
        assert parse_task(make_request(prompts=[])).prompts == ()

    def test_multimask_defaults_false(self):
        doc = make_request()
        del doc["multimask"]
        assert parse_task(doc).multimask is False


class TestRejections:
    def test_non_object_body(self):
        with pytest.raises(RequestError, match="JSON object"):
            parse_task([1, 2, 3])

    def test_missing_id(self):
        doc = make_request()
        del doc["id"]
        with pytest.raises(RequestError, match="'id'"):
            parse_task(doc)

    def test_non_string_id(self):
        with pytest.raises(RequestError, match="'id'"):
            parse_task(make_request(id=7))

    def test_bad_base64(self):
        with pytest.raises(RequestError, match="base64"):
            parse_task(make_request(image_png_b64="@@@not-base64@@@"))

    def test_not_an_image(self):
        garbage = base64.b64encode(b"definitely not a png").decode()
        with pytest.raises(RequestError, match="decode"):
            parse_task(make_request(image_png_b64=garbage))

    def test_non_png_image_rejected(self):
        import io

        from PIL import Image

        buf = io.BytesIO()
        Image.fromarray(square_image()).save(buf, format="JPEG")
        jpeg = base64.b64encode(buf.getvalue()).decode()
        with pytest.raises(RequestError, match="PNG"):
            parse_task(make_request(image_png_b64=jpeg))

    def test_multimask_not_bool(self):
        with pytest.raises(RequestError, match="multimask"):
            parse_task(make_request(multimask="yes"))

    def test_prompt_with_nothing_in_it(self):
        with pytest.raises(RequestError, match="no point, box, or mask"):
            parse_task(make_request(prompts=[{"point": None, "box": None, "mask": None}]))

    def test_point_outside_image(self):
        with pytest.raises(RequestError, match="outside"):
            parse_task(make_request(prompts=[{"point": {"x": 65, "y": 5, "label": 1}}]))

    def test_point_bad_label(self):
        with pytest.raises(RequestError, match="label"):
            parse_task(make_request(prompts=[{"point": {"x": 5, "y": 5, "label": 2}}]))

    def test_point_non_numeric(self):
        with pytest.raises(RequestError, match="number"):
            parse_task(make_request(prompts=[{"point": {"x": "a", "y": 5, "label": 1}}]))

    def test_box_wrong_arity(self):
        with pytest.raises(RequestError, match="4-element"):
            parse_task(make_request(prompts=[{"box": [1, 2, 3]}]))

    def test_box_unordered(self):
        with pytest.raises(RequestError, match="ordered"):
            parse_task(make_request(prompts=[{"box": [48, 16, 16, 48]}]))

    def test_box_out_of_bounds(self):
        with pytest.raises(RequestError, match="bounds"):
            parse_task(make_request(prompts=[{"box": [0, 0, 64.5, 10]}]))

    def test_box_boundary_is_allowed(self):
        task = parse_task(make_request(prompts=[{"box": [0, 0, 64, 64]}]))
        assert task.prompts[0].box == (0.0, 0.0, 64.0, 64.0)

    def test_mask_bad_magnitude(self):
        with pytest.raises(RequestError, match="magnitude"):
            parse_task(make_request(prompts=[{
                "mask": {"width": 2, "height": 2, "magnitude": 0,
                         "positive_rle": [0, 4]},
            }]))

    def test_mask_rle_sum_mismatch(self):
        with pytest.raises(RequestError, match="sum"):
            parse_task(make_request(prompts=[{
                "mask": {"width": 2, "height": 2, "magnitude": 1.0,
                         "positive_rle": [0, 5]},
            }]))

    def test_mask_rle_non_integer(self):
        with pytest.raises(RequestError, match="integers"):
            parse_task(make_request(prompts=[{
                "mask": {"width": 2, "height": 2, "magnitude": 1.0,
                         "positive_rle": [0, 4.0]},
            }]))

    def test_prompts_not_a_list(self):
        with pytest.raises(RequestError, match="'prompts'"):
            parse_task(make_request(prompts="box"))


class TestCandidateJson:
    def test_shape(self):
        grid = np.zeros((3, 5), dtype=bool)
        grid[:, 0] = True
        doc = candidate_json(grid, 0.75)
        assert doc == {"size": [3, 5], "rle": [0, 3, 12], "score": 0.75}


class TestScoreGrid:
    def test_scores_are_signed_magnitude(self):
        positive = np.array([[True, False]])
        grid = ScoreGrid(positive=positive, magnitude=1000.0)
        assert grid.scores[0, 0] == np.float32(1000.0)
        assert grid.scores[0, 1] == np.float32(-1000.0)
