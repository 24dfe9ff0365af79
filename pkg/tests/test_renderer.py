from __future__ import annotations

import re
from dataclasses import replace

import numpy as np
import pytest
from PIL import Image

from chartopt import renderer
from chartopt.chart_model import DataTable, TaskSpec, default_spec
from chartopt.renderer import (
    Rect,
    SceneGraph,
    Text,
    downsample,
    pyramid,
    rasterise,
    render,
    scene_to_svg,
    task_aois,
)

BLACK = (0, 0, 0)


def _non_white(raster):
    return int(np.any(raster != 255, axis=-1).sum())


def _value_extent(e, orientation):
    x0, y0, x1, y1 = e.bbox
    return x1 - x0 if orientation == "horizontal" else y1 - y0


def test_empty_scene_is_all_white():
    r = rasterise(SceneGraph(), 100, 100)
    assert r.raster.shape == (100, 100, 3) and r.raster.dtype == np.uint8
    assert np.all(r.raster == 255)


def test_single_rect_covers_exact_pixels():
    r = rasterise(SceneGraph((Rect(20, 30, 30, 40, BLACK),)), 100, 100)
    assert _non_white(r.raster) == 100
    assert np.all(r.raster[30:40, 20:30] == 0)


def test_glyph_boxes_use_font_metrics():
    t = Text("ab", 50, 50, 20, 0, BLACK)
    x0, y0, x1, y1 = t.bbox()
    assert x1 - x0 == pytest.approx(2 * 0.6 * 20)
    assert y1 - y0 == pytest.approx(0.7 * 20)


def test_render_is_deterministic(cp_spec):
    a, b = render(cp_spec), render(cp_spec)
    assert a.raster.tobytes() == b.raster.tobytes()
    assert a.elements == b.elements


def test_render_dimensions(cp_spec):
    r = render(cp_spec.with_params(replace(cp_spec.params, aspect_ratio=1.5)))
    assert (r.height, r.width) == (600, 900)


def test_zero_value_bar_has_zero_extent(cp_spec):
    assert render(cp_spec).find("bar", "Bike").area == 0


@pytest.mark.parametrize("orientation", ["horizontal", "vertical"])
def test_bar_lengths_are_linear(orientation):
    table = DataTable((("a", 50.0), ("b", 100.0), ("c", 37.0)))
    spec = default_spec(table, TaskSpec("RV", ("a",)))
    r = render(spec.with_params(replace(spec.params, orientation=orientation)))
    la, lb, lc = (_value_extent(r.find("bar", k), orientation) for k in "abc")
    assert 2 * la == pytest.approx(lb, abs=1)
    assert lc == pytest.approx(lb * 0.37, abs=1)


def test_orientation_flip_swaps_axes(cp_spec):
    h = render(cp_spec)
    v = render(cp_spec.with_params(replace(cp_spec.params, orientation="vertical")))
    for hb, vb in zip(h.bars(), v.bars()):
        assert hb.bbox[3] - hb.bbox[1] == vb.bbox[2] - vb.bbox[0] == 40
    order_h = [b.bbox[1] for b in h.bars()]
    order_v = [b.bbox[0] for b in v.bars()]
    assert order_h == sorted(order_h) and order_v == sorted(order_v)


def test_coverage_and_glyph_height(cp_spec):
    r = render(cp_spec)
    cats = cp_spec.table.categories
    assert [b.category for b in r.bars()] == list(cats)
    assert sorted(e.category for e in r.elements if e.kind == "data_label") == sorted(cats)
    assert sorted(e.category for e in r.elements if e.kind == "category_label") == sorted(cats)
    for e in r.labels():
        size = cp_spec.params.data_label_font_size if e.kind == "data_label" else cp_spec.params.axis_label_font_size
        assert e.glyph_height == pytest.approx(0.7 * size)


def test_highlight_applies_to_targets_only(table5):
    spec = default_spec(table5, TaskSpec("CP", ("Bus", "Ferry")))
    spec = spec.with_params(replace(spec.params, highlight_color=(0.0, 1.0, 1.0)))
    r = render(spec)
    fills = {b.category: b.fill for b in r.bars()}
    assert fills["Bus"] == fills["Ferry"] == (255, 0, 0)
    assert fills["Domestic flight"] == (0x94, 0x9D, 0x48)


def test_narrow_canvas_reports_overflow(table5):
    spec = default_spec(table5, TaskSpec("RV", ("Bus",)))
    tight = spec.with_params(replace(spec.params, aspect_ratio=0.33, orientation="vertical", bar_width=180.0))
    assert render(tight).overflow


# -- pyramid -------------------------------------------------------------


def _dense_area_downsample(img, oh, ow):
    """Independent oracle: average every input pixel by its exact overlap with each output cell."""
    h, w = img.shape[:2]

    def weights(n_in, n_out):
        m = np.zeros((n_out, n_in))
        scale = n_in / n_out
        for i in range(n_out):
            lo, hi = i * scale, (i + 1) * scale
            for j in range(n_in):
                m[i, j] = max(0.0, min(hi, j + 1) - max(lo, j)) / scale
        return m

    return np.einsum("ij,jkc,lk->ilc", weights(h, oh), img.astype(float), weights(w, ow))


def test_pyramid_dimensions():
    img = np.full((600, 600, 3), 255, np.uint8)
    assert downsample(img, 0.5).shape == (300, 300, 3)
    odd = np.full((600, 1218, 3), 255, np.uint8)
    assert [p.shape[:2] for p in (downsample(odd, f) for f in (1 / 8, 1 / 4, 1 / 2))] == [
        (75, 152), (150, 304), (300, 609)]


def test_pyramid_preserves_white_and_grey():
    white = np.full((90, 130, 3), 255, np.uint8)
    grey = np.full((90, 130, 3), 128, np.uint8)
    for f in renderer.PYRAMID_FACTORS:
        assert np.all(downsample(white, f) == 255)
        assert np.all(np.abs(downsample(grey, f).astype(int) - 128) <= 1)


def test_downsample_matches_dense_oracle():
    rng = np.random.default_rng(7)
    img = rng.integers(0, 256, (37, 53, 3)).astype(np.uint8)
    for f in (1 / 8, 1 / 4, 1 / 3, 1 / 2, 0.7):
        oh, ow = round(f * 37), round(f * 53)
        expected = np.clip(np.rint(_dense_area_downsample(img, oh, ow)), 0, 255)
        got = downsample(img, f)
        assert got.shape == (oh, ow, 3)
        assert np.abs(got.astype(int) - expected.astype(int)).max() <= 1


def test_area_matrix_rows_sum_to_one():
    m = renderer._area_matrix(1218, 152).toarray()
    assert np.allclose(m.sum(axis=1), 1.0, atol=1e-12)
    assert np.allclose(m.sum(axis=0), 152 / 1218, atol=1e-12)


@pytest.mark.parametrize("factor", [0.0, 1.5, 0.001])
def test_bad_pyramid_factor(factor):
    with pytest.raises(ValueError):
        downsample(np.full((100, 100, 3), 255, np.uint8), factor)


def test_pyramid_of_render(cp_spec):
    levels = pyramid(render(cp_spec))
    assert [lv.shape for lv in levels] == [(75, 75, 3), (150, 150, 3), (300, 300, 3)]


def test_lazy_pyramid_level_raster(cp_spec):
    r = render(cp_spec)
    level = renderer.pyramid_levels(r, (0.5,))[0]
    assert np.array_equal(level.raster, downsample(r.raster, 0.5))
    assert level.canvas == (300.0, 300.0)


# -- AOIs ----------------------------------------------------------------


def _contains(outer, inner):
    return outer[0] <= inner[0] and outer[1] <= inner[1] and outer[2] >= inner[2] and outer[3] >= inner[3]


def test_rv_aoi_covers_bar_and_data_label(table5):
    spec = default_spec(table5, TaskSpec("RV", ("Bus",)))
    r = render(spec)
    aois = task_aois(r, spec.task)
    assert len(aois) == 1
    assert _contains(aois[0], r.find("bar", "Bus").bbox)
    assert _contains(aois[0], r.find("data_label", "Bus").bbox)


def test_cp_has_two_aois(cp_spec):
    assert len(task_aois(render(cp_spec), cp_spec.task)) == 2


def test_fe_aoi_targets_table_argmax():
    table = DataTable((("a", 3.0), ("b", 1.0), ("c", 9.0), ("d", 4.0)))
    spec = default_spec(table, TaskSpec("FE", ()))
    r = render(spec)
    aois = task_aois(r, spec.task)
    assert len(aois) == 1
    assert _contains(aois[0], r.find("bar", "c").bbox)
    assert _contains(aois[0], r.find("category_label", "c").bbox)


def test_aois_intersect_a_target_bar(fixtures):
    for e in fixtures:
        spec = default_spec(e.table, e.task)
        r = render(spec)
        targets = spec.task.resolved_targets(spec.table)
        for box in task_aois(r, spec.task):
            bars = [r.find("bar", t).bbox for t in targets]
            assert any(b[0] < box[2] and box[0] < b[2] and b[1] < box[3] and box[1] < b[3] for b in bars)


# -- export --------------------------------------------------------------


def test_svg_carries_category_labels(cp_spec):
    svg = scene_to_svg(render(cp_spec).scene, 600, 600)
    cats = re.findall(r'data-category="([^"]*)"', svg)
    for c in cp_spec.table.categories:
        assert cats.count(c) == 3  # bar, category label, data label


def test_png_export(tmp_path, cp_spec):
    r = render(cp_spec)
    path = tmp_path / "chart.png"
    renderer.save_png(r.raster, path)
    with Image.open(path) as im:
        assert im.mode == "RGB" and im.size == (600, 600)
        assert np.array_equal(np.asarray(im), r.raster)
