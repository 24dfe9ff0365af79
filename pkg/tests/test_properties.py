from __future__ import annotations

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chartopt.chart_model import DEFAULT_SPACE, ChartSpec, DataTable, TaskSpec, clamp_to_space, validate
from chartopt.metrics import SaliencyMap, WsrReference, load_wave_table, task_saliency, wave_score, wsr_penalty
from chartopt.optimiser import ei_from_moments
from chartopt.renderer import pyramid_levels, render, task_aois
from chartopt.metrics import text_legibility

FAST = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
WAVE = load_wave_table()

unit_vectors = arrays(np.float64, 12, elements=st.floats(-2, 3, allow_nan=False))


@given(unit_vectors)
def test_clamp_output_satisfies_bounds(raw):
    assert DEFAULT_SPACE.issues(clamp_to_space(raw)) == []


@given(unit_vectors)
def test_clamp_is_idempotent(raw):
    once = clamp_to_space(raw)
    twice = clamp_to_space(DEFAULT_SPACE.encode(once))
    for a, b in zip(once.as_tuple(), twice.as_tuple()):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12) if not isinstance(a, str) else a == b
    assert (once.label_rotation, once.orientation) == (twice.label_rotation, twice.orientation)


@given(st.floats(0, 1), st.floats(0.05, 0.95), st.floats(0.01, 0.5))
def test_wsr_penalty_range(w, mu, sigma):
    ref = WsrReference(mu, sigma)
    p = wsr_penalty(w, ref)
    assert -max(mu, 1 - mu) <= p <= 0
    if mu - sigma < w < mu + sigma:
        assert p == 0


@given(arrays(np.uint8, (6, 7, 3)), st.randoms(use_true_random=False))
def test_wave_is_permutation_invariant(img, rnd):
    if np.all(img == 255):
        return
    flat = img.reshape(-1, 3)
    order = list(range(len(flat)))
    rnd.shuffle(order)
    shuffled = flat[order].reshape(img.shape)
    assert wave_score(img, WAVE) == wave_score(shuffled, WAVE)


saliency_values = st.one_of(st.just(0.0), st.floats(1e-6, 1.0))


@given(arrays(np.float64, (8, 8), elements=saliency_values), st.floats(0.01, 100))
def test_task_saliency_scale_invariant(grid, c):
    if grid.max() == 0:
        return
    grid = grid / grid.max()
    scaled = grid * c
    renorm = scaled / scaled.max()
    aois = [(1, 1, 5, 6), (4, 2, 8, 8)]
    a, da = task_saliency(SaliencyMap(grid), aois)
    b, db = task_saliency(SaliencyMap(renorm), aois)
    assert da == db and abs(a - b) <= 1e-12


@given(st.floats(-5, 5), st.floats(0, 5), st.floats(-5, 5))
def test_ei_non_negative_and_dominates(mu, s, y):
    ei = float(ei_from_moments(mu, s, y))
    assert ei >= 0 and ei >= max(mu - y, 0) - 1e-12


tables = st.lists(st.floats(0, 1000, allow_nan=False), min_size=2, max_size=7).map(
    lambda vs: DataTable(tuple((f"cat{i}", float(round(v, 2))) for i, v in enumerate(vs))))


@FAST
@given(tables, unit_vectors, st.sampled_from(["FE", "RV", "CDV", "CP"]))
def test_render_invariants(table, raw, task_type):
    cats = table.categories
    targets = {"FE": (), "RV": (cats[0],), "CDV": tuple(cats[:2]), "CP": tuple(cats[-2:])}[task_type]
    spec = validate(ChartSpec(table, clamp_to_space(raw), TaskSpec(task_type, targets)))
    r = render(spec)
    assert r.raster.shape == (600, spec.width, 3)
    bars = r.bars()
    assert len(bars) == len(table.rows)
    assert sum(e.kind == "data_label" for e in r.elements) == len(table.rows)
    aois = task_aois(r, spec.task)
    assert len(aois) == (1 if task_type in ("FE", "RV") else len(targets))
    horizontal = spec.params.orientation == "horizontal"
    ext = [(b.bbox[2] - b.bbox[0]) if horizontal else (b.bbox[3] - b.bbox[1]) for b in bars]
    vmax = max(table.values)
    if vmax > 0 and not r.overflow:
        scale = max(ext) / vmax
        for e, v in zip(ext, table.values):
            assert abs(e - v * scale) <= 1.0 + 1e-9 or (v > 0 and e == 1)
    leg = text_legibility(r, pyramid_levels(r))
    assert 0.0 <= leg <= 1.0
