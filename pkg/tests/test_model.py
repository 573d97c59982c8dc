import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mvstream.model import (CONTENT_PRESETS, EmptyIntersection, ModelError, NavigationModel,
                            NavigationWindow, QualityClampWarning, RateOutOfDomain, Representation,
                            RepresentationSet, ViewOrderViolation, _synth, coding_distortion,
                            coding_quality, make_video, preset_videos, segment_distortion,
                            segment_satisfaction, storage_cost, synth_distortion, synth_weights)
from mvstream.segments import MvNavigationSegment

# [DERIVED] a - b / (rate + e) evaluated by an independent one-line script
GOLDEN_QUALITY = {
    "shark": [0.9075108997225525, 0.9484081361927924, 0.9952880479777073, 0.9996107738985827],
    "dancer": [0.731750585799139, 0.7849066421138281, 0.9464660179166882, 0.9769847291360961],
    "hall": [0.8547733573087586, 0.901703283833794, 0.9716989078555925, 0.9793039739779382],
}
GOLDEN_RATES = (600, 1000, 10000, 120000)


@pytest.fixture(scope="module")
def videos():
    return preset_videos(q_ticks=4)


def test_content_presets():
    assert CONTENT_PRESETS["shark"][:3] == (1.0, 46.67, -95.40)
    assert CONTENT_PRESETS["dancer"][:3] == (0.98, 364.45, 868.08)
    assert CONTENT_PRESETS["hall"][:3] == (0.98, 83.57, 67.35)
    assert {n: p[3] for n, p in CONTENT_PRESETS.items()} == {"dancer": 0.35, "shark": 0.52, "hall": 1.32}


@pytest.mark.parametrize("name", sorted(GOLDEN_QUALITY))
def test_coding_quality_golden(videos, name):
    for rate, expected in zip(GOLDEN_RATES, GOLDEN_QUALITY[name]):
        assert coding_quality(videos[name], rate) == pytest.approx(expected, abs=1e-9)


def test_coding_examples(videos):
    assert coding_quality(videos["shark"], 1000) == pytest.approx(0.94841, abs=5e-6)
    assert coding_quality(videos["dancer"], 600) == pytest.approx(0.73175, abs=5e-6)
    assert coding_quality(videos["hall"], 1e9) == pytest.approx(0.98, abs=1e-6)
    assert coding_distortion(videos["shark"], 1000) == pytest.approx(0.05159, abs=5e-6)
    assert coding_distortion(videos["hall"], 600) == pytest.approx(0.14522, abs=1e-5)


def test_rate_out_of_domain(videos):
    with pytest.raises(RateOutOfDomain):
        coding_quality(videos["shark"], 90)


def test_clamp_warns(videos):
    with pytest.warns(QualityClampWarning):
        assert coding_quality(videos["shark"], 100) == 0.0


@pytest.mark.parametrize("name", sorted(CONTENT_PRESETS))
def test_quality_monotone_on_grid(videos, name):
    rates = np.geomspace(200, 200000, 400)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", QualityClampWarning)
        q = [coding_quality(videos[name], r) for r in rates]
    assert all(b >= a for a, b in zip(q, q[1:]))


@settings(max_examples=300, deadline=None)
@given(xi=st.floats(0, 20), d1=st.floats(0, 50), d2=st.floats(0, 50))
def test_weights_normalized(xi, d1, d2):
    w = synth_weights(xi, min(d1, d2), max(d1, d2))
    assert all(-1e-12 <= x <= 1 + 1e-12 for x in w)
    assert abs(sum(w) - 1.0) <= 1e-12


def test_weights_randomized_grid():
    rng = np.random.default_rng(7)
    for _ in range(5000):
        xi, a, b = rng.uniform(0, 5), rng.uniform(0, 20), rng.uniform(0, 20)
        assert abs(sum(synth_weights(xi, min(a, b), max(a, b))) - 1.0) <= 1e-12


def test_synth_example_independent():
    # anchors at view units 2 and 4 on a Q=1 lattice, both at distortion 0.10, u = 3
    video = make_video("hall", q_ticks=1, label_spacing=8.0)
    a = math.exp(-1.32)
    expected = a * 0.1 + (1 - a) * a * 0.1 + (1 - a - (1 - a) * a) * 0.35
    assert _synth(video, 3, 2, 0.1, 4, 0.1) == pytest.approx(expected, abs=1e-12)
    # the hand-rounded figure quoted for this case agrees to within its rounding
    assert abs(expected - 0.23392) < 5e-4


def test_synth_boundary_identities(videos):
    v = videos["shark"]
    good, bad = Representation("shark", 0, 4000), Representation("shark", 8, 300)
    assert synth_distortion(v, 0, good, bad) == pytest.approx(coding_distortion(v, 4000), abs=1e-9)
    assert synth_distortion(v, 0, good, bad) == coding_distortion(v, 4000)
    far = make_video("shark", q_ticks=1, xi=60.0)
    got = _synth(far, 4, 0, 0.05, 8, 0.07)
    assert got == pytest.approx(far.d_inpaint, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(u=st.integers(0, 8), r1=st.sampled_from([300, 600, 1000, 4000]),
       r2=st.sampled_from([300, 600, 1000, 4000]), name=st.sampled_from(sorted(CONTENT_PRESETS)))
def test_synth_bounds(u, r1, r2, name):
    v = make_video(name, q_ticks=1)
    left, right = Representation(name, 0, r1), Representation(name, 8, r2)
    d = synth_distortion(v, u, left, right)
    hi = max(coding_distortion(v, r1), coding_distortion(v, r2), v.d_inpaint)
    assert 0 <= d <= 1 and d <= hi + 1e-12


def test_synth_order_checks(videos):
    v = videos["hall"]
    a, b = Representation("hall", 0, 600), Representation("hall", 4, 600)
    with pytest.raises(ViewOrderViolation):
        synth_distortion(v, 2, b, a)
    with pytest.raises(ViewOrderViolation):
        synth_distortion(v, 5, a, b)


def test_segment_distortion_modes(videos):
    v = videos["dancer"]
    seg = MvNavigationSegment(Representation("dancer", 0, 1000), Representation("dancer", 4, 1000))
    full = segment_distortion(seg, NavigationWindow(0, 4), v)
    pts = [synth_distortion(v, u, seg.left, seg.right) for u in range(4)]
    assert full == pytest.approx(sum(pts) / 4, abs=1e-12)
    half = segment_distortion(seg, NavigationWindow(0, 1), v)
    assert half == pytest.approx(sum(pts[:2]) / 4, abs=1e-12)
    inter = segment_distortion(seg, NavigationWindow(0, 1), v, "intersection")
    assert inter == pytest.approx(sum(pts[:2]) / 2, abs=1e-12)
    assert segment_satisfaction(seg, NavigationWindow(0, 4), v) == pytest.approx(1 - full)
    with pytest.raises(EmptyIntersection):
        segment_distortion(seg, NavigationWindow(5, 8), v)


def test_intersection_tiling_matches_window_average(videos):
    v = videos["hall"]
    reps = [Representation("hall", c, r) for c, r in ((0, 600), (4, 2000), (8, 300), (12, 1000))]
    segs = [MvNavigationSegment(a, b) for a, b in zip(reps, reps[1:])]
    w = NavigationWindow(2, 11)
    direct = []
    for u in w.points():
        s = next(s for s in segs if s.left.view <= u < s.right.view)
        direct.append(synth_distortion(v, u, s.left, s.right))
    tiled = 0.0
    for s in segs:
        n = len(range(max(s.left.view, w.lo), min(s.right.view, w.hi + 1)))
        if n:
            tiled += n * segment_distortion(s, w, v, "intersection")
    assert tiled / len(w) == pytest.approx(np.mean(direct), abs=1e-12)


def test_lattice_and_labels():
    v = make_video("shark", q_ticks=4)
    assert v.cameras == tuple(range(0, 37, 4))
    assert v.tick_of_label(16) == 8 and v.label_of_tick(26) == 52
    with pytest.raises(ModelError):
        v.tick_of_label(3)
    assert v.focus_mean == pytest.approx(4.5) and v.focus_var == pytest.approx(250 / 64)
    assert NavigationModel().reach_ticks(v) == 8
    with pytest.raises(ModelError):
        NavigationModel(q_ticks=2).reach_ticks(v)


def test_storage_cost_counts_depth_once_per_view():
    v = make_video("hall", q_ticks=1, depth_overhead=50.0)
    reps = [Representation("hall", 8, 600), Representation("hall", 8, 1000), Representation("hall", 16, 300)]
    assert storage_cost(reps) == 1900
    assert storage_cost(reps, {"hall": v}) == 2000
    assert RepresentationSet.build(reps, {"hall": v}).storage_cost == 2000


def test_invalid_models():
    with pytest.raises(ModelError):
        make_video("shark", labels=(0.0,))
    with pytest.raises(ModelError):
        make_video("nope")
    with pytest.raises(ModelError):
        Representation("x", 0, 0)
    with pytest.raises(ModelError):
        NavigationWindow(3, 2)
