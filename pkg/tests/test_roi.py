import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vcc.adapters import BlockMatchingFlow, Detection, KnownObjectDetector, flow_magnitude, sequence_flows
from vcc.datasets import Motif, SyntheticSpec, generate_synthetic
from vcc.geometry import BoundingBox
from vcc.roi import (
    RoiThresholds, binarize, detect_motion_rois, extract_rois, filter_appearance_rois, subtract_rois,
)
from oracles import flood_fill_boxes


def B(x1, y1, x2, y2, conf=0.9):
    return BoundingBox(x1, y1, x2, y2, conf)


def test_thresholds_validated():
    with pytest.raises(ValueError):
        RoiThresholds(T_o=1.5)
    with pytest.raises(ValueError):
        RoiThresholds(T_ar=1.0)
    with pytest.raises(ValueError):
        RoiThresholds(T_a=0)


def test_small_box_removed():
    assert filter_appearance_rois([B(0, 0, 10, 10)], 144, 0.6) == []  # area 100


def test_area_threshold_is_strict():
    assert filter_appearance_rois([B(0, 0, 12, 12)], 144, 0.6) == []
    assert len(filter_appearance_rois([B(0, 0, 13, 12)], 144, 0.6)) == 1


def test_nested_box_removed():
    big, small = B(0, 0, 50, 50), B(10, 10, 30, 30)
    assert filter_appearance_rois([small, big], 144, 0.6) == [big]


def test_disjoint_boxes_kept():
    a, b = B(0, 0, 20, 20), B(30, 30, 50, 50)
    assert set(filter_appearance_rois([a, b], 144, 0.6)) == {a, b}


def test_overlap_ratio_uses_smaller_area():
    big, part = B(0, 0, 40, 40), B(30, 0, 50, 20)  # half of `part` lies in `big`
    assert len(filter_appearance_rois([big, part], 144, 0.6)) == 2
    assert filter_appearance_rois([big, part], 144, 0.5) == [big]


def test_equal_area_tie_drops_lower_confidence():
    a, b = B(0, 0, 20, 20, 0.7), B(2, 0, 22, 20, 0.9)
    assert filter_appearance_rois([a, b], 144, 0.6) == [b]
    c, d = B(0, 0, 20, 20, 0.8), B(2, 0, 22, 20, 0.8)
    assert filter_appearance_rois([d, c], 144, 0.6) == [d]


box_st = st.builds(
    lambda x, y, w, h, c: BoundingBox(x, y, x + w, y + h, c),
    st.integers(0, 60), st.integers(0, 60), st.integers(1, 40), st.integers(1, 40), st.floats(0.5, 1.0),
)


@settings(max_examples=80, deadline=None)
@given(st.lists(box_st, max_size=10), st.floats(0.1, 1.0))
def test_filter_idempotent_and_predicates_hold(boxes, T_o):
    kept = filter_appearance_rois(boxes, 144, T_o)
    assert filter_appearance_rois(kept, 144, T_o) == kept
    for i, a in enumerate(kept):
        assert a.area > 144
        for b in kept[:i]:
            assert a.intersection(b) / min(a.area, b.area) < T_o


def test_binarize():
    assert not binarize(np.zeros((4, 4)), 1).any()
    m = np.zeros((2, 2))
    m[0, 0] = 1.5
    m[0, 1] = 1.0
    assert binarize(m, 1).tolist() == [[True, False], [False, False]]


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (6, 6), elements=st.floats(0, 5)), st.floats(0.1, 4), st.floats(0, 1))
def test_binarize_monotone(m, t, dt):
    assert not (binarize(m, t + dt) & ~binarize(m, t)).any()


def test_subtract():
    m = np.ones((10, 12), bool)
    np.testing.assert_array_equal(subtract_rois(m, []), m)
    assert not subtract_rois(m, [B(0, 0, 12, 10)]).any()
    left = subtract_rois(m, [B(0, 0, 6, 10)])
    assert not left[:, :6].any() and left[:, 6:].all()


def test_single_block_kept():
    m = np.zeros((50, 50), bool)
    m[5:25, 10:30] = True
    [b] = detect_motion_rois(m, 144, 10)
    assert b.coords == (10, 5, 30, 25) and b.area == 400 and b.source == "m"


def test_thin_strip_removed():
    m = np.zeros((20, 120), bool)
    m[5:8, 5:105] = True
    assert detect_motion_rois(m, 144, 10) == []


@settings(max_examples=60, deadline=None)
@given(arrays(bool, (30, 30)), st.sampled_from([0.5, 4, 20]), st.sampled_from([2, 10]))
def test_motion_rois_equal_filtered_flood_fill(m, T_a, T_ar):
    expect = [b for b in flood_fill_boxes(m)
              if (b[2] - b[0]) * (b[3] - b[1]) > T_a and 1 / T_ar < (b[2] - b[0]) / (b[3] - b[1]) < T_ar]
    assert [b.coords for b in detect_motion_rois(m, T_a, T_ar)] == expect


TH = RoiThresholds(T_a=144)


def test_static_scene_no_detections_is_empty():
    frame = np.full((40, 40, 3), 90, np.uint8)
    assert extract_rois(frame, np.zeros((40, 40)), None, TH) == []


def test_motion_map_shape_checked():
    with pytest.raises(ValueError):
        extract_rois(np.zeros((10, 10, 3)), np.zeros((9, 10)), None, TH)


def test_detector_covers_mover():
    frame = np.zeros((60, 60, 3), np.uint8)
    motion = np.zeros((60, 60))
    motion[10:30, 10:30] = 3.0
    det = KnownObjectDetector({0: [(8, 8, 32, 32)]})
    rois = extract_rois(frame, motion, det, TH, 0)
    assert [(b.coords, b.source) for b in rois] == [((8, 8, 32, 32), "a")]
    no_det = extract_rois(frame, motion, None, TH, 0)
    assert [(b.coords, b.source) for b in no_det] == [((10, 10, 30, 30), "m")]


@settings(max_examples=30, deadline=None)
@given(arrays(bool, (40, 40)), st.lists(box_st, max_size=4))
def test_motion_rois_avoid_appearance_regions(m, dets):
    det = lambda f, i=None: [Detection(b.clip(40, 40), b.confidence) for b in dets if b.clip(40, 40)]
    th = RoiThresholds(T_a=4, T_o=0.6, T_ar=10)
    rois = extract_rois(np.zeros((40, 40, 3)), m.astype(float) * 2, det, th)
    app = [b for b in rois if b.source == "a"]
    for mb in (b for b in rois if b.source == "m"):
        sub = subtract_rois(m, app)
        # every retained motion box is the hull of pixels that survive subtraction
        assert sub[mb.y1 : mb.y2, mb.x1 : mb.x2].any()
        for ab in app:
            inner = np.zeros_like(m)
            inner[ab.y1 : ab.y2, ab.x1 : ab.x2] = True
            assert not (sub & inner).any()


def test_novel_mover_recovered_from_flow():
    spec = SyntheticSpec(64, 96, 8, [Motif("circle", 20, 3.0, 0.0, position=(10.0, 20.0))], seed=4)
    seq, _, ext = generate_synthetic(spec)
    flows = sequence_flows(seq.frames, BlockMatchingFlow())
    for t in range(1, 6):
        rois = extract_rois(seq.frames[t], flow_magnitude(flows[t]), None, TH, t)
        truth = BoundingBox(*map(int, ext[(0, False)][t]))
        assert max(b.iou(truth) for b in rois) >= 0.7
