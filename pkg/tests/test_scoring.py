import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vcc.scoring import (
    MetricConfig, ScoreSeries, frame_scores, mixed_score, modality_fuse, mse, paste_error_maps, paste_score_maps,
    rectify, ssim, ssim_constants, type_ensemble,
)
from vcc.training import ScoreStats
from oracles import ssim_direct

series_st = arrays(np.float64, st.integers(1, 40), elements=st.floats(-100, 100))


def test_mse():
    x = np.random.default_rng(0).normal(size=(4, 4, 3))
    assert mse(x, x) == 0
    assert mse(x, x + 0.25) == pytest.approx(0.0625)


def test_mse_relates_to_loss():
    x = np.random.default_rng(1).normal(size=(8, 8, 3))
    y = x + np.random.default_rng(2).normal(size=x.shape)
    assert mse(x, y) == pytest.approx(((x - y) ** 2).sum() / x.size)


def test_mse_batched():
    x = np.random.default_rng(3).normal(size=(5, 3, 4, 4))
    y = np.zeros_like(x)
    np.testing.assert_allclose(mse(x, y), [(x[k] ** 2).mean() for k in range(5)])


def test_ssim_identical_is_one():
    x = np.random.default_rng(4).uniform(-1, 1, (8, 8, 3))
    assert ssim(x, x) == pytest.approx(1.0, abs=1e-12)


def test_ssim_negative_for_anticorrelated():
    x = np.random.default_rng(5).uniform(0, 1, (8, 8, 3))
    assert ssim(x, 1.2 - x) < 0


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 4, 3), elements=st.floats(-1, 1)), arrays(np.float64, (4, 4, 3), elements=st.floats(-1, 1)))
def test_ssim_symmetric_and_bounded(x, y):
    a, b = ssim(x, y), ssim(y, x)
    assert a == pytest.approx(b, abs=1e-12)
    assert -1 - 1e-12 <= a <= 1 + 1e-12


def test_ssim_matches_direct_formula():
    rng = np.random.default_rng(6)
    c1, c2 = ssim_constants(2.0)
    for _ in range(200):
        x, y = rng.uniform(-1, 1, (2, 6, 6, 3))
        assert abs(ssim(x, y, c1, c2) - ssim_direct(x, y, c1, c2)) <= 1e-6


def test_mixed_score():
    x = np.random.default_rng(7).normal(size=(4, 4, 3))
    y = x + 0.3
    assert mixed_score(x, y, 0.0) == mse(x, y)
    assert mixed_score(x, x, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert mixed_score(x, y, 1.0) == pytest.approx(mse(x, y) + 1 - ssim(x, y))


def test_mixed_score_arithmetic(monkeypatch):
    import vcc.scoring as sc

    monkeypatch.setattr(sc, "mse", lambda a, b: 0.5)
    monkeypatch.setattr(sc, "ssim", lambda a, b, L=2.0: 0.8)
    assert sc.mixed_score(None, None, 1.0) == pytest.approx(0.7)


def test_type_ensemble():
    assert type_ensemble([1, 2, 3, 4, 5]) == 3
    assert type_ensemble([2.5] * 5) == 2.5
    assert type_ensemble([7.0]) == 7.0


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (3, 5), elements=st.floats(-10, 10)), st.floats(-5, 5))
def test_ensemble_linear(x, c):
    np.testing.assert_allclose(type_ensemble(c * x), c * type_ensemble(x), atol=1e-9)


def test_modality_fuse():
    s = ScoreStats(1.0, 2.0, 3.0, 4.0)
    assert modality_fuse(1.0, 3.0, s, 0.5, 1.0) == 0
    assert modality_fuse(5.0, 11.0, s, 0.5, 1.0) == pytest.approx(0.5 * 2 + 2)
    assert modality_fuse(5.0, 99.0, s, 1.0, 0.0) == pytest.approx(2.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
def test_fuse_linear(a1, m1, a2, m2):
    s = ScoreStats(0.0, 2.0, 1.0, 0.5)
    lhs = modality_fuse(a1 + a2, m1 + m2, s, 1.0, 0.5)
    rhs = modality_fuse(a1, m1, s, 1.0, 0.5) + modality_fuse(a2, m2, s, 1.0, 0.5) - modality_fuse(0, 0, s, 1.0, 0.5)
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_metric_config_validation():
    with pytest.raises(ValueError):
        MetricConfig(w_a=0, w_m=0)
    with pytest.raises(ValueError):
        MetricConfig(ssim_weight=-1)
    with pytest.raises(ValueError):
        MetricConfig(rect_scheme="mode")


def test_frame_scores():
    assert frame_scores([3, 3], [0.2, 0.9], 5)[3] == 0.9
    assert frame_scores([1], [0.4], 3)[1] == 0.4
    s = frame_scores([2, 3, 5], [0.5, 0.3, 0.8], 7, first_valid=2)
    assert s.tolist() == [0.5, 0.5, 0.5, 0.3, 0.3, 0.8, 0.3]


def test_frame_scores_without_events():
    assert frame_scores([], [], 4).tolist() == [0, 0, 0, 0]


def test_rectify_average_example():
    assert rectify([1, 1, 4], "average", 2)[-1] == 2


def test_rectify_decay_example():
    r = rectify([0, 1], "decay", 1, q=0.8)
    assert abs(r[-1] - 1 / 1.8) <= 1e-12
    assert r[0] == 0


@pytest.mark.parametrize("scheme", ["decay", "average", "gaussian", "median", "none"])
@settings(max_examples=30, deadline=None)
@given(c=st.floats(-1e3, 1e3), n=st.integers(1, 30), W=st.integers(0, 12))
def test_rectify_constant_series(scheme, c, n, W):
    assert np.array_equal(rectify(np.full(n, c), scheme, W), np.full(n, c))


@pytest.mark.parametrize("scheme", ["decay", "average", "gaussian", "median"])
@settings(max_examples=30, deadline=None)
@given(s=series_st, W=st.integers(0, 8))
def test_rectify_stays_in_window_envelope(scheme, s, W):
    r = rectify(s, scheme, W)
    for l in range(len(s)):
        win = s[max(0, l - W) : l + 1]
        assert win.min() - 1e-9 <= r[l] <= win.max() + 1e-9


@settings(max_examples=30, deadline=None)
@given(s=series_st, W=st.integers(0, 8))
def test_rectify_is_causal(s, W):
    r = rectify(s, "average", W)
    t = s.copy()
    t[-1] += 1000
    np.testing.assert_array_equal(rectify(t, "average", W)[:-1], r[:-1])


def test_median_is_plain_order_statistic():
    assert rectify([5, 1, 3, 100], "median", 2).tolist() == [5, 3, 3, 3]


def test_score_series_lengths():
    with pytest.raises(ValueError):
        ScoreSeries(np.zeros(3), np.zeros(4))


def test_paste_error_maps_max_on_overlap():
    maps = np.stack([np.full((4, 4), 1.0), np.full((4, 4), 3.0)])
    boxes = np.array([[0, 0, 6, 6], [4, 4, 8, 8]])
    out = paste_error_maps(maps, boxes, [1, 1], 2, (10, 10))
    assert not out[0].any()
    assert out[1, 0, 0] == 1 and out[1, 5, 5] == 3 and out[1, 7, 7] == 3 and out[1, 9, 9] == 0


def test_paste_score_maps():
    out = paste_score_maps([2.0, -1.0, 5.0], [(1, 1, 4, 4), (0, 0, 2, 2), (3, 3, 5, 5)], [0, 0, 1], 3, (6, 6))
    assert out.shape == (3, 6, 6)
    assert (out[2] == -1.0).all()  # no events: clip minimum everywhere
    assert out[0, 1, 1] == 2.0 and out[0, 0, 0] == -1.0 and out[0, 5, 5] == -1.0
    assert out[1, 3, 3] == 5.0 and out[1, 2, 2] == -1.0
    # normal-frame critical score equals the frame score
    assert out[0].max() == frame_scores([0, 0, 1], [2.0, -1.0, 5.0], 3)[0]


def test_paste_score_maps_empty():
    assert (paste_score_maps([], [], [], 2, (3, 3)) == 0).all()
