import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vcc.events import STC, FlowStack
from vcc.geometry import BoundingBox
from vcc.vct import VCTDataset, make_all_types, make_vct


def _cube(D=5, N=None):
    shape = (D, 4, 4, 3) if N is None else (N, D, 4, 4, 3)
    return np.arange(np.prod(shape), dtype=np.float32).reshape(shape)


def test_type_three_of_five():
    p = _cube()
    v = make_vct(p, None, 3)
    np.testing.assert_array_equal(v.patches_in, p[[0, 1, 3, 4]])
    np.testing.assert_array_equal(v.target_patch, p[2])


def test_type_D_is_frame_prediction():
    p = _cube()
    v = make_vct(p, p[..., :2], 5)
    np.testing.assert_array_equal(v.patches_in, p[:4])
    np.testing.assert_array_equal(v.target_patch, p[4])
    np.testing.assert_array_equal(v.target_flow, p[4, ..., :2])


@pytest.mark.parametrize("i", [0, 6])
def test_type_out_of_range(i):
    with pytest.raises(ValueError):
        make_vct(_cube(), None, i)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 7), st.data())
def test_reinsert_round_trip(D, data):
    p = np.random.default_rng(D).normal(size=(D, 3, 3, 3))
    i = data.draw(st.integers(1, D))
    np.testing.assert_array_equal(make_vct(p, None, i).reinsert(), p)


def test_all_types_from_array():
    sets = make_all_types(_cube(N=3))
    assert len(sets) == 5 and all(len(s) == 3 for s in sets)
    assert [s.type_idx for s in sets] == [1, 2, 3, 4, 5]


def test_all_types_from_stc_list():
    stcs = [STC(_cube(), BoundingBox(0, 0, 4, 4), 4) for _ in range(2)]
    flows = [FlowStack(np.zeros((5, 4, 4, 2), np.float32)) for _ in range(2)]
    sets = make_all_types(stcs, flows)
    assert len(sets) == 5 and sets[0].target_flows().shape == (2, 4, 4, 2)


def test_all_types_empty():
    sets = make_all_types([], D=5)
    assert len(sets) == 5 and all(len(s) == 0 for s in sets)


def test_targets_tile_the_cube():
    p = _cube(N=2)
    sets = make_all_types(p)
    stacked = np.stack([s.target_patches() for s in sets], axis=1)
    np.testing.assert_array_equal(stacked, p)


def test_dataset_items_match_make_vct():
    p = _cube(N=3)
    ds = VCTDataset(p, None, 2)
    np.testing.assert_array_equal(ds.inputs()[1], make_vct(p[1], None, 2).patches_in)
    np.testing.assert_array_equal(ds[1].target_patch, p[1, 1])


def test_dataset_without_flows():
    with pytest.raises(ValueError):
        VCTDataset(_cube(N=2), None, 1).target_flows()


def test_misaligned_flows_rejected():
    with pytest.raises(ValueError):
        VCTDataset(_cube(N=2), np.zeros((3, 5, 4, 4, 2)), 1)
