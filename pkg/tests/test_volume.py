import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mme_eval import (
    BinaryMask,
    IncompatibleGridsError,
    LabelVolume,
    Segment,
    Spacing,
    class_mask,
    connected_components,
    overlap,
    volume_of,
)

from oracles import flood_fill_partition


def test_spacing_must_be_positive():
    with pytest.raises(ValueError):
        Spacing(1, 0, 1)
    with pytest.raises(ValueError):
        Spacing(-1, 1, 1)
    assert Spacing(0.5, 0.5, 2.0).voxel_volume == 0.5


def test_label_volume_2d_becomes_depth_one():
    vol = LabelVolume(np.array([[1, 0], [2, 1]]))
    assert vol.dims == (2, 2, 1)
    assert vol.classes() == [1, 2]


def test_label_volume_rejects_negative():
    with pytest.raises(ValueError):
        LabelVolume(np.array([[0, -1]]))


def test_from_flat_is_x_fastest():
    vol = LabelVolume.from_flat((2, 2, 1), [1, 2, 3, 4])
    assert vol.labels[1, 0, 0] == 2
    assert vol.labels[0, 1, 0] == 3
    assert list(vol.flat()) == [1, 2, 3, 4]


def test_class_mask_absent_class():
    mask = class_mask(LabelVolume(np.zeros((3, 3, 2), int)), 1)
    assert not mask.any()
    assert mask.dims == (3, 3, 2)


def test_class_mask_direct():
    vol = LabelVolume.from_flat((2, 2, 1), [1, 2, 1, 0], Spacing(1, 2, 3))
    mask = class_mask(vol, 1)
    assert list(mask.bits.ravel(order="F")) == [True, False, True, False]
    assert mask.spacing == Spacing(1, 2, 3)


def test_class_mask_matches_voxel_loop():
    rng = np.random.default_rng(3)
    labels = rng.integers(0, 4, size=(8, 8, 4))
    vol = LabelVolume(labels)
    for k in range(4):
        bits = class_mask(vol, k).bits
        for idx in np.ndindex(labels.shape):
            assert bits[idx] == (labels[idx] == k)


def test_connected_components_empty():
    assert len(connected_components(BinaryMask(np.zeros((4, 4, 4), bool)))) == 0


def test_corner_touching_voxels():
    bits = np.zeros((3, 3, 3), bool)
    bits[0, 0, 0] = bits[1, 1, 1] = True
    assert len(connected_components(BinaryMask(bits), 26)) == 1
    assert len(connected_components(BinaryMask(bits), 18)) == 2
    assert len(connected_components(BinaryMask(bits), 6)) == 2


def test_edge_touching_voxels_18():
    bits = np.zeros((3, 3, 3), bool)
    bits[0, 0, 1] = bits[1, 1, 1] = True
    assert len(connected_components(BinaryMask(bits), 18)) == 1
    assert len(connected_components(BinaryMask(bits), 6)) == 2


def test_invalid_connectivity():
    with pytest.raises(ValueError):
        connected_components(BinaryMask(np.ones((2, 2, 2), bool)), 8)


@pytest.mark.parametrize("connectivity", [6, 18, 26])
def test_components_match_flood_fill(connectivity):
    rng = np.random.default_rng(connectivity)
    for _ in range(50):
        bits = rng.random((8, 8, 4)) < rng.uniform(0.1, 0.6)
        segs = connected_components(BinaryMask(bits), connectivity)
        expected = flood_fill_partition(bits, connectivity)
        assert [s.voxels for s in segs] == [frozenset(p) for p in expected]
        assert [s.id for s in segs] == list(range(1, len(expected) + 1))


@settings(max_examples=60, deadline=None)
@given(arrays(bool, st.tuples(st.integers(1, 6), st.integers(1, 6), st.integers(1, 4))),
       st.sampled_from([6, 18, 26]))
def test_partition_and_determinism(bits, connectivity):
    mask = BinaryMask(bits)
    a = connected_components(mask, connectivity)
    b = connected_components(mask, connectivity)
    assert sum(s.size for s in a) == mask.count()
    assert [tuple(s.indices) for s in a] == [tuple(s.indices) for s in b]
    assert np.array_equal(a.label_map, b.label_map)
    seen = np.zeros(bits.size, int)
    for s in a:
        seen[s.indices] += 1
    assert seen.max(initial=0) <= 1


def test_volume_of():
    assert volume_of(0, Spacing()) == 0
    assert volume_of(10, Spacing(1, 1, 1)) == 10
    assert volume_of(7, Spacing(0.5, 0.5, 2.0)) == 3.5


@given(st.integers(0, 10**6), st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0.5, 4))
def test_volume_linear_in_each_spacing(n, dx, dy, dz, c):
    base = volume_of(n, Spacing(dx, dy, dz))
    assert volume_of(n, Spacing(c * dx, dy, dz)) == pytest.approx(c * base, rel=1e-12)
    assert volume_of(n, Spacing(dx, dy, c * dz)) == pytest.approx(c * base, rel=1e-12)


def test_segment_volume_uses_spacing():
    bits = np.zeros((4, 4, 4), bool)
    bits[0, 0, :3] = True
    seg = Segment.from_mask(1, bits, Spacing(0.5, 0.5, 2.0))
    assert seg.volume_mm3 == 1.5


def test_overlap():
    a = np.zeros((6, 6, 2), bool)
    a[:3] = True
    b = np.zeros((6, 6, 2), bool)
    b[3:] = True
    sa, sb = Segment.from_mask(1, a), Segment.from_mask(2, b)
    assert overlap(sa, sb) == frozenset()
    assert overlap(sa, sa) == sa.voxels


def test_overlap_random_matches_membership():
    rng = np.random.default_rng(11)
    for _ in range(30):
        a, b = rng.random((2, 6, 6, 2)) < 0.4
        sa, sb = Segment.from_mask(1, a), Segment.from_mask(2, b)
        expected = {v for v in np.ndindex(a.shape) if a[v] and b[v]}
        assert overlap(sa, sb) == expected


def test_overlap_grid_mismatch():
    with pytest.raises(IncompatibleGridsError):
        overlap(Segment.from_mask(1, np.ones((2, 2, 2), bool)), Segment.from_mask(1, np.ones((3, 2, 2), bool)))
