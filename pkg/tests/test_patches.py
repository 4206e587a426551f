import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmqs.patches import (
    PatchGrid,
    aggregate,
    aggregate_adjoint,
    extract,
    extract_adjoint,
    overlap_counts,
)

SMALL = np.arange(1, 10, dtype=float).reshape(3, 3)


def brute_extract(x, side, stride):
    """Window-by-window copy in raster order of origins."""
    chw = x[None] if x.ndim == 2 else np.moveaxis(x, 2, 0)
    cols = []
    for r in range(0, chw.shape[1] - side + 1, stride):
        for c in range(0, chw.shape[2] - side + 1, stride):
            cols.append(chw[:, r : r + side, c : c + side].ravel())
    return np.array(cols).T


def brute_counts(h, w, side, stride):
    counts = np.zeros((h, w))
    for r in range(0, h - side + 1, stride):
        for c in range(0, w - side + 1, stride):
            counts[r : r + side, c : c + side] += 1
    return counts


def test_extract_small_example():
    grid = PatchGrid.for_image(SMALL, 2)
    m = extract(SMALL, grid)
    assert grid.patch_count == 4
    expected = np.array([[1, 2, 4, 5], [2, 3, 5, 6], [4, 5, 7, 8], [5, 6, 8, 9]], dtype=float).T
    assert np.array_equal(m, expected)


def test_extract_whole_image_patch():
    x = np.random.default_rng(0).random((5, 5))
    m = extract(x, PatchGrid.for_image(x, 5))
    assert m.shape == (25, 1)
    assert np.array_equal(m[:, 0], x.ravel())


def test_extract_unit_patches():
    x = np.random.default_rng(1).random((4, 6))
    m = extract(x, PatchGrid.for_image(x, 1))
    assert np.array_equal(m, x.reshape(1, -1))


@pytest.mark.parametrize("shape, side, stride", [((9, 7), 3, 1), ((10, 10), 4, 2), ((6, 8, 3), 2, 2), ((7, 7, 3), 3, 1)])
def test_extract_matches_window_copy(shape, side, stride):
    x = np.random.default_rng(2).random(shape)
    grid = PatchGrid.for_image(x, side, stride)
    assert np.array_equal(extract(x, grid), brute_extract(x, side, stride))


def test_patch_count_formula():
    grid = PatchGrid(4, 13, 11, stride=3)
    assert grid.patch_count == ((13 - 4) // 3 + 1) * ((11 - 4) // 3 + 1)


def test_grid_rejects_bad_geometry():
    with pytest.raises(ValueError):
        PatchGrid(5, 4, 10)
    with pytest.raises(ValueError):
        PatchGrid(2, 4, 4, stride=0)
    with pytest.raises(ValueError):
        extract(np.zeros((4, 5)), PatchGrid(2, 4, 4))


def test_overlap_counts_small():
    counts = overlap_counts(PatchGrid(2, 3, 3))
    assert np.array_equal(counts, [[1, 2, 1], [2, 4, 2], [1, 2, 1]])


@pytest.mark.parametrize("grid", [PatchGrid(4, 4, 4), PatchGrid(3, 9, 6, stride=3)])
def test_overlap_counts_all_ones(grid):
    assert np.all(overlap_counts(grid) == 1)


def test_overlap_counts_match_brute_force():
    grid = PatchGrid(4, 14, 10, stride=2)
    assert np.array_equal(overlap_counts(grid), brute_counts(14, 10, 4, 2))


def test_overlap_counts_coverage_gap():
    with pytest.raises(ValueError):
        overlap_counts(PatchGrid(3, 10, 9, stride=3))
    with pytest.raises(ValueError):
        overlap_counts(PatchGrid(2, 7, 7, stride=5))


def test_aggregate_single_patch():
    v = np.random.default_rng(3).random(16)
    assert np.array_equal(aggregate(v[:, None], PatchGrid(4, 4, 4)), v.reshape(4, 4))


def test_aggregate_ones():
    grid = PatchGrid(2, 3, 3)
    assert np.array_equal(aggregate(np.ones((4, 4)), grid), np.ones((3, 3)))


def test_aggregate_shape_mismatch():
    with pytest.raises(ValueError):
        aggregate(np.ones((4, 3)), PatchGrid(2, 3, 3))


@settings(max_examples=40, deadline=None)
@given(
    side=st.integers(1, 6),
    stride=st.integers(1, 6),
    k_rows=st.integers(0, 5),
    k_cols=st.integers(0, 5),
    channels=st.sampled_from([1, 3]),
    seed=st.integers(0, 2**32 - 1),
)
def test_pseudo_inverse_round_trip(side, stride, k_rows, k_cols, channels, seed):
    stride = min(stride, side)
    h, w = side + stride * k_rows, side + stride * k_cols
    shape = (h, w) if channels == 1 else (h, w, channels)
    x = np.random.default_rng(seed).random(shape)
    grid = PatchGrid.for_image(x, side, stride)
    assert np.max(np.abs(aggregate(extract(x, grid), grid) - x)) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_extract_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = rng.random((9, 8)), rng.random((9, 8))
    grid = PatchGrid.for_image(x, 3, 2)
    np.testing.assert_allclose(extract(a * x + b * y, grid), a * extract(x, grid) + b * extract(y, grid), atol=1e-12)


@pytest.mark.parametrize("shape, side, stride", [((12, 9), 3, 1), ((13, 13, 3), 5, 2), ((8, 8), 8, 1)])
def test_adjoint_relations(shape, side, stride):
    rng = np.random.default_rng(7)
    x = rng.standard_normal(shape)
    grid = PatchGrid.for_image(x, side, stride)
    m = rng.standard_normal(grid.matrix_shape)
    assert np.vdot(extract(x, grid), m) == pytest.approx(np.vdot(x, extract_adjoint(m, grid)), abs=1e-10)
    assert np.vdot(aggregate(m, grid), x) == pytest.approx(np.vdot(m, aggregate_adjoint(x, grid)), abs=1e-10)
