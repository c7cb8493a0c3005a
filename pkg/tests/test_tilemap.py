import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from riverlitter.boxes import Box, Detection
from riverlitter.errors import InvalidInputError
from riverlitter.tilemap import (TileGrid, globalize_boxes, merge_seam_boxes, mosaic, tile)


def test_exact_partition_origins():
    grid, tiles = tile(np.zeros((1024, 1536, 1)), 512, 512)
    assert len(tiles) == 6
    assert set(grid.origins) == {(r, c) for r in (0, 512) for c in (0, 512, 1024)}
    assert grid.origins[:3] == ((0, 0), (0, 512), (0, 1024))


def test_single_tile():
    grid, tiles = tile(np.zeros((512, 512, 3)), 512)
    assert grid.origins == ((0, 0),)


def test_clamped_edge_tile():
    # enumerate the clamp rule by hand: 0, then 512 would overrun 700 -> 700 - 512
    grid, _ = tile(np.zeros((700, 512, 1)), 512, 512)
    assert grid.row_origins() == [0, 188]


def test_tile_larger_than_canvas():
    with pytest.raises(InvalidInputError):
        tile(np.zeros((100, 600, 1)), 512)


@given(st.integers(8, 80), st.integers(8, 80), st.integers(1, 8), st.data())
def test_grid_coverage_and_count(h, w, t, data):
    t = min(t, h, w)
    stride = data.draw(st.integers(1, t))
    grid = TileGrid.build(h, w, t, stride)
    cover = np.zeros((h, w), dtype=int)
    for r, c in grid.origins:
        assert r + t <= h and c + t <= w
        cover[r:r + t, c:c + t] += 1
    assert (cover >= 1).all()
    expected = math.ceil((h - t) / stride + 1) * math.ceil((w - t) / stride + 1)
    assert len(grid.origins) == expected


@given(st.integers(1, 4), st.integers(1, 4), st.sampled_from([4, 8]))
def test_mosaic_round_trip_exact_partition(nr, nc, t):
    img = np.random.default_rng(nr * 10 + nc).random((nr * t, nc * t, 3)).astype(np.float32)
    grid, tiles = tile(img, t, t)
    assert mosaic(grid, tiles).tobytes() == img.tobytes()


def test_mosaic_single_tile():
    img = np.random.default_rng(0).random((16, 16, 1)).astype(np.float32)
    grid, tiles = tile(img, 16)
    assert np.array_equal(mosaic(grid, tiles), img)


def test_mosaic_overlap_mean():
    grid = TileGrid.build(4, 6, 4, 2)
    assert grid.origins == ((0, 0), (0, 2))
    tiles = [np.full((4, 4, 1), 0.2, np.float32), np.full((4, 4, 1), 0.6, np.float32)]
    out = mosaic(grid, tiles)[:, :, 0]
    assert np.allclose(out[:, :2], 0.2)
    assert np.allclose(out[:, 2:4], 0.4)
    assert np.allclose(out[:, 4:], 0.6)


def test_mosaic_count_mismatch():
    grid = TileGrid.build(8, 8, 4)
    with pytest.raises(InvalidInputError):
        mosaic(grid, [np.zeros((4, 4, 1))])


def test_globalize_translation():
    d = Detection(Box(10, 20, 40, 60, 2), 0.7)
    assert globalize_boxes([d], (0, 0)) == [d]
    (g,) = globalize_boxes([d], (512, 1024))
    assert g.box.as_tuple() == (1034, 532, 1064, 572)
    assert g.confidence == 0.7 and g.class_id == 2
    assert g.box.translated(-1024, -512) == d.box


def _seam_pair(cls_b=1):
    grid = TileGrid.build(512, 1024, 512)
    left = Detection(Box(480, 100, 512, 140, 1), 0.6)
    right = Detection(Box(512, 100, 530, 140, cls_b), 0.8)
    return grid, left, right


def test_seam_merge_union():
    grid, left, right = _seam_pair()
    (m,) = merge_seam_boxes([left, right], grid)
    assert m.box.as_tuple() == (480, 100, 530, 140)
    assert m.confidence == 0.8


def test_seam_merge_class_guard():
    grid, left, right = _seam_pair(cls_b=2)
    assert merge_seam_boxes([left, right], grid) == [left, right]


def test_seam_merge_distance_guard():
    grid = TileGrid.build(512, 1024, 512)
    far = [Detection(Box(300, 100, 340, 140, 1), 0.5), Detection(Box(350, 100, 390, 140, 1), 0.5)]
    assert merge_seam_boxes(far, grid) == far


def test_seam_merge_horizontal_seam():
    grid = TileGrid.build(1024, 512, 512)
    top = Detection(Box(100, 490, 140, 511, 3), 0.4)
    bottom = Detection(Box(102, 513, 138, 530, 3), 0.5)
    (m,) = merge_seam_boxes([top, bottom], grid)
    assert m.box.as_tuple() == (100, 490, 140, 530)


@given(st.lists(st.tuples(st.integers(0, 1000), st.integers(0, 480), st.integers(4, 40),
                          st.integers(4, 40), st.integers(0, 1)), max_size=8))
def test_seam_merge_idempotent(raw):
    grid = TileGrid.build(512, 1024, 512)
    dets = [Detection(Box(x, y, min(x + w, 1024), min(y + h, 512), k), 0.5)
            for x, y, w, h, k in raw if x + 1 < 1024]
    once = merge_seam_boxes(dets, grid)
    assert merge_seam_boxes(once, grid) == once
