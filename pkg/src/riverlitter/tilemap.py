"""Sliding-window tiling, mean-blended mosaics and seam-split box repair."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .boxes import Box, Detection
from .errors import InvalidInputError, InvalidParameterError
from .raster import DTYPE, as_image


def axis_origins(dim: int, tile_size: int, stride: int) -> list[int]:
    """Origins along one axis; the last one is clamped to ``dim - tile_size``."""
    origins = list(range(0, dim - tile_size + 1, stride))
    if origins[-1] + tile_size < dim:
        origins.append(dim - tile_size)
    return origins


@dataclass(frozen=True)
class TileGrid:
    tile_size: int
    stride: int
    canvas_height: int
    canvas_width: int
    origins: tuple[tuple[int, int], ...]

    @classmethod
    def build(cls, canvas_height: int, canvas_width: int, tile_size: int,
              stride: int | None = None) -> "TileGrid":
        stride = tile_size if stride is None else stride
        if tile_size < 1 or tile_size > min(canvas_height, canvas_width):
            raise InvalidInputError(
                f"tile {tile_size} does not fit canvas {canvas_height}x{canvas_width}")
        if not 1 <= stride <= tile_size:
            raise InvalidParameterError(f"stride must be in [1, {tile_size}], got {stride}")
        rows = axis_origins(canvas_height, tile_size, stride)
        cols = axis_origins(canvas_width, tile_size, stride)
        return cls(tile_size, stride, canvas_height, canvas_width,
                   tuple((r, c) for r in rows for c in cols))

    def row_origins(self) -> list[int]:
        return sorted({r for r, _ in self.origins})

    def col_origins(self) -> list[int]:
        return sorted({c for _, c in self.origins})

    def seams(self) -> tuple[list[int], list[int]]:
        """Interior tile edges as (vertical x positions, horizontal y positions)."""
        xs = {e for c in self.col_origins() for e in (c, c + self.tile_size)}
        ys = {e for r in self.row_origins() for e in (r, r + self.tile_size)}
        return (sorted(x for x in xs if 0 < x < self.canvas_width),
                sorted(y for y in ys if 0 < y < self.canvas_height))

    def to_json(self) -> dict:
        return {"tile_size": self.tile_size, "stride": self.stride,
                "canvas_height": self.canvas_height, "canvas_width": self.canvas_width,
                "origins": [list(o) for o in self.origins]}

    @classmethod
    def from_json(cls, doc: dict) -> "TileGrid":
        return cls(int(doc["tile_size"]), int(doc["stride"]), int(doc["canvas_height"]),
                   int(doc["canvas_width"]), tuple((int(r), int(c)) for r, c in doc["origins"]))


def tile(image: np.ndarray, tile_size: int, stride: int | None = None
         ) -> tuple[TileGrid, list[np.ndarray]]:
    img = as_image(image)
    grid = TileGrid.build(img.shape[0], img.shape[1], tile_size, stride)
    t = grid.tile_size
    return grid, [img[r:r + t, c:c + t].copy() for r, c in grid.origins]


def mosaic(grid: TileGrid, tiles: Sequence[np.ndarray]) -> np.ndarray:
    if len(tiles) != len(grid.origins):
        raise InvalidInputError(f"expected {len(grid.origins)} tiles, got {len(tiles)}")
    t = grid.tile_size
    tiles = [as_image(x) for x in tiles]
    channels = tiles[0].shape[2]
    for x in tiles:
        if x.shape != (t, t, channels):
            raise InvalidInputError(f"tile shape {x.shape} != {(t, t, channels)}")
    acc = np.zeros((grid.canvas_height, grid.canvas_width, channels), dtype=np.float64)
    count = np.zeros((grid.canvas_height, grid.canvas_width, 1), dtype=np.float64)
    for (r, c), x in zip(grid.origins, tiles):
        acc[r:r + t, c:c + t] += x
        count[r:r + t, c:c + t] += 1.0
    return (acc / count).astype(DTYPE)


def globalize_boxes(local: Sequence[Detection], origin: tuple[int, int]) -> list[Detection]:
    row, col = origin
    return [replace(d, box=d.box.translated(col, row)) for d in local]


def _span_overlap(a0: float, a1: float, b0: float, b1: float) -> float:
    inter = min(a1, b1) - max(a0, b0)
    if inter <= 0:
        return 0.0
    return inter / min(a1 - a0, b1 - b0)


def _split_across(a: Box, b: Box, seams_x, seams_y, gap_tol, span_overlap) -> bool:
    for sx in seams_x:
        for left, right in ((a, b), (b, a)):
            if (abs(left.x_max - sx) <= gap_tol and abs(right.x_min - sx) <= gap_tol
                    and _span_overlap(left.y_min, left.y_max, right.y_min, right.y_max)
                    >= span_overlap):
                return True
    for sy in seams_y:
        for top, bottom in ((a, b), (b, a)):
            if (abs(top.y_max - sy) <= gap_tol and abs(bottom.y_min - sy) <= gap_tol
                    and _span_overlap(top.x_min, top.x_max, bottom.x_min, bottom.x_max)
                    >= span_overlap):
                return True
    return False


def merge_seam_boxes(boxes: Sequence[Detection], grid: TileGrid, gap_tol: float = 4.0,
                     span_overlap: float = 0.5) -> list[Detection]:
    """Join same-class boxes cut apart by a tile seam, repeating to a fixed point.

    Two boxes merge when their facing edges both sit within ``gap_tol`` of
    one interior seam and their spans along the seam overlap by at least
    ``span_overlap`` of the shorter span. The union keeps the higher
    confidence.
    """
    seams_x, seams_y = grid.seams()
    dets = list(boxes)
    changed = True
    while changed:
        changed = False
        for i in range(len(dets)):
            for j in range(i + 1, len(dets)):
                a, b = dets[i].box, dets[j].box
                if a.class_id != b.class_id:
                    continue
                if _split_across(a, b, seams_x, seams_y, gap_tol, span_overlap):
                    union = Box(min(a.x_min, b.x_min), min(a.y_min, b.y_min),
                                max(a.x_max, b.x_max), max(a.y_max, b.y_max), a.class_id)
                    merged = Detection(union, max(dets[i].confidence, dets[j].confidence))
                    dets = [d for k, d in enumerate(dets) if k not in (i, j)] + [merged]
                    changed = True
                    break
            if changed:
                break
    return dets
