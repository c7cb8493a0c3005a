"""Colour-prototype reference detector.

Each pixel is assigned to its nearest class prototype and kept when that
distance is within ``color_tol``. Per-class masks are closed with a disk of
radius ``merge_gap`` and split into 8-connected components; components of at
least ``min_area`` pixels become detections. Confidence is the mean colour
match ``1 - distance / color_tol`` over the component's member pixels, so
blur and noise lower it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .boxes import Box, Detection, sort_key
from .errors import InvalidInputError, InvalidParameterError
from .raster import as_image
from .scenegen import class_prototypes


def _default_prototypes() -> dict[int, tuple[float, float, float]]:
    return {k: tuple(float(x) for x in v) for k, v in class_prototypes().items()}


@dataclass(frozen=True)
class DetectorParams:
    prototypes: dict[int, tuple[float, float, float]] = field(default_factory=_default_prototypes)
    color_tol: float = 0.12
    min_area: int = 12
    merge_gap: int = 2

    def __post_init__(self):
        if not self.color_tol > 0:
            raise InvalidParameterError("color_tol must be positive")
        if self.min_area < 4:
            raise InvalidParameterError("min_area must be >= 4")
        if self.merge_gap < 0:
            raise InvalidParameterError("merge_gap must be >= 0")

    def to_json(self) -> dict:
        return {"prototypes": {str(k): list(v) for k, v in sorted(self.prototypes.items())},
                "color_tol": self.color_tol, "min_area": self.min_area,
                "merge_gap": self.merge_gap}

    @classmethod
    def from_json(cls, doc: dict) -> "DetectorParams":
        doc = dict(doc)
        if "prototypes" in doc:
            doc["prototypes"] = {int(k): tuple(v) for k, v in doc["prototypes"].items()}
        return cls(**doc)


def _disk(radius: int) -> np.ndarray:
    y, x = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    return x * x + y * y <= radius * radius


def _close(mask: np.ndarray, radius: int) -> np.ndarray:
    if radius == 0:
        return mask
    # pad so erosion does not eat components touching the border
    padded = np.pad(mask, radius)
    closed = ndimage.binary_closing(padded, structure=_disk(radius))
    return closed[radius:-radius, radius:-radius] | mask


def detect(image: np.ndarray, params: DetectorParams = DetectorParams()) -> list[Detection]:
    img = as_image(image)
    if img.shape[2] != 3:
        raise InvalidInputError("reference detector needs an RGB image")
    ids = sorted(params.prototypes)
    protos = np.array([params.prototypes[k] for k in ids], dtype=np.float64)
    pix = img.astype(np.float64)
    dist = np.sqrt(((pix[:, :, None, :] - protos[None, None]) ** 2).sum(axis=3))
    nearest = dist.argmin(axis=2)
    best = np.take_along_axis(dist, nearest[:, :, None], axis=2)[:, :, 0]
    member = best <= params.color_tol
    score = np.clip(1.0 - best / params.color_tol, 0.0, 1.0)
    eight = np.ones((3, 3), dtype=bool)
    out = []
    for j, class_id in enumerate(ids):
        mask = member & (nearest == j)
        if not mask.any():
            continue
        labels, n = ndimage.label(_close(mask, params.merge_gap), structure=eight)
        slices = ndimage.find_objects(labels)
        for comp, sl in enumerate(slices, start=1):
            if sl is None:
                continue
            comp_mask = labels[sl] == comp
            if np.count_nonzero(comp_mask) < params.min_area:
                continue
            members = comp_mask & mask[sl]
            conf = float(np.clip(score[sl][members].mean(), 0.0, 1.0))
            box = Box(float(sl[1].start), float(sl[0].start),
                      float(sl[1].stop), float(sl[0].stop), class_id)
            out.append(Detection(box, conf))
    return sorted(out, key=sort_key)


def mean_confidence(detections) -> float:
    return float(np.mean([d.confidence for d in detections])) if detections else 0.0
