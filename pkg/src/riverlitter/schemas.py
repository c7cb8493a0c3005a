"""File formats shared by the CLI: annotation, detection and report JSON.

Annotation JSON::

    {"image": str, "width": int, "height": int,
     "objects": [{"class": str, "bbox": [x_min, y_min, x_max, y_max]}]}

Detection JSON is identical except every object also has ``"confidence"``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .boxes import CLASS_IDS, CLASS_NAMES, Box, Detection
from .errors import DataError, SchemaError


def write_json(path, doc) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise SchemaError("<document>", f"{path}: invalid JSON ({exc})") from exc


def canonical_digest(doc) -> str:
    import hashlib
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class AnnotationDoc:
    image: str
    width: int
    height: int
    boxes: list[Box]


@dataclass
class DetectionDoc:
    image: str
    width: int
    height: int
    detections: list[Detection]


def _box_json(b: Box) -> dict:
    return {"class": CLASS_NAMES[b.class_id], "bbox": [b.x_min, b.y_min, b.x_max, b.y_max]}


def annotations_to_json(image: str, width: int, height: int, boxes: Sequence[Box]) -> dict:
    return {"image": image, "width": int(width), "height": int(height),
            "objects": [_box_json(b) for b in boxes]}


def detections_to_json(image: str, width: int, height: int,
                       detections: Sequence[Detection]) -> dict:
    objects = []
    for d in detections:
        o = _box_json(d.box)
        o["confidence"] = d.confidence
        objects.append(o)
    return {"image": image, "width": int(width), "height": int(height), "objects": objects}


def _require(doc: dict, key: str, kind, where: str):
    if not isinstance(doc, dict) or key not in doc:
        raise SchemaError(f"{where}{key}", "missing")
    v = doc[key]
    if kind is int and isinstance(v, bool):
        raise SchemaError(f"{where}{key}", "expected int")
    if kind is float:
        ok = isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)
    else:
        ok = isinstance(v, kind)
    if not ok:
        raise SchemaError(f"{where}{key}", f"expected {getattr(kind, '__name__', kind)}")
    return v


def _parse_objects(doc: dict, with_confidence: bool) -> tuple[str, int, int, list]:
    image = _require(doc, "image", str, "")
    width = _require(doc, "width", int, "")
    height = _require(doc, "height", int, "")
    objects = _require(doc, "objects", list, "")
    out = []
    for i, o in enumerate(objects):
        where = f"objects[{i}]."
        name = _require(o, "class", str, where)
        if name not in CLASS_IDS:
            raise SchemaError(f"{where}class", f"unknown class {name!r}")
        bbox = _require(o, "bbox", list, where)
        if len(bbox) != 4 or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                     for v in bbox):
            raise SchemaError(f"{where}bbox", "expected 4 numbers")
        try:
            box = Box(*(float(v) for v in bbox), class_id=CLASS_IDS[name])
        except DataError as exc:
            raise SchemaError(f"{where}bbox", str(exc)) from exc
        if with_confidence:
            conf = _require(o, "confidence", float, where)
            if not 0.0 <= conf <= 1.0:
                raise SchemaError(f"{where}confidence", "outside [0, 1]")
            out.append(Detection(box, float(conf)))
        else:
            out.append(box)
    return image, width, height, out


def parse_annotations(doc) -> AnnotationDoc:
    return AnnotationDoc(*_parse_objects(doc, False))


def parse_detections(doc) -> DetectionDoc:
    return DetectionDoc(*_parse_objects(doc, True))


def read_annotations(path) -> AnnotationDoc:
    return parse_annotations(read_json(path))


def read_detections(path) -> DetectionDoc:
    return parse_detections(read_json(path))
