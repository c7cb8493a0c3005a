"""Axis-aligned box carriers and the litter class taxonomy.

Coordinates are continuous pixel-edge coordinates: a box covering pixel
columns ``c0..c1`` inclusive has ``x_min = c0`` and ``x_max = c1 + 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import InvalidInputError

CLASS_NAMES = ("plastic_bottle", "glass_bottle", "can", "plastic_bag")
CLASS_IDS = {name: i for i, name in enumerate(CLASS_NAMES)}
LITTER_CLASS = "litter"


@dataclass(frozen=True)
class Box:
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    class_id: int = 0

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise InvalidInputError(f"degenerate box {self.as_tuple()}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def translated(self, dx: float, dy: float) -> "Box":
        return replace(self, x_min=self.x_min + dx, x_max=self.x_max + dx,
                       y_min=self.y_min + dy, y_max=self.y_max + dy)


@dataclass(frozen=True)
class Detection:
    box: Box
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidInputError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def class_id(self) -> int:
        return self.box.class_id


def sort_key(det: Detection) -> tuple:
    """Descending confidence, ties by ascending x_min then y_min."""
    b = det.box
    return (-det.confidence, b.x_min, b.y_min, b.x_max, b.y_max, b.class_id)
