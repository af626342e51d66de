"""Positions, bearings and the six-sector frame around a cluster head"""

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import GeometryError

SECTOR_COUNT = 6
SECTOR_WIDTH = 360.0 / SECTOR_COUNT
# Bearings are compared after rounding so that e.g. 59.99999999999999 lands on 60
_BEARING_DECIMALS = 9


@dataclass(frozen=True, slots=True)
class Position:
    """Coordinates in meters; z = 0 in 2D scenarios"""

    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise GeometryError(f"Non-finite position ({self.x}, {self.y}, {self.z})")

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "Position":
        if len(values) == 2:
            return cls(float(values[0]), float(values[1]))
        return cls(float(values[0]), float(values[1]), float(values[2]))

    def as_array(self, dim: int = 3) -> np.ndarray:
        if dim == 2:
            return np.array([self.x, self.y])
        return np.array([self.x, self.y, self.z])

    def distance_to(self, other: "Position") -> float:
        return math.sqrt(
            (self.x - other.x) ** 2 + (self.y - other.y) ** 2 + (self.z - other.z) ** 2
        )

    def offset(self, distance: float, bearing_deg: float) -> "Position":
        """Point `distance` meters away along a world-frame bearing (z unchanged)"""
        rad = math.radians(bearing_deg)
        return Position(self.x + distance * math.cos(rad), self.y + distance * math.sin(rad), self.z)

    def lerp(self, other: "Position", fraction: float) -> "Position":
        return Position(
            self.x + (other.x - self.x) * fraction,
            self.y + (other.y - self.y) * fraction,
            self.z + (other.z - self.z) * fraction,
        )


def normalize_deg(angle: float) -> float:
    """Map any angle to [0, 360)"""
    value = angle % 360.0
    if value >= 360.0:
        value -= 360.0
    return value


def angle_diff(a: float, b: float) -> float:
    """Signed smallest difference a - b in (-180, 180]"""
    diff = (a - b) % 360.0
    if diff > 180.0:
        diff -= 360.0
    return diff


def bearing_deg(origin: Position, point: Position) -> float:
    """World-frame bearing from origin to point; 0 deg is east, counter-clockwise"""
    dx = point.x - origin.x
    dy = point.y - origin.y
    if dx == 0.0 and dy == 0.0:
        raise GeometryError("Bearing undefined for coincident points")
    return normalize_deg(math.degrees(math.atan2(dy, dx)))


def sector_of(center: Position, point: Position) -> int:
    """Sector k in 1..6 with bearing in [(k-1)*60, k*60), sector 1 starting east"""
    raw = bearing_deg(center, point)
    bearing = round(raw, _BEARING_DECIMALS)
    # rounding up to 360 must not wrap a sector-6 bearing into sector 1
    if bearing >= 360.0:
        bearing = raw
    return min(int(bearing // SECTOR_WIDTH), SECTOR_COUNT - 1) + 1


def triangle_area(a: Position, b: Position, c: Position) -> float:
    """Area of the triangle projected on the xy plane"""
    return abs((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)) / 2.0


def pairwise_distances(points: Sequence[Position]) -> list[float]:
    return [
        points[i].distance_to(points[j])
        for i in range(len(points))
        for j in range(i + 1, len(points))
    ]


def centroid(points: Iterable[Position]) -> Position:
    pts = list(points)
    if not pts:
        raise GeometryError("Centroid of an empty point set")
    arr = np.array([[p.x, p.y, p.z] for p in pts])
    return Position.from_array(arr.mean(axis=0))
