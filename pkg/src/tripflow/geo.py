"""Discrete geographic state space: tracts, distances, point location, hour-of-week.

A city is modeled as a fixed, ordered set of tracts. Every downstream stage
(trip cleaning, tensor building, hypothesis matrices) addresses tracts by
their dense integer index, so the ordering established here is load-bearing.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional, Sequence

import numpy as np

EARTH_RADIUS_KM = 6371.0088
MIN_DISTANCE_KM = 1e-6  # floor for distinct tracts with coincident centroids
HOURS_PER_WEEK = 168


class InvalidCoordinateError(ValueError):
    """Raised for non-finite or out-of-range latitude/longitude."""


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise InvalidCoordinateError(f"non-finite coordinates ({self.lat}, {self.lon})")
        if not (-90.0 <= self.lat <= 90.0 and -180.0 <= self.lon <= 180.0):
            raise InvalidCoordinateError(f"coordinates out of range ({self.lat}, {self.lon})")


@dataclass(frozen=True)
class Tract:
    """One discrete state: identifier, centroid, area, optional ring, indicators.

    ``properties`` maps indicator names (venue counts, check-ins, census
    figures) to non-negative reals; hypothesis builders look weights up here.
    """

    id: str
    index: int
    centroid: GeoPoint
    area: float
    polygon: Optional[tuple[GeoPoint, ...]] = None
    properties: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.area <= 0 or not math.isfinite(self.area):
            raise ValueError(f"tract {self.id!r}: area must be finite and > 0")
        if self.polygon is not None and len(self.polygon) < 3:
            raise ValueError(f"tract {self.id!r}: polygon needs >= 3 vertices")
        for key, value in self.properties.items():
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"tract {self.id!r}: property {key!r} must be finite and >= 0")


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in km on a sphere of radius 6371.0088 km."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def hour_of_week(t: datetime) -> int:
    """Map a local timestamp to its hour-of-week slot, 0 = Monday 00:00-00:59."""
    return 24 * t.weekday() + t.hour


def _on_segment(px, py, x1, y1, x2, y2, eps=1e-12):
    cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
    if abs(cross) > eps:
        return False
    return (min(x1, x2) - eps <= px <= max(x1, x2) + eps
            and min(y1, y2) - eps <= py <= max(y1, y2) + eps)


def point_in_polygon(p: GeoPoint, ring: Sequence[GeoPoint]) -> bool:
    """Even-odd containment test in planar (lon, lat) space; boundary is inside."""
    px, py = p.lon, p.lat
    inside = False
    n = len(ring)
    for i in range(n):
        a, b = ring[i], ring[(i + 1) % n]
        x1, y1, x2, y2 = a.lon, a.lat, b.lon, b.lat
        if _on_segment(px, py, x1, y1, x2, y2):
            return True
        if (y1 > py) != (y2 > py):
            x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < x_cross:
                inside = not inside
    return inside


@dataclass(frozen=True)
class StateSpace:
    """Ordered tract set with a precomputed centroid-to-centroid distance matrix.

    ``distances`` is symmetric, zero on the diagonal, and floored at
    ``MIN_DISTANCE_KM`` off-diagonal so the inverse-distance hypothesis
    formulas stay finite even for coincident centroids.
    """

    tracts: tuple[Tract, ...]
    distances: np.ndarray

    def __post_init__(self):
        if [t.index for t in self.tracts] != list(range(len(self.tracts))):
            raise ValueError("tracts must be ordered by index 0..|S|-1")
        n = len(self.tracts)
        if self.distances.shape != (n, n):
            raise ValueError("distance matrix shape does not match tract count")
        if n:
            if np.diagonal(self.distances).any():
                raise ValueError("distance diagonal must be zero")
            if not np.array_equal(self.distances, self.distances.T):
                raise ValueError("distance matrix must be symmetric")
            off = ~np.eye(n, dtype=bool)
            if n > 1 and (self.distances[off] < MIN_DISTANCE_KM).any():
                raise ValueError(f"off-diagonal distances must be >= {MIN_DISTANCE_KM} km")
        self.distances.setflags(write=False)

    def __len__(self) -> int:
        return len(self.tracts)

    @classmethod
    def from_tracts(cls, tracts: Sequence[Tract]) -> "StateSpace":
        ordered = tuple(sorted(tracts, key=lambda t: t.index))
        n = len(ordered)
        dist = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                d = max(haversine_distance(ordered[i].centroid, ordered[j].centroid),
                        MIN_DISTANCE_KM)
                dist[i, j] = dist[j, i] = d
        return cls(tracts=ordered, distances=dist)

    def property_vector(self, key: str) -> np.ndarray:
        """Per-tract values of one named indicator, in index order."""
        values = np.empty(len(self.tracts))
        for t in self.tracts:
            if key not in t.properties:
                raise KeyError(f"tract {t.id!r} has no property {key!r}")
            values[t.index] = t.properties[key]
        return values


def locate(p: GeoPoint, space: StateSpace) -> Optional[int]:
    """Find the tract containing ``p``.

    With polygon geometry present, returns the lowest-index tract whose ring
    contains the point (boundary counts as inside) or None if no ring does.
    In a polygon-free space, falls back to the nearest centroid.
    """
    if not space.tracts:
        raise ValueError("empty state space")
    any_polygon = any(t.polygon is not None for t in space.tracts)
    if any_polygon:
        for t in space.tracts:  # index order, so the first hit is the lowest index
            if t.polygon is not None and point_in_polygon(p, t.polygon):
                return t.index
        return None
    best, best_d = 0, math.inf
    for t in space.tracts:
        d = haversine_distance(p, t.centroid)
        if d < best_d:
            best, best_d = t.index, d
    return best


def _parse_polygon(text: str) -> Optional[tuple[GeoPoint, ...]]:
    text = text.strip()
    if not text:
        return None
    points = []
    for pair in text.split(";"):
        lat_s, lon_s = pair.strip().split()
        points.append(GeoPoint(float(lat_s), float(lon_s)))
    return tuple(points)


def load_tracts(path) -> StateSpace:
    """Read a tracts CSV into a StateSpace.

    Expected header: ``tract_id, lat, lon, area_sqkm, polygon`` followed by
    zero or more numeric property columns whose names become property keys.
    The polygon cell may be empty; when present it is semicolon-separated
    ``lat lon`` pairs. A ``tract_area`` property mirroring ``area_sqkm`` is
    injected when the file does not carry one, so area can serve as a weight.
    """
    reserved = ("tract_id", "lat", "lon", "area_sqkm", "polygon")
    tracts = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or reader.fieldnames[:5] != list(reserved):
            raise ValueError(f"{path}: expected header starting with {', '.join(reserved)}")
        property_keys = [c for c in reader.fieldnames[5:] if c]
        for index, row in enumerate(reader):
            props = {key: float(row[key]) for key in property_keys}
            area = float(row["area_sqkm"])
            props.setdefault("tract_area", area)
            tracts.append(Tract(
                id=row["tract_id"],
                index=index,
                centroid=GeoPoint(float(row["lat"]), float(row["lon"])),
                area=area,
                polygon=_parse_polygon(row.get("polygon") or ""),
                properties=props,
            ))
    if not tracts:
        raise ValueError(f"{path}: no tracts")
    return StateSpace.from_tracts(tracts)


def write_tracts(path, space: StateSpace, property_keys: Sequence[str]) -> None:
    """Write a StateSpace back to the tracts CSV format."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tract_id", "lat", "lon", "area_sqkm", "polygon", *property_keys])
        for t in space.tracts:
            ring = ";".join(f"{p.lat!r} {p.lon!r}" for p in t.polygon) if t.polygon else ""
            writer.writerow([
                t.id, repr(t.centroid.lat), repr(t.centroid.lon), repr(t.area), ring,
                *(repr(t.properties[k]) for k in property_keys),
            ])
