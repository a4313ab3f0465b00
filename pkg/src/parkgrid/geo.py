"""Geodesy, slippy-tile math and planar geometry shared by all other layers.

All distances use a spherical earth with a fixed mean radius; at the 5 m
cell scale of this package, ellipsoidal corrections are noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_M = 6_371_000.0
EARTH_CIRCUMFERENCE_M = 2.0 * math.pi * EARTH_RADIUS_M

# Web Mercator latitude clamp: tan/sec blow up toward the poles.
MERCATOR_MAX_LAT = 85.05112878

# Local equirectangular projection is only trusted near its origin.
MAX_LOCAL_RANGE_M = 50_000.0

# |cross product| below this (m^2) counts as collinear in side_of_segment.
SIDE_EPS = 1e-6


@dataclass(frozen=True)
class GeoPoint:
    """WGS84 position in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude out of range: {self.lat}")
        if not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"longitude out of range: {self.lon}")


@dataclass(frozen=True)
class LocalPoint:
    """Meters east (x) and north (y) of a declared origin."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("local coordinates must be finite")


@dataclass(frozen=True)
class Bounds:
    """Geographic bounding box (south-west / north-east corners)."""

    min_lat: float
    min_lon: float
    max_lat: float
    max_lon: float

    def __post_init__(self):
        if self.min_lat > self.max_lat or self.min_lon > self.max_lon:
            raise ValueError("empty bounds: min corner exceeds max corner")

    @classmethod
    def of_points(cls, points) -> "Bounds":
        lats = [p.lat for p in points]
        lons = [p.lon for p in points]
        if not lats:
            raise ValueError("cannot bound zero points")
        return cls(min(lats), min(lons), max(lats), max(lons))

    def contains(self, p: GeoPoint) -> bool:
        return self.min_lat <= p.lat <= self.max_lat and self.min_lon <= p.lon <= self.max_lon

    @property
    def center(self) -> GeoPoint:
        return GeoPoint((self.min_lat + self.max_lat) / 2.0, (self.min_lon + self.max_lon) / 2.0)


@dataclass(frozen=True)
class TileCoord:
    """Slippy map tile address (zoom/x/y)."""

    zoom: int
    x: int
    y: int

    def __post_init__(self):
        if self.zoom < 0:
            raise ValueError(f"zoom must be >= 0, got {self.zoom}")
        n = 1 << self.zoom
        if not (0 <= self.x < n and 0 <= self.y < n):
            raise ValueError(f"tile ({self.x},{self.y}) out of range for zoom {self.zoom}")


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters between two points."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def to_local(p: GeoPoint, origin: GeoPoint) -> LocalPoint:
    """Equirectangular projection of ``p`` into meters around ``origin``.

    Raises ValueError for points beyond MAX_LOCAL_RANGE_M, where the
    small-area assumption stops holding.
    """
    x = EARTH_RADIUS_M * math.cos(math.radians(origin.lat)) * math.radians(p.lon - origin.lon)
    y = EARTH_RADIUS_M * math.radians(p.lat - origin.lat)
    if math.hypot(x, y) > MAX_LOCAL_RANGE_M:
        raise ValueError(
            f"point {p.lat},{p.lon} is farther than {MAX_LOCAL_RANGE_M} m from the local origin"
        )
    return LocalPoint(x, y)


def from_local(lp: LocalPoint, origin: GeoPoint) -> GeoPoint:
    """Inverse of :func:`to_local`."""
    lat = origin.lat + math.degrees(lp.y / EARTH_RADIUS_M)
    lon = origin.lon + math.degrees(lp.x / (EARTH_RADIUS_M * math.cos(math.radians(origin.lat))))
    return GeoPoint(lat, lon)


@dataclass(frozen=True)
class LocalFrame:
    """A local planar workspace anchored at one origin for a whole dataset."""

    origin: GeoPoint

    @classmethod
    def for_points(cls, points) -> "LocalFrame":
        """Frame anchored at the bounding-box centroid of ``points``."""
        lats = [p.lat for p in points]
        lons = [p.lon for p in points]
        if not lats:
            raise ValueError("cannot build a frame from zero points")
        return cls(GeoPoint((min(lats) + max(lats)) / 2.0, (min(lons) + max(lons)) / 2.0))

    def to_local(self, p: GeoPoint) -> LocalPoint:
        return to_local(p, self.origin)

    def from_local(self, lp: LocalPoint) -> GeoPoint:
        return from_local(lp, self.origin)


def geo_to_tile(p: GeoPoint, zoom: int) -> tuple[float, float]:
    """Fractional slippy tile coordinates of ``p`` at ``zoom``.

    The integer tile cell is the floor of each coordinate.
    """
    if abs(p.lat) > MERCATOR_MAX_LAT:
        raise ValueError(f"latitude {p.lat} outside Web Mercator bounds")
    n = float(1 << zoom)
    phi = math.radians(p.lat)
    x = (p.lon + 180.0) / 360.0 * n
    y = (1.0 - math.log(math.tan(phi) + 1.0 / math.cos(phi)) / math.pi) / 2.0 * n
    return x, y


def tile_of(p: GeoPoint, zoom: int) -> TileCoord:
    """Integer tile containing ``p`` at ``zoom``."""
    x, y = geo_to_tile(p, zoom)
    n = 1 << zoom
    return TileCoord(zoom, min(int(math.floor(x)), n - 1), min(int(math.floor(y)), n - 1))


def tile_to_geo(x: float, y: float, zoom: int) -> GeoPoint:
    """Inverse of :func:`geo_to_tile` for fractional tile coordinates.

    (x, y) may be fractional; integer values address the tile's NW corner.
    """
    n = float(1 << zoom)
    lon = x / n * 360.0 - 180.0
    lat = math.degrees(math.atan(math.sinh(math.pi * (1.0 - 2.0 * y / n))))
    return GeoPoint(lat, lon)


def tile_center(tile: TileCoord) -> GeoPoint:
    return tile_to_geo(tile.x + 0.5, tile.y + 0.5, tile.zoom)


def tile_width_m(zoom: int, lat: float) -> float:
    """Ground width of one tile at ``zoom`` measured at latitude ``lat``."""
    return EARTH_CIRCUMFERENCE_M * math.cos(math.radians(lat)) / float(1 << zoom)


def point_segment_distance(p: LocalPoint, a: LocalPoint, b: LocalPoint) -> float:
    """Euclidean distance from ``p`` to the closest point of segment [a, b]."""
    _, dist = segment_foot(p, a, b)
    return dist


def segment_foot(p: LocalPoint, a: LocalPoint, b: LocalPoint) -> tuple[float, float]:
    """Closest point of segment [a, b] to ``p``.

    Returns (t, distance) where t in [0, 1] parameterizes the foot as
    a + t*(b - a). A degenerate segment is treated as the point a.
    """
    abx = b.x - a.x
    aby = b.y - a.y
    denom = abx * abx + aby * aby
    if denom == 0.0:
        return 0.0, math.hypot(p.x - a.x, p.y - a.y)
    t = ((p.x - a.x) * abx + (p.y - a.y) * aby) / denom
    t = max(0.0, min(1.0, t))
    fx = a.x + t * abx
    fy = a.y + t * aby
    return t, math.hypot(p.x - fx, p.y - fy)


def side_of_segment(p: LocalPoint, a: LocalPoint, b: LocalPoint) -> str:
    """Which side of directed segment a->b the point lies on.

    Returns "left", "right" or "on" by the sign of the cross product
    (b - a) x (p - a); magnitudes below SIDE_EPS count as "on".
    """
    if a == b:
        raise ValueError("side_of_segment needs a non-degenerate segment")
    cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
    if abs(cross) < SIDE_EPS:
        return "on"
    return "left" if cross > 0 else "right"
