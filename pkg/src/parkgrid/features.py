"""Map-feature enrichment of POEs.

Each POE is turned into a ten-attribute vector: its parking duration, the
road side it sits on, and distances to the nearest road, freeway, known
no-parking area, known parking area, gas station, bus lane, junction, and
the configured city center. The vectors feed the decision tree.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import DataError
from .geo import GeoPoint, LocalFrame, haversine_distance, side_of_segment
from .ingest import LABELS, point_in_polygon
from .sectioning import FREEWAY_HIGHWAYS, junction_points

# Distance reported when a feature class is absent from the map extent.
# Large but finite, so threshold splits in the tree stay total.
SENTINEL_DIST_M = 99_999.0

# zone_type values feeding the combined "known no-parking area" distance.
NO_PARKING_TYPES = frozenset({"no_parking", "bus_lane", "gas_station", "taxi_stand"})
PARKING_TYPES = frozenset({"parking"})

SIDE_MAX_ROAD_DIST_M = 25.0


@dataclass(frozen=True)
class FeatureVector:
    duration: float
    side_type_input: str  # left | right | unknown
    noparking_dist_input: float
    parking_dist_input: float
    road_dist: float
    freeway_dist: float
    gas_dist: float
    buslane_dist: float
    junction_dist: float
    center_dist: float

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


FEATURE_NAMES = tuple(f.name for f in fields(FeatureVector))
NUMERIC_FEATURES = tuple(n for n in FEATURE_NAMES if n != "side_type_input")


class _LegSet:
    """Polyline legs flattened to numpy arrays for vectorized distances."""

    def __init__(self, polylines_local, owners):
        ax, ay, bx, by, own = [], [], [], [], []
        for poly, owner in zip(polylines_local, owners):
            for a, b in zip(poly, poly[1:]):
                ax.append(a.x)
                ay.append(a.y)
                bx.append(b.x)
                by.append(b.y)
                own.append(owner)
        self.ax = np.asarray(ax)
        self.ay = np.asarray(ay)
        self.bx = np.asarray(bx)
        self.by = np.asarray(by)
        self.owners = own
        dx = self.bx - self.ax
        dy = self.by - self.ay
        self._dx = dx
        self._dy = dy
        self._denom = np.where(dx * dx + dy * dy == 0.0, 1.0, dx * dx + dy * dy)

    def __len__(self):
        return len(self.owners)

    def distances(self, px: float, py: float) -> np.ndarray:
        t = ((px - self.ax) * self._dx + (py - self.ay) * self._dy) / self._denom
        t = np.clip(t, 0.0, 1.0)
        fx = self.ax + t * self._dx
        fy = self.ay + t * self._dy
        return np.hypot(px - fx, py - fy)

    def nearest(self, px: float, py: float):
        if len(self) == 0:
            return None
        d = self.distances(px, py)
        i = int(np.argmin(d))
        return float(d[i]), i


class MapContext:
    """Read-only bundle of map layers used to enrich POEs."""

    def __init__(self, roads, zones, center: GeoPoint, frame: LocalFrame | None = None):
        if not roads:
            raise DataError("map context needs at least one road")
        vertices = [p for r in roads for p in r.polyline]
        self.frame = frame or LocalFrame.for_points(vertices)
        self.roads = list(roads)
        self.center = center
        self.junctions = junction_points(roads)
        self._junction_arr = (
            np.array([[j.lat, j.lon] for j in self.junctions]) if self.junctions else None
        )

        def road_legs(selected):
            return _LegSet(
                [[self.frame.to_local(p) for p in r.polyline] for r in selected],
                [r.road_id for r in selected],
            )

        self._road_legs = road_legs(self.roads)
        self._freeway_legs = road_legs(
            [r for r in self.roads if r.highway_class in FREEWAY_HIGHWAYS]
        )

        def zone_group(types):
            return [z for z in zones if z.zone_type in types]

        self._zone_groups = {
            "noparking": zone_group(NO_PARKING_TYPES),
            "parking": zone_group(PARKING_TYPES),
            "gas": zone_group({"gas_station"}),
            "buslane": zone_group({"bus_lane"}),
        }
        self._zone_legs = {
            name: _LegSet(
                [[self.frame.to_local(p) for p in ring] for z in zs for ring in z.rings],
                [i for i, z in enumerate(zs) for _ in z.rings],
            )
            for name, zs in self._zone_groups.items()
        }

    def zone_distance(self, group: str, p: GeoPoint, lp) -> float:
        zones = self._zone_groups[group]
        if not zones:
            return SENTINEL_DIST_M
        if any(point_in_polygon(p, z) for z in zones):
            return 0.0
        d = self._zone_legs[group].nearest(lp.x, lp.y)
        return d[0]

    def junction_distance(self, p: GeoPoint) -> float:
        if self._junction_arr is None:
            return SENTINEL_DIST_M
        best = min(haversine_distance(p, j) for j in self.junctions)
        return best

    def nearest_road_side(self, lp) -> str:
        hit = self._road_legs.nearest(lp.x, lp.y)
        if hit is None or hit[0] > SIDE_MAX_ROAD_DIST_M:
            return "unknown"
        _, i = hit
        legs = self._road_legs
        from .geo import LocalPoint

        a = LocalPoint(legs.ax[i], legs.ay[i])
        b = LocalPoint(legs.bx[i], legs.by[i])
        side = side_of_segment(lp, a, b)
        return side if side in ("left", "right") else "unknown"


def enrich(poe, ctx: MapContext) -> FeatureVector:
    """Compute the ten map attributes for a single POE."""
    p = poe.position
    lp = ctx.frame.to_local(p)
    road_hit = ctx._road_legs.nearest(lp.x, lp.y)
    freeway_hit = ctx._freeway_legs.nearest(lp.x, lp.y)
    return FeatureVector(
        duration=poe.duration_s,
        side_type_input=ctx.nearest_road_side(lp),
        noparking_dist_input=ctx.zone_distance("noparking", p, lp),
        parking_dist_input=ctx.zone_distance("parking", p, lp),
        road_dist=road_hit[0] if road_hit else SENTINEL_DIST_M,
        freeway_dist=freeway_hit[0] if freeway_hit else SENTINEL_DIST_M,
        gas_dist=ctx.zone_distance("gas", p, lp),
        buslane_dist=ctx.zone_distance("buslane", p, lp),
        junction_dist=ctx.junction_distance(p),
        center_dist=haversine_distance(p, ctx.center),
    )


def enrich_all(poes, ctx: MapContext) -> list[tuple[FeatureVector, str | None]]:
    """Order-preserving enrichment; labels pass through untouched."""
    return [(enrich(rec, ctx), rec.label) for rec in poes]


def write_features(path, rows) -> None:
    """Write (FeatureVector, label) pairs as the training CSV."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(FEATURE_NAMES) + ["label"])
        for fv, label in rows:
            d = fv.as_dict()
            writer.writerow(
                [d[name] if name == "side_type_input" else repr(float(d[name])) for name in FEATURE_NAMES]
                + [label or ""]
            )


def read_features(path) -> list[tuple[dict, str | None]]:
    """Read the features CSV back into (attribute dict, label) pairs."""
    p = Path(path)
    if not p.exists():
        raise DataError(f"features file not found: {p}")
    rows = []
    with p.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in FEATURE_NAMES if c not in header]
        if missing:
            raise DataError(f"{p}: missing feature columns {missing}")
        for i, row in enumerate(reader, start=2):
            try:
                attrs = {
                    name: row[name] if name == "side_type_input" else float(row[name])
                    for name in FEATURE_NAMES
                }
            except ValueError as exc:
                raise DataError(f"{p}: line {i}: {exc}") from exc
            label = (row.get("label") or "").strip() or None
            if label is not None and label not in LABELS:
                raise DataError(f"{p}: line {i}: unknown label {label!r}")
            rows.append((attrs, label))
    return rows
