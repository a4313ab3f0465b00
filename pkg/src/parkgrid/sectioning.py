"""Road sectioning: decompose car-drivable roads into junction-to-junction
sections and fixed 5 m segments, match POEs to their nearest section, and
classify segments by length-normalized load ratios.

Left and right road sides are deliberately not distinguished.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import gjson
from .errors import DataError
from .geo import GeoPoint, LocalFrame, LocalPoint, haversine_distance, segment_foot

# Standard OSM car-routable classes.
_BASE_DRIVABLE = (
    "motorway",
    "trunk",
    "primary",
    "secondary",
    "tertiary",
    "unclassified",
    "residential",
    "living_street",
    "service",
)
DRIVABLE_HIGHWAYS = frozenset(_BASE_DRIVABLE) | frozenset(
    f"{h}_link" for h in _BASE_DRIVABLE
)
FREEWAY_HIGHWAYS = frozenset({"motorway", "motorway_link", "trunk", "trunk_link"})

DEFAULT_SEGMENT_M = 5.0
DEFAULT_MAX_MATCH_M = 25.0

# Vertices are keyed at 7 decimals (~1 cm) so junction detection survives
# one write/read round-trip of the GeoJSON files.
_VERTEX_DECIMALS = 7


@dataclass(frozen=True)
class RoadElement:
    road_id: str
    polyline: tuple[GeoPoint, ...]
    highway_class: str
    oneway: bool = False
    drivable: bool = True

    def __post_init__(self):
        if len(self.polyline) < 2:
            raise ValueError(f"road {self.road_id}: polyline needs >= 2 points")
        for a, b in zip(self.polyline, self.polyline[1:]):
            if a == b:
                raise ValueError(f"road {self.road_id}: consecutive duplicate vertex")


@dataclass(frozen=True)
class RoadSection:
    """One junction-to-junction run of a road."""

    section_id: str
    road_id: str
    polyline: tuple[GeoPoint, ...]
    length_m: float


@dataclass
class RoadSegment:
    """Fixed-size slice of a section; all but the last are segment_m long."""

    segment_id: str
    section_id: str
    polyline: tuple[GeoPoint, ...]
    length_m: float
    poe_count: int = 0
    load_ratio: float = 0.0
    classification: str = "undetermined"  # green | red | undetermined


@dataclass(frozen=True)
class SectionLoad:
    section_id: str
    poe_count: int
    length_m: float
    count_per_meter: float
    mean_segment_load_ratio: float


@dataclass(frozen=True)
class Match:
    poe_id: str
    section_id: str
    distance_m: float
    arc_pos_m: float


def polyline_length_m(points) -> float:
    return sum(haversine_distance(a, b) for a, b in zip(points, points[1:]))


def load_roads(path) -> list[RoadElement]:
    """Read road LineStrings from GeoJSON, keeping only car-drivable classes."""
    fc = gjson.read_geojson(path)
    roads = []
    for i, feat in enumerate(gjson.iter_features(fc)):
        geom = feat.get("geometry") or {}
        props = feat.get("properties") or {}
        if geom.get("type") != "LineString":
            raise DataError(f"road feature {i}: expected LineString, got {geom.get('type')}")
        highway = props.get("highway")
        if not highway:
            raise DataError(f"road feature {i}: missing highway property")
        if highway not in DRIVABLE_HIGHWAYS:
            continue
        try:
            pts = [GeoPoint(c[1], c[0]) for c in geom["coordinates"]]
        except (ValueError, TypeError, IndexError) as exc:
            raise DataError(f"road feature {i}: bad coordinates ({exc})") from exc
        # collapse repeated vertices rather than rejecting the feature
        deduped = [p for j, p in enumerate(pts) if j == 0 or p != pts[j - 1]]
        if len(deduped) < 2:
            raise DataError(f"road feature {i}: degenerate geometry")
        roads.append(
            RoadElement(
                road_id=str(props.get("road_id", f"road{i}")),
                polyline=tuple(deduped),
                highway_class=highway,
                oneway=str(props.get("oneway", "")).lower() in ("yes", "true", "1"),
            )
        )
    return roads


def _vertex_key(p: GeoPoint) -> tuple[float, float]:
    return round(p.lat, _VERTEX_DECIMALS), round(p.lon, _VERTEX_DECIMALS)


def junction_vertices(roads) -> set[tuple[float, float]]:
    """Vertices shared by at least two distinct road elements."""
    seen: dict[tuple[float, float], set[str]] = {}
    for road in roads:
        for p in road.polyline:
            seen.setdefault(_vertex_key(p), set()).add(road.road_id)
    return {key for key, ids in seen.items() if len(ids) >= 2}


def junction_points(roads) -> list[GeoPoint]:
    return [GeoPoint(lat, lon) for lat, lon in sorted(junction_vertices(roads))]


def build_sections(roads) -> list[RoadSection]:
    """Split each road at junction vertices into covering sections."""
    junctions = junction_vertices(roads)
    sections = []
    for road in roads:
        run: list[GeoPoint] = [road.polyline[0]]
        idx = 0
        for j, p in enumerate(road.polyline[1:], start=1):
            run.append(p)
            is_last = j == len(road.polyline) - 1
            if _vertex_key(p) in junctions or is_last:
                sections.append(
                    RoadSection(
                        section_id=f"{road.road_id}:{idx}",
                        road_id=road.road_id,
                        polyline=tuple(run),
                        length_m=polyline_length_m(run),
                    )
                )
                run = [p]
                idx += 1
    return sections


def _lerp(a: GeoPoint, b: GeoPoint, t: float) -> GeoPoint:
    return GeoPoint(a.lat + t * (b.lat - a.lat), a.lon + t * (b.lon - a.lon))


def build_segments(section: RoadSection, segment_m: float = DEFAULT_SEGMENT_M) -> list[RoadSegment]:
    """Cut a section into arc-length slices of segment_m meters.

    The last segment keeps the remainder so that segment lengths sum
    exactly to the section length.
    """
    if segment_m <= 0:
        raise ValueError("segment_m must be positive")
    pts = section.polyline
    leg_lens = [haversine_distance(a, b) for a, b in zip(pts, pts[1:])]
    total = sum(leg_lens)
    n_seg = max(1, math.ceil(total / segment_m - 1e-9))
    segments = []
    leg = 0
    leg_used = 0.0  # meters of current leg already consumed
    cursor = pts[0]
    for k in range(n_seg):
        target = segment_m if k < n_seg - 1 else total - segment_m * (n_seg - 1)
        poly = [cursor]
        remaining = target
        while remaining > 1e-9 and leg < len(leg_lens):
            avail = leg_lens[leg] - leg_used
            if avail <= remaining + 1e-9:
                poly.append(pts[leg + 1])
                remaining -= avail
                leg += 1
                leg_used = 0.0
            else:
                leg_used += remaining
                t = leg_used / leg_lens[leg]
                poly.append(_lerp(pts[leg], pts[leg + 1], t))
                remaining = 0.0
        cursor = poly[-1]
        dedup = [p for j, p in enumerate(poly) if j == 0 or p != poly[j - 1]]
        segments.append(
            RoadSegment(
                segment_id=f"{section.section_id}#{k}",
                section_id=section.section_id,
                polyline=tuple(dedup),
                length_m=target,
            )
        )
    return segments


class SectionIndex:
    """Uniform-grid spatial index over section polylines.

    Distances are planar meters in a shared local frame; arc positions are
    measured on the haversine length scale so they line up with segment
    cuts. Query results are exact: candidate collection only prunes
    sections farther than the query radius.
    """

    def __init__(self, sections, frame: LocalFrame | None = None, cell_m: float = 50.0):
        if not sections:
            raise ValueError("cannot index zero sections")
        all_vertices = [p for s in sections for p in s.polyline]
        self.frame = frame or LocalFrame.for_points(all_vertices)
        self.cell_m = cell_m
        self.sections = sorted(sections, key=lambda s: s.section_id)
        self._legs: list[list[tuple[LocalPoint, LocalPoint, float, float]]] = []
        self._grid: dict[tuple[int, int], set[int]] = {}
        for si, section in enumerate(self.sections):
            local = [self.frame.to_local(p) for p in section.polyline]
            legs = []
            cum = 0.0
            for i in range(len(local) - 1):
                leg_len = haversine_distance(section.polyline[i], section.polyline[i + 1])
                legs.append((local[i], local[i + 1], cum, leg_len))
                cum += leg_len
                self._register_leg(si, local[i], local[i + 1])
            self._legs.append(legs)

    def _cells_of_box(self, min_x, min_y, max_x, max_y):
        cs = self.cell_m
        for cx in range(math.floor(min_x / cs), math.floor(max_x / cs) + 1):
            for cy in range(math.floor(min_y / cs), math.floor(max_y / cs) + 1):
                yield cx, cy

    def _register_leg(self, si: int, a: LocalPoint, b: LocalPoint):
        for cell in self._cells_of_box(min(a.x, b.x), min(a.y, b.y), max(a.x, b.x), max(a.y, b.y)):
            self._grid.setdefault(cell, set()).add(si)

    def section_distance(self, p: LocalPoint, si: int) -> tuple[float, float]:
        """(distance, arc position) of the closest point of section si."""
        best_d = math.inf
        best_arc = 0.0
        for a, b, cum, leg_len in self._legs[si]:
            t, d = segment_foot(p, a, b)
            if d < best_d:
                best_d = d
                best_arc = cum + t * leg_len
        return best_d, best_arc

    def nearest(self, position: GeoPoint, max_dist: float = DEFAULT_MAX_MATCH_M):
        """Closest section within max_dist, or None.

        Ties are broken by the lexicographically smaller section_id.
        Returns (section_id, distance_m, arc_pos_m).
        """
        p = self.frame.to_local(position)
        candidates: set[int] = set()
        for cell in self._cells_of_box(
            p.x - max_dist, p.y - max_dist, p.x + max_dist, p.y + max_dist
        ):
            candidates |= self._grid.get(cell, set())
        best = None
        for si in sorted(candidates):
            d, arc = self.section_distance(p, si)
            key = (d, self.sections[si].section_id)
            if best is None or key < best[0]:
                best = (key, si, arc)
        if best is None or best[0][0] > max_dist:
            return None
        (_, section_id), si, arc = best
        return section_id, best[0][0], arc


def match_poe_to_section(poe, index: SectionIndex, max_dist: float = DEFAULT_MAX_MATCH_M):
    """Section id of the nearest section within max_dist, or None."""
    hit = index.nearest(poe.position, max_dist)
    return hit[0] if hit else None


def match_poes(poes, index: SectionIndex, max_dist: float = DEFAULT_MAX_MATCH_M) -> list[Match]:
    """Match every POE, skipping those beyond max_dist of all sections."""
    matches = []
    for rec in poes:
        hit = index.nearest(rec.position, max_dist)
        if hit is not None:
            matches.append(Match(rec.id, hit[0], hit[1], hit[2]))
    return matches


def compute_loads(
    sections, matches, segment_m: float = DEFAULT_SEGMENT_M
) -> tuple[list[SectionLoad], list[RoadSegment]]:
    """Per-section POE loads and per-segment load ratios.

    A segment's load ratio is its count times the number of segments in
    its section, divided by the section count: a uniformly loaded section
    has ratio 1 on every segment.
    """
    by_section = {s.section_id: s for s in sections}
    segments_by_section = {s.section_id: build_segments(s, segment_m) for s in sections}
    section_counts: dict[str, int] = {s.section_id: 0 for s in sections}
    for m in matches:
        if m.section_id not in by_section:
            raise ValueError(f"match references unknown section {m.section_id}")
        segs = segments_by_section[m.section_id]
        idx = min(int(m.arc_pos_m // segment_m), len(segs) - 1)
        segs[idx].poe_count += 1
        section_counts[m.section_id] += 1

    loads = []
    all_segments = []
    for section in sections:
        segs = segments_by_section[section.section_id]
        count = section_counts[section.section_id]
        n_seg = len(segs)
        for seg in segs:
            seg.load_ratio = seg.poe_count * n_seg / count if count > 0 else 0.0
        mean_ratio = sum(s.load_ratio for s in segs) / n_seg
        loads.append(
            SectionLoad(
                section_id=section.section_id,
                poe_count=count,
                length_m=section.length_m,
                count_per_meter=count / section.length_m if section.length_m > 0 else 0.0,
                mean_segment_load_ratio=mean_ratio,
            )
        )
        all_segments.extend(segs)
    return loads, all_segments


def classify_segments(loads, segments) -> list[RoadSegment]:
    """Color segments: green above their section's mean load ratio, red on
    sections with no POEs at all, undetermined otherwise."""
    load_by_section = {ld.section_id: ld for ld in loads}
    for seg in segments:
        ld = load_by_section[seg.section_id]
        if ld.poe_count == 0:
            seg.classification = "red"
        elif seg.load_ratio > ld.mean_segment_load_ratio:
            seg.classification = "green"
        else:
            seg.classification = "undetermined"
    return segments


def segments_to_geojson(segments) -> dict:
    feats = []
    for seg in segments:
        feats.append(
            gjson.feature(
                {
                    "type": "LineString",
                    "coordinates": [[p.lon, p.lat] for p in seg.polyline],
                },
                {
                    "segment_id": seg.segment_id,
                    "section_id": seg.section_id,
                    "poe_count": seg.poe_count,
                    "load_ratio": round(seg.load_ratio, 9),
                    "class": seg.classification,
                },
            )
        )
    return gjson.feature_collection(feats)


def roads_to_geojson(roads) -> dict:
    feats = []
    for road in roads:
        feats.append(
            gjson.feature(
                {
                    "type": "LineString",
                    "coordinates": [[p.lon, p.lat] for p in road.polyline],
                },
                {
                    "road_id": road.road_id,
                    "highway": road.highway_class,
                    "oneway": "yes" if road.oneway else "no",
                },
            )
        )
    return gjson.feature_collection(feats)
