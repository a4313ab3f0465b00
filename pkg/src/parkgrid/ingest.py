"""Park-out-event (POE) ingestion: CSV/GeoJSON parsing, quality filters,
and duration statistics.

Filtering keeps a POE only when its parking duration is at least five
minutes and its position is not strictly inside an unfeasible zone
(parks, schools, private yards, buildings).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import gjson
from .errors import DataError
from .geo import GeoPoint

MIN_DURATION_S = 300.0
MAX_HISTOGRAM_S = 86_400.0

LABELS = ("yesParking", "noParking")

# zone_type values that make a position infeasible for on-street parking;
# other zone types (no_parking, parking, bus_lane, ...) are kept for the
# feature layers and do not drop POEs at ingest time.
UNFEASIBLE_ZONE_TYPES = frozenset(
    {"building", "park", "school", "private_yard", "other_unfeasible"}
)
ZONE_TYPES = UNFEASIBLE_ZONE_TYPES | {
    "no_parking",
    "parking",
    "bus_lane",
    "gas_station",
    "taxi_stand",
}

POE_COLUMNS = ("id", "lat", "lon", "timestamp", "duration_s")


@dataclass(frozen=True)
class PoeRecord:
    """One anonymized park-out event."""

    id: str
    position: GeoPoint
    timestamp: float  # UTC epoch seconds
    duration_s: float
    label: str | None = None

    def __post_init__(self):
        if self.duration_s < 0:
            raise ValueError(f"duration must be >= 0, got {self.duration_s}")
        if self.label is not None and self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")


@dataclass(frozen=True)
class ZonePolygon:
    """A map polygon with a parking-relevance type.

    rings: outer ring first, optional holes after; each ring closed
    (first point == last) with at least 4 points. Rings are assumed
    non-self-intersecting.
    """

    rings: tuple[tuple[GeoPoint, ...], ...]
    zone_type: str

    def __post_init__(self):
        if not self.rings:
            raise ValueError("zone polygon needs at least one ring")
        for ring in self.rings:
            if len(ring) < 4:
                raise ValueError("polygon ring needs >= 4 points (closed)")
            if ring[0] != ring[-1]:
                raise ValueError("polygon ring must be closed (first == last)")
        if self.zone_type not in ZONE_TYPES:
            raise ValueError(f"unknown zone_type {self.zone_type!r}")


@dataclass(frozen=True)
class FilterReport:
    total_in: int
    dropped_short_duration: int
    dropped_in_unfeasible_zone: int
    retained: int

    def __post_init__(self):
        if self.total_in != (
            self.dropped_short_duration + self.dropped_in_unfeasible_zone + self.retained
        ):
            raise ValueError("filter report counts do not reconcile")


def parse_timestamp(value: str) -> float:
    """ISO-8601 UTC string -> epoch seconds. Naive times are taken as UTC."""
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def format_timestamp(epoch_s: float) -> str:
    """Epoch seconds -> ISO-8601 Z string at whole-second precision."""
    return datetime.fromtimestamp(int(round(epoch_s)), tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


def load_poes(path) -> tuple[list[PoeRecord], list[tuple[int, str]]]:
    """Read the POE CSV; returns (records, row_errors).

    Malformed rows are reported as (line_number, message) instead of being
    silently dropped. A missing file or missing required columns raise
    DataError for the whole file.
    """
    p = Path(path)
    if not p.exists():
        raise DataError(f"POE file not found: {p}")
    records: list[PoeRecord] = []
    errors: list[tuple[int, str]] = []
    with p.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in POE_COLUMNS if c not in header]
        if missing:
            raise DataError(f"{p}: missing required columns {missing}")
        for line_no, row in enumerate(reader, start=2):
            try:
                records.append(_parse_row(row))
            except (ValueError, KeyError) as exc:
                errors.append((line_no, str(exc)))
    return records, errors


def _parse_row(row: dict) -> PoeRecord:
    lat = float(row["lat"])
    lon = float(row["lon"])
    duration = float(row["duration_s"])
    label = (row.get("label") or "").strip() or None
    return PoeRecord(
        id=row["id"],
        position=GeoPoint(lat, lon),
        timestamp=parse_timestamp(row["timestamp"]),
        duration_s=duration,
        label=label,
    )


def save_poes(path, poes) -> None:
    """Write POEs back to the CSV schema (7-decimal coordinates, ISO times)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(POE_COLUMNS) + ["label"])
        for rec in poes:
            writer.writerow(
                [
                    rec.id,
                    f"{rec.position.lat:.7f}",
                    f"{rec.position.lon:.7f}",
                    format_timestamp(rec.timestamp),
                    repr(rec.duration_s),
                    rec.label or "",
                ]
            )


def load_zones(path) -> list[ZonePolygon]:
    """Read a GeoJSON FeatureCollection of Polygons with a zone_type property."""
    fc = gjson.read_geojson(path)
    zones = []
    for i, feat in enumerate(gjson.iter_features(fc)):
        geom = feat.get("geometry") or {}
        if geom.get("type") != "Polygon":
            raise DataError(f"zone feature {i}: expected Polygon, got {geom.get('type')}")
        zone_type = (feat.get("properties") or {}).get("zone_type")
        if zone_type not in ZONE_TYPES:
            raise DataError(f"zone feature {i}: bad zone_type {zone_type!r}")
        try:
            rings = tuple(
                tuple(GeoPoint(c[1], c[0]) for c in ring) for ring in geom["coordinates"]
            )
            zones.append(ZonePolygon(rings=rings, zone_type=zone_type))
        except (ValueError, TypeError, IndexError) as exc:
            raise DataError(f"zone feature {i}: {exc}") from exc
    return zones


def filter_short_durations(poes, min_duration: float = MIN_DURATION_S):
    """Partition POEs by the five-minute rule.

    "Less than five minutes" is strict: a duration of exactly 300 s is
    retained.
    """
    retained = [p for p in poes if p.duration_s >= min_duration]
    dropped = [p for p in poes if p.duration_s < min_duration]
    return retained, dropped


def point_in_polygon(p: GeoPoint, zone: ZonePolygon) -> bool:
    """Even-odd ray casting over all rings; edge points count as outside.

    Treating on-edge points as outside biases toward keeping data, since
    zone geometry is approximate anyway.
    """
    px, py = p.lon, p.lat
    inside = False
    for ring in zone.rings:
        for i in range(len(ring) - 1):
            x1, y1 = ring[i].lon, ring[i].lat
            x2, y2 = ring[i + 1].lon, ring[i + 1].lat
            if _on_edge(px, py, x1, y1, x2, y2):
                return False
            if (y1 > py) != (y2 > py):
                x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
                if px < x_cross:
                    inside = not inside
    return inside


def _on_edge(px, py, x1, y1, x2, y2, eps=1e-12):
    cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
    if abs(cross) > eps:
        return False
    dot = (px - x1) * (x2 - x1) + (py - y1) * (y2 - y1)
    seg_sq = (x2 - x1) ** 2 + (y2 - y1) ** 2
    return -eps <= dot <= seg_sq + eps


def filter_unfeasible_zones(poes, zones):
    """Drop POEs strictly inside any unfeasible zone (parks, buildings, ...)."""
    blocking = [z for z in zones if z.zone_type in UNFEASIBLE_ZONE_TYPES]
    retained, dropped = [], []
    for rec in poes:
        if any(point_in_polygon(rec.position, z) for z in blocking):
            dropped.append(rec)
        else:
            retained.append(rec)
    return retained, dropped


def duration_histogram(poes, bin_width: float, max_duration: float = MAX_HISTOGRAM_S):
    """Histogram of parking durations as a list of (bin_start, count).

    Regular bins are [i*bin_width, (i+1)*bin_width); the final list entry
    is the overflow bin counting durations strictly above max_duration.
    Durations exactly equal to max_duration land in the last regular bin.
    """
    if bin_width <= 0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    n_bins = max(1, math.ceil(max_duration / bin_width))
    counts = [0] * n_bins
    overflow = 0
    for rec in poes:
        if rec.duration_s > max_duration:
            overflow += 1
        else:
            counts[min(int(rec.duration_s // bin_width), n_bins - 1)] += 1
    bins = [(i * bin_width, counts[i]) for i in range(n_bins)]
    bins.append((n_bins * bin_width, overflow))
    return bins
