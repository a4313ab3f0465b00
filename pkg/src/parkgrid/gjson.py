"""Minimal GeoJSON reading/writing with deterministic output.

Coordinates are written with 7 decimal places (~1 cm) so repeated runs
produce byte-identical, diffable files.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import DataError

COORD_DECIMALS = 7


def _round_coords(coords):
    if isinstance(coords, (int, float)):
        return round(float(coords), COORD_DECIMALS)
    return [_round_coords(c) for c in coords]


def feature(geometry: dict, properties: dict) -> dict:
    geometry = dict(geometry)
    geometry["coordinates"] = _round_coords(geometry["coordinates"])
    return {"type": "Feature", "geometry": geometry, "properties": properties}


def feature_collection(features: list[dict]) -> dict:
    return {"type": "FeatureCollection", "features": list(features)}


def dumps(fc: dict) -> str:
    return json.dumps(fc, sort_keys=True, separators=(",", ":")) + "\n"


def write_geojson(path, fc: dict) -> None:
    Path(path).write_text(dumps(fc), encoding="utf-8")


def read_geojson(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise DataError(f"GeoJSON file not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{p}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise DataError(f"{p}: expected a GeoJSON FeatureCollection")
    return doc


def iter_features(fc: dict):
    for feat in fc.get("features", []):
        yield feat
