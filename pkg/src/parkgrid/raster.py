"""Dual-resolution uniform grid rasterization of POEs.

POEs are counted in a fine grid of slippy tiles (~5 m wide) and normalized
within a coarse tile grid (~500 m). A fine cell is classified as valid
parking when its count is strictly above the average count of its coarse
normalization window. Because tile widths snap to the slippy pyramid,
cells are geographic rectangles, not squares, and the actually realized
widths are recorded on the GridSpec.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import gjson
from .errors import DataError
from .geo import Bounds, GeoPoint, tile_of, tile_to_geo, tile_width_m

MAX_ZOOM = 30

Cell = tuple[int, int]


@dataclass(frozen=True)
class GridSpec:
    """Paired fine/coarse tile grids covering a bounding box.

    The anchor is the north-west fine tile (fine_zoom, x0, y0); the coarse
    grid is the same tile pyramid at a lower zoom, so every coarse window
    contains exactly (2**(fine_zoom-coarse_zoom))**2 fine cells.
    """

    bounds: Bounds
    fine_zoom: int
    coarse_zoom: int
    x0: int
    y0: int
    x1: int
    y1: int
    fine_cell_m: float
    coarse_cell_m: float
    fine_width_m: float
    coarse_width_m: float

    @property
    def shift(self) -> int:
        return self.fine_zoom - self.coarse_zoom

    def in_bounds(self, cell: Cell) -> bool:
        return self.x0 <= cell[0] <= self.x1 and self.y0 <= cell[1] <= self.y1

    def window_of(self, cell: Cell) -> Cell:
        return cell[0] >> self.shift, cell[1] >> self.shift

    def cell_of(self, p: GeoPoint) -> Cell:
        t = tile_of(p, self.fine_zoom)
        return t.x, t.y

    def window_cell_count(self, window: Cell) -> int:
        """Number of in-bounds fine cells inside a coarse window."""
        wx, wy = window
        nx = min(self.x1, ((wx + 1) << self.shift) - 1) - max(self.x0, wx << self.shift) + 1
        ny = min(self.y1, ((wy + 1) << self.shift) - 1) - max(self.y0, wy << self.shift) + 1
        return max(0, nx) * max(0, ny)

    def cell_polygon(self, cell: Cell) -> list[list[float]]:
        """Closed [lon, lat] ring of the cell rectangle (CCW)."""
        x, y = cell
        nw = tile_to_geo(x, y, self.fine_zoom)
        sw = tile_to_geo(x, y + 1, self.fine_zoom)
        se = tile_to_geo(x + 1, y + 1, self.fine_zoom)
        ne = tile_to_geo(x + 1, y, self.fine_zoom)
        return [[p.lon, p.lat] for p in (nw, sw, se, ne, nw)]


def _smallest_zoom_at_most(width_m: float, lat: float) -> int:
    for zoom in range(MAX_ZOOM + 1):
        if tile_width_m(zoom, lat) <= width_m:
            return zoom
    raise ValueError(f"no zoom <= {MAX_ZOOM} reaches cell width {width_m} m")


def make_grid_spec(
    bounds: Bounds, fine_cell_m: float = 5.0, coarse_cell_m: float = 500.0
) -> GridSpec:
    """Snap the requested cell sizes to the slippy tile pyramid.

    Each zoom is the smallest whose tile ground width at the bounding-box
    mean latitude does not exceed the target, which keeps cells stable
    across runs and areas.
    """
    if fine_cell_m <= 0 or coarse_cell_m <= fine_cell_m:
        raise ValueError("need 0 < fine_cell_m < coarse_cell_m")
    mean_lat = (bounds.min_lat + bounds.max_lat) / 2.0
    fine_zoom = _smallest_zoom_at_most(fine_cell_m, mean_lat)
    coarse_zoom = _smallest_zoom_at_most(coarse_cell_m, mean_lat)
    nw = tile_of(GeoPoint(bounds.max_lat, bounds.min_lon), fine_zoom)
    se = tile_of(GeoPoint(bounds.min_lat, bounds.max_lon), fine_zoom)
    return GridSpec(
        bounds=bounds,
        fine_zoom=fine_zoom,
        coarse_zoom=coarse_zoom,
        x0=nw.x,
        y0=nw.y,
        x1=se.x,
        y1=se.y,
        fine_cell_m=fine_cell_m,
        coarse_cell_m=coarse_cell_m,
        fine_width_m=tile_width_m(fine_zoom, mean_lat),
        coarse_width_m=tile_width_m(coarse_zoom, mean_lat),
    )


@dataclass(frozen=True)
class DualRaster:
    """Fine POE counts plus coarse normalization-window totals.

    Treated as immutable: update_raster returns a new value. POEs outside
    the grid bounds are reported by id, never counted.
    """

    spec: GridSpec
    fine_counts: dict[Cell, int] = field(default_factory=dict)
    coarse_totals: dict[Cell, int] = field(default_factory=dict)
    out_of_bounds: tuple[str, ...] = ()

    @property
    def total(self) -> int:
        return sum(self.fine_counts.values())


@dataclass(frozen=True)
class CellStats:
    count: int
    intensity: float
    valid: bool


@dataclass(frozen=True)
class RasterClassification:
    """Per-cell count, window-normalized intensity and validity flag.

    Only occupied cells are stored; absent cells have count 0,
    intensity 0.0 and valid False.
    """

    spec: GridSpec
    cells: dict[Cell, CellStats]

    def stats(self, cell: Cell) -> CellStats:
        return self.cells.get(cell, CellStats(0, 0.0, False))


def build_raster(poes, spec: GridSpec) -> DualRaster:
    """Count POEs per fine cell and per coarse window."""
    fine: dict[Cell, int] = {}
    coarse: dict[Cell, int] = {}
    outside: list[str] = []
    for rec in poes:
        cell = spec.cell_of(rec.position)
        if not spec.in_bounds(cell):
            outside.append(rec.id)
            continue
        fine[cell] = fine.get(cell, 0) + 1
        window = spec.window_of(cell)
        coarse[window] = coarse.get(window, 0) + 1
    return DualRaster(spec, fine, coarse, tuple(outside))


def update_raster(raster: DualRaster, new_poe) -> DualRaster:
    """Add one POE; the result equals a batch rebuild over the extended set."""
    cell = raster.spec.cell_of(new_poe.position)
    if not raster.spec.in_bounds(cell):
        raise DataError(f"POE {new_poe.id} lies outside the raster bounds")
    fine = dict(raster.fine_counts)
    coarse = dict(raster.coarse_totals)
    fine[cell] = fine.get(cell, 0) + 1
    window = raster.spec.window_of(cell)
    coarse[window] = coarse.get(window, 0) + 1
    return DualRaster(raster.spec, fine, coarse, raster.out_of_bounds)


def normalize(raster: DualRaster) -> dict[Cell, float]:
    """Cell count divided by its window total (0 when the window is empty)."""
    out = {}
    for cell, count in raster.fine_counts.items():
        total = raster.coarse_totals.get(raster.spec.window_of(cell), 0)
        out[cell] = count / total if total > 0 else 0.0
    return out


def classify_cells(raster: DualRaster, mean_over_all_cells: bool = False) -> RasterClassification:
    """Flag cells whose count is strictly above their window's average.

    The average is taken over occupied fine cells of the window by default;
    with mean_over_all_cells=True it is taken over every in-bounds cell of
    the window, which makes the filter far more permissive because most
    cells of a 500 m window are empty.
    """
    spec = raster.spec
    occupied_per_window: dict[Cell, int] = {}
    for cell in raster.fine_counts:
        w = spec.window_of(cell)
        occupied_per_window[w] = occupied_per_window.get(w, 0) + 1
    cells = {}
    for cell, count in raster.fine_counts.items():
        w = spec.window_of(cell)
        total = raster.coarse_totals[w]
        denom = spec.window_cell_count(w) if mean_over_all_cells else occupied_per_window[w]
        mean = total / denom
        cells[cell] = CellStats(
            count=count,
            intensity=count / total if total > 0 else 0.0,
            valid=count > mean,
        )
    return RasterClassification(spec, cells)


def raster_to_geojson(classification: RasterClassification) -> dict:
    """Occupied cells as GeoJSON Polygons with count/intensity/valid."""
    feats = []
    for cell in sorted(classification.cells):
        st = classification.cells[cell]
        feats.append(
            gjson.feature(
                {"type": "Polygon", "coordinates": [classification.spec.cell_polygon(cell)]},
                {
                    "cell_x": cell[0],
                    "cell_y": cell[1],
                    "count": st.count,
                    "intensity": round(st.intensity, 9),
                    "valid": st.valid,
                },
            )
        )
    return gjson.feature_collection(feats)
