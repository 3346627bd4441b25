"""Gridded raster layers, study-area polygons, and layer transforms.

All grids live in geographic lon/lat coordinates. A layer is a dense
row-major array whose first row is the northernmost; a per-cell boolean
mask marks missing cells. Layers are immutable after construction so
they can be shared freely between threads.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    AlignmentError,
    DegenerateVariableError,
    GridFormatError,
    ValidationError,
)

HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a regular lon/lat grid anchored at its lower-left corner."""

    n_rows: int
    n_cols: int
    x_ll: float
    y_ll: float
    cell_size: float

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValidationError("grid must have at least one row and one column")
        if not self.cell_size > 0:
            raise ValidationError("cell_size must be positive")

    @property
    def y_top(self) -> float:
        return self.y_ll + self.n_rows * self.cell_size

    @property
    def x_right(self) -> float:
        return self.x_ll + self.n_cols * self.cell_size

    def cell_index(self, lon: float, lat: float):
        """Map a point to its (row, col) cell, or None when off-grid.

        Cells are half-open: a cell owns its left and top edges, so any
        point maps to at most one cell. The grid's outer left/top edges
        are owned by the border cells.
        """
        col = math.floor((lon - self.x_ll) / self.cell_size)
        row = math.floor((self.y_top - lat) / self.cell_size)
        if 0 <= row < self.n_rows and 0 <= col < self.n_cols:
            return row, col
        return None

    def cell_center(self, row: int, col: int):
        lon = self.x_ll + (col + 0.5) * self.cell_size
        lat = self.y_top - (row + 0.5) * self.cell_size
        return lon, lat

    def center_lon(self) -> np.ndarray:
        """Longitudes of cell centers, one per column."""
        return self.x_ll + (np.arange(self.n_cols) + 0.5) * self.cell_size

    def center_lat(self) -> np.ndarray:
        """Latitudes of cell centers, one per row (top row first)."""
        return self.y_top - (np.arange(self.n_rows) + 0.5) * self.cell_size


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class RasterLayer:
    """One gridded variable: values plus a missing-cell mask."""

    grid: GridSpec
    values: np.ndarray
    missing: np.ndarray = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_rows, self.grid.n_cols):
            raise ValidationError(
                f"values shape {values.shape} does not match grid "
                f"({self.grid.n_rows}, {self.grid.n_cols})"
            )
        if self.missing is None:
            missing = np.zeros(values.shape, dtype=bool)
        else:
            missing = np.asarray(self.missing, dtype=bool)
            if missing.shape != values.shape:
                raise ValidationError("missing mask shape does not match values")
        # NaNs carry no numeric meaning either way; fold them into the mask
        missing = missing | np.isnan(values)
        values = np.where(missing, np.nan, values)
        object.__setattr__(self, "values", _freeze(values))
        object.__setattr__(self, "missing", _freeze(missing))

    @property
    def n_rows(self) -> int:
        return self.grid.n_rows

    @property
    def n_cols(self) -> int:
        return self.grid.n_cols

    def value_at(self, lon: float, lat: float):
        """Value of the cell containing the point; None off-grid, NaN if masked."""
        idx = self.grid.cell_index(lon, lat)
        if idx is None:
            return None
        return float(self.values[idx])

    def with_mask(self, extra_missing: np.ndarray) -> "RasterLayer":
        return RasterLayer(self.grid, self.values, self.missing | extra_missing)


@dataclass(frozen=True)
class RasterStack:
    """Ordered set of grid-aligned layers keyed by variable name."""

    layers: dict

    def __post_init__(self):
        if not self.layers:
            raise ValidationError("stack needs at least one layer")
        grids = {layer.grid for layer in self.layers.values()}
        if len(grids) != 1:
            raise AlignmentError("stack layers do not share one grid geometry")

    @property
    def grid(self) -> GridSpec:
        return next(iter(self.layers.values())).grid

    @property
    def variables(self):
        return list(self.layers)

    def __getitem__(self, name: str) -> RasterLayer:
        return self.layers[name]

    def any_missing(self) -> np.ndarray:
        """Union of the per-layer missing masks."""
        out = np.zeros((self.grid.n_rows, self.grid.n_cols), dtype=bool)
        for layer in self.layers.values():
            out |= layer.missing
        return out


@dataclass(frozen=True)
class TimeSeriesStack:
    """Per-timestamp stacks holding the same variables on the same grid."""

    steps: dict

    def __post_init__(self):
        if not self.steps:
            raise ValidationError("time series needs at least one step")
        timestamps = list(self.steps)
        if timestamps != sorted(timestamps):
            raise ValidationError("timestamps must be strictly increasing")
        if len(set(timestamps)) != len(timestamps):
            raise ValidationError("timestamps must be unique")
        first = next(iter(self.steps.values()))
        for stack in self.steps.values():
            if stack.variables != first.variables:
                raise ValidationError("every step must carry the same variable set")
            if stack.grid != first.grid:
                raise AlignmentError("every step must share the grid geometry")

    @property
    def grid(self) -> GridSpec:
        return next(iter(self.steps.values())).grid

    @property
    def variables(self):
        return next(iter(self.steps.values())).variables

    @property
    def timestamps(self):
        return list(self.steps)


@dataclass(frozen=True)
class ScenarioSet:
    """Named climate scenarios, each a time series of layer stacks."""

    scenarios: dict

    def __post_init__(self):
        if not self.scenarios:
            raise ValidationError("scenario set needs at least one scenario")
        variable_sets = {tuple(s.variables) for s in self.scenarios.values()}
        if len(variable_sets) != 1:
            raise ValidationError("all scenarios must share the same variable set")

    @property
    def variables(self):
        return next(iter(self.scenarios.values())).variables


@dataclass(frozen=True)
class StudyArea:
    """Polygonal region as a set of closed lon/lat rings (even-odd holes)."""

    rings: tuple

    def __post_init__(self):
        rings = []
        for ring in self.rings:
            ring = [(float(x), float(y)) for x, y in ring]
            if len(ring) < 4:
                raise ValidationError("each ring needs at least 4 vertices")
            if ring[0] != ring[-1]:
                raise ValidationError("rings must be closed (first vertex == last)")
            for x, y in ring:
                if not (-180.0 <= x <= 180.0 and -90.0 <= y <= 90.0):
                    raise ValidationError(f"vertex ({x}, {y}) outside lon/lat bounds")
            rings.append(tuple(ring))
        object.__setattr__(self, "rings", tuple(rings))


@dataclass(frozen=True)
class StandardizationParams:
    """Per-variable mean and sample standard deviation used for z-scoring."""

    mean: dict
    sd: dict

    def __post_init__(self):
        for name, sd in self.sd.items():
            if not sd > 0:
                raise DegenerateVariableError(f"variable '{name}' has sd <= 0")

    @property
    def variables(self):
        return list(self.mean)


# ---------------------------------------------------------------------------
# ESRI ASCII grid I/O


def load_ascii_grid(path) -> RasterLayer:
    """Read an ESRI ASCII grid file into a RasterLayer.

    The format is six header lines (ncols, nrows, xllcorner, yllcorner,
    cellsize, NODATA_value; keywords case-insensitive) followed by
    ``nrows`` lines of ``ncols`` whitespace-separated values, north row
    first. Cells equal to the NODATA value come back masked.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    header = {}
    for i, key in enumerate(HEADER_KEYS):
        if i >= len(lines):
            raise GridFormatError(f"missing header line '{key}'", line_number=i + 1)
        tokens = lines[i].split()
        if len(tokens) != 2:
            raise GridFormatError(
                f"expected '<keyword> <value>', got {lines[i]!r}", line_number=i + 1
            )
        if tokens[0].lower() != key:
            raise GridFormatError(
                f"expected header keyword '{key}', got '{tokens[0]}'", line_number=i + 1
            )
        try:
            header[key] = float(tokens[1])
        except ValueError:
            raise GridFormatError(
                f"non-numeric header value {tokens[1]!r}", line_number=i + 1
            ) from None

    n_cols, n_rows = int(header["ncols"]), int(header["nrows"])
    if n_cols != header["ncols"] or n_rows != header["nrows"]:
        raise GridFormatError("ncols/nrows must be integers", line_number=1)
    nodata = header["nodata_value"]

    body = lines[6:]
    while body and not body[-1].strip():
        body.pop()
    if len(body) != n_rows:
        raise GridFormatError(
            f"expected {n_rows} data rows, found {len(body)}", line_number=7
        )

    values = np.empty((n_rows, n_cols), dtype=float)
    for r, line in enumerate(body):
        tokens = line.split()
        if len(tokens) != n_cols:
            raise GridFormatError(
                f"expected {n_cols} values, found {len(tokens)}", line_number=7 + r
            )
        try:
            values[r] = [float(t) for t in tokens]
        except ValueError:
            raise GridFormatError("non-numeric value", line_number=7 + r) from None

    missing = values == nodata
    grid = GridSpec(n_rows, n_cols, header["xllcorner"], header["yllcorner"], header["cellsize"])
    return RasterLayer(grid, values, missing)


def _fmt(x: float) -> str:
    # repr() of a Python float is the shortest round-trip decimal form
    return repr(float(x))


def write_ascii_grid(layer: RasterLayer, path, nodata: float = -9999.0) -> None:
    """Write a RasterLayer as an ESRI ASCII grid.

    Values are emitted in their shortest round-trip decimal form so a
    write/load cycle is bit-exact. If the default NODATA sentinel
    collides with a real cell value, a sentinel below the data range is
    chosen instead.
    """
    finite = layer.values[~layer.missing]
    if finite.size and np.any(finite == nodata):
        nodata = math.floor(float(finite.min())) - 9999.0
    g = layer.grid
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"ncols {g.n_cols}\n")
        fh.write(f"nrows {g.n_rows}\n")
        fh.write(f"xllcorner {_fmt(g.x_ll)}\n")
        fh.write(f"yllcorner {_fmt(g.y_ll)}\n")
        fh.write(f"cellsize {_fmt(g.cell_size)}\n")
        fh.write(f"NODATA_value {_fmt(nodata)}\n")
        for r in range(g.n_rows):
            row = [
                _fmt(nodata) if layer.missing[r, c] else _fmt(layer.values[r, c])
                for c in range(g.n_cols)
            ]
            fh.write(" ".join(row) + "\n")


# ---------------------------------------------------------------------------
# Polygon membership


def _on_segment(px, py, x1, y1, x2, y2) -> bool:
    cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
    if cross != 0.0:
        return False
    return min(x1, x2) <= px <= max(x1, x2) and min(y1, y2) <= py <= max(y1, y2)


def point_in_polygon(area: StudyArea, lon: float, lat: float) -> bool:
    """Even-odd (ray casting) membership; boundary points count as inside."""
    crossings = 0
    for ring in area.rings:
        for (x1, y1), (x2, y2) in zip(ring[:-1], ring[1:]):
            if _on_segment(lon, lat, x1, y1, x2, y2):
                return True
            if (y1 > lat) != (y2 > lat):
                x_at = x1 + (lat - y1) * (x2 - x1) / (y2 - y1)
                if lon < x_at:
                    crossings += 1
    return crossings % 2 == 1


def load_study_area(path) -> StudyArea:
    """Load a study area from a GeoJSON Polygon or MultiPolygon file."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    geometries = []
    kind = doc.get("type")
    if kind == "FeatureCollection":
        geometries = [f["geometry"] for f in doc.get("features", [])]
    elif kind == "Feature":
        geometries = [doc["geometry"]]
    else:
        geometries = [doc]
    rings = []
    for geom in geometries:
        gtype = geom.get("type")
        if gtype == "Polygon":
            polygons = [geom["coordinates"]]
        elif gtype == "MultiPolygon":
            polygons = geom["coordinates"]
        else:
            raise ValidationError(f"unsupported GeoJSON geometry type: {gtype}")
        for polygon in polygons:
            rings.extend(tuple((float(x), float(y)) for x, y in ring) for ring in polygon)
    if not rings:
        raise ValidationError("GeoJSON file contains no polygon rings")
    return StudyArea(tuple(rings))


# ---------------------------------------------------------------------------
# Stack transforms


def inside_mask(grid: GridSpec, area: StudyArea) -> np.ndarray:
    """Boolean grid of cells whose centers fall inside the area."""
    lats = grid.center_lat()
    lons = grid.center_lon()
    out = np.zeros((grid.n_rows, grid.n_cols), dtype=bool)
    for r in range(grid.n_rows):
        for c in range(grid.n_cols):
            out[r, c] = point_in_polygon(area, lons[c], lats[r])
    return out


def crop_mask(stack: RasterStack, area: StudyArea) -> RasterStack:
    """Mask every layer to the study area (cell-center rule).

    Grid extent is unchanged; cells whose centers fall outside the
    polygon become missing in every variable. Warns when the polygon is
    disjoint from the grid (result is all-missing).
    """
    inside = inside_mask(stack.grid, area)
    if not inside.any():
        warnings.warn("study area polygon is disjoint from the grid; all cells masked")
    outside = ~inside
    return RasterStack({name: layer.with_mask(outside) for name, layer in stack.layers.items()})


def zscore_standardize(stack: RasterStack):
    """Z-score each variable over its non-missing cells (sample sd).

    Returns the standardized stack and the per-variable parameters so the
    same transform can be replayed on projection layers.
    """
    means, sds, layers = {}, {}, {}
    for name, layer in stack.layers.items():
        vals = layer.values[~layer.missing]
        if vals.size < 2:
            raise DegenerateVariableError(
                f"variable '{name}' needs at least 2 non-missing cells"
            )
        mean = float(vals.mean())
        sd = float(vals.std(ddof=1))
        if sd == 0.0:
            raise DegenerateVariableError(f"variable '{name}' is constant (sd = 0)")
        means[name], sds[name] = mean, sd
        layers[name] = RasterLayer(layer.grid, (layer.values - mean) / sd, layer.missing)
    return RasterStack(layers), StandardizationParams(means, sds)


def average_stack(series: TimeSeriesStack) -> RasterStack:
    """Per-variable arithmetic mean across time steps.

    A cell missing at any step is missing in the output, so a
    climatology never mixes partially observed cells.
    """
    grid = series.grid
    layers = {}
    for name in series.variables:
        total = np.zeros((grid.n_rows, grid.n_cols), dtype=float)
        missing = np.zeros((grid.n_rows, grid.n_cols), dtype=bool)
        for stack in series.steps.values():
            layer = stack[name]
            missing |= layer.missing
            total += np.where(layer.missing, 0.0, layer.values)
        mean = total / len(series.steps)
        layers[name] = RasterLayer(grid, np.where(missing, np.nan, mean), missing)
    return RasterStack(layers)
