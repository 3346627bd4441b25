"""Occurrence cleaning, thinning, pseudo-absence generation, model matrix.

The preparation order mirrors the analysis pipeline: clean coordinates,
optionally thin clustered records by coordinate rounding, generate
balanced pseudo-absences for presence-only data, then join records to
their environmental cell values.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    ClassImbalanceError,
    DegenerateVariableError,
    EmptyDataError,
    InfeasibleSamplingError,
    ParameterError,
    SchemaError,
    ValidationError,
)
from .grids import (
    GridSpec,
    RasterStack,
    StandardizationParams,
    StudyArea,
    TimeSeriesStack,
    inside_mask,
    point_in_polygon,
)

COORD_COLUMNS = ("decimalLongitude", "decimalLatitude")
RESERVED_COORD_NAMES = ("lon", "lat")


@dataclass(frozen=True)
class OccurrenceRecord:
    """One georeferenced record; label 1 = presence, 0 = absence."""

    lon: float
    lat: float
    timestamp: int | None = None
    label: int | None = None
    pseudo: bool = False  # True for generated pseudo-absences

    def key(self):
        return (self.lon, self.lat, self.timestamp, self.label)


@dataclass
class CleaningReport:
    """Counts of removed records by reason, plus the retained count."""

    duplicate: int = 0
    missing_coordinate: int = 0
    outside_polygon: int = 0
    missing_environment: int = 0
    unmatched_timestamp: int = 0
    retained: int = 0

    @property
    def removed(self) -> int:
        return (
            self.duplicate
            + self.missing_coordinate
            + self.outside_polygon
            + self.missing_environment
            + self.unmatched_timestamp
        )

    @property
    def total(self) -> int:
        return self.removed + self.retained

    def as_rows(self):
        return [
            ("duplicate", self.duplicate),
            ("missing_coordinate", self.missing_coordinate),
            ("outside_polygon", self.outside_polygon),
            ("missing_environment", self.missing_environment),
            ("unmatched_timestamp", self.unmatched_timestamp),
            ("retained", self.retained),
        ]


@dataclass(frozen=True)
class CellMask:
    """Boolean grid of cells usable for sampling (environment complete, in area)."""

    grid: GridSpec
    valid: np.ndarray


@dataclass
class ModelMatrix:
    """Covariate matrix and response assembled from occurrence records.

    ``X`` holds the values the sampler sees (standardized when requested);
    ``X_raw`` always keeps the original scale so response curves and
    projections can work with interpretable units. Coordinate columns,
    when present, are never standardized.
    """

    columns: list
    X: np.ndarray
    X_raw: np.ndarray
    y: np.ndarray
    records: tuple
    standardization: StandardizationParams | None = None
    n_dropped_missing: int = 0

    def __post_init__(self):
        if self.X.shape != self.X_raw.shape or self.X.shape[0] != self.y.size:
            raise ValidationError("matrix blocks have inconsistent shapes")
        if len(self.columns) != self.X.shape[1]:
            raise ValidationError("column names do not match matrix width")
        if len(set(self.columns)) != len(self.columns):
            raise ValidationError("column names must be unique")

    @property
    def n_rows(self) -> int:
        return self.y.size

    @property
    def env_columns(self) -> list:
        return [c for c in self.columns if c not in RESERVED_COORD_NAMES]

    @property
    def has_coords(self) -> bool:
        return "lon" in self.columns

    @property
    def pseudo(self) -> np.ndarray:
        return np.array([r.pseudo for r in self.records], dtype=bool)

    def take(self, indices) -> "ModelMatrix":
        """Row subset, re-standardized on the kept rows when applicable."""
        indices = np.asarray(indices, dtype=int)
        raw = self.X_raw[indices]
        records = tuple(self.records[i] for i in indices)
        y = self.y[indices]
        if len(np.unique(y)) < 2:
            raise ClassImbalanceError("row subset contains a single class")
        if self.standardization is not None:
            X, params = _standardize_columns(raw, self.columns)
        else:
            X, params = raw.copy(), None
        return ModelMatrix(
            columns=list(self.columns),
            X=X,
            X_raw=raw,
            y=y,
            records=records,
            standardization=params,
        )


def _coords_bad(lon, lat) -> bool:
    for v in (lon, lat):
        if v is None or not math.isfinite(v):
            return True
    return not (-180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0)


def _step_stack(stack, timestamp):
    """Resolve the stack matching a record's timestamp; None when unmatched."""
    if isinstance(stack, RasterStack):
        return stack
    if timestamp is None:
        if len(stack.steps) == 1:
            return next(iter(stack.steps.values()))
        return None
    return stack.steps.get(timestamp)


def clean_occurrences(records, stack, area: StudyArea | None = None):
    """Drop unusable records and account for every removal.

    Removal reasons, checked in order per record: missing/out-of-range
    coordinates, exact duplicates of (lon, lat, timestamp, label), points
    outside the study polygon, timestamps matching no environmental step,
    and points on cells where any variable is missing.
    """
    report = CleaningReport()
    seen = set()
    kept = []
    for rec in records:
        if _coords_bad(rec.lon, rec.lat):
            report.missing_coordinate += 1
            continue
        if rec.key() in seen:
            report.duplicate += 1
            continue
        seen.add(rec.key())
        if area is not None and not point_in_polygon(area, rec.lon, rec.lat):
            report.outside_polygon += 1
            continue
        step = _step_stack(stack, rec.timestamp)
        if step is None:
            report.unmatched_timestamp += 1
            continue
        idx = step.grid.cell_index(rec.lon, rec.lat)
        if idx is None or any(layer.missing[idx] for layer in step.layers.values()):
            report.missing_environment += 1
            continue
        kept.append(rec)
    report.retained = len(kept)
    if not kept:
        raise EmptyDataError("no occurrence records survived cleaning")
    return kept, report


def thin_occurrences(records, decimals: int, seed: int):
    """Keep one record per rounded-coordinate bin (and timestamp).

    The representative is drawn uniformly at random with the given seed;
    output preserves the original record order.
    """
    if decimals < 0:
        raise ParameterError("decimals must be >= 0")
    bins = {}
    for i, rec in enumerate(records):
        key = (round(rec.lon, decimals), round(rec.lat, decimals), rec.timestamp)
        bins.setdefault(key, []).append(i)
    rng = np.random.default_rng(seed)
    kept_idx = []
    for members in bins.values():  # insertion order: deterministic in input order
        kept_idx.append(members[int(rng.integers(len(members)))])
    kept_idx.sort()
    return [records[i] for i in kept_idx]


def valid_cell_mask(stack: RasterStack, area: StudyArea | None = None) -> CellMask:
    """Cells where every variable is observed, restricted to the study area."""
    valid = ~stack.any_missing()
    if area is not None:
        valid &= inside_mask(stack.grid, area)
    return CellMask(stack.grid, valid)


def valid_cell_masks(stack, area: StudyArea | None = None) -> dict:
    """Per-timestamp cell masks; a plain stack maps from timestamp None."""
    if isinstance(stack, RasterStack):
        return {None: valid_cell_mask(stack, area)}
    return {t: valid_cell_mask(s, area) for t, s in stack.steps.items()}


def _timestamp_order(timestamps):
    return sorted(timestamps, key=lambda t: (t is not None, t if t is not None else 0))


def generate_pseudo_absences(presences, valid_masks: dict, seed: int):
    """Sample one pseudo-absence per presence, per timestamp.

    Absences land on centers of valid cells drawn uniformly without
    replacement, never on a cell already holding a presence at that
    timestamp. Raises when a timestamp has fewer free valid cells than
    presences.
    """
    for rec in presences:
        if rec.label == 0:
            raise ValidationError("pseudo-absence generation expects presence-only input")
    by_time = {}
    for rec in presences:
        by_time.setdefault(rec.timestamp, []).append(rec)
    rng = np.random.default_rng(seed)
    absences = []
    for t in _timestamp_order(by_time):
        if t not in valid_masks:
            raise ValidationError(f"no valid-cell mask for timestamp {t!r}")
        mask = valid_masks[t]
        occupied = np.zeros(mask.valid.shape, dtype=bool)
        for rec in by_time[t]:
            idx = mask.grid.cell_index(rec.lon, rec.lat)
            if idx is not None:
                occupied[idx] = True
        candidates = np.flatnonzero(mask.valid & ~occupied)
        n = len(by_time[t])
        if candidates.size < n:
            raise InfeasibleSamplingError(
                f"timestamp {t!r}: {candidates.size} free valid cells for {n} presences"
            )
        chosen = rng.choice(candidates, size=n, replace=False)
        for flat in chosen:
            r, c = divmod(int(flat), mask.grid.n_cols)
            lon, lat = mask.grid.cell_center(r, c)
            absences.append(
                OccurrenceRecord(lon=lon, lat=lat, timestamp=t, label=0, pseudo=True)
            )
    return absences


def _standardize_columns(raw: np.ndarray, columns):
    """Z-score environmental columns; coordinates pass through untouched."""
    X = raw.copy()
    means, sds = {}, {}
    for j, name in enumerate(columns):
        if name in RESERVED_COORD_NAMES:
            continue
        mean = float(raw[:, j].mean())
        sd = float(raw[:, j].std(ddof=1))
        if sd == 0.0 or not math.isfinite(sd):
            raise DegenerateVariableError(f"covariate '{name}' is constant across rows")
        X[:, j] = (raw[:, j] - mean) / sd
        means[name], sds[name] = mean, sd
    return X, StandardizationParams(means, sds)


def build_model_matrix(records, stack, include_coords: bool, standardize: bool) -> ModelMatrix:
    """Join labeled records to their cell's covariate values.

    Rows that hit a missing covariate are dropped and counted. When
    ``include_coords`` is set, record lon/lat are appended as covariates
    named ``lon`` and ``lat`` (never standardized).
    """
    if isinstance(stack, RasterStack):
        variables = stack.variables
    else:
        variables = stack.variables
    for reserved in RESERVED_COORD_NAMES:
        if include_coords and reserved in variables:
            raise SchemaError(f"variable name '{reserved}' is reserved for coordinates")

    rows, kept, dropped = [], [], 0
    for rec in records:
        if rec.label is None:
            raise ValidationError("all records must be labeled before matrix assembly")
        step = _step_stack(stack, rec.timestamp)
        if step is None:
            dropped += 1
            continue
        idx = step.grid.cell_index(rec.lon, rec.lat)
        if idx is None:
            dropped += 1
            continue
        vals = [step[v].values[idx] for v in variables]
        if any(not math.isfinite(v) for v in vals):
            dropped += 1
            continue
        if include_coords:
            vals = vals + [rec.lon, rec.lat]
        rows.append(vals)
        kept.append(rec)

    if not rows:
        raise EmptyDataError("no records could be joined to environmental values")
    columns = list(variables) + (["lon", "lat"] if include_coords else [])
    raw = np.asarray(rows, dtype=float)
    y = np.array([r.label for r in kept], dtype=np.int8)
    if len(np.unique(y)) < 2:
        raise ClassImbalanceError("model matrix response contains a single class")
    if standardize:
        X, params = _standardize_columns(raw, columns)
    else:
        X, params = raw.copy(), None
    return ModelMatrix(
        columns=columns,
        X=X,
        X_raw=raw,
        y=y,
        records=tuple(kept),
        standardization=params,
        n_dropped_missing=dropped,
    )


def load_occurrences(path):
    """Read one species' records from a delimited text file.

    The delimiter (tab or comma) is auto-detected from the header line.
    ``decimalLongitude``/``decimalLatitude`` are required; ``timestamp``
    (integer) and ``pa`` (0/1) are optional. Returns (species, records)
    with the species name taken from the file stem. Unparseable
    coordinates become NaN so cleaning can account for them.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise SchemaError(f"{path.name}: empty file")
        delimiter = "\t" if "\t" in header_line else ","
        fieldnames = [c.strip() for c in header_line.rstrip("\r\n").split(delimiter)]
        for col in COORD_COLUMNS:
            if col not in fieldnames:
                raise SchemaError(f"{path.name}: missing required column '{col}'")
        reader = csv.DictReader(fh, fieldnames=fieldnames, delimiter=delimiter)
        records = []
        for row in reader:
            records.append(
                OccurrenceRecord(
                    lon=_parse_float(row.get("decimalLongitude")),
                    lat=_parse_float(row.get("decimalLatitude")),
                    timestamp=_parse_int(row.get("timestamp")) if "timestamp" in fieldnames else None,
                    label=_parse_label(row.get("pa")) if "pa" in fieldnames else None,
                )
            )
    return path.stem, records


def _parse_float(token):
    if token is None or token.strip() == "":
        return math.nan
    try:
        return float(token)
    except ValueError:
        return math.nan


def _parse_int(token):
    if token is None or token.strip() == "":
        return None
    try:
        return int(float(token))
    except ValueError:
        return None


def _parse_label(token):
    if token is None or token.strip() == "":
        return None
    try:
        value = int(float(token))
    except ValueError:
        return None
    return value if value in (0, 1) else None
