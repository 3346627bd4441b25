"""Apply fitted models across raster stacks, scenarios and time steps.

Predictions are posterior summaries per grid cell. The binary habitat
map thresholds the posterior mean at the model cutoff; suitable area is
aggregated with a cos(latitude) cell weight, with raw cell counts kept
alongside for transparency.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bart import BartModel, predict_bart
from .errors import SchemaError
from .grids import GridSpec, RasterLayer, RasterStack, ScenarioSet, TimeSeriesStack, average_stack
from .posterior import summarize_draws

SUMMARY_NAMES = ("mean", "median", "q025", "q975", "binary")


@dataclass
class PosteriorPrediction:
    """Per-cell posterior predictive summaries on one grid."""

    grid: GridSpec
    mean: np.ndarray
    median: np.ndarray
    q025: np.ndarray
    q975: np.ndarray
    binary: np.ndarray
    missing: np.ndarray
    cutoff: float

    def layer(self, summary: str) -> RasterLayer:
        if summary not in SUMMARY_NAMES:
            raise SchemaError(f"unknown summary '{summary}'")
        return RasterLayer(self.grid, getattr(self, summary), self.missing)

    def layers(self) -> dict:
        return {name: self.layer(name) for name in SUMMARY_NAMES}


@dataclass
class ProjectionResult:
    """Per scenario, per timestamp predictions plus the averaged-scenario one."""

    predictions: dict
    averaged: PosteriorPrediction | None = None

    def scenario_names(self):
        return list(self.predictions)


@dataclass
class HabitatAreaPoint:
    timestamp: int
    area: float  # sum of cell_size^2 * cos(latitude) over suitable cells
    cell_count: int
    percent_change: float  # vs the first timestamp; NaN when undefined


@dataclass
class HabitatAreaSeries:
    series: dict  # scenario -> list[HabitatAreaPoint]


def _model_env_columns(model: BartModel):
    return [c for c in model.columns if c not in ("lon", "lat")]


def predict_stack(model: BartModel, stack: RasterStack, cutoff: float) -> PosteriorPrediction:
    """Posterior prediction for every cell with complete covariates.

    Native-range models (lon/lat covariates) receive each cell center's
    coordinates. Cells where any model covariate is missing are missing
    in every output summary.
    """
    env = _model_env_columns(model)
    missing_vars = [v for v in env if v not in stack.layers]
    if missing_vars:
        raise SchemaError(f"stack lacks model covariates: {missing_vars}")

    grid = stack.grid
    missing = np.zeros((grid.n_rows, grid.n_cols), dtype=bool)
    for v in env:
        missing |= stack[v].missing
    valid = ~missing
    rows_idx = np.nonzero(valid.ravel())[0]

    frame = {v: stack[v].values.ravel()[rows_idx] for v in env}
    if "lon" in model.columns:
        lon_grid = np.broadcast_to(grid.center_lon(), (grid.n_rows, grid.n_cols))
        lat_grid = np.broadcast_to(grid.center_lat()[:, None], (grid.n_rows, grid.n_cols))
        frame["lon"] = lon_grid.ravel()[rows_idx]
        frame["lat"] = lat_grid.ravel()[rows_idx]
    rows = np.column_stack([frame[c] for c in model.columns]) if rows_idx.size else np.empty(
        (0, len(model.columns))
    )

    shape = (grid.n_rows, grid.n_cols)
    fields = {name: np.full(shape, np.nan) for name in SUMMARY_NAMES}
    if rows_idx.size:
        draws = predict_bart(model, rows)
        summary = summarize_draws(draws)
        for name in ("mean", "median", "q025", "q975"):
            fields[name].ravel()[rows_idx] = summary[name]
        fields["binary"].ravel()[rows_idx] = (summary["mean"] >= cutoff).astype(float)
    return PosteriorPrediction(
        grid=grid,
        mean=fields["mean"],
        median=fields["median"],
        q025=fields["q025"],
        q975=fields["q975"],
        binary=fields["binary"],
        missing=missing,
        cutoff=cutoff,
    )


def project_scenarios(
    model: BartModel,
    scenarios: ScenarioSet,
    cutoff: float,
    fitting_series: TimeSeriesStack | None = None,
) -> ProjectionResult:
    """Independent prediction per (scenario, timestamp).

    When the fitting-period series is given, its temporal average is
    predicted as well: the single general prediction over the averaged
    environmental scenario.
    """
    predictions = {}
    for name, series in scenarios.scenarios.items():
        predictions[name] = {}
        for t, stack in series.steps.items():
            try:
                predictions[name][t] = predict_stack(model, stack, cutoff)
            except SchemaError as err:
                raise SchemaError(f"scenario '{name}', timestamp {t}: {err}") from err
    averaged = None
    if fitting_series is not None:
        averaged = predict_stack(model, average_stack(fitting_series), cutoff)
    return ProjectionResult(predictions=predictions, averaged=averaged)


def suitable_area(prediction: PosteriorPrediction):
    """(weighted area, cell count) of cells classified as presence."""
    grid = prediction.grid
    suitable = prediction.binary == 1.0
    if not suitable.any():
        return 0.0, 0
    lat = grid.center_lat()
    weights = (grid.cell_size**2) * np.cos(np.radians(lat))[:, None]
    return float(np.sum(weights * suitable)), int(suitable.sum())


def habitat_area_series(result: ProjectionResult) -> HabitatAreaSeries:
    """Suitable-area trend per scenario, as change vs the first timestamp.

    The first timestamp's change is 0 by construction; if its area is
    zero the remaining percentages are NaN while areas are still
    reported.
    """
    series = {}
    for scenario, by_time in result.predictions.items():
        points = []
        base = None
        for t in sorted(by_time):
            area, count = suitable_area(by_time[t])
            if base is None:
                base = area
                change = 0.0 if base > 0 else math.nan
            else:
                change = 100.0 * (area - base) / base if base > 0 else math.nan
            points.append(
                HabitatAreaPoint(timestamp=t, area=area, cell_count=count, percent_change=change)
            )
        series[scenario] = points
    return HabitatAreaSeries(series=series)
