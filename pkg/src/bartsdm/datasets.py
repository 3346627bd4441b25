"""Synthetic data generators: a unimodal-response species and a toy world.

The species responds to a single informative variable with a Gaussian
occurrence-probability curve; a pure-noise variable rides along so
importance and response-curve diagnostics have a known answer. The toy
world is a small multi-variable, multi-scenario raster fixture written
to disk in the package's exchange formats.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import yaml

from .grids import GridSpec, RasterLayer, RasterStack, TimeSeriesStack, write_ascii_grid


def gaussian_response(x, peak: float = 25.0, width: float = 2.0):
    """Occurrence probability curve: exp(-(x-peak)^2 / (2 width^2))."""
    x = np.asarray(x, dtype=float)
    return np.exp(-((x - peak) ** 2) / (2.0 * width * width))


def synthetic_species(
    n: int,
    seed: int,
    peak: float = 25.0,
    width: float = 2.0,
    value_range=(15.0, 35.0),
):
    """Draw (X, y) with an informative column and a noise column.

    The informative covariate is uniform over ``value_range``; presence
    is Bernoulli with probability from `gaussian_response`.
    """
    rng = np.random.default_rng(seed)
    informative = rng.uniform(value_range[0], value_range[1], n)
    noise = rng.normal(0.0, 1.0, n)
    p = gaussian_response(informative, peak, width)
    y = (rng.random(n) < p).astype(int)
    return np.column_stack([informative, noise]), y


def _field(grid: GridSpec, base: float, lon_slope: float, lat_slope: float, bump: float, rng):
    lon = grid.center_lon()
    lat = grid.center_lat()
    values = base + lon_slope * lon[None, :] + lat_slope * lat[:, None]
    values = values + bump * rng.normal(size=(grid.n_rows, grid.n_cols))
    return values


def toy_environment(seed: int = 0, n_rows: int = 10, n_cols: int = 10):
    """In-memory fitting series and scenario set for a 2-variable world.

    ``temp`` warms over time (faster in the ``high`` scenario), ``prod``
    drifts slowly. A land block in the north-west corner is missing in
    every layer.
    """
    rng = np.random.default_rng(seed)
    grid = GridSpec(n_rows, n_cols, 0.0, 0.0, 1.0)
    land = np.zeros((n_rows, n_cols), dtype=bool)
    land[:2, :2] = True

    def stack_at(temp_shift, prod_shift):
        temp = _field(grid, 20.0 + temp_shift, 0.8, -0.3, 0.4, rng)
        prod = _field(grid, 5.0 + prod_shift, -0.2, 0.25, 0.2, rng)
        return RasterStack(
            {
                "temp": RasterLayer(grid, temp, land),
                "prod": RasterLayer(grid, prod, land),
            }
        )

    fitting = TimeSeriesStack(
        {2000: stack_at(0.0, 0.0), 2005: stack_at(0.4, 0.1), 2010: stack_at(0.8, 0.2)}
    )
    scenarios = {
        "low": TimeSeriesStack(
            {2030: stack_at(1.2, 0.3), 2060: stack_at(1.8, 0.4), 2090: stack_at(2.2, 0.5)}
        ),
        "high": TimeSeriesStack(
            {2030: stack_at(2.0, 0.3), 2060: stack_at(4.0, 0.2), 2090: stack_at(6.5, 0.1)}
        ),
    }
    return fitting, scenarios


def sample_toy_occurrences(
    fitting: TimeSeriesStack,
    seed: int,
    peak: float = 25.0,
    width: float = 3.0,
    rate: float = 0.4,
):
    """Presence-only records sampled from the temperature response.

    ``rate`` caps the per-cell sampling probability so that plenty of
    free cells remain for balanced pseudo-absences.
    """
    rng = np.random.default_rng(seed)
    rows = []
    grid = fitting.grid
    for t, stack in fitting.steps.items():
        temp = stack["temp"]
        for r in range(grid.n_rows):
            for c in range(grid.n_cols):
                if temp.missing[r, c]:
                    continue
                p = rate * gaussian_response(temp.values[r, c], peak, width)
                if rng.random() < p:
                    lon, lat = grid.cell_center(r, c)
                    # jitter inside the cell so records are not all centered
                    lon += float(rng.uniform(-0.3, 0.3))
                    lat += float(rng.uniform(-0.3, 0.3))
                    rows.append((lon, lat, t))
    return rows


def write_toy_fixture(
    root,
    seed: int = 123,
    sampler: dict | None = None,
    evaluation: dict | None = None,
) -> Path:
    """Write the complete toy analysis (layers, occurrences, config).

    Returns the path of the analysis config. The fixture covers 1
    species, 2 variables on a 10x10 grid, 3 fitting timestamps and 2
    scenarios x 3 timestamps of projection layers.
    """
    root = Path(root)
    fitting, scenarios = toy_environment(seed=seed)
    (root / "layers").mkdir(parents=True, exist_ok=True)
    (root / "occ").mkdir(exist_ok=True)

    fitting_entry = {}
    for var in fitting.variables:
        fitting_entry[var] = {}
        for t, stack in fitting.steps.items():
            rel = f"layers/fit_{var}_{t}.asc"
            write_ascii_grid(stack[var], root / rel)
            fitting_entry[var][t] = rel

    projection_entry = {}
    for name, series in scenarios.items():
        projection_entry[name] = {}
        for t, stack in series.steps.items():
            projection_entry[name][t] = {}
            for var in series.variables:
                rel = f"layers/{name}_{var}_{t}.asc"
                write_ascii_grid(stack[var], root / rel)
                projection_entry[name][t][var] = rel

    occurrences = sample_toy_occurrences(fitting, seed=seed + 1)
    occ_rel = "occ/toyfish.csv"
    with open(root / occ_rel, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["decimalLongitude", "decimalLatitude", "timestamp"])
        for lon, lat, t in occurrences:
            writer.writerow([repr(lon), repr(lat), t])

    config = {
        "config_version": 1,
        "seed": seed,
        "output_dir": "out",
        "species": [
            {
                "file": occ_rel,
                "variants": ["suitable_habitat"],
                "standardize": True,
            }
        ],
        "fitting_layers": fitting_entry,
        "projection_layers": projection_entry,
        "sampler": sampler or {"m": 20, "n_burn": 50, "n_draws": 100},
        "evaluation": evaluation
        or {"cv": True, "importance": True, "response_curves": True},
    }
    config_path = root / "config.yaml"
    with open(config_path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config, fh, sort_keys=False)
    return config_path
