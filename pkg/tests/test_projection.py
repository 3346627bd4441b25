import math

import numpy as np
import pytest

from bartsdm.bart import BartModel, fit_bart, predict_bart, probit
from bartsdm.datasets import toy_environment
from bartsdm.errors import SchemaError
from bartsdm.grids import (
    GridSpec,
    RasterLayer,
    RasterStack,
    ScenarioSet,
    TimeSeriesStack,
    average_stack,
)
from bartsdm.occurrences import build_model_matrix, generate_pseudo_absences, valid_cell_masks
from bartsdm.posterior import order_statistic, summarize_draws
from bartsdm.projection import (
    SUMMARY_NAMES,
    habitat_area_series,
    predict_stack,
    project_scenarios,
    suitable_area,
)
from bartsdm.trees import single_split_forest
from test_bart import quick_config


def zero_forest_model(columns=("temp", "prod")):
    forest = single_split_forest(0, 0.0, 0.0, 0.0)
    return BartModel(
        config=quick_config(m=1, n_draws=1, n_burn=0),
        columns=list(columns),
        standardization=None,
        observed_ranges={c: (0.0, 1.0) for c in columns},
        draws=[forest],
    )


def small_stack(missing_cell=None):
    grid = GridSpec(3, 3, 0.0, 0.0, 1.0)
    v1 = np.linspace(0, 8, 9).reshape(3, 3)
    v2 = v1 * 0.5 + 1.0
    missing = np.zeros((3, 3), dtype=bool)
    if missing_cell:
        missing[missing_cell] = True
    return RasterStack(
        {"temp": RasterLayer(grid, v1, missing), "prod": RasterLayer(grid, v2, missing)}
    )


# -- posterior summaries ------------------------------------------------------


def test_order_statistic_matches_sort_oracle():
    rng = np.random.default_rng(0)
    draws = rng.random(101)
    ordered = np.sort(draws)
    assert order_statistic(ordered, 0.5) == ordered[50]
    assert order_statistic(ordered, 0.025) == ordered[math.ceil(0.025 * 101) - 1]
    even = np.sort(rng.random(100))
    assert order_statistic(even, 0.5) == even[49]  # lower midpoint


def test_summarize_draws_ordering():
    rng = np.random.default_rng(1)
    draws = rng.random((40, 33))
    s = summarize_draws(draws)
    assert np.all(s["q025"] <= s["median"])
    assert np.all(s["median"] <= s["q975"])


# -- predict_stack ------------------------------------------------------------


def test_predict_stack_zero_forest_is_half():
    pred = predict_stack(zero_forest_model(), small_stack(), cutoff=0.4)
    assert np.all(pred.mean[~pred.missing] == 0.5)
    assert np.all(pred.binary[~pred.missing] == 1.0)  # 0.5 >= 0.4
    pred2 = predict_stack(zero_forest_model(), small_stack(), cutoff=0.6)
    assert np.all(pred2.binary[~pred2.missing] == 0.0)


def test_predict_stack_missing_cells_propagate():
    pred = predict_stack(zero_forest_model(), small_stack(missing_cell=(1, 1)), cutoff=0.5)
    assert pred.missing[1, 1]
    for name in SUMMARY_NAMES:
        assert math.isnan(getattr(pred, name)[1, 1])


def test_predict_stack_requires_model_variables():
    model = zero_forest_model(columns=("temp", "prod", "salinity"))
    with pytest.raises(SchemaError):
        predict_stack(model, small_stack(), cutoff=0.5)


def fitted_toy_model():
    fitting, scenarios = toy_environment(seed=5)
    masks = valid_cell_masks(fitting)
    from bartsdm.datasets import sample_toy_occurrences
    from bartsdm.occurrences import OccurrenceRecord, clean_occurrences

    occ = [
        OccurrenceRecord(lon=lon, lat=lat, timestamp=t, label=1)
        for lon, lat, t in sample_toy_occurrences(fitting, seed=6)
    ]
    occ, _ = clean_occurrences(occ, fitting)
    absences = generate_pseudo_absences(occ, masks, seed=7)
    matrix = build_model_matrix(occ + absences, fitting, include_coords=False, standardize=True)
    model = fit_bart(matrix, quick_config(m=10, n_burn=30, n_draws=50))
    return model, matrix, fitting, ScenarioSet(scenarios)


def test_predict_stack_consistent_with_training_fit():
    model, matrix, fitting, _ = fitted_toy_model()
    stack = fitting.steps[2000]
    pred = predict_stack(model, stack, cutoff=0.5)
    # a training record from t=2000 sits on some cell: compare with direct predict
    rec = matrix.records[0]
    idx = stack.grid.cell_index(rec.lon, rec.lat)
    row = np.array([[stack["temp"].values[idx], stack["prod"].values[idx]]])
    expect = predict_bart(model, row).mean()
    assert pred.mean[idx] == pytest.approx(expect, abs=1e-12)


def test_predict_stack_quantile_ordering_everywhere():
    model, _, fitting, _ = fitted_toy_model()
    pred = predict_stack(model, fitting.steps[2010], cutoff=0.5)
    ok = ~pred.missing
    assert np.all(pred.q025[ok] <= pred.median[ok])
    assert np.all(pred.median[ok] <= pred.q975[ok])
    assert np.all((pred.mean[ok] >= 0) & (pred.mean[ok] <= 1))


def test_predict_stack_native_range_uses_cell_centers():
    grid = GridSpec(2, 2, 0.0, 0.0, 1.0)
    stack = RasterStack({"temp": RasterLayer(grid, np.zeros((2, 2)))})
    # model splits on lat (column index 2): north cells (lat 1.5) right of 1.0
    forest = single_split_forest(2, 1.0, -2.0, 2.0)
    model = BartModel(
        config=quick_config(m=1, n_draws=1, n_burn=0),
        columns=["temp", "lon", "lat"],
        standardization=None,
        observed_ranges={},
        draws=[forest],
    )
    pred = predict_stack(model, stack, cutoff=0.5)
    assert np.allclose(pred.mean[0], probit(2.0))  # top row: lat 1.5
    assert np.allclose(pred.mean[1], probit(-2.0))  # bottom row: lat 0.5


# -- project_scenarios --------------------------------------------------------


def test_project_scenarios_cardinality_and_keys():
    model, _, fitting, scenario_set = fitted_toy_model()
    result = project_scenarios(model, scenario_set, cutoff=0.5, fitting_series=fitting)
    assert sorted(result.scenario_names()) == ["high", "low"]
    total = sum(len(v) for v in result.predictions.values())
    assert total == 6
    assert result.averaged is not None


def test_project_scenarios_matches_direct_predict():
    model, _, fitting, scenario_set = fitted_toy_model()
    result = project_scenarios(model, scenario_set, cutoff=0.5, fitting_series=fitting)
    stack = scenario_set.scenarios["low"].steps[2060]
    direct = predict_stack(model, stack, cutoff=0.5)
    assert np.array_equal(
        result.predictions["low"][2060].mean, direct.mean, equal_nan=True
    )
    avg_direct = predict_stack(model, average_stack(fitting), cutoff=0.5)
    assert np.array_equal(result.averaged.mean, avg_direct.mean, equal_nan=True)


def test_project_duplicated_scenario_identical():
    model, _, fitting, scenario_set = fitted_toy_model()
    dup = ScenarioSet(
        {"a": scenario_set.scenarios["low"], "b": scenario_set.scenarios["low"]}
    )
    result = project_scenarios(model, dup, cutoff=0.5)
    for t in result.predictions["a"]:
        assert np.array_equal(
            result.predictions["a"][t].mean, result.predictions["b"][t].mean, equal_nan=True
        )


# -- habitat areas ------------------------------------------------------------


def constant_prediction(binary_grid, cell_size=1.0, y_ll=0.0):
    binary_grid = np.asarray(binary_grid, dtype=float)
    grid = GridSpec(binary_grid.shape[0], binary_grid.shape[1], 0.0, y_ll, cell_size)
    nanfield = np.full(binary_grid.shape, 0.5)
    from bartsdm.projection import PosteriorPrediction

    return PosteriorPrediction(
        grid=grid,
        mean=nanfield,
        median=nanfield,
        q025=nanfield,
        q975=nanfield,
        binary=binary_grid,
        missing=np.zeros(binary_grid.shape, dtype=bool),
        cutoff=0.5,
    )


def test_habitat_area_percent_change():
    from bartsdm.projection import ProjectionResult

    ten = constant_prediction(np.ones((1, 10)), y_ll=-0.5)  # centers at equator
    eight = constant_prediction(np.r_[np.ones(8), np.zeros(2)].reshape(1, 10), y_ll=-0.5)
    result = ProjectionResult(predictions={"s": {0: ten, 1: eight}})
    series = habitat_area_series(result).series["s"]
    assert series[0].percent_change == 0.0
    assert series[1].percent_change == pytest.approx(-20.0)
    assert series[0].cell_count == 10 and series[1].cell_count == 8


def test_area_weight_cosine():
    # one suitable cell centered at 60N vs one at the equator
    at_60 = constant_prediction(np.ones((1, 1)), y_ll=59.5)
    at_0 = constant_prediction(np.ones((1, 1)), y_ll=-0.5)
    area_60, _ = suitable_area(at_60)
    area_0, _ = suitable_area(at_0)
    assert area_60 == pytest.approx(0.5 * area_0)


def test_habitat_area_constant_maps_zero_change():
    from bartsdm.projection import ProjectionResult

    same = constant_prediction(np.eye(4))
    result = ProjectionResult(predictions={"s": {t: same for t in (0, 1, 2)}})
    for point in habitat_area_series(result).series["s"]:
        assert point.percent_change == 0.0


def test_habitat_area_zero_baseline_is_nan():
    from bartsdm.projection import ProjectionResult

    empty = constant_prediction(np.zeros((2, 2)))
    one = constant_prediction(np.ones((2, 2)))
    result = ProjectionResult(predictions={"s": {0: empty, 1: one}})
    series = habitat_area_series(result).series["s"]
    assert math.isnan(series[0].percent_change)
    assert math.isnan(series[1].percent_change)
    assert series[1].area > 0
