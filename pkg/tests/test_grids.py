import numpy as np
import pytest

from bartsdm.errors import DegenerateVariableError, GridFormatError, ValidationError
from bartsdm.grids import (
    GridSpec,
    RasterLayer,
    RasterStack,
    StudyArea,
    TimeSeriesStack,
    average_stack,
    crop_mask,
    inside_mask,
    load_ascii_grid,
    load_study_area,
    point_in_polygon,
    write_ascii_grid,
    zscore_standardize,
)

UNIT_SQUARE = StudyArea((((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)),))


def make_layer(values, missing=None, x_ll=0.0, y_ll=0.0, cell=1.0):
    values = np.asarray(values, dtype=float)
    grid = GridSpec(values.shape[0], values.shape[1], x_ll, y_ll, cell)
    return RasterLayer(grid, values, missing)


def make_stack(**named):
    return RasterStack({k: make_layer(v) for k, v in named.items()})


# -- ASCII grid ---------------------------------------------------------------


def write_text(path, text):
    path.write_text(text, encoding="utf-8")


ASC_2X2 = """ncols 2
nrows 2
xllcorner 0
yllcorner 0
cellsize 1
NODATA_value -9999
1 2
3 -9999
"""


def test_load_ascii_grid_basic(tmp_path):
    p = tmp_path / "a.asc"
    write_text(p, ASC_2X2)
    layer = load_ascii_grid(p)
    assert layer.grid == GridSpec(2, 2, 0.0, 0.0, 1.0)
    assert layer.values[0, 0] == 1 and layer.values[0, 1] == 2
    assert layer.values[1, 0] == 3
    assert layer.missing[1, 1] and not layer.missing[0, 0]


def test_load_ascii_grid_case_insensitive_header(tmp_path):
    p = tmp_path / "a.asc"
    write_text(p, ASC_2X2.replace("ncols", "NCOLS").replace("NODATA_value", "nodata_VALUE"))
    layer = load_ascii_grid(p)
    assert layer.n_rows == 2


def test_load_ascii_grid_wrong_token_count(tmp_path):
    p = tmp_path / "a.asc"
    write_text(p, ASC_2X2.replace("3 -9999", "3"))
    with pytest.raises(GridFormatError) as err:
        load_ascii_grid(p)
    assert err.value.line_number == 8


def test_load_ascii_grid_missing_rows(tmp_path):
    p = tmp_path / "a.asc"
    write_text(p, "\n".join(ASC_2X2.splitlines()[:-1]) + "\n")
    with pytest.raises(GridFormatError):
        load_ascii_grid(p)


def test_load_ascii_grid_bad_header(tmp_path):
    p = tmp_path / "a.asc"
    write_text(p, ASC_2X2.replace("nrows 2", "rows 2"))
    with pytest.raises(GridFormatError) as err:
        load_ascii_grid(p)
    assert err.value.line_number == 2


def test_load_ascii_grid_non_numeric_value(tmp_path):
    p = tmp_path / "a.asc"
    write_text(p, ASC_2X2.replace("1 2", "1 oops"))
    with pytest.raises(GridFormatError) as err:
        load_ascii_grid(p)
    assert err.value.line_number == 7


def test_ascii_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(7)
    values = rng.normal(size=(5, 4)) * 1e3
    missing = rng.random((5, 4)) < 0.3
    layer = make_layer(values, missing, x_ll=-10.25, y_ll=3.5, cell=0.1)
    p = tmp_path / "rt.asc"
    write_ascii_grid(layer, p)
    back = load_ascii_grid(p)
    assert back.grid == layer.grid
    assert np.array_equal(back.missing, layer.missing)
    keep = ~layer.missing
    assert np.array_equal(back.values[keep], layer.values[keep])


def test_ascii_writer_avoids_nodata_collision(tmp_path):
    layer = make_layer([[-9999.0, 1.0], [2.0, 3.0]])
    p = tmp_path / "c.asc"
    write_ascii_grid(layer, p)
    back = load_ascii_grid(p)
    assert not back.missing.any()
    assert back.values[0, 0] == -9999.0


# -- polygon membership -------------------------------------------------------


def test_point_in_polygon_inside():
    assert point_in_polygon(UNIT_SQUARE, 0.5, 0.5)


def test_point_in_polygon_outside():
    assert not point_in_polygon(UNIT_SQUARE, 1.5, 0.5)


def test_point_on_boundary_counts_inside():
    assert point_in_polygon(UNIT_SQUARE, 1.0, 0.5)
    assert point_in_polygon(UNIT_SQUARE, 0.0, 0.0)  # vertex


def test_point_in_polygon_hole():
    outer = ((0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0), (0.0, 0.0))
    hole = ((1.0, 1.0), (3.0, 1.0), (3.0, 3.0), (1.0, 3.0), (1.0, 1.0))
    area = StudyArea((outer, hole))
    assert point_in_polygon(area, 0.5, 0.5)
    assert not point_in_polygon(area, 2.0, 2.0)
    assert point_in_polygon(area, 1.0, 2.0)  # hole boundary is still "inside"


def test_study_area_validation():
    with pytest.raises(ValidationError):
        StudyArea((((0, 0), (1, 0), (1, 1)),))  # open ring, 3 vertices
    with pytest.raises(ValidationError):
        StudyArea((((0, 0), (200, 0), (1, 1), (0, 0)),))


def test_load_study_area_geojson(tmp_path):
    doc = {
        "type": "Polygon",
        "coordinates": [[[0, 0], [2, 0], [2, 2], [0, 2], [0, 0]]],
    }
    p = tmp_path / "area.geojson"
    p.write_text(__import__("json").dumps(doc))
    area = load_study_area(p)
    assert point_in_polygon(area, 1.0, 1.0)


# -- cell indexing ------------------------------------------------------------


def test_cell_index_matches_geotransform_oracle():
    grid = GridSpec(2, 2, 0.0, 0.0, 1.0)
    # oracle: col = floor((lon-x_ll)/cs), row = floor((y_top-lat)/cs)
    assert grid.cell_index(0.5, 1.5) == (0, 0)
    assert grid.cell_index(1.5, 0.5) == (1, 1)


def test_cell_index_out_of_bounds():
    grid = GridSpec(2, 2, 0.0, 0.0, 1.0)
    assert grid.cell_index(-0.1, 0.5) is None
    assert grid.cell_index(0.5, -0.1) is None
    assert grid.cell_index(2.5, 0.5) is None


def test_cell_index_half_open_edges():
    grid = GridSpec(2, 2, 0.0, 0.0, 1.0)
    assert grid.cell_index(0.0, 2.0) == (0, 0)  # top-left corner owned
    assert grid.cell_index(2.0, 2.0) is None  # right edge not owned
    assert grid.cell_index(0.0, 0.0) is None  # bottom edge not owned
    assert grid.cell_index(1.0, 1.0) == (1, 1)  # interior cross point


@pytest.mark.parametrize("x_ll,y_ll,cell", [(0.0, 0.0, 1.0), (-7.3, 12.1, 0.1), (100.0, -45.0, 0.25)])
def test_cell_center_round_trip_identity(x_ll, y_ll, cell):
    grid = GridSpec(6, 9, x_ll, y_ll, cell)
    for r in range(grid.n_rows):
        for c in range(grid.n_cols):
            lon, lat = grid.cell_center(r, c)
            assert grid.cell_index(lon, lat) == (r, c)


# -- crop/mask ----------------------------------------------------------------


def left_column_area():
    # covers only the left column of a 2x2 unit grid (centers at x=0.5, 1.5)
    return StudyArea((((0.0, 0.0), (1.0, 0.0), (1.0, 2.0), (0.0, 2.0), (0.0, 0.0)),))


def test_crop_mask_left_column():
    stack = make_stack(a=[[1.0, 2.0], [3.0, 4.0]], b=[[5.0, 6.0], [7.0, 8.0]])
    out = crop_mask(stack, left_column_area())
    for name in ("a", "b"):
        assert not out[name].missing[:, 0].any()
        assert out[name].missing[:, 1].all()


def test_crop_mask_identity_when_covering():
    big = StudyArea((((-1.0, -1.0), (3.0, -1.0), (3.0, 3.0), (-1.0, 3.0), (-1.0, -1.0)),))
    stack = make_stack(a=[[1.0, 2.0], [3.0, 4.0]])
    out = crop_mask(stack, big)
    assert np.array_equal(out["a"].values, stack["a"].values)
    assert not out["a"].missing.any()


def test_crop_mask_keeps_existing_missing():
    layer = make_layer([[1.0, 2.0], [3.0, 4.0]], missing=[[True, False], [False, False]])
    out = crop_mask(RasterStack({"a": layer}), left_column_area())
    assert out["a"].missing[0, 0]


def test_crop_mask_disjoint_warns():
    far = StudyArea((((10.0, 10.0), (11.0, 10.0), (11.0, 11.0), (10.0, 11.0), (10.0, 10.0)),))
    stack = make_stack(a=[[1.0, 2.0], [3.0, 4.0]])
    with pytest.warns(UserWarning):
        out = crop_mask(stack, far)
    assert out["a"].missing.all()


def test_crop_mask_idempotent():
    stack = make_stack(a=[[1.0, 2.0], [3.0, 4.0]])
    once = crop_mask(stack, left_column_area())
    twice = crop_mask(once, left_column_area())
    assert np.array_equal(once["a"].missing, twice["a"].missing)
    keep = ~once["a"].missing
    assert np.array_equal(once["a"].values[keep], twice["a"].values[keep])


# -- standardization ----------------------------------------------------------


def test_zscore_simple_oracle():
    stack = make_stack(v=[[1.0, 2.0, 3.0]])
    out, params = zscore_standardize(stack)
    assert params.mean["v"] == 2.0
    assert params.sd["v"] == 1.0
    assert np.allclose(out["v"].values, [[-1.0, 0.0, 1.0]])


def test_zscore_constant_layer_errors():
    stack = make_stack(v=[[5.0, 5.0], [5.0, 5.0]])
    with pytest.raises(DegenerateVariableError):
        zscore_standardize(stack)


def test_zscore_excludes_missing_and_postcondition():
    rng = np.random.default_rng(3)
    values = rng.normal(10, 4, size=(8, 8))
    missing = rng.random((8, 8)) < 0.25
    stack = RasterStack({"v": make_layer(values, missing)})
    out, params = zscore_standardize(stack)
    assert np.array_equal(out["v"].missing, missing)
    kept = out["v"].values[~missing]
    assert abs(kept.mean()) < 1e-9
    assert abs(kept.std(ddof=1) - 1.0) < 1e-9


# -- temporal averaging -------------------------------------------------------


def series_of(*step_values):
    steps = {}
    for t, vals in enumerate(step_values):
        steps[t] = RasterStack({"v": make_layer(vals[0], vals[1] if len(vals) > 1 else None)})
    return TimeSeriesStack(steps)


def test_average_stack_mean():
    series = series_of(([[1.0]],), ([[3.0]],))
    out = average_stack(series)
    assert out["v"].values[0, 0] == 2.0


def test_average_stack_single_step_identity():
    series = series_of(([[4.0, 5.0]],))
    out = average_stack(series)
    assert np.array_equal(out["v"].values, [[4.0, 5.0]])


def test_average_stack_missing_propagates():
    series = series_of(
        ([[1.0]],),
        ([[2.0]], [[True]]),
        ([[3.0]],),
    )
    out = average_stack(series)
    assert out["v"].missing[0, 0]


def test_average_commutes_with_crop():
    rng = np.random.default_rng(11)
    steps = {
        t: RasterStack({"v": make_layer(rng.normal(size=(4, 4)))}) for t in range(3)
    }
    series = TimeSeriesStack(steps)
    area = StudyArea((((0.0, 0.0), (2.0, 0.0), (2.0, 4.0), (0.0, 4.0), (0.0, 0.0)),))
    avg_then_crop = crop_mask(average_stack(series), area)
    crop_then_avg = average_stack(
        TimeSeriesStack({t: crop_mask(s, area) for t, s in steps.items()})
    )
    assert np.array_equal(avg_then_crop["v"].missing, crop_then_avg["v"].missing)
    keep = ~avg_then_crop["v"].missing
    assert np.allclose(avg_then_crop["v"].values[keep], crop_then_avg["v"].values[keep])


def test_inside_mask_cell_centers():
    grid = GridSpec(2, 2, 0.0, 0.0, 1.0)
    inside = inside_mask(grid, left_column_area())
    assert inside[:, 0].all() and not inside[:, 1].any()
