import shutil

import numpy as np
import pytest
import yaml

from bartsdm.bart import load_model
from bartsdm.cli import main as cli_main
from bartsdm.datasets import write_toy_fixture
from bartsdm.errors import ValidationError
from bartsdm.export import (
    export_model_matrix,
    export_results,
    load_manifest,
    load_model_matrix,
    verify_manifest,
)
from bartsdm.grids import average_stack, load_ascii_grid, write_ascii_grid
from bartsdm.pipeline import (
    derived_seed,
    load_config,
    run_analysis,
    validate_inputs,
)

SMALL_SAMPLER = {"m": 10, "n_burn": 30, "n_draws": 60}
FAST_EVAL = {"cv": False, "importance": True, "response_curves": True}


@pytest.fixture(scope="module")
def fixture_run(tmp_path_factory):
    """One shared toy run: (config, bundle, manifest, out_dir)."""
    root = tmp_path_factory.mktemp("toy")
    config_path = write_toy_fixture(root, sampler=SMALL_SAMPLER, evaluation=FAST_EVAL)
    config = load_config(config_path)
    bundle = run_analysis(config)
    out = root / "out"
    manifest = export_results(bundle, out)
    return config, bundle, manifest, out


# -- validation ---------------------------------------------------------------


def test_validate_clean_fixture(tmp_path):
    config = load_config(write_toy_fixture(tmp_path, sampler=SMALL_SAMPLER))
    table = validate_inputs(config)
    assert not table.has_errors


def test_validate_missing_occurrence_column(tmp_path):
    config_path = write_toy_fixture(tmp_path, sampler=SMALL_SAMPLER)
    (tmp_path / "occ" / "toyfish.csv").write_text("lon,lat\n1,2\n")
    table = validate_inputs(load_config(config_path))
    rows = [r for r in table.rows if r.status == "error"]
    assert any("decimalLongitude" in r.message for r in rows)


def test_validate_variable_set_mismatch(tmp_path):
    config_path = write_toy_fixture(tmp_path, sampler=SMALL_SAMPLER)
    doc = yaml.safe_load(config_path.read_text())
    for t in doc["projection_layers"]["low"]:
        doc["projection_layers"]["low"][t].pop("prod")
    config_path.write_text(yaml.safe_dump(doc))
    table = validate_inputs(load_config(config_path))
    assert any(
        r.check == "variable-set" and r.status == "error" for r in table.rows
    )


def test_validate_unmatched_timestamps_warn(tmp_path):
    config_path = write_toy_fixture(tmp_path, sampler=SMALL_SAMPLER)
    occ = tmp_path / "occ" / "toyfish.csv"
    lines = occ.read_text().splitlines()
    lines.append("4.5,4.5,1890")
    occ.write_text("\n".join(lines) + "\n")
    table = validate_inputs(load_config(config_path))
    warn = [r for r in table.rows if r.check == "timestamps" and r.status == "warning"]
    assert warn and "1890" not in warn[0].message  # message carries a count
    assert "1 records" in warn[0].message


def test_validate_missing_layer_file(tmp_path):
    config_path = write_toy_fixture(tmp_path, sampler=SMALL_SAMPLER)
    (tmp_path / "layers" / "fit_temp_2000.asc").unlink()
    table = validate_inputs(load_config(config_path))
    assert any(r.check == "file-exists" and r.status == "error" for r in table.rows)


def test_validate_bad_sampler_option(tmp_path):
    config_path = write_toy_fixture(tmp_path, sampler={"m": 0})
    table = validate_inputs(load_config(config_path))
    assert any(r.check == "sampler-options" and r.status == "error" for r in table.rows)


def test_validate_is_side_effect_free(tmp_path):
    config_path = write_toy_fixture(tmp_path, sampler=SMALL_SAMPLER)
    config = load_config(config_path)
    t1 = validate_inputs(config)
    t2 = validate_inputs(config)
    assert t1.to_payload() == t2.to_payload()


def test_run_refuses_invalid_config(tmp_path):
    config_path = write_toy_fixture(tmp_path, sampler=SMALL_SAMPLER)
    (tmp_path / "occ" / "toyfish.csv").unlink()
    with pytest.raises(ValidationError):
        run_analysis(load_config(config_path))


# -- run + export -------------------------------------------------------------


def test_run_emits_every_output_family(fixture_run):
    _, bundle, manifest, out = fixture_run
    assert not bundle.failed_species
    entry = manifest["species"]["toyfish"]
    variant = entry["variants"]["suitable_habitat"]
    for family in ("metrics", "roc", "fitted_distribution", "importance", "response_curves", "habitat_area", "model_matrix"):
        assert family in variant["tables"], family
    assert "cleaning_report" in entry["tables"]
    # 2 scenarios x 3 timestamps x 5 summaries + 5 averaged
    rasters = [
        rel
        for scenario in variant["rasters"].values()
        for by_summary in scenario.values()
        for rel in by_summary.values()
    ]
    assert len(rasters) == 35
    for rel in rasters:
        assert (out / rel).exists()
    assert verify_manifest(out)


def test_run_quantile_ordering_on_emitted_rasters(fixture_run):
    _, _, manifest, out = fixture_run
    variant = manifest["species"]["toyfish"]["variants"]["suitable_habitat"]
    for scenario in variant["rasters"].values():
        for by_summary in scenario.values():
            q025 = load_ascii_grid(out / by_summary["q025"])
            med = load_ascii_grid(out / by_summary["median"])
            q975 = load_ascii_grid(out / by_summary["q975"])
            ok = ~q025.missing
            assert np.all(q025.values[ok] <= med.values[ok])
            assert np.all(med.values[ok] <= q975.values[ok])


def test_timing_log_covers_wall_clock(fixture_run):
    _, bundle, _, _ = fixture_run
    stage_total = sum(s for _, s in bundle.timings)
    for res in bundle.species.values():
        assert all(s >= 0 for _, s in res.timings)
        stage_total += sum(s for _, s in res.timings)
    assert stage_total <= bundle.wall_time * 1.0 + 1e-9
    assert stage_total >= 0.95 * bundle.wall_time


def test_model_matrix_export_round_trip(fixture_run, tmp_path):
    _, bundle, _, _ = fixture_run
    matrix = bundle.species["toyfish"].variants["suitable_habitat"].matrix
    path = tmp_path / "matrix.csv"
    export_model_matrix(matrix, path)
    back = load_model_matrix(path, standardize=matrix.standardization is not None)
    assert back.columns == matrix.columns
    assert np.array_equal(back.X_raw, matrix.X_raw)
    assert np.array_equal(back.X, matrix.X)
    assert np.array_equal(back.y, matrix.y)
    assert back.records == matrix.records
    assert back.standardization == matrix.standardization


def test_exported_model_repredicts_averaged_raster_bitexact(fixture_run, tmp_path):
    config, bundle, manifest, out = fixture_run
    variant = manifest["species"]["toyfish"]["variants"]["suitable_habitat"]
    model = load_model(out / variant["model"])
    # rebuild the averaged fitting stack from the exported input layers
    from bartsdm.pipeline import _load_fitting
    from bartsdm.projection import predict_stack

    averaged = average_stack(_load_fitting(config))
    prediction = predict_stack(model, averaged, model.cutoff)
    for summary, rel in variant["rasters"]["averaged"]["fit"].items():
        redo = tmp_path / f"redo_{summary}.asc"
        write_ascii_grid(prediction.layer(summary), redo)
        assert redo.read_bytes() == (out / rel).read_bytes()


def test_species_failure_is_isolated(tmp_path):
    config_path = write_toy_fixture(tmp_path, sampler=SMALL_SAMPLER, evaluation=FAST_EVAL)
    doc = yaml.safe_load(config_path.read_text())
    # second species: valid file, but every record falls outside the grid
    bad = tmp_path / "occ" / "ghostfish.csv"
    bad.write_text(
        "decimalLongitude,decimalLatitude,timestamp\n"
        "99.0,99.0,2000\n98.0,88.0,2005\n97.0,77.0,2010\n"
    )
    doc["species"].append({"file": "occ/ghostfish.csv", "variants": ["suitable_habitat"]})
    config_path.write_text(yaml.safe_dump(doc))
    bundle = run_analysis(load_config(config_path))
    assert bundle.failed_species == ["ghostfish"]
    assert bundle.species["toyfish"].ok
    manifest = export_results(bundle, tmp_path / "out")
    assert manifest["species"]["ghostfish"]["status"] == "failed"
    assert manifest["species"]["toyfish"]["status"] == "ok"


def test_species_order_invariance(tmp_path):
    config_path = write_toy_fixture(tmp_path, sampler={"m": 8, "n_burn": 20, "n_draws": 30},
                                    evaluation={"cv": False, "importance": False, "response_curves": False})
    doc = yaml.safe_load(config_path.read_text())
    shutil.copy(tmp_path / "occ" / "toyfish.csv", tmp_path / "occ" / "otherfish.csv")
    doc["species"].append({"file": "occ/otherfish.csv", "variants": ["suitable_habitat"]})
    config_path.write_text(yaml.safe_dump(doc))
    m1 = export_results(run_analysis(load_config(config_path)), tmp_path / "o1")

    doc["species"] = doc["species"][::-1]
    config_path.write_text(yaml.safe_dump(doc))
    m2 = export_results(run_analysis(load_config(config_path)), tmp_path / "o2")
    assert m1["files"] == m2["files"]


def test_native_range_variant_runs(tmp_path):
    config_path = write_toy_fixture(
        tmp_path,
        sampler={"m": 8, "n_burn": 20, "n_draws": 30},
        evaluation={"cv": False, "importance": False, "response_curves": True},
    )
    doc = yaml.safe_load(config_path.read_text())
    doc["species"][0]["variants"] = ["suitable_habitat", "native_range"]
    config_path.write_text(yaml.safe_dump(doc))
    bundle = run_analysis(load_config(config_path))
    res = bundle.species["toyfish"]
    assert set(res.variants) == {"suitable_habitat", "native_range"}
    nr = res.variants["native_range"]
    assert "lon" in nr.matrix.columns and "lat" in nr.matrix.columns
    assert nr.curves is None  # curves only for the suitable-habitat variant
    assert res.variants["suitable_habitat"].curves is not None


def test_derived_seed_stability():
    assert derived_seed(1, "a") == derived_seed(1, "a")
    assert derived_seed(1, "a") != derived_seed(1, "b")
    assert derived_seed(1, "a") != derived_seed(2, "a")


# -- CLI ----------------------------------------------------------------------


def test_cli_validate_ok(tmp_path, capsys):
    config_path = write_toy_fixture(tmp_path, sampler=SMALL_SAMPLER)
    assert cli_main(["validate", str(config_path)]) == 0
    out = capsys.readouterr().out
    assert "[ok" in out


def test_cli_validate_error_exit_code(tmp_path):
    config_path = write_toy_fixture(tmp_path, sampler=SMALL_SAMPLER)
    (tmp_path / "occ" / "toyfish.csv").unlink()
    assert cli_main(["--quiet", "validate", str(config_path)]) == 1


def test_cli_run_and_predict(tmp_path):
    config_path = write_toy_fixture(
        tmp_path,
        sampler={"m": 8, "n_burn": 20, "n_draws": 30},
        evaluation={"cv": False, "importance": False, "response_curves": False},
    )
    code = cli_main(["--quiet", "run", str(config_path)])
    assert code == 0
    out = tmp_path / "out"
    manifest = load_manifest(out)
    variant = manifest["species"]["toyfish"]["variants"]["suitable_habitat"]

    # stage a stack dir holding the averaged fitting layers
    from bartsdm.pipeline import _load_fitting

    averaged = average_stack(_load_fitting(load_config(config_path)))
    stack_dir = tmp_path / "stack"
    stack_dir.mkdir()
    for var in averaged.variables:
        write_ascii_grid(averaged[var], stack_dir / f"{var}.asc")

    pred_dir = tmp_path / "pred"
    code = cli_main(
        ["--quiet", "predict", str(out / variant["model"]), str(stack_dir), "--output", str(pred_dir)]
    )
    assert code == 0
    model_stem = variant["model"].removesuffix(".json")
    redo = pred_dir / f"{model_stem}_mean.asc"
    original = out / variant["rasters"]["averaged"]["fit"]["mean"]
    assert redo.read_bytes() == original.read_bytes()
