"""Write a ResultsBundle to disk in interoperable formats.

Rasters are ESRI ASCII grids named
``<species>_<variant>_<scenario>_<timestamp>_<summary>.asc``; tables are
UTF-8 comma-delimited CSV with a header row, ``.`` decimal separator and
empty fields for missing values. Floats use their shortest round-trip
representation so repeated runs with one seed are byte-identical. The
manifest (written last) lists every result file with a SHA-256 hash;
timing logs are listed as diagnostics but not hashed, since wall-clock
durations differ between runs.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from pathlib import Path

import numpy as np

from .bart import save_model
from .errors import SchemaError
from .grids import write_ascii_grid
from .occurrences import ModelMatrix, OccurrenceRecord, _standardize_columns
from .pipeline import ResultsBundle
from .projection import SUMMARY_NAMES

MANIFEST_NAME = "manifest.json"
MATRIX_FIXED_COLUMNS = ("lon", "lat", "timestamp", "label", "pseudo")


def fmt(value) -> str:
    """Shortest round-trip text form; empty for missing."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return ""
    return repr(value)


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", name)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def export_model_matrix(matrix: ModelMatrix, path) -> None:
    header = list(MATRIX_FIXED_COLUMNS) + list(matrix.columns)
    rows = []
    for i, rec in enumerate(matrix.records):
        rows.append(
            [rec.lon, rec.lat, rec.timestamp, int(matrix.y[i]), rec.pseudo]
            + [matrix.X_raw[i, j] for j in range(len(matrix.columns))]
        )
    write_csv(path, header, rows)


def load_model_matrix(path, standardize: bool) -> ModelMatrix:
    """Rebuild a ModelMatrix from its exported CSV, exactly."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[: len(MATRIX_FIXED_COLUMNS)] != list(MATRIX_FIXED_COLUMNS):
            raise SchemaError("not a model-matrix export")
        columns = header[len(MATRIX_FIXED_COLUMNS) :]
        records, raw, y = [], [], []
        for row in reader:
            lon, lat = float(row[0]), float(row[1])
            t = int(row[2]) if row[2] != "" else None
            label = int(row[3])
            pseudo = row[4] == "1"
            records.append(
                OccurrenceRecord(lon=lon, lat=lat, timestamp=t, label=label, pseudo=pseudo)
            )
            y.append(label)
            raw.append([float(v) for v in row[5:]])
    raw = np.asarray(raw, dtype=float)
    if standardize:
        X, params = _standardize_columns(raw, columns)
    else:
        X, params = raw.copy(), None
    return ModelMatrix(
        columns=columns,
        X=X,
        X_raw=raw,
        y=np.asarray(y, dtype=np.int8),
        records=tuple(records),
        standardization=params,
    )


def _export_variant(out: Path, prefix: str, variant_result, files: dict) -> dict:
    v = variant_result
    entry = {"tables": {}, "rasters": {}, "model": None}

    def table(kind, name, header, rows):
        rel = f"{prefix}_{kind}.csv"
        write_csv(out / rel, header, rows)
        entry["tables"][name] = rel
        files[rel] = None

    model_rel = f"{prefix}_model.json"
    save_model(v.model, out / model_rel)
    entry["model"] = model_rel
    files[model_rel] = None

    matrix_rel = f"{prefix}_model_matrix.csv"
    export_model_matrix(v.matrix, out / matrix_rel)
    entry["tables"]["model_matrix"] = matrix_rel
    files[matrix_rel] = None

    report = v.report
    cm = report.confusion
    metric_rows = [
        ("cutoff", report.cutoff),
        ("auc", report.auc),
        ("tss", report.tss),
        ("f_score", report.f_score),
        ("sensitivity", report.metrics["sensitivity"]),
        ("specificity", report.metrics["specificity"]),
        ("precision", report.metrics["precision"]),
        ("accuracy", report.metrics["accuracy"]),
        ("tp", cm.tp),
        ("fp", cm.fp),
        ("fn", cm.fn),
        ("tn", cm.tn),
    ]
    table("metrics", "metrics", ["metric", "value"], metric_rows)
    table("roc", "roc", ["fpr", "tpr"], report.roc)

    hist = report.fitted_distribution
    table(
        "fitted_distribution",
        "fitted_distribution",
        ["bin_left", "bin_right", "presence_count", "absence_count"],
        [
            (hist.edges[i], hist.edges[i + 1], hist.presence_counts[i], hist.absence_counts[i])
            for i in range(len(hist.presence_counts))
        ],
    )

    if report.cv_folds is not None:
        keys = ["cutoff", "auc", "tss", "f_score", "sensitivity", "specificity", "precision", "accuracy"]
        rows = [[str(f["fold"])] + [f.get(k) for k in keys] for f in report.cv_folds]
        rows.append(["mean"] + [report.cv_means.get(k) for k in keys])
        table("cv", "cv", ["fold"] + keys, rows)

    if v.importance is not None:
        rows = []
        for name, values in zip(v.importance.variables, v.importance.values):
            for it, value in enumerate(values):
                rows.append((name, it, value))
        table("importance", "importance", ["variable", "iteration", "importance"], rows)

    if v.curves is not None:
        rows = []
        for curve in v.curves:
            for i in range(len(curve.grid)):
                rows.append(
                    (curve.variable, curve.grid[i], curve.mean[i], curve.lower[i], curve.upper[i])
                )
        table(
            "response_curves",
            "response_curves",
            ["variable", "grid_value", "mean", "lower", "upper"],
            rows,
        )

    hab_rows = []
    for scenario, points in v.habitat.series.items():
        for p in points:
            hab_rows.append((scenario, p.timestamp, p.area, p.cell_count, p.percent_change))
    table(
        "habitat_area",
        "habitat_area",
        ["scenario", "timestamp", "area", "cell_count", "percent_change"],
        hab_rows,
    )

    def raster(scenario_key, t_key, prediction):
        entry["rasters"].setdefault(scenario_key, {})[str(t_key)] = {}
        for summary in SUMMARY_NAMES:
            rel = f"{prefix}_{scenario_key}_{t_key}_{summary}.asc"
            write_ascii_grid(prediction.layer(summary), out / rel)
            entry["rasters"][scenario_key][str(t_key)][summary] = rel
            files[rel] = None

    for scenario, by_time in v.projections.predictions.items():
        for t, prediction in by_time.items():
            raster(scenario, t, prediction)
    if v.projections.averaged is not None:
        raster("averaged", "fit", v.projections.averaged)
    return entry


def export_results(bundle: ResultsBundle, out_dir) -> dict:
    """Write every artifact of the bundle; returns the manifest mapping.

    The manifest is written last so a directory with a manifest is
    always complete. Failed species appear with their error message and
    no files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: dict = {}
    diagnostics = []
    manifest = {
        "format": "bartsdm-results",
        "version": 1,
        "seed": bundle.config.seed,
        "species": {},
    }
    for name, res in bundle.species.items():
        prefix = safe_name(name)
        entry = {"status": "ok" if res.ok else "failed", "prefix": prefix, "variants": {}, "tables": {}}
        if not res.ok:
            entry["error"] = res.error
        if res.cleaning is not None:
            rel = f"{prefix}_cleaning_report.csv"
            write_csv(out / rel, ["reason", "count"], res.cleaning.as_rows())
            entry["tables"]["cleaning_report"] = rel
            files[rel] = None
        for variant, vres in res.variants.items():
            entry["variants"][variant] = _export_variant(
                out, f"{prefix}_{variant}", vres, files
            )
        timing_rel = f"{prefix}_timing.csv"
        write_csv(out / timing_rel, ["stage", "seconds"], res.timings)
        entry["timing"] = timing_rel
        diagnostics.append(timing_rel)
        manifest["species"][name] = entry

    for rel in files:
        files[rel] = _sha256(out / rel)
    manifest["files"] = dict(sorted(files.items()))
    manifest["diagnostics"] = sorted(diagnostics)
    with open(out / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return manifest


def load_manifest(out_dir) -> dict:
    with open(Path(out_dir) / MANIFEST_NAME, "r", encoding="utf-8") as fh:
        return json.load(fh)


def verify_manifest(out_dir) -> bool:
    """Recompute every listed hash; True when all files match."""
    out = Path(out_dir)
    manifest = load_manifest(out)
    for rel, digest in manifest["files"].items():
        path = out / rel
        if not path.exists() or _sha256(path) != digest:
            return False
    return True
