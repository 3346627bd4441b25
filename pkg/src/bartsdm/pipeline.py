"""End-to-end analysis: config, validation, and orchestration.

A single declarative config document (YAML, JSON-compatible) names the
occurrence files, fitting and projection layers, and per-species
options. Validation never mutates anything and reports findings as
table rows; the run itself derives every random stream from the global
seed and the species name, so adding or reordering species never
perturbs another species' results.
"""
from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .bart import BartModel, SamplerConfig, fit_bart
from .errors import BartSdmError, ValidationError
from .evaluation import (
    EvaluationReport,
    ResponseCurve,
    VariableImportance,
    evaluate_model,
    kfold_cv,
    partial_dependence,
    permutation_importance,
)
from .grids import (
    RasterStack,
    ScenarioSet,
    StudyArea,
    TimeSeriesStack,
    average_stack,
    load_ascii_grid,
    load_study_area,
)
from .occurrences import (
    CleaningReport,
    ModelMatrix,
    build_model_matrix,
    clean_occurrences,
    generate_pseudo_absences,
    load_occurrences,
    thin_occurrences,
    valid_cell_masks,
)
from .projection import (
    HabitatAreaSeries,
    ProjectionResult,
    habitat_area_series,
    predict_stack,
    project_scenarios,
)

CONFIG_VERSION = 1
VARIANTS = ("suitable_habitat", "native_range")


def derived_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary labels (global seed, species, stage)."""
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % (2**63)


# ---------------------------------------------------------------------------
# Configuration


@dataclass
class SpeciesConfig:
    file: str
    name: str
    variants: tuple = ("suitable_habitat",)
    predictors: list | None = None
    standardize: bool = True
    thinning_decimals: int | None = None
    pseudo_absence_seed: int | None = None


@dataclass
class EvaluationToggles:
    cv: bool = True
    importance: bool = True
    response_curves: bool = True
    cv_folds: int = 5
    importance_iterations: int = 10
    response_grid_size: int = 20


@dataclass
class AnalysisConfig:
    species: list
    fitting_layers: dict  # variable -> {timestamp: path}
    projection_layers: dict  # scenario -> {timestamp: {variable: path}}
    base_dir: Path
    study_area: str | None = None
    sampler: dict = field(default_factory=dict)
    evaluation: EvaluationToggles = field(default_factory=EvaluationToggles)
    seed: int = 0
    workers: int = 1
    output_dir: str = "results"
    config_version: int = CONFIG_VERSION

    def resolve(self, rel) -> Path:
        path = Path(rel)
        return path if path.is_absolute() else self.base_dir / path

    def sampler_config(self, seed: int) -> SamplerConfig:
        return SamplerConfig(**{**self.sampler, "seed": seed})


def _as_bool(value, default):
    return default if value is None else bool(value)


def config_from_dict(doc: dict, base_dir) -> AnalysisConfig:
    """Build an AnalysisConfig from a parsed YAML/JSON document.

    Timestamp keys are coerced to int so JSON documents (string keys)
    behave exactly like YAML ones.
    """
    if not isinstance(doc, dict):
        raise ValidationError("config document must be a mapping")
    species = []
    for entry in doc.get("species", []) or []:
        if isinstance(entry, str):
            entry = {"file": entry}
        name = entry.get("name") or Path(entry["file"]).stem
        species.append(
            SpeciesConfig(
                file=entry["file"],
                name=name,
                variants=tuple(entry.get("variants") or ("suitable_habitat",)),
                predictors=entry.get("predictors"),
                standardize=_as_bool(entry.get("standardize"), True),
                thinning_decimals=entry.get("thinning_decimals"),
                pseudo_absence_seed=entry.get("pseudo_absence_seed"),
            )
        )
    fitting = {
        str(var): {int(t): p for t, p in (steps or {}).items()}
        for var, steps in (doc.get("fitting_layers") or {}).items()
    }
    projection = {
        str(name): {
            int(t): {str(v): p for v, p in (variables or {}).items()}
            for t, variables in (steps or {}).items()
        }
        for name, steps in (doc.get("projection_layers") or {}).items()
    }
    ev = doc.get("evaluation") or {}
    toggles = EvaluationToggles(
        cv=_as_bool(ev.get("cv"), True),
        importance=_as_bool(ev.get("importance"), True),
        response_curves=_as_bool(ev.get("response_curves"), True),
        cv_folds=int(ev.get("cv_folds", 5)),
        importance_iterations=int(ev.get("importance_iterations", 10)),
        response_grid_size=int(ev.get("response_grid_size", 20)),
    )
    return AnalysisConfig(
        species=species,
        fitting_layers=fitting,
        projection_layers=projection,
        base_dir=Path(base_dir),
        study_area=doc.get("study_area"),
        sampler=dict(doc.get("sampler") or {}),
        evaluation=toggles,
        seed=int(doc.get("seed", 0)),
        workers=int(doc.get("workers", 1)),
        output_dir=doc.get("output_dir", "results"),
        config_version=int(doc.get("config_version", CONFIG_VERSION)),
    )


def load_config(path) -> AnalysisConfig:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    return config_from_dict(doc, base_dir=path.parent)


# ---------------------------------------------------------------------------
# Validation


@dataclass
class ValidationRow:
    item: str
    check: str
    status: str  # ok | warning | error
    message: str

    def to_payload(self):
        return {
            "item": self.item,
            "check": self.check,
            "status": self.status,
            "message": self.message,
        }


@dataclass
class ValidationTable:
    rows: list = field(default_factory=list)

    def add(self, item, check, status, message=""):
        self.rows.append(ValidationRow(item, check, status, message))

    @property
    def has_errors(self) -> bool:
        return any(r.status == "error" for r in self.rows)

    def errors(self):
        return [r for r in self.rows if r.status == "error"]

    def to_payload(self):
        return [r.to_payload() for r in self.rows]


def _try_load_grid(table, config, item, rel):
    path = config.resolve(rel)
    if not path.exists():
        table.add(item, "file-exists", "error", f"{rel}: file not found")
        return None
    try:
        return load_ascii_grid(path)
    except BartSdmError as err:
        table.add(item, "grid-parse", "error", f"{rel}: {err}")
        return None


def validate_inputs(config: AnalysisConfig) -> ValidationTable:
    """Check formats, schema and alignment; findings become table rows.

    Purely observational: no inputs are modified and nothing is cached.
    Any error row blocks `run_analysis`.
    """
    table = ValidationTable()
    if config.config_version != CONFIG_VERSION:
        table.add("config", "version", "error", f"unsupported config_version {config.config_version}")
    if not config.species:
        table.add("config", "species-present", "error", "no species configured")
    if not config.fitting_layers:
        table.add("config", "fitting-layers-present", "error", "no fitting layers configured")

    try:
        config.sampler_config(seed=0)
        table.add("config", "sampler-options", "ok", "")
    except (ValidationError, TypeError) as err:
        table.add("config", "sampler-options", "error", str(err))

    area = None
    if config.study_area:
        path = config.resolve(config.study_area)
        if not path.exists():
            table.add("study_area", "file-exists", "error", f"{config.study_area}: file not found")
        else:
            try:
                area = load_study_area(path)
                table.add("study_area", "geojson-parse", "ok", "")
            except (BartSdmError, ValueError, KeyError) as err:
                table.add("study_area", "geojson-parse", "error", str(err))

    # fitting layers: every variable over the same timestamps, one grid
    timestamp_sets = {}
    grids = {}
    fitting_steps = {}
    for var, steps in config.fitting_layers.items():
        timestamp_sets[var] = set(steps)
        for t, rel in steps.items():
            layer = _try_load_grid(table, config, f"fitting:{var}", rel)
            if layer is not None:
                grids[(var, t)] = layer.grid
                fitting_steps.setdefault(t, {})[var] = layer
    if timestamp_sets:
        reference = set.union(*timestamp_sets.values())
        for var, got in timestamp_sets.items():
            if got != reference:
                table.add(
                    f"fitting:{var}",
                    "timestamp-coverage",
                    "error",
                    f"variable timestamps {sorted(got)} != {sorted(reference)}",
                )
    if grids and len(set(grids.values())) > 1:
        table.add("fitting_layers", "grid-alignment", "error", "fitting layers are not grid-aligned")
    elif grids:
        table.add("fitting_layers", "grid-alignment", "ok", "")

    fitting_vars = set(config.fitting_layers)
    fitting_timestamps = set.union(*timestamp_sets.values()) if timestamp_sets else set()

    # projection layers: same variable set as fitting, aligned per scenario
    for scenario, steps in config.projection_layers.items():
        for t, variables in steps.items():
            if set(variables) != fitting_vars:
                table.add(
                    f"projection:{scenario}",
                    "variable-set",
                    "error",
                    f"timestamp {t}: variable set mismatch with fitting layers",
                )
            scenario_grids = set()
            for var, rel in variables.items():
                layer = _try_load_grid(table, config, f"projection:{scenario}:{var}", rel)
                if layer is not None:
                    scenario_grids.add(layer.grid)
            if len(scenario_grids) > 1:
                table.add(
                    f"projection:{scenario}",
                    "grid-alignment",
                    "error",
                    f"timestamp {t}: layers are not grid-aligned",
                )

    # species files
    names = set()
    for sp in config.species:
        item = f"species:{sp.name}"
        if sp.name in names:
            table.add(item, "unique-name", "error", "duplicate species name")
        names.add(sp.name)
        bad_variant = [v for v in sp.variants if v not in VARIANTS]
        if bad_variant or not sp.variants:
            table.add(item, "variants", "error", f"invalid variants {bad_variant or '(empty)'}")
        if sp.predictors is not None:
            unknown = [p for p in sp.predictors if p not in fitting_vars]
            if unknown:
                table.add(item, "predictors", "error", f"unknown predictors {unknown}")
            elif not sp.predictors:
                table.add(item, "predictors", "error", "empty predictor list")
        path = config.resolve(sp.file)
        if not path.exists():
            table.add(item, "file-exists", "error", f"{sp.file}: file not found")
            continue
        try:
            _, records = load_occurrences(path)
        except BartSdmError as err:
            table.add(item, "columns", "error", str(err))
            continue
        table.add(item, "columns", "ok", "")
        if not records:
            table.add(item, "rows-present", "error", "no records in file")
            continue
        labels = {r.label for r in records}
        if labels == {None}:
            table.add(item, "classes", "ok", "presence-only: pseudo-absences will be generated")
        elif None in labels:
            table.add(item, "classes", "error", "pa column has missing/invalid values")
        elif len(labels) < 2:
            table.add(item, "classes", "error", "pa column contains a single class")
        else:
            table.add(item, "classes", "ok", "")
        with_t = [r for r in records if r.timestamp is not None]
        if fitting_timestamps:
            if len(fitting_timestamps) > 1 and len(with_t) < len(records):
                table.add(
                    item,
                    "timestamps",
                    "error",
                    "records lack timestamps but fitting layers are multi-step",
                )
            else:
                unmatched = sum(1 for r in with_t if r.timestamp not in fitting_timestamps)
                if unmatched:
                    table.add(
                        item,
                        "timestamps",
                        "warning",
                        f"{unmatched} records match no fitting timestamp and will be dropped",
                    )
    return table


# ---------------------------------------------------------------------------
# Run


@dataclass
class VariantResult:
    variant: str
    matrix: ModelMatrix
    model: BartModel
    report: EvaluationReport
    projections: ProjectionResult
    habitat: HabitatAreaSeries
    importance: VariableImportance | None = None
    curves: list | None = None


@dataclass
class SpeciesResult:
    species: str
    cleaning: CleaningReport | None = None
    variants: dict = field(default_factory=dict)
    timings: list = field(default_factory=list)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class ResultsBundle:
    config: AnalysisConfig
    species: dict
    timings: list = field(default_factory=list)  # bundle-level stages
    wall_time: float = 0.0

    @property
    def failed_species(self):
        return [name for name, res in self.species.items() if not res.ok]


def _load_fitting(config: AnalysisConfig) -> TimeSeriesStack:
    steps = {}
    timestamps = sorted({t for steps_ in config.fitting_layers.values() for t in steps_})
    for t in timestamps:
        layers = {}
        for var in config.fitting_layers:
            layers[var] = load_ascii_grid(config.resolve(config.fitting_layers[var][t]))
        steps[t] = RasterStack(layers)
    return TimeSeriesStack(steps)


def _load_scenarios(config: AnalysisConfig) -> ScenarioSet | None:
    if not config.projection_layers:
        return None
    scenarios = {}
    for name, steps in config.projection_layers.items():
        series = {}
        for t in sorted(steps):
            series[t] = RasterStack(
                {var: load_ascii_grid(config.resolve(rel)) for var, rel in steps[t].items()}
            )
        scenarios[name] = TimeSeriesStack(series)
    return ScenarioSet(scenarios)


def _subset_stack(stack: RasterStack, variables) -> RasterStack:
    return RasterStack({v: stack[v] for v in variables})


def _subset_series(series: TimeSeriesStack, variables) -> TimeSeriesStack:
    return TimeSeriesStack({t: _subset_stack(s, variables) for t, s in series.steps.items()})


def _species_stage_plan(config: AnalysisConfig, sp: SpeciesConfig):
    stages = ["clean"]
    if sp.thinning_decimals is not None:
        stages.append("thin")
    stages.append("pseudo_absences")
    for variant in sp.variants:
        stages += [f"{variant}:matrix", f"{variant}:fit", f"{variant}:evaluate"]
        if config.evaluation.cv:
            stages.append(f"{variant}:cv")
        if config.evaluation.importance:
            stages.append(f"{variant}:importance")
        if config.evaluation.response_curves and variant == "suitable_habitat":
            stages.append(f"{variant}:response_curves")
        stages += [f"{variant}:project", f"{variant}:habitat"]
    return stages


class _StageClock:
    """Times named stages and reports completion to the progress callback."""

    def __init__(self, species, plan, on_stage):
        self.species = species
        self.plan = list(plan)
        self.on_stage = on_stage
        self.timings = []

    def run(self, stage, fn):
        start = time.perf_counter()
        result = fn()
        self.timings.append((stage, time.perf_counter() - start))
        if self.on_stage is not None:
            self.on_stage(self.species, stage)
        return result


def _run_species(
    config: AnalysisConfig,
    sp: SpeciesConfig,
    fitting: TimeSeriesStack,
    scenarios: ScenarioSet | None,
    area: StudyArea | None,
    on_stage=None,
) -> SpeciesResult:
    result = SpeciesResult(species=sp.name)
    clock = _StageClock(sp.name, _species_stage_plan(config, sp), on_stage)
    species_seed = derived_seed(config.seed, sp.name)
    predictors = sp.predictors or list(config.fitting_layers)
    fit_series = _subset_series(fitting, predictors)

    try:
        _, records = load_occurrences(config.resolve(sp.file))
        records, report = clock.run(
            "clean", lambda: clean_occurrences(records, fit_series, area)
        )
        result.cleaning = report

        if sp.thinning_decimals is not None:
            records = clock.run(
                "thin",
                lambda: thin_occurrences(
                    records, sp.thinning_decimals, derived_seed(species_seed, "thin")
                ),
            )

        labels = {r.label for r in records}
        if labels == {None}:
            presences = [replace(r, label=1) for r in records]
            masks = valid_cell_masks(fit_series, area)
            pa_seed = (
                sp.pseudo_absence_seed
                if sp.pseudo_absence_seed is not None
                else derived_seed(species_seed, "pseudo_absences")
            )
            absences = clock.run(
                "pseudo_absences",
                lambda: generate_pseudo_absences(presences, masks, pa_seed),
            )
            records = presences + absences
        else:
            clock.run("pseudo_absences", lambda: None)  # labeled data: nothing to do

        scenario_subset = None
        if scenarios is not None:
            scenario_subset = ScenarioSet(
                {
                    name: _subset_series(series, predictors)
                    for name, series in scenarios.scenarios.items()
                }
            )

        for variant in sp.variants:
            tag = lambda s: f"{variant}:{s}"  # noqa: E731
            matrix = clock.run(
                tag("matrix"),
                lambda: build_model_matrix(
                    records,
                    fit_series,
                    include_coords=(variant == "native_range"),
                    standardize=sp.standardize,
                ),
            )
            sampler = config.sampler_config(seed=derived_seed(species_seed, variant, "fit"))
            model = clock.run(tag("fit"), lambda: fit_bart(matrix, sampler))
            report = clock.run(tag("evaluate"), lambda: evaluate_model(model, matrix))
            model.cutoff = report.cutoff

            if config.evaluation.cv:
                def run_cv():
                    folds, means, _ = kfold_cv(
                        matrix,
                        sampler,
                        k=config.evaluation.cv_folds,
                        seed=derived_seed(species_seed, variant, "cv"),
                    )
                    return folds, means

                report.cv_folds, report.cv_means = clock.run(tag("cv"), run_cv)

            importance = None
            if config.evaluation.importance:
                importance = clock.run(
                    tag("importance"),
                    lambda: permutation_importance(
                        model,
                        matrix,
                        report.cutoff,
                        n_iter=config.evaluation.importance_iterations,
                        seed=derived_seed(species_seed, variant, "importance"),
                    ),
                )

            curves = None
            if config.evaluation.response_curves and variant == "suitable_habitat":
                curves = clock.run(
                    tag("response_curves"),
                    lambda: [
                        partial_dependence(
                            model, matrix, var, grid_size=config.evaluation.response_grid_size
                        )
                        for var in matrix.env_columns
                    ],
                )

            def run_projection():
                if scenario_subset is not None:
                    return project_scenarios(
                        model, scenario_subset, report.cutoff, fitting_series=fit_series
                    )
                averaged = predict_stack(model, average_stack(fit_series), report.cutoff)
                return ProjectionResult(predictions={}, averaged=averaged)

            projections = clock.run(tag("project"), run_projection)
            habitat = clock.run(tag("habitat"), lambda: habitat_area_series(projections))

            result.variants[variant] = VariantResult(
                variant=variant,
                matrix=matrix,
                model=model,
                report=report,
                projections=projections,
                habitat=habitat,
                importance=importance,
                curves=curves,
            )
    except BartSdmError as err:
        result.error = f"{type(err).__name__}: {err}"
    result.timings = clock.timings
    return result


def run_analysis(config: AnalysisConfig, progress=None) -> ResultsBundle:
    """Run the full workflow for every configured species.

    A failing species is recorded and skipped; the others complete. The
    optional ``progress`` callback receives (species, stage,
    fraction_done) at every stage boundary, in the same order the
    timing log records stages.
    """
    start = time.perf_counter()
    table = validate_inputs(config)
    if table.has_errors:
        details = "; ".join(f"{r.item}/{r.check}: {r.message}" for r in table.errors())
        raise ValidationError(f"validation failed: {details}")

    bundle = ResultsBundle(config=config, species={})
    bundle.timings.append(("validate", time.perf_counter() - start))
    t0 = time.perf_counter()
    fitting = _load_fitting(config)
    scenarios = _load_scenarios(config)
    area = load_study_area(config.resolve(config.study_area)) if config.study_area else None
    bundle.timings.append(("load_layers", time.perf_counter() - t0))

    plans = {sp.name: _species_stage_plan(config, sp) for sp in config.species}
    total_stages = sum(len(p) for p in plans.values()) or 1
    done_count = [0]

    def on_stage(species, stage):
        done_count[0] += 1
        if progress is not None:
            progress(species, stage, done_count[0] / total_stages)

    if config.workers > 1 and len(config.species) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = {
                sp.name: pool.submit(
                    _run_species, config, sp, fitting, scenarios, area, on_stage
                )
                for sp in config.species
            }
            for sp in config.species:
                bundle.species[sp.name] = futures[sp.name].result()
    else:
        for sp in config.species:
            bundle.species[sp.name] = _run_species(config, sp, fitting, scenarios, area, on_stage)

    bundle.wall_time = time.perf_counter() - start
    return bundle
