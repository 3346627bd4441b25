"""Species distribution modeling with Bayesian additive regression trees.

The package covers the full workflow: raster layer handling, occurrence
cleaning and balanced pseudo-absence generation, a from-scratch
binary-probit sum-of-trees sampler, classifier evaluation, and
posterior habitat projections across climate scenarios.
"""

from .bart import (
    BartModel,
    SamplerConfig,
    fit_bart,
    leaf_posterior,
    load_model,
    predict_bart,
    probit,
    sample_latents,
    save_model,
    split_probability,
)
from .evaluation import (
    ConfusionMatrix,
    EvaluationReport,
    ResponseCurve,
    VariableImportance,
    classification_metrics,
    evaluate_model,
    kfold_cv,
    partial_dependence,
    permutation_importance,
    roc_auc,
    youden_cutoff,
)
from .export import export_results, load_manifest, verify_manifest
from .grids import (
    GridSpec,
    RasterLayer,
    RasterStack,
    ScenarioSet,
    StandardizationParams,
    StudyArea,
    TimeSeriesStack,
    average_stack,
    crop_mask,
    load_ascii_grid,
    load_study_area,
    point_in_polygon,
    write_ascii_grid,
    zscore_standardize,
)
from .occurrences import (
    CleaningReport,
    ModelMatrix,
    OccurrenceRecord,
    build_model_matrix,
    clean_occurrences,
    generate_pseudo_absences,
    load_occurrences,
    thin_occurrences,
    valid_cell_mask,
    valid_cell_masks,
)
from .pipeline import (
    AnalysisConfig,
    ResultsBundle,
    ValidationTable,
    load_config,
    run_analysis,
    validate_inputs,
)
from .projection import (
    HabitatAreaSeries,
    PosteriorPrediction,
    ProjectionResult,
    habitat_area_series,
    predict_stack,
    project_scenarios,
)

__version__ = "0.1.0"
