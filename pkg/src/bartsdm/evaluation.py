"""Classifier evaluation: cutoff choice, metrics, CV, importance, curves.

Presence (label 1) is the positive class throughout. Metrics with a zero
denominator come back as NaN so exports can leave the field empty.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bart import BartModel, SamplerConfig, fit_bart, predict_bart
from .errors import (
    MetricUndefinedError,
    ParameterError,
    SchemaError,
    StratificationError,
)
from .occurrences import ModelMatrix
from .posterior import order_statistic

METRIC_KEYS = ("auc", "tss", "f_score", "sensitivity", "specificity", "precision", "accuracy")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_scores(cls, labels, scores, cutoff: float) -> "ConfusionMatrix":
        labels = np.asarray(labels)
        pred = np.asarray(scores, dtype=float) >= cutoff
        pos = labels == 1
        return cls(
            tp=int(np.sum(pred & pos)),
            fp=int(np.sum(pred & ~pos)),
            fn=int(np.sum(~pred & pos)),
            tn=int(np.sum(~pred & ~pos)),
        )


@dataclass
class VariableImportance:
    """Per-variable permutation importances, sorted by mean (descending)."""

    variables: list
    values: np.ndarray  # (n_variables, n_iter)

    def __post_init__(self):
        order = np.argsort([-np.mean(v) for v in self.values], kind="stable")
        self.variables = [self.variables[i] for i in order]
        self.values = np.asarray([self.values[i] for i in order], dtype=float)

    def mean_importance(self) -> dict:
        return {v: float(np.mean(row)) for v, row in zip(self.variables, self.values)}


@dataclass
class ResponseCurve:
    """Marginal response of one covariate with a central credible band."""

    variable: str
    grid: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


@dataclass
class FittedDistribution:
    """Histogram of posterior-mean fitted probabilities, split by class."""

    edges: np.ndarray
    presence_counts: np.ndarray
    absence_counts: np.ndarray


@dataclass
class EvaluationReport:
    cutoff: float
    roc: list
    auc: float
    tss: float
    f_score: float
    confusion: ConfusionMatrix
    metrics: dict
    fitted_distribution: FittedDistribution
    cv_folds: list | None = None
    cv_means: dict | None = None


def _check_two_classes(labels):
    labels = np.asarray(labels)
    if not ((labels == 1).any() and (labels == 0).any()):
        raise MetricUndefinedError("both classes are required")
    return labels


def roc_auc(labels, scores):
    """ROC points from threshold sweeping and the trapezoid AUC.

    Equal scores are grouped into a single threshold step, which makes
    the trapezoid area equal the Mann-Whitney statistic with ties
    counted one half.
    """
    labels = _check_two_classes(labels)
    scores = np.asarray(scores, dtype=float)
    if labels.shape != scores.shape:
        raise ParameterError("labels and scores must have equal length")
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos

    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    pos = (labels[order] == 1).astype(float)
    cum_tp = np.cumsum(pos)
    cum_fp = np.cumsum(1.0 - pos)
    # last index of each tie group marks one threshold step
    boundary = np.nonzero(np.r_[s[1:] != s[:-1], True])[0]

    points = [(0.0, 0.0)]
    auc = 0.0
    prev_fpr = prev_tpr = 0.0
    for i in boundary:
        tpr = cum_tp[i] / n_pos
        fpr = cum_fp[i] / n_neg
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0
        points.append((float(fpr), float(tpr)))
        prev_fpr, prev_tpr = fpr, tpr
    return points, float(auc)


def youden_cutoff(labels, scores):
    """Cutoff maximizing J = sensitivity + specificity - 1, and that J.

    Candidates are the unique score values; classification is
    ``score >= cutoff``; ties prefer the smallest maximizing cutoff.
    """
    labels = _check_two_classes(labels)
    scores = np.asarray(scores, dtype=float)
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos

    candidates = np.unique(scores)  # ascending
    best_cut, best_j = None, -math.inf
    for cut in candidates:
        pred = scores >= cut
        tp = int(np.sum(pred & (labels == 1)))
        fp = int(np.sum(pred & (labels == 0)))
        j = tp / n_pos + (n_neg - fp) / n_neg - 1.0
        if j > best_j:
            best_cut, best_j = float(cut), float(j)
    return best_cut, best_j


def classification_metrics(cm: ConfusionMatrix) -> dict:
    """Sensitivity, specificity, precision, F1, accuracy and TSS.

    Ratios with an empty denominator are NaN; the F-score is 0 when the
    model finds no true positive but positives exist somewhere.
    """
    if cm.total == 0:
        raise ParameterError("confusion matrix is empty")

    def ratio(num, den):
        return num / den if den > 0 else math.nan

    sensitivity = ratio(cm.tp, cm.tp + cm.fn)
    specificity = ratio(cm.tn, cm.tn + cm.fp)
    precision = ratio(cm.tp, cm.tp + cm.fp)
    f_den = 2 * cm.tp + cm.fp + cm.fn
    f_score = (2 * cm.tp / f_den) if f_den > 0 else math.nan
    return {
        "sensitivity": sensitivity,
        "specificity": specificity,
        "precision": precision,
        "f_score": f_score,
        "accuracy": (cm.tp + cm.tn) / cm.total,
        "tss": sensitivity + specificity - 1.0,
    }


def fitted_histogram(labels, mean_probs, n_bins: int = 20) -> FittedDistribution:
    labels = np.asarray(labels)
    mean_probs = np.asarray(mean_probs, dtype=float)
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    pres, _ = np.histogram(mean_probs[labels == 1], bins=edges)
    abse, _ = np.histogram(mean_probs[labels == 0], bins=edges)
    return FittedDistribution(edges=edges, presence_counts=pres, absence_counts=abse)


def evaluate_model(model: BartModel, matrix: ModelMatrix) -> EvaluationReport:
    """Youden cutoff plus the full training-fit summary for one model."""
    mean_fit = model.fitted_probs.mean(axis=0)
    cutoff, tss = youden_cutoff(matrix.y, mean_fit)
    roc, auc = roc_auc(matrix.y, mean_fit)
    cm = ConfusionMatrix.from_scores(matrix.y, mean_fit, cutoff)
    metrics = classification_metrics(cm)
    return EvaluationReport(
        cutoff=cutoff,
        roc=roc,
        auc=auc,
        tss=tss,
        f_score=metrics["f_score"],
        confusion=cm,
        metrics=metrics,
        fitted_distribution=fitted_histogram(matrix.y, mean_fit),
    )


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def stratified_folds(y, k: int, seed: int) -> np.ndarray:
    """Fold id per row; class proportions preserved within one row."""
    y = np.asarray(y)
    assignment = np.full(y.size, -1, dtype=int)
    rng = np.random.default_rng(seed)
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        if idx.size < k:
            raise StratificationError(
                f"class {cls} has {idx.size} rows, fewer than k={k}"
            )
        idx = rng.permutation(idx)
        assignment[idx] = np.arange(idx.size) % k
    return assignment


def kfold_cv(matrix: ModelMatrix, config: SamplerConfig, k: int = 5, seed: int = 0):
    """Stratified k-fold CV; the cutoff is re-derived per fold.

    Each fold's model is fit on the other folds, its Youden cutoff is
    taken from its own training fits, and held-out rows are scored by
    the posterior-mean probability. Returns (fold rows, means,
    assignment array).
    """
    assignment = stratified_folds(matrix.y, k, seed)
    folds = []
    for fold in range(k):
        test_idx = np.flatnonzero(assignment == fold)
        train_idx = np.flatnonzero(assignment != fold)
        sub = matrix.take(train_idx)
        model = fit_bart(sub, replace(config, seed=_fold_seed(config.seed, fold)))
        cutoff, _ = youden_cutoff(sub.y, model.fitted_probs.mean(axis=0))
        scores = predict_bart(model, matrix.X_raw[test_idx]).mean(axis=1)
        y_test = matrix.y[test_idx]
        _, auc = roc_auc(y_test, scores)
        metrics = classification_metrics(ConfusionMatrix.from_scores(y_test, scores, cutoff))
        row = {"fold": fold, "cutoff": cutoff, "auc": auc}
        row.update({key: metrics[key] for key in METRIC_KEYS if key in metrics})
        folds.append(row)
    means = {
        key: float(np.nanmean([f[key] for f in folds])) for key in METRIC_KEYS
    }
    return folds, means, assignment


def _fscore_at(labels, scores, cutoff: float) -> float:
    return classification_metrics(ConfusionMatrix.from_scores(labels, scores, cutoff))["f_score"]


def _permuted_scores(model, matrix, column_index, permutation) -> np.ndarray:
    rows = matrix.X_raw.copy()
    rows[:, column_index] = rows[permutation, column_index]
    return predict_bart(model, rows).mean(axis=1)


def permutation_importance(
    model: BartModel,
    matrix: ModelMatrix,
    cutoff: float,
    n_iter: int = 10,
    seed: int = 0,
) -> VariableImportance:
    """Drop in F-score after permuting each covariate, n_iter times.

    The baseline F-score uses posterior-mean probabilities at the given
    cutoff; each iteration permutes one column (seeded) and records
    baseline minus permuted F-score.
    """
    if list(model.columns) != list(matrix.columns):
        raise SchemaError("matrix columns do not match the model schema")
    baseline_scores = predict_bart(model, matrix.X_raw).mean(axis=1)
    baseline = _fscore_at(matrix.y, baseline_scores, cutoff)
    rng = np.random.default_rng(seed)
    values = np.empty((len(matrix.columns), n_iter))
    for j in range(len(matrix.columns)):
        for it in range(n_iter):
            perm = rng.permutation(matrix.n_rows)
            permuted = _fscore_at(matrix.y, _permuted_scores(model, matrix, j, perm), cutoff)
            values[j, it] = baseline - permuted
    return VariableImportance(variables=list(matrix.columns), values=values)


def partial_dependence(
    model: BartModel,
    matrix: ModelMatrix,
    variable: str,
    grid_size: int = 20,
) -> ResponseCurve:
    """Marginal effect of one covariate on the original scale.

    For each grid value the covariate is forced to that value in every
    training row; per posterior draw the predictions are averaged over
    rows, giving a draw-level curve whose mean and central 95% band are
    returned.
    """
    if grid_size < 2:
        raise ParameterError("grid_size must be >= 2")
    if variable not in model.columns:
        raise SchemaError(f"'{variable}' is not a model covariate")
    j = list(matrix.columns).index(variable)
    lo = float(matrix.X_raw[:, j].min())
    hi = float(matrix.X_raw[:, j].max())
    grid = np.linspace(lo, hi, grid_size)

    per_draw = np.empty((grid_size, model.n_draws))
    rows = matrix.X_raw.copy()
    for g, value in enumerate(grid):
        rows[:, j] = value
        per_draw[g] = predict_bart(model, rows).mean(axis=0)
    ordered = np.sort(per_draw, axis=1)
    return ResponseCurve(
        variable=variable,
        grid=grid,
        mean=per_draw.mean(axis=1),
        lower=order_statistic(ordered, 0.025),
        upper=order_statistic(ordered, 0.975),
    )
