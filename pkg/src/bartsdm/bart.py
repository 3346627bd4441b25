"""Sum-of-trees sampler for binary outcomes with a probit link.

The response is modeled as ``P(y=1|x) = probit(sum_j g_j(x))`` where each
``g_j`` is a small regression tree. Sampling alternates a truncated-normal
latent draw per observation with one Metropolis-Hastings structure move
(grow / prune / change) plus a conjugate leaf-value refresh per tree.
Leaf values are integrated out of the acceptance ratio, so moves depend
only on per-leaf counts and residual sums. The latent residual variance
is fixed at 1 (probit identification).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import ClassImbalanceError, SchemaError, ValidationError
from .grids import StandardizationParams
from .trees import FlatForest, Tree, flatten_forest

GROW, PRUNE, CHANGE = "grow", "prune", "change"

# guards against underflow in tail truncated-normal draws
_TINY = 1e-300
_UMAX = 1.0 - 1e-16


@dataclass(frozen=True)
class SamplerConfig:
    """Tuning knobs of the sampler; defaults follow common binary-BART use."""

    m: int = 200
    alpha: float = 0.95
    beta: float = 2.0
    k: float = 2.0
    n_cutpoints: int = 100
    n_burn: int = 250
    n_draws: int = 1000
    move_probs: tuple = (0.28, 0.28, 0.44)
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.n_draws < 1 or self.n_burn < 0:
            raise ValidationError("m >= 1, n_draws >= 1, n_burn >= 0 required")
        if not (0.0 < self.alpha < 1.0) or self.beta < 0:
            raise ValidationError("alpha in (0,1) and beta >= 0 required")
        if self.k <= 0 or self.n_cutpoints < 1:
            raise ValidationError("k > 0 and n_cutpoints >= 1 required")
        if len(self.move_probs) != 3 or abs(sum(self.move_probs) - 1.0) > 1e-9:
            raise ValidationError("move_probs must be three values summing to 1")

    @property
    def sigma_mu(self) -> float:
        return 3.0 / (self.k * math.sqrt(self.m))

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "alpha": self.alpha,
            "beta": self.beta,
            "k": self.k,
            "n_cutpoints": self.n_cutpoints,
            "n_burn": self.n_burn,
            "n_draws": self.n_draws,
            "move_probs": list(self.move_probs),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerConfig":
        d = dict(d)
        if "move_probs" in d:
            d["move_probs"] = tuple(d["move_probs"])
        return cls(**d)


def split_probability(depth: int, alpha: float, beta: float) -> float:
    """Prior probability that a node at the given depth is split."""
    if depth < 0:
        raise ValidationError("depth must be >= 0")
    return alpha * (1.0 + depth) ** (-beta)


def probit(x):
    """Standard normal CDF (the inverse link)."""
    return ndtr(x)


def leaf_posterior(residual_sum: float, n: int, sigma_mu: float):
    """Conjugate posterior (mean, variance) of a leaf value.

    Prior N(0, sigma_mu^2), unit residual variance: the posterior is
    normal with variance 1/(n + 1/sigma_mu^2) and mean variance*sum.
    """
    if sigma_mu <= 0:
        raise ValidationError("sigma_mu must be positive")
    variance = 1.0 / (n + 1.0 / (sigma_mu * sigma_mu))
    return variance * residual_sum, variance


def sample_latents(y: np.ndarray, fitted_sum: np.ndarray, rng) -> np.ndarray:
    """Draw the per-observation latent z ~ N(fitted, 1) truncated by class.

    Presences are truncated to (0, inf), absences to (-inf, 0]. Uses the
    inverse-CDF with the reflection that keeps the CDF argument away from
    1, so deep tails stay finite.
    """
    mu = np.asarray(fitted_sum, dtype=float)
    u = np.clip(rng.random(mu.shape[0]), _TINY, _UMAX)
    pos = np.asarray(y) == 1
    z = np.empty_like(mu)
    # y=1: z = mu - Q(u * Phi(mu)) maps u in (0,1) to z in (0, inf)
    p = np.clip(u[pos] * ndtr(mu[pos]), _TINY, None)
    z[pos] = mu[pos] - ndtri(p)
    q = np.clip(u[~pos] * ndtr(-mu[~pos]), _TINY, None)
    z[~pos] = mu[~pos] + ndtri(q)
    z[pos] = np.maximum(z[pos], _TINY)
    z[~pos] = np.minimum(z[~pos], 0.0)
    return z


def _leaf_log_ml(n: int, s: float, sigma2: float) -> float:
    """Leaf marginal-likelihood terms that do not cancel between trees."""
    denom = 1.0 + n * sigma2
    return -0.5 * math.log(denom) + (sigma2 * s * s) / (2.0 * denom)


@dataclass
class MoveOutcome:
    move: str
    accepted: bool
    log_accept: float = -math.inf


class TreeSampler:
    """Shared per-fit context: covariates, cutpoint grids, prior scales."""

    def __init__(self, X: np.ndarray, config: SamplerConfig):
        self.X = X
        self.config = config
        self.sigma_mu = config.sigma_mu
        self.sigma2 = self.sigma_mu * self.sigma_mu
        k = np.arange(1, config.n_cutpoints + 1) / (config.n_cutpoints + 1)
        lo = X.min(axis=0)
        hi = X.max(axis=0)
        # interior, equally spaced candidate thresholds per covariate
        self.cutpoints = [lo[j] + (hi[j] - lo[j]) * k for j in range(X.shape[1])]

    def _stats(self, rows, residuals, flat):
        if flat or residuals is None:
            return 0, 0.0
        return len(rows), float(residuals[rows].sum())

    def _pick_move(self, rng):
        u = rng.random()
        pg, pp, _ = self.config.move_probs
        if u < pg:
            return GROW
        if u < pg + pp:
            return PRUNE
        return CHANGE

    def step(self, tree: Tree, residuals, rng, flat_likelihood=False) -> MoveOutcome:
        """One MH move on the tree structure, then refresh all leaf values.

        With ``flat_likelihood`` the data terms are dropped and empty
        children are allowed, so the chain targets the structure prior.
        """
        move = self._pick_move(rng)
        if move == GROW:
            outcome = self._grow(tree, residuals, rng, flat_likelihood)
        elif move == PRUNE:
            outcome = self._prune(tree, residuals, rng, flat_likelihood)
        else:
            outcome = self._change(tree, residuals, rng, flat_likelihood)
        self.resample_leaves(tree, residuals, rng, flat_likelihood)
        return outcome

    def resample_leaves(self, tree: Tree, residuals, rng, flat_likelihood=False):
        for node, _, _ in tree.leaves():
            n, s = self._stats(node.rows, residuals, flat_likelihood)
            mean, var = leaf_posterior(s, n, self.sigma_mu)
            node.mu = mean + math.sqrt(var) * rng.standard_normal()

    def _propose_rule(self, rng):
        var = int(rng.integers(self.X.shape[1]))
        cut = float(self.cutpoints[var][int(rng.integers(self.config.n_cutpoints))])
        return var, cut

    def _partition(self, rows, var, cut):
        if len(rows) == 0:
            return rows, rows
        go_left = self.X[rows, var] <= cut
        return rows[go_left], rows[~go_left]

    def _split_priors(self, depth):
        a, b = self.config.alpha, self.config.beta
        return split_probability(depth, a, b), split_probability(depth + 1, a, b)

    def _grow(self, tree, residuals, rng, flat):
        leaves = tree.leaves()
        node, depth, parent = leaves[int(rng.integers(len(leaves)))]
        var, cut = self._propose_rule(rng)
        left_rows, right_rows = self._partition(node.rows, var, cut)
        if not flat and (len(left_rows) == 0 or len(right_rows) == 0):
            return MoveOutcome(GROW, False)

        n, s = self._stats(node.rows, residuals, flat)
        nl, sl = self._stats(left_rows, residuals, flat)
        nr, sr = self._stats(right_rows, residuals, flat)
        log_lik = (
            _leaf_log_ml(nl, sl, self.sigma2)
            + _leaf_log_ml(nr, sr, self.sigma2)
            - _leaf_log_ml(n, s, self.sigma2)
        )
        p_d, p_d1 = self._split_priors(depth)
        log_prior = math.log(p_d) + 2.0 * math.log1p(-p_d1) - math.log1p(-p_d)

        n_prunable_after = len(tree.prunable()) + 1
        if parent is not None and parent.left.is_leaf and parent.right.is_leaf:
            n_prunable_after -= 1
        pg, pp, _ = self.config.move_probs
        log_proposal = (
            math.log(pp) + math.log(len(leaves)) - math.log(pg) - math.log(n_prunable_after)
        )

        log_accept = log_lik + log_prior + log_proposal
        if math.log(rng.random()) < log_accept:
            node.split(var, cut, left_rows, right_rows)
            return MoveOutcome(GROW, True, log_accept)
        return MoveOutcome(GROW, False, log_accept)

    def _prune(self, tree, residuals, rng, flat):
        prunable = tree.prunable()
        if not prunable:
            return MoveOutcome(PRUNE, False)
        node, depth = prunable[int(rng.integers(len(prunable)))]

        n, s = self._stats(node.rows, residuals, flat)
        nl, sl = self._stats(node.left.rows, residuals, flat)
        nr, sr = self._stats(node.right.rows, residuals, flat)
        log_lik = (
            _leaf_log_ml(n, s, self.sigma2)
            - _leaf_log_ml(nl, sl, self.sigma2)
            - _leaf_log_ml(nr, sr, self.sigma2)
        )
        p_d, p_d1 = self._split_priors(depth)
        log_prior = math.log1p(-p_d) - math.log(p_d) - 2.0 * math.log1p(-p_d1)

        n_leaves_after = tree.n_leaves() - 1
        pg, pp, _ = self.config.move_probs
        log_proposal = (
            math.log(pg) + math.log(len(prunable)) - math.log(pp) - math.log(n_leaves_after)
        )

        log_accept = log_lik + log_prior + log_proposal
        if math.log(rng.random()) < log_accept:
            node.collapse()
            return MoveOutcome(PRUNE, True, log_accept)
        return MoveOutcome(PRUNE, False, log_accept)

    def _change(self, tree, residuals, rng, flat):
        candidates = tree.prunable()
        if not candidates:
            return MoveOutcome(CHANGE, False)
        node, _ = candidates[int(rng.integers(len(candidates)))]
        var, cut = self._propose_rule(rng)
        left_rows, right_rows = self._partition(node.rows, var, cut)
        if not flat and (len(left_rows) == 0 or len(right_rows) == 0):
            return MoveOutcome(CHANGE, False)

        nl, sl = self._stats(node.left.rows, residuals, flat)
        nr, sr = self._stats(node.right.rows, residuals, flat)
        ml, srl = self._stats(left_rows, residuals, flat)
        mr, srr = self._stats(right_rows, residuals, flat)
        log_accept = (
            _leaf_log_ml(ml, srl, self.sigma2)
            + _leaf_log_ml(mr, srr, self.sigma2)
            - _leaf_log_ml(nl, sl, self.sigma2)
            - _leaf_log_ml(nr, sr, self.sigma2)
        )
        if math.log(rng.random()) < log_accept:
            node.var, node.value = var, cut
            node.left.rows, node.right.rows = left_rows, right_rows
            return MoveOutcome(CHANGE, True, log_accept)
        return MoveOutcome(CHANGE, False, log_accept)


def mcmc_tree_step(tree, partial_residuals, sampler: TreeSampler, rng, flat_likelihood=False):
    """One structure move plus leaf refresh for a single tree."""
    return sampler.step(tree, partial_residuals, rng, flat_likelihood=flat_likelihood)


@dataclass
class BartModel:
    """Posterior tree-ensemble draws plus everything needed to predict."""

    config: SamplerConfig
    columns: list
    standardization: StandardizationParams | None
    observed_ranges: dict
    draws: list
    fitted_probs: np.ndarray | None = None
    cutoff: float | None = None

    @property
    def n_draws(self) -> int:
        return len(self.draws)


def _apply_standardization(raw: np.ndarray, columns, params: StandardizationParams | None):
    if params is None:
        return raw
    X = np.array(raw, dtype=float, copy=True)
    for j, name in enumerate(columns):
        if name in params.mean:
            X[:, j] = (X[:, j] - params.mean[name]) / params.sd[name]
    return X


def fit_bart(matrix, config: SamplerConfig) -> BartModel:
    """Run the full sampler on a model matrix.

    Sweeps run latent refresh then one move per tree; the last
    ``n_draws`` forests are retained together with the fitted presence
    probability of every training row under each draw. Deterministic for
    a given config (seed included).
    """
    X = np.asarray(matrix.X, dtype=float)
    y = np.asarray(matrix.y)
    if not np.isfinite(X).all():
        raise ValidationError("covariates must be finite")
    classes = np.unique(y)
    if len(classes) < 2 or not set(classes.tolist()) <= {0, 1}:
        raise ClassImbalanceError("response must contain both classes (0 and 1)")

    n = X.shape[0]
    rng = np.random.default_rng(config.seed)
    sampler = TreeSampler(X, config)
    trees = [Tree(n) for _ in range(config.m)]
    tree_fits = np.zeros((config.m, n))
    fitted = np.zeros(n)

    draws = []
    fitted_probs = np.empty((config.n_draws, n))
    for sweep in range(config.n_burn + config.n_draws):
        z = sample_latents(y, fitted, rng)
        for j, tree in enumerate(trees):
            residuals = z - fitted + tree_fits[j]
            sampler.step(tree, residuals, rng)
            new_fit = tree.training_fit(n)
            fitted += new_fit - tree_fits[j]
            tree_fits[j] = new_fit
        fitted = tree_fits.sum(axis=0)  # re-sum to keep float drift out
        if sweep >= config.n_burn:
            d = sweep - config.n_burn
            draws.append(flatten_forest(trees))
            fitted_probs[d] = probit(fitted)

    ranges = {
        name: (float(c.min()), float(c.max()))
        for name, c in zip(matrix.columns, matrix.X_raw.T)
    }
    return BartModel(
        config=config,
        columns=list(matrix.columns),
        standardization=matrix.standardization,
        observed_ranges=ranges,
        draws=draws,
        fitted_probs=fitted_probs,
    )


def predict_bart(model: BartModel, rows: np.ndarray) -> np.ndarray:
    """Posterior predictive probability draws for covariate rows.

    ``rows`` is (n, p) on the original covariate scale, columns ordered
    as ``model.columns``; the model's stored standardization is applied
    before tree evaluation. Returns an (n, n_draws) array of
    probabilities.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != len(model.columns):
        raise SchemaError(
            f"expected {len(model.columns)} covariate columns ({model.columns})"
        )
    X = _apply_standardization(rows, model.columns, model.standardization)
    out = np.empty((rows.shape[0], model.n_draws))
    for d, forest in enumerate(model.draws):
        out[:, d] = probit(forest.evaluate(X))
    return out


def predict_frame(model: BartModel, frame: dict) -> np.ndarray:
    """predict_bart over a mapping of column name -> value array."""
    missing = [c for c in model.columns if c not in frame]
    if missing:
        raise SchemaError(f"missing covariate columns: {missing}")
    rows = np.column_stack([np.asarray(frame[c], dtype=float) for c in model.columns])
    return predict_bart(model, rows)


# ---------------------------------------------------------------------------
# Model artifact I/O

ARTIFACT_FORMAT = "bartsdm-model"
ARTIFACT_VERSION = 1


def save_model(model: BartModel, path) -> None:
    """Write a self-describing JSON artifact; load_model inverts it bit-exactly."""
    payload = {
        "format": ARTIFACT_FORMAT,
        "version": ARTIFACT_VERSION,
        "config": model.config.to_dict(),
        "columns": model.columns,
        "standardization": None
        if model.standardization is None
        else {"mean": model.standardization.mean, "sd": model.standardization.sd},
        "observed_ranges": {k: list(v) for k, v in model.observed_ranges.items()},
        "cutoff": model.cutoff,
        "draws": [forest.to_payload() for forest in model.draws],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, separators=(",", ":"))


def load_model(path) -> BartModel:
    """Read a model artifact written by save_model."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != ARTIFACT_FORMAT:
        raise SchemaError("not a model artifact")
    if payload.get("version") != ARTIFACT_VERSION:
        raise SchemaError(f"unsupported artifact version {payload.get('version')}")
    std = payload["standardization"]
    return BartModel(
        config=SamplerConfig.from_dict(payload["config"]),
        columns=list(payload["columns"]),
        standardization=None
        if std is None
        else StandardizationParams(dict(std["mean"]), dict(std["sd"])),
        observed_ranges={k: tuple(v) for k, v in payload["observed_ranges"].items()},
        draws=[FlatForest.from_payload(p) for p in payload["draws"]],
        cutoff=payload.get("cutoff"),
    )
