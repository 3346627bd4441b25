"""Independent reference implementations used to check the package.

Everything here is deliberately brute-force (pair counting, quadrature,
direct simulation) and never calls into the code paths under test.
"""
import math

import numpy as np
from scipy.integrate import quad


def mann_whitney_auc(labels, scores):
    """AUC as the Mann-Whitney pair statistic with ties counted 1/2."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=float)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = ties = 0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1
            elif p == q:
                ties += 1
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def exhaustive_youden(labels, scores):
    """Best (cutoff, J) by scanning every candidate threshold."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=float)
    best_cut, best_j = None, -math.inf
    for cut in sorted(set(scores.tolist())):
        pred = scores >= cut
        tp = int(np.sum(pred & (labels == 1)))
        fn = int(np.sum(~pred & (labels == 1)))
        tn = int(np.sum(~pred & (labels == 0)))
        fp = int(np.sum(pred & (labels == 0)))
        j = tp / (tp + fn) + tn / (tn + fp) - 1.0
        if j > best_j:
            best_cut, best_j = cut, j
    return best_cut, best_j


def leaf_marginal_quad(residuals, sigma_mu):
    """Marginal likelihood of leaf residuals with the leaf value integrated out."""
    residuals = np.asarray(residuals, dtype=float)

    def integrand(mu):
        lik = np.prod(np.exp(-0.5 * (residuals - mu) ** 2) / math.sqrt(2 * math.pi))
        prior = math.exp(-0.5 * (mu / sigma_mu) ** 2) / (sigma_mu * math.sqrt(2 * math.pi))
        return lik * prior

    val, _ = quad(integrand, -12 * sigma_mu - 12, 12 * sigma_mu + 12, limit=200)
    return val


def leaf_posterior_quad(residual_sum, n, sigma_mu):
    """Posterior mean/variance of a leaf value by quadrature.

    The likelihood depends on the residuals only through (n, sum), so a
    synthetic residual vector with the right sum is enough.
    """
    if n == 0:
        return 0.0, sigma_mu * sigma_mu
    rbar = residual_sum / n
    residuals = np.full(n, rbar)
    peak = np.sum(residuals**2)  # keep the weight scaled away from underflow

    def weight(mu):
        return math.exp(
            -0.5 * (np.sum((residuals - mu) ** 2) - peak) - 0.5 * (mu / sigma_mu) ** 2
        )

    # the posterior peak sits between the prior mean 0 and rbar; hint it
    lo, hi = min(0.0, rbar) - 12.0, max(0.0, rbar) + 12.0
    hints = [0.0, rbar]
    z, _ = quad(weight, lo, hi, limit=400, points=hints)
    m1, _ = quad(lambda mu: mu * weight(mu), lo, hi, limit=400, points=hints)
    m2, _ = quad(lambda mu: mu * mu * weight(mu), lo, hi, limit=400, points=hints)
    mean = m1 / z
    return mean, m2 / z - mean * mean


def simulate_prior_depths(n_trees, alpha, beta, rng):
    """Depths of trees drawn directly from the branching prior."""
    depths = np.empty(n_trees, dtype=int)
    for i in range(n_trees):
        frontier = [0]
        max_depth = 0
        while frontier:
            d = frontier.pop()
            if rng.random() < alpha * (1.0 + d) ** (-beta):
                frontier.extend((d + 1, d + 1))
            else:
                max_depth = max(max_depth, d)
        depths[i] = max_depth
    return depths


def depth_histogram(depths, max_bucket=4):
    """Proportions at depth 0..max_bucket-1 plus a >=max_bucket bucket."""
    depths = np.asarray(depths)
    out = []
    for d in range(max_bucket):
        out.append(np.mean(depths == d))
    out.append(np.mean(depths >= max_bucket))
    return np.asarray(out)


class ScriptedRNG:
    """Deterministic stand-in for a numpy Generator, fed from queues."""

    def __init__(self, randoms=(), ints=(), normals=()):
        self.randoms = list(randoms)
        self.ints = list(ints)
        self.normals = list(normals)

    def random(self, size=None):
        if size is None:
            return self.randoms.pop(0)
        return np.array([self.randoms.pop(0) for _ in range(size)])

    def integers(self, high):
        return self.ints.pop(0)

    def standard_normal(self, size=None):
        if size is None:
            return self.normals.pop(0)
        return np.array([self.normals.pop(0) for _ in range(size)])
