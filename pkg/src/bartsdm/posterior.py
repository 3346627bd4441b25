"""Order-statistic summaries of posterior predictive draws.

Quantiles are exact order statistics of the stored draws: for level q
over n draws the ceil(q*n)-th smallest value is returned, and the median
is the lower-midpoint statistic for even n. This keeps every summary a
value that actually occurred in the sample.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import ParameterError

DEFAULT_QUANTILES = (0.025, 0.975)


def order_statistic(sorted_draws: np.ndarray, q: float) -> np.ndarray:
    """q-quantile along the last axis of an already-sorted array."""
    if not 0.0 <= q <= 1.0:
        raise ParameterError("quantile level must be in [0, 1]")
    n = sorted_draws.shape[-1]
    idx = min(max(math.ceil(q * n) - 1, 0), n - 1)
    return sorted_draws[..., idx]


def summarize_draws(draws: np.ndarray, quantiles=DEFAULT_QUANTILES) -> dict:
    """Mean, median and quantile bounds over the draw axis (last axis)."""
    draws = np.asarray(draws, dtype=float)
    ordered = np.sort(draws, axis=-1)
    lo, hi = quantiles
    return {
        "mean": draws.mean(axis=-1),
        "median": order_statistic(ordered, 0.5),
        "q025": order_statistic(ordered, lo),
        "q975": order_statistic(ordered, hi),
    }
