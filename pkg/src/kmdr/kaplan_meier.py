"""Product-limit jump weights and the CDF estimators built from them.

With the sample ordered by duration (events first at ties), the mass the
product-limit estimator places on the i-th order statistic is

    w_i = delta_i / (n - i + 1) * prod_{j<i} (1 - delta_j / (n - j + 1)),

computed here in a single left-to-right pass with a running product (the
factors live in [0, 1], so no log transform is needed). Censored points get
zero mass; when the largest observation is censored the weights sum to less
than one and that deficit is kept as-is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataValidationError
from .sample import OrderedSample


@dataclass(frozen=True)
class KaplanMeierWeights:
    """Jump weights attached to an ordered sample.

    ``w[i]`` is the estimator's jump at the i-th smallest duration; zero for
    censored points. ``total_mass`` caches sum(w) <= 1.
    """

    ordered: OrderedSample
    w: np.ndarray

    def __post_init__(self):
        self.w.flags.writeable = False

    @property
    def n(self) -> int:
        return self.ordered.n

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.w))


def km_weights(ordered: OrderedSample) -> KaplanMeierWeights:
    """Compute the product-limit jump weights for an ordered sample in O(n)."""
    n = ordered.n
    delta = ordered.delta
    if delta.all():
        # The running product telescopes to (n - i + 1) / n, so every weight
        # is exactly 1/n; returning that directly avoids rounding drift.
        w = np.full(n, 1.0 / n)
    else:
        w = np.zeros(n)
        surv = 1.0  # prod over processed points of (1 - delta/(n-j+1))
        for i in range(n):
            at_risk = n - i
            if delta[i]:
                w[i] = surv / at_risk
                surv *= 1.0 - 1.0 / at_risk
    return KaplanMeierWeights(ordered=ordered, w=w)


def _check_threshold(t: float) -> float:
    t = float(t)
    if np.isnan(t):
        raise DataValidationError("threshold t must not be NaN")
    return t


def km_cdf(weights: KaplanMeierWeights, t: float) -> float:
    """Estimated P(T <= t): sum of jump weights at durations <= t.

    Right-continuous and nondecreasing in t; +/-inf are valid queries, NaN is
    rejected.
    """
    t = _check_threshold(t)
    hi = np.searchsorted(weights.ordered.y, t, side="right")
    return float(np.sum(weights.w[:hi]))


def km_cdf_many(weights: KaplanMeierWeights, ts: np.ndarray) -> np.ndarray:
    """Vectorized `km_cdf` over an array of thresholds."""
    ts = np.asarray(ts, dtype=float)
    if np.isnan(ts).any():
        raise DataValidationError("threshold t must not be NaN")
    cum = np.concatenate(([0.0], np.cumsum(weights.w)))
    idx = np.searchsorted(weights.ordered.y, ts, side="right")
    return cum[idx]


def km_quantile(weights: KaplanMeierWeights, p: float) -> float:
    """Left-continuous generalized inverse of the estimated CDF.

    Returns the smallest duration t with km_cdf(t) >= p. When p exceeds the
    total estimated mass (possible under censoring) the largest observed
    duration is returned; callers relying on trimming will discard it.
    """
    cum = np.cumsum(weights.w)
    idx = np.searchsorted(cum, p - 1e-12, side="left")
    if idx >= weights.n:
        return float(weights.ordered.y[-1])
    return float(weights.ordered.y[idx])


def km_multivariate(weights: KaplanMeierWeights, t: float, x: np.ndarray) -> float:
    """Estimated P(T <= t, X <= x) with "<=" coordinatewise on the covariates.

    Setting every coordinate of x to +inf recovers `km_cdf`.
    """
    t = _check_threshold(t)
    x = np.asarray(x, dtype=float)
    if x.shape != (weights.ordered.k,):
        raise DataValidationError(
            f"covariate bound has shape {x.shape}, expected ({weights.ordered.k},)"
        )
    inside = (weights.ordered.y <= t) & (weights.ordered.x <= x).all(axis=1)
    return float(np.sum(weights.w[inside]))
