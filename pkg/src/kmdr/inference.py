"""Average distribution marginal effects with multiplier-bootstrap bands.

The average distribution marginal effect (ADME) at threshold t is the slope
vector times the average link derivative across the sample. Its sampling
uncertainty is driven by a per-observation linearization with three pieces:
the score term (what the estimate would fluctuate by if the coefficients
were known), plus two estimation-effect terms propagating coefficient
uncertainty through the slope and through the link derivative.

Under censoring the per-observation coefficient-score linearization is not
the plain score: each uncensored observation is inflated by a compensator
gamma0 built from the censoring pattern, and two correction terms (gamma1
for censored points, gamma2 for everyone) remove the mass distortion. All
three are sample analogues of integrals against the observed-data
distribution; denominators that hit 1 - (empirical CDF) = 0 at the largest
observation contribute zero (right-tail truncation).

Bands come from a Rademacher multiplier bootstrap: each draw perturbs the
linearization with i.i.d. +/-1 multipliers (one vector shared across all
thresholds), the simultaneous critical value is the empirical quantile of
the sup over all (threshold, covariate) cells, and pointwise intervals use
the per-cell quantiles of the same draws.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InputError, SingularMatrixError
from .fit import DrCoefficientPath, ThresholdGrid, grid_index
from .kaplan_meier import KaplanMeierWeights
from .links import LinkFamily
from .sample import CensoredSample

GAMMA0_TAIL_WARNING = 1e3


@dataclass(frozen=True)
class InfluenceSet:
    """Per-observation linearization values over a grid.

    ``zeta_theta`` has shape (p, n, k+1): coefficient-score linearization per
    threshold, rows aligned with the raw sample order. ``zeta_adme`` has
    shape (p, n, k). ``gamma0`` holds the censoring compensator at each
    observation (>= 1 everywhere). Flagged thresholds carry NaN planes.
    """

    grid: ThresholdGrid
    zeta_theta: np.ndarray
    zeta_adme: np.ndarray
    gamma0: np.ndarray
    valid: np.ndarray


@dataclass(frozen=True)
class AdmeBand:
    """ADME point estimates with pointwise and simultaneous bands.

    All band arrays have shape (p, k). The simultaneous band has constant
    half-width c_hat / sqrt(n) across cells and contains the pointwise band
    everywhere by construction.
    """

    grid: ThresholdGrid
    adme: np.ndarray
    pointwise_lo: np.ndarray
    pointwise_hi: np.ndarray
    simultaneous_lo: np.ndarray
    simultaneous_hi: np.ndarray
    alpha: float
    n_boot: int
    seed: int
    c_hat: float


def estimate_adme(path: DrCoefficientPath, link: LinkFamily, sample: CensoredSample) -> np.ndarray:
    """ADME point estimates, one k-vector per grid threshold.

    Thresholds without a usable fit get NaN entries.
    """
    xa = np.hstack([np.ones((sample.n, 1)), sample.x])
    out = np.full((path.n_thresholds, path.k), np.nan)
    for j in np.flatnonzero(path.ok):
        theta = path.theta[j]
        s = link.deriv(xa @ theta)
        out[j] = theta[1:] * float(np.mean(s))
    return out


class _SamplePrecompute:
    """Order-statistics scaffolding shared by every threshold's influence pass."""

    def __init__(self, weights: KaplanMeierWeights):
        ordered = weights.ordered
        self.order = ordered.order
        self.n = ordered.n
        self.ys = ordered.y
        self.delta_s = ordered.delta.astype(float)
        self.xa_s = np.hstack([np.ones((self.n, 1)), ordered.x])
        n = self.n
        ys = self.ys
        # Empirical CDF of the observed durations at each sorted point,
        # counting ties on both sides of the comparison.
        self.right_idx = np.searchsorted(ys, ys, side="right")
        self.left_idx = np.searchsorted(ys, ys, side="left")
        one_minus_f = 1.0 - self.right_idx / n
        self.surv = one_minus_f
        positive = one_minus_f > 0
        # Compensator exponent: mean over strictly-smaller censored points of
        # 1 / (1 - Fhat); zero beyond the right tail.
        a = np.where(positive, (1.0 - self.delta_s) / np.where(positive, one_minus_f, 1.0), 0.0)
        cum_a = np.concatenate(([0.0], np.cumsum(a)))
        self.gamma0_s = np.exp(cum_a[self.left_idx] / n)
        self.c_v = np.where(positive, (1.0 - self.delta_s) / np.where(positive, one_minus_f, 1.0) ** 2, 0.0)

    def zeta_theta_sorted(self, link: LinkFamily, theta: np.ndarray, t: float) -> np.ndarray:
        n = self.n
        d = (self.ys <= t).astype(float)
        u = self.xa_s @ theta
        p, s, _, _ = link.evaluate(u)
        r = (d - p) / (p * (1.0 - p)) * s
        g = (r * self.gamma0_s * self.delta_s)[:, None] * self.xa_s

        cum_g = np.concatenate([np.zeros((1, g.shape[1])), np.cumsum(g, axis=0)])
        total = cum_g[-1]
        suffix = total[None, :] - cum_g[self.right_idx]

        with np.errstate(invalid="ignore"):
            gamma1 = np.where(self.surv[:, None] > 0, suffix / (n * np.where(self.surv, self.surv, 1.0)[:, None]), 0.0)

        h = self.c_v[:, None] * suffix
        cum_h = np.concatenate([np.zeros((1, h.shape[1])), np.cumsum(h, axis=0)])
        gamma2 = cum_h[self.left_idx] / (n * n)

        return g + (1.0 - self.delta_s)[:, None] * gamma1 - gamma2


def influence_theta(weights: KaplanMeierWeights, link: LinkFamily,
                    path: DrCoefficientPath, t: float) -> np.ndarray:
    """Coefficient-score linearization at threshold t, rows in raw sample order."""
    j = grid_index(path.grid, t)
    if not path.ok[j]:
        raise InputError(f"threshold {t} has no usable fit")
    pre = _SamplePrecompute(weights)
    zs = pre.zeta_theta_sorted(link, path.theta[j], t)
    out = np.empty_like(zs)
    out[pre.order] = zs
    return out


def _solve_rows(sigma: np.ndarray, zeta: np.ndarray, t: float) -> np.ndarray:
    """Rows of zeta left-multiplied by sigma^{-1} (sigma symmetric)."""
    try:
        return np.linalg.solve(sigma, zeta.T).T
    except np.linalg.LinAlgError:
        raise SingularMatrixError(f"curvature matrix is singular at threshold {t}") from None


def _zeta_adme_from_theta(path, link, sample, j, zeta_theta, use_fisher):
    theta = path.theta[j]
    beta = theta[1:]
    xa = np.hstack([np.ones((sample.n, 1)), sample.x])
    u = xa @ theta
    s = link.deriv(u)
    s_bar = float(np.mean(s))
    m2 = np.mean(link.deriv2(u)[:, None] * xa, axis=0)
    sigma = path.fisher[j] if use_fisher else path.hessian[j]
    solved = _solve_rows(sigma, zeta_theta, path.grid.thresholds[j])
    centering = (s - s_bar)[:, None] * beta[None, :]
    slope_effect = s_bar * solved[:, 1:]
    curvature_effect = (solved @ m2)[:, None] * beta[None, :]
    return centering + slope_effect + curvature_effect


def influence_adme(weights: KaplanMeierWeights, link: LinkFamily, path: DrCoefficientPath,
                   sample: CensoredSample, t: float, use_fisher: bool = False) -> np.ndarray:
    """ADME linearization at threshold t: centering + slope + curvature terms.

    ``use_fisher`` swaps the negated log-likelihood Hessian for the
    information-equality matrix when propagating coefficient uncertainty.
    """
    j = grid_index(path.grid, t)
    if not path.ok[j]:
        raise InputError(f"threshold {t} has no usable fit")
    zt = influence_theta(weights, link, path, t)
    return _zeta_adme_from_theta(path, link, sample, j, zt, use_fisher)


def compute_influence(weights: KaplanMeierWeights, link: LinkFamily, path: DrCoefficientPath,
                      sample: CensoredSample, use_fisher: bool = False) -> InfluenceSet:
    """Influence values at every usable grid threshold.

    Emits a tail-weight warning when the censoring compensator is extreme
    (max gamma0 above 1e3), a sign the right tail is dominated by censoring.
    """
    pre = _SamplePrecompute(weights)
    n, m, k = sample.n, path.theta.shape[1], path.k
    p = path.n_thresholds
    zeta_theta = np.full((p, n, m), np.nan)
    zeta_adme = np.full((p, n, k), np.nan)
    valid = path.ok.copy()
    inv = np.empty(n, dtype=np.int64)
    inv[pre.order] = np.arange(n)
    for j in np.flatnonzero(valid):
        zs = pre.zeta_theta_sorted(link, path.theta[j], float(path.grid.thresholds[j]))
        zt = zs[inv]
        zeta_theta[j] = zt
        zeta_adme[j] = _zeta_adme_from_theta(path, link, sample, j, zt, use_fisher)
    gamma0 = np.empty(n)
    gamma0[pre.order] = pre.gamma0_s
    if gamma0.max() > GAMMA0_TAIL_WARNING:
        warnings.warn(
            f"censoring compensator reaches {gamma0.max():.3g}; right-tail "
            "censoring may dominate and influence values can be heavy-tailed",
            stacklevel=2,
        )
    return InfluenceSet(grid=path.grid, zeta_theta=zeta_theta, zeta_adme=zeta_adme,
                        gamma0=gamma0, valid=valid)


def _type1_quantile(sorted_vals: np.ndarray, level: float) -> float:
    """Order statistic at ceil(level * B): the classical left-continuous
    empirical quantile, deterministic for a given draw set."""
    b = sorted_vals.shape[0]
    idx = min(max(int(np.ceil(level * b)) - 1, 0), b - 1)
    return float(sorted_vals[idx])


def _rademacher_rows(seed: int, b0: int, b1: int, n: int) -> np.ndarray:
    """Multiplier rows for draws b0..b1-1, one counter-based substream per draw."""
    out = np.empty((b1 - b0, n))
    for b in range(b0, b1):
        rg = np.random.Generator(np.random.Philox(key=seed).jumped(b))
        out[b - b0] = rg.integers(0, 2, size=n) * 2.0 - 1.0
    return out


def bootstrap_bands(adme: np.ndarray, zeta_adme: np.ndarray, alpha: float, n_boot: int,
                    seed: int, grid: ThresholdGrid, n_workers: int = 1) -> AdmeBand:
    """Multiplier-bootstrap pointwise and simultaneous ADME bands.

    Each bootstrap draw reuses one Rademacher vector across all thresholds,
    forms the scaled perturbation sqrt(n) * mean(V * zeta) per cell, takes
    the sup of absolute values over all valid (threshold, covariate) cells,
    and the simultaneous critical value is the empirical (1-alpha)-quantile
    of those sups. Draw b always comes from substream b of the counter-based
    generator, so results do not depend on ``n_workers``.
    """
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must be in (0,1), got {alpha}")
    if n_boot < 100:
        raise InputError(f"need at least 100 bootstrap draws, got {n_boot}")
    adme = np.asarray(adme, dtype=float)
    p, k = adme.shape
    n = zeta_adme.shape[1]
    valid_rows = np.flatnonzero(np.isfinite(adme).all(axis=1))
    if valid_rows.size < p:
        warnings.warn(
            f"{p - valid_rows.size} flagged threshold(s) excluded from the "
            "simultaneous sup; their bands are NaN",
            stacklevel=2,
        )
    if valid_rows.size == 0:
        raise InputError("no threshold has a usable ADME estimate")

    # (n, cells): per-observation influence values for the valid cells.
    zflat = zeta_adme[valid_rows].transpose(1, 0, 2).reshape(n, valid_rows.size * k)

    abs_r = np.empty((n_boot, zflat.shape[1]))

    def fill(rng_block):
        b0, b1 = rng_block
        v = _rademacher_rows(seed, b0, b1, n)
        np.abs(v @ zflat / np.sqrt(n), out=abs_r[b0:b1])

    blocks = [(b0, min(b0 + 2048, n_boot)) for b0 in range(0, n_boot, 2048)]
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(fill, blocks))
    else:
        for blk in blocks:
            fill(blk)

    sup_draws = np.sort(abs_r.max(axis=1))
    c_hat = _type1_quantile(sup_draws, 1.0 - alpha)

    abs_r.sort(axis=0)
    idx = min(max(int(np.ceil((1.0 - alpha) * n_boot)) - 1, 0), n_boot - 1)
    c_cell = abs_r[idx].reshape(valid_rows.size, k)

    scale = 1.0 / np.sqrt(n)
    pw_lo = np.full((p, k), np.nan)
    pw_hi = np.full((p, k), np.nan)
    sim_lo = np.full((p, k), np.nan)
    sim_hi = np.full((p, k), np.nan)
    pw_lo[valid_rows] = adme[valid_rows] - c_cell * scale
    pw_hi[valid_rows] = adme[valid_rows] + c_cell * scale
    sim_lo[valid_rows] = adme[valid_rows] - c_hat * scale
    sim_hi[valid_rows] = adme[valid_rows] + c_hat * scale

    return AdmeBand(grid=grid, adme=adme, pointwise_lo=pw_lo, pointwise_hi=pw_hi,
                    simultaneous_lo=sim_lo, simultaneous_hi=sim_hi, alpha=alpha,
                    n_boot=n_boot, seed=seed, c_hat=c_hat)
