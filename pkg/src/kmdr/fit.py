"""Weighted binary-regression fits across a grid of duration thresholds.

For a threshold t, each observation contributes an indicator d = 1{y <= t}
and the jump weight from `kaplan_meier`. The coefficient vector at t
maximizes

    sum_i  w_i * [ d_i log p(u_i) + (1 - d_i) log(1 - p(u_i)) ],
    u_i = (1, x_i')' theta,

via Newton steps with an analytic Hessian, step-halving, and a
Fisher-scoring fallback when the Hessian is not usable. Fitting the whole
grid yields the per-threshold coefficient path together with curvature
matrices and convergence diagnostics.

Sign convention: the ``hessian`` stored per threshold is the NEGATED second
derivative of the weighted log-likelihood, i.e. it is positive definite at
an interior maximum. That is the matrix the inference module inverts.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DataValidationError, DegenerateGridError, FitFailedError, InputError
from .kaplan_meier import KaplanMeierWeights, km_cdf_many, km_quantile
from .links import LinkFamily

TOL_GRAD = 1e-8
TOL_OBJ_REL = 1e-12
MAX_ITER = 100
MAX_HALVINGS = 30
EPS_GRID = 0.01


@dataclass(frozen=True)
class GridSpec:
    """Threshold grid request: explicit values, or equidistant points
    between two quantiles of the estimated duration distribution."""

    explicit: np.ndarray | None = None
    quantiles: tuple[float, float, int] | None = None

    def __post_init__(self):
        if (self.explicit is None) == (self.quantiles is None):
            raise InputError("grid spec needs exactly one of explicit values or quantiles")
        if self.quantiles is not None:
            lo, hi, count = self.quantiles
            if not (0.0 < lo < hi < 1.0):
                raise InputError(f"quantile bounds must satisfy 0 < lo < hi < 1, got {lo}, {hi}")
            if count < 1:
                raise InputError("quantile grid needs at least one point")


@dataclass(frozen=True)
class ThresholdGrid:
    """Strictly increasing duration thresholds."""

    thresholds: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.thresholds, dtype=float)
        if ts.ndim != 1 or ts.size == 0:
            raise DegenerateGridError("grid must hold at least one threshold")
        if not (np.diff(ts) > 0).all():
            raise InputError("grid thresholds must be strictly increasing")
        object.__setattr__(self, "thresholds", ts)
        ts.flags.writeable = False

    def __len__(self) -> int:
        return self.thresholds.size


def build_grid(weights: KaplanMeierWeights, spec: GridSpec) -> ThresholdGrid:
    """Materialize a grid and trim thresholds too close to the CDF boundary.

    A threshold survives when the renormalized estimated CDF at it lies in
    [EPS_GRID, 1 - EPS_GRID]; renormalization divides by the total estimated
    mass so heavily censored samples are trimmed on the same scale.
    Raises DegenerateGridError when nothing survives.
    """
    if spec.explicit is not None:
        candidate = np.asarray(spec.explicit, dtype=float)
        if not (np.diff(candidate) > 0).all():
            raise InputError("explicit grid must be strictly increasing")
    else:
        lo, hi, count = spec.quantiles
        t_lo = km_quantile(weights, lo)
        t_hi = km_quantile(weights, hi)
        candidate = np.linspace(t_lo, t_hi, count)
    mass = weights.total_mass
    scaled = km_cdf_many(weights, candidate) / mass
    keep = (scaled >= EPS_GRID) & (scaled <= 1.0 - EPS_GRID)
    kept = np.unique(candidate[keep])
    if kept.size == 0:
        raise DegenerateGridError("no threshold survives trimming; the estimated "
                                  "distribution is too concentrated")
    return ThresholdGrid(thresholds=kept)


@dataclass(frozen=True)
class ThresholdFit:
    """Coefficients and diagnostics of a single-threshold fit."""

    t: float
    theta: np.ndarray
    hessian: np.ndarray
    fisher: np.ndarray
    iterations: int
    grad_norm: float
    converged: bool
    clamp_count: int
    skipped: bool = False


@dataclass(frozen=True)
class DrCoefficientPath:
    """Per-threshold coefficients over a grid, with curvature and diagnostics.

    ``theta`` has shape (p, k+1) with the intercept first; ``hessian`` and
    ``fisher`` have shape (p, k+1, k+1). Thresholds that were skipped
    (degenerate weighted event frequency) or failed carry NaN rows and
    ``converged[j] = False``.
    """

    link_kind: str
    grid: ThresholdGrid
    theta: np.ndarray
    hessian: np.ndarray
    fisher: np.ndarray
    iterations: np.ndarray
    grad_norm: np.ndarray
    converged: np.ndarray
    clamp_count: np.ndarray
    skipped: np.ndarray

    @property
    def n_thresholds(self) -> int:
        return len(self.grid)

    @property
    def k(self) -> int:
        return self.theta.shape[1] - 1

    @property
    def ok(self) -> np.ndarray:
        """Mask of thresholds with a usable (converged, not skipped) fit."""
        return self.converged & ~self.skipped


def _design(weights: KaplanMeierWeights) -> np.ndarray:
    x = weights.ordered.x
    return np.hstack([np.ones((x.shape[0], 1)), x])


def _loglik_parts(xa, d, w, link, theta):
    """Objective, gradient, raw Hessian (d^2 of the objective) and clamp count."""
    u = xa @ theta
    p, s, s2, n_clamped = link.evaluate(u)
    obj = float(w @ np.where(d == 1.0, np.log(p), np.log1p(-p)))
    denom = p * (1.0 - p)
    r = (d - p) / denom * s
    grad = xa.T @ (w * r)
    c = (d - p) * s2 / denom - s * s * (d / (p * p) + (1.0 - d) / ((1.0 - p) * (1.0 - p)))
    hess = (xa * (w * c)[:, None]).T @ xa
    return obj, grad, hess, n_clamped


def _fisher_matrix(xa, link, theta):
    """Unweighted information-equality estimate (1/n) sum s^2/(p(1-p)) x x'."""
    u = xa @ theta
    p, s, _, _ = link.evaluate(u)
    g = s * s / (p * (1.0 - p))
    return (xa * (g / xa.shape[0])[:, None]).T @ xa


def _weighted_fisher(xa, d, w, link, theta):
    u = xa @ theta
    p, s, _, _ = link.evaluate(u)
    g = w * s * s / (p * (1.0 - p))
    return (xa * g[:, None]).T @ xa


def objective(weights: KaplanMeierWeights, link: LinkFamily, t: float, theta: np.ndarray) -> float:
    """Weighted log-likelihood at threshold t and coefficients theta; always <= 0."""
    xa = _design(weights)
    d = (weights.ordered.y <= t).astype(float)
    obj, _, _, _ = _loglik_parts(xa, d, weights.w, link, np.asarray(theta, dtype=float))
    return obj


def objective_gradient(weights: KaplanMeierWeights, link: LinkFamily, t: float,
                       theta: np.ndarray) -> np.ndarray:
    """Gradient of `objective` with respect to theta."""
    xa = _design(weights)
    d = (weights.ordered.y <= t).astype(float)
    _, grad, _, _ = _loglik_parts(xa, d, weights.w, link, np.asarray(theta, dtype=float))
    return grad


def objective_hessian(weights: KaplanMeierWeights, link: LinkFamily, t: float,
                      theta: np.ndarray) -> np.ndarray:
    """Second derivative matrix of `objective` with respect to theta."""
    xa = _design(weights)
    d = (weights.ordered.y <= t).astype(float)
    _, _, hess, _ = _loglik_parts(xa, d, weights.w, link, np.asarray(theta, dtype=float))
    return hess


def _solve_direction(grad, hess, xa, d, w, link, theta):
    """Ascent direction: Newton if the Hessian cooperates, else Fisher scoring."""
    try:
        step = np.linalg.solve(hess, -grad)
        if float(grad @ step) > 0.0:
            return step, False
    except np.linalg.LinAlgError:
        pass
    try:
        fw = _weighted_fisher(xa, d, w, link, theta)
        step = np.linalg.solve(fw, grad)
        if float(grad @ step) > 0.0:
            return step, True
    except np.linalg.LinAlgError:
        pass
    return None, True


def _fit_one(xa, y, w, link, t, init):
    m = xa.shape[1]
    d = (y <= t).astype(float)

    active = w > 0
    d_active = d[active]
    if d_active.size == 0 or not d_active.any() or d_active.all():
        # Weighted event frequency is exactly 0 or 1: there is no interior
        # maximizer, so flag and skip rather than chase a diverging fit.
        nan_vec = np.full(m, np.nan)
        nan_mat = np.full((m, m), np.nan)
        return ThresholdFit(t=float(t), theta=nan_vec, hessian=nan_mat, fisher=nan_mat,
                            iterations=0, grad_norm=np.nan, converged=False,
                            clamp_count=0, skipped=True)

    if init is not None:
        theta = np.asarray(init, dtype=float).copy()
    else:
        theta = np.zeros(m)
        if link.kind == "exponential":
            # Zero sits on this link's domain boundary where the clamp makes
            # the objective flat; start at the intercept-only solution instead.
            freq = float(w @ d) / float(np.sum(w))
            theta[0] = -np.log1p(-freq)
    clamps = 0
    obj, grad, hess, ncl = _loglik_parts(xa, d, w, link, theta)
    clamps += ncl
    converged = False
    iterations = 0

    while iterations < MAX_ITER:
        if np.max(np.abs(grad)) <= TOL_GRAD:
            converged = True
            break
        iterations += 1
        step, used_fisher = _solve_direction(grad, hess, xa, d, w, link, theta)
        if step is None:
            break
        accepted = None
        tried_fisher = used_fisher
        while True:
            lam = 1.0
            for _ in range(MAX_HALVINGS + 1):
                cand = theta + lam * step
                c_obj, c_grad, c_hess, c_ncl = _loglik_parts(xa, d, w, link, cand)
                clamps += c_ncl
                if c_obj >= obj - 1e-14 * (1.0 + abs(obj)):
                    accepted = (cand, c_obj, c_grad, c_hess)
                    break
                lam *= 0.5
            if accepted is not None or tried_fisher:
                break
            # Newton direction made no progress at any step length; retry the
            # iteration with the always-ascent Fisher direction.
            try:
                fw = _weighted_fisher(xa, d, w, link, theta)
                step = np.linalg.solve(fw, grad)
                tried_fisher = True
            except np.linalg.LinAlgError:
                break
        if accepted is None:
            break
        rel_change = abs(accepted[1] - obj) / (abs(obj) + 1e-12)
        theta, obj, grad, hess = accepted
        if rel_change <= TOL_OBJ_REL:
            converged = True
            break

    sigma = -hess
    fisher = _fisher_matrix(xa, link, theta)
    return ThresholdFit(t=float(t), theta=theta, hessian=sigma, fisher=fisher,
                        iterations=iterations, grad_norm=float(np.max(np.abs(grad))),
                        converged=converged, clamp_count=clamps, skipped=False)


def fit_threshold(weights: KaplanMeierWeights, link: LinkFamily, t: float,
                  init: np.ndarray | None = None) -> ThresholdFit:
    """Fit the weighted binary regression at a single threshold.

    Non-convergence after MAX_ITER leaves ``converged=False`` with the last
    iterate still reported; a degenerate weighted event frequency (exactly 0
    or 1) marks the threshold ``skipped`` with NaN coefficients.
    """
    if np.isnan(t):
        raise DataValidationError("threshold t must not be NaN")
    xa = _design(weights)
    return _fit_one(xa, weights.ordered.y, weights.w, link, t, init)


def fit_path(weights: KaplanMeierWeights, link: LinkFamily, grid: ThresholdGrid,
             warm_start: bool = True, n_workers: int = 1) -> DrCoefficientPath:
    """Fit every threshold of a grid.

    With ``warm_start`` (sequential, the default) each threshold starts from
    the previous usable solution, which cuts iterations sharply since the
    path is typically smooth in t. With ``warm_start=False`` every threshold
    starts from zeros and thresholds may be fit concurrently; results are
    identical for any ``n_workers``. Raises FitFailedError only if no
    threshold produced a usable fit.
    """
    xa = _design(weights)
    y = weights.ordered.y
    ts = grid.thresholds
    fits: list[ThresholdFit | None] = [None] * len(ts)

    if warm_start:
        init = None
        for j, t in enumerate(ts):
            fit = _fit_one(xa, y, weights.w, link, t, init)
            fits[j] = fit
            if fit.converged and not fit.skipped:
                init = fit.theta
    elif n_workers > 1:
        def run(j):
            fits[j] = _fit_one(xa, y, weights.w, link, ts[j], None)
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(run, range(len(ts))))
    else:
        for j, t in enumerate(ts):
            fits[j] = _fit_one(xa, y, weights.w, link, t, None)

    m = xa.shape[1]
    path = DrCoefficientPath(
        link_kind=link.kind,
        grid=grid,
        theta=np.stack([f.theta for f in fits]).reshape(len(ts), m),
        hessian=np.stack([f.hessian for f in fits]).reshape(len(ts), m, m),
        fisher=np.stack([f.fisher for f in fits]).reshape(len(ts), m, m),
        iterations=np.array([f.iterations for f in fits], dtype=np.int64),
        grad_norm=np.array([f.grad_norm for f in fits]),
        converged=np.array([f.converged for f in fits], dtype=bool),
        clamp_count=np.array([f.clamp_count for f in fits], dtype=np.int64),
        skipped=np.array([f.skipped for f in fits], dtype=bool),
    )
    if not path.ok.any():
        raise FitFailedError("every threshold fit failed or was skipped")
    return path


def grid_index(grid: ThresholdGrid, t: float) -> int:
    """Index of t in the grid; exact match required (no interpolation)."""
    hits = np.flatnonzero(grid.thresholds == float(t))
    if hits.size == 0:
        raise InputError(f"threshold {t} is not a grid point; estimates are "
                         "defined per-threshold only")
    return int(hits[0])


def predict_cdf(path: DrCoefficientPath, link: LinkFamily, x: np.ndarray, t: float) -> float:
    """Model-implied P(T <= t | X = x) at a grid threshold."""
    j = grid_index(path.grid, t)
    x = np.asarray(x, dtype=float).ravel()
    if x.size != path.k:
        raise DataValidationError(f"x has {x.size} coordinates, model expects {path.k}")
    u = float(path.theta[j] @ np.concatenate(([1.0], x)))
    p, _, _, _ = link.evaluate(u)
    return float(p)
