"""Proportional-hazards baseline: partial likelihood, Breslow cumulative
hazard, and the implied conditional CDF / marginal effects.

The slope vector maximizes the log partial likelihood with Breslow's
handling of tied event times: tied events at a time share one risk set, and
censored observations tied with events stay in that risk set (censoring is
treated as happening after the events). The cumulative baseline hazard is
the Breslow step function, which reduces to the Nelson-Aalen estimator when
the slopes are zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularMatrixError
from .sample import CensoredSample, order_sample

PH_TOL_GRAD = 1e-8
PH_MAX_ITER = 60
PH_MAX_HALVINGS = 30


@dataclass(frozen=True)
class PhFit:
    """Fitted slopes plus the Breslow baseline step function.

    ``baseline_times`` are the distinct event times (ascending) and
    ``baseline_jumps`` the hazard increments there; the cumulative baseline
    hazard at t is the sum of jumps at times <= t.
    """

    beta: np.ndarray
    baseline_times: np.ndarray
    baseline_jumps: np.ndarray
    iterations: int
    converged: bool
    grad_norm: float

    @property
    def baseline(self) -> list[tuple[float, float]]:
        return list(zip(self.baseline_times.tolist(), self.baseline_jumps.tolist()))


class _RiskSets:
    """Event groups and suffix structure for one pass of the partial likelihood."""

    def __init__(self, sample: CensoredSample):
        ordered = order_sample(sample)
        self.y = ordered.y
        self.x = ordered.x
        self.delta = ordered.delta
        event_times = self.y[self.delta == 1]
        self.times, first_of = np.unique(event_times, return_index=True)
        self.counts = np.diff(np.concatenate([first_of, [event_times.size]]))
        # Risk set at event time v is {i : y_i >= v}; with the durations
        # sorted ascending that is a suffix, located by value.
        self.risk_start = np.searchsorted(self.y, self.times, side="left")
        event_mask = self.delta == 1
        self.event_x_sums = np.zeros((self.times.size, sample.k))
        grp = np.searchsorted(self.times, self.y[event_mask])
        np.add.at(self.event_x_sums, grp, self.x[event_mask])

    def loglik_parts(self, beta: np.ndarray):
        eta = self.x @ beta
        shift = float(eta.max())
        e = np.exp(eta - shift)
        ex = e[:, None] * self.x
        exx = ex[:, :, None] * self.x[:, None, :]
        # Suffix sums over the sorted sample, indexed by risk-set start.
        s0 = np.concatenate([np.cumsum(e[::-1])[::-1], [0.0]])[self.risk_start]
        s1 = np.concatenate([np.cumsum(ex[::-1], axis=0)[::-1], np.zeros((1, ex.shape[1]))])[self.risk_start]
        s2 = np.concatenate([np.cumsum(exx[::-1], axis=0)[::-1], np.zeros((1,) + exx.shape[1:])])[self.risk_start]
        d = self.counts.astype(float)
        loglik = float(np.sum(self.event_x_sums @ beta) - d @ (np.log(s0) + shift))
        mean1 = s1 / s0[:, None]
        grad = self.event_x_sums.sum(axis=0) - d @ mean1
        hess = -(np.einsum("j,jab->ab", d, s2 / s0[:, None, None])
                 - np.einsum("j,ja,jb->ab", d, mean1, mean1))
        return loglik, grad, hess

    def baseline_jumps(self, beta: np.ndarray) -> np.ndarray:
        eta = self.x @ beta
        shift = float(eta.max())
        e = np.exp(eta - shift)
        s0 = np.concatenate([np.cumsum(e[::-1])[::-1], [0.0]])[self.risk_start]
        return self.counts / (s0 * np.exp(shift))


def fit_ph(sample: CensoredSample) -> PhFit:
    """Newton maximization of the Breslow-tie log partial likelihood.

    A monotone likelihood (separation) ends with ``converged=False``; a
    collinear design raises SingularMatrixError.
    """
    cols = sample.x - sample.x.mean(axis=0)
    if np.linalg.matrix_rank(cols.T @ cols) < sample.k:
        raise SingularMatrixError("covariate columns are collinear; the partial-"
                                  "likelihood information matrix is singular")
    rs = _RiskSets(sample)
    beta = np.zeros(sample.k)
    loglik, grad, hess = rs.loglik_parts(beta)
    converged = False
    iterations = 0
    while iterations < PH_MAX_ITER:
        if np.max(np.abs(grad)) <= PH_TOL_GRAD:
            converged = True
            break
        iterations += 1
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            raise SingularMatrixError("singular information matrix in the partial-"
                                      "likelihood fit") from None
        lam = 1.0
        accepted = None
        for _ in range(PH_MAX_HALVINGS + 1):
            cand = beta + lam * step
            c_loglik, c_grad, c_hess = rs.loglik_parts(cand)
            if c_loglik >= loglik - 1e-14 * (1.0 + abs(loglik)):
                accepted = (cand, c_loglik, c_grad, c_hess)
                break
            lam *= 0.5
        if accepted is None:
            break
        rel_change = abs(accepted[1] - loglik) / (abs(loglik) + 1e-12)
        beta, loglik, grad, hess = accepted
        if rel_change <= 1e-13 and np.max(np.abs(grad)) <= 1e-6:
            converged = True
            break
    # A monotone likelihood (separation) also makes the gradient vanish, but
    # only as the linear predictor runs away (fitted relative risks spanning
    # more than e^15 are a runaway, not an estimate); flag as non-convergence.
    eta = sample.x @ beta
    if float(eta.max() - eta.min()) > 15.0:
        converged = False
    return PhFit(beta=beta, baseline_times=rs.times, baseline_jumps=rs.baseline_jumps(beta),
                 iterations=iterations, converged=converged,
                 grad_norm=float(np.max(np.abs(grad))))


def cumulative_baseline(fit: PhFit, t) -> np.ndarray:
    """Breslow cumulative baseline hazard at t (vectorized, step function)."""
    ts = np.asarray(t, dtype=float)
    cum = np.concatenate([[0.0], np.cumsum(fit.baseline_jumps)])
    return cum[np.searchsorted(fit.baseline_times, ts, side="right")]


def ph_cdf(fit: PhFit, x: np.ndarray, t: float) -> float:
    """Model-implied P(T <= t | X = x) = 1 - exp(-Lambda0(t) exp(x'beta))."""
    lam = float(cumulative_baseline(fit, t))
    return float(-np.expm1(-lam * np.exp(float(np.asarray(x, dtype=float) @ fit.beta))))


def ph_adme(fit: PhFit, sample: CensoredSample, t: float) -> np.ndarray:
    """Average derivative of the model-implied CDF in each covariate at t."""
    lam = float(cumulative_baseline(fit, t))
    risk = lam * np.exp(sample.x @ fit.beta)
    return fit.beta * float(np.mean(risk * np.exp(-risk)))
