"""Link functions for the binary-regression building block.

A link maps the linear index u = x'theta to a probability. Each family
carries the map itself together with its first two derivatives, which the
optimizer and the influence-function machinery both need. Probabilities are
clamped to [EPS_LINK, 1 - EPS_LINK] before they enter any ratio; clamped
evaluations are counted and the count is surfaced in fit diagnostics.

The exponential family 1 - exp(-u) is only a distribution function for
u > 0; evaluations at u <= 0 clamp the probability to EPS_LINK (flagged)
while the derivatives keep their smooth continuation so a fit started in the
invalid region still moves uphill.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, ndtr

from .errors import DataValidationError, InputError

EPS_LINK = 1e-10

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))


def _logit_cdf(u):
    return expit(u)


def _logit_pdf(u):
    p = expit(u)
    return p * (1.0 - p)


def _logit_pdf_deriv(u):
    p = expit(u)
    return p * (1.0 - p) * (1.0 - 2.0 * p)


def _cloglog_cdf(u):
    return -np.expm1(-np.exp(u))


def _cloglog_pdf(u):
    return np.exp(u - np.exp(u))


def _cloglog_pdf_deriv(u):
    return np.exp(u - np.exp(u)) * (1.0 - np.exp(u))


def _probit_cdf(u):
    return ndtr(u)


def _probit_pdf(u):
    return np.exp(-0.5 * u * u) / _SQRT_2PI


def _probit_pdf_deriv(u):
    return -u * np.exp(-0.5 * u * u) / _SQRT_2PI


def _exponential_cdf(u):
    return -np.expm1(-u)


def _exponential_pdf(u):
    return np.exp(-u)


def _exponential_pdf_deriv(u):
    return -np.exp(-u)


_FAMILIES = {
    "logit": (_logit_cdf, _logit_pdf, _logit_pdf_deriv),
    "cloglog": (_cloglog_cdf, _cloglog_pdf, _cloglog_pdf_deriv),
    "probit": (_probit_cdf, _probit_pdf, _probit_pdf_deriv),
    "exponential": (_exponential_cdf, _exponential_pdf, _exponential_pdf_deriv),
}

LINK_NAMES = tuple(_FAMILIES)


@dataclass(frozen=True)
class LinkFamily:
    """A strictly increasing map onto [0,1] with its first two derivatives."""

    kind: str

    def eval(self, u):
        """Raw (unclamped) probability at index u."""
        return _FAMILIES[self.kind][0](np.asarray(u, dtype=float))

    def deriv(self, u):
        return _FAMILIES[self.kind][1](np.asarray(u, dtype=float))

    def deriv2(self, u):
        return _FAMILIES[self.kind][2](np.asarray(u, dtype=float))

    def evaluate(self, u):
        """Clamped working evaluation.

        Returns (p, s, s2, n_clamped): probability clamped into
        [EPS_LINK, 1 - EPS_LINK], first derivative, second derivative, and
        the number of entries the clamp touched.
        """
        u = np.asarray(u, dtype=float)
        raw = self.eval(u)
        p = np.clip(raw, EPS_LINK, 1.0 - EPS_LINK)
        n_clamped = int(np.count_nonzero((raw < EPS_LINK) | (raw > 1.0 - EPS_LINK)))
        return p, self.deriv(u), self.deriv2(u), n_clamped


_INSTANCES = {kind: LinkFamily(kind) for kind in _FAMILIES}


def get_link(kind: str) -> LinkFamily:
    """Look up a link family by name: logit, cloglog, probit, or exponential."""
    try:
        return _INSTANCES[kind]
    except KeyError:
        raise InputError(f"unknown link {kind!r}; choose from {sorted(_FAMILIES)}") from None


def eval_link(link: LinkFamily, u: float) -> tuple[float, float, float]:
    """Scalar (probability, first derivative, second derivative) at index u."""
    if not np.isfinite(u):
        raise DataValidationError(f"link index must be finite, got {u}")
    p, s, s2, _ = link.evaluate(u)
    return float(p), float(s), float(s2)


def score_residual(link: LinkFamily, d, u):
    """Per-observation score factor (d - p) / (p (1 - p)) * s at index u.

    Multiplying by the augmented covariate vector gives the gradient of
    d log p + (1 - d) log(1 - p) with respect to the coefficients.
    """
    p, s, _, _ = link.evaluate(u)
    return (np.asarray(d, dtype=float) - p) / (p * (1.0 - p)) * s


def curvature_residual(link: LinkFamily, d, u):
    """Per-observation second-derivative factor of d log p + (1-d) log(1-p).

    Multiplying by xx' gives the per-observation Hessian contribution; it is
    the two-piece form: a second-derivative-of-the-link term plus the negated
    squared-score term.
    """
    d = np.asarray(d, dtype=float)
    p, s, s2, _ = link.evaluate(u)
    denom = p * (1.0 - p)
    return (d - p) * s2 / denom - s * s * (d / (p * p) + (1.0 - d) / ((1.0 - p) * (1.0 - p)))


def score_kernel(link: LinkFamily, d: int, xaug: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Gradient of the single-observation log-likelihood at coefficients theta.

    ``xaug`` is the intercept-augmented covariate vector (1, x')'.
    """
    xaug = np.asarray(xaug, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if xaug.shape != theta.shape:
        raise DataValidationError("xaug and theta must have the same length")
    u = float(xaug @ theta)
    return float(score_residual(link, d, u)) * xaug


def fisher_kernel(link: LinkFamily, xaug: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Information-equality kernel s(u)^2 / (p(u)(1 - p(u))) * xaug xaug'."""
    xaug = np.asarray(xaug, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if xaug.shape != theta.shape:
        raise DataValidationError("xaug and theta must have the same length")
    u = float(xaug @ theta)
    p, s, _, _ = link.evaluate(u)
    return float(s * s / (p * (1.0 - p))) * np.outer(xaug, xaug)
