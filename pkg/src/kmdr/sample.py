"""Ingestion and ordering of right-censored duration samples.

An observation is a triple (y, delta, x): the observed duration
y = min(event time, censoring time), the event indicator delta
(1 = the event was observed, 0 = right-censored), and a covariate vector x.
Estimation downstream works on the sample sorted by duration with events
placed before censorings at tied durations; `order_sample` produces that
view together with the covariate/indicator values carried along with each
order statistic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataValidationError, EmptyInputError, SchemaError


@dataclass(frozen=True)
class CensoredObservation:
    """One observation: duration y >= 0, event indicator delta in {0,1}, covariates x."""

    y: float
    delta: int
    x: np.ndarray


@dataclass(frozen=True)
class CensoredSample:
    """A validated sample of n observations with k covariates, array-backed.

    ``y`` has shape (n,), ``delta`` shape (n,) with values in {0,1}, and
    ``x`` shape (n, k). Row order is whatever the source provided.
    Instances are immutable; the arrays are set non-writeable on construction.
    """

    y: np.ndarray
    delta: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        delta = np.asarray(self.delta, dtype=np.int64)
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        if x.shape[0] != y.shape[0] and x.shape[1] == y.shape[0]:
            x = x.T
        if y.ndim != 1 or delta.shape != y.shape or x.shape[0] != y.shape[0]:
            raise DataValidationError("y, delta, x must agree on the number of observations")
        if y.shape[0] == 0:
            raise EmptyInputError("sample contains no observations")
        _validate_columns(y, delta, x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "x", x)
        for arr in (y, delta, x):
            arr.flags.writeable = False

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def k(self) -> int:
        return self.x.shape[1]

    @property
    def observations(self) -> list[CensoredObservation]:
        return [
            CensoredObservation(float(self.y[i]), int(self.delta[i]), self.x[i])
            for i in range(self.n)
        ]


@dataclass(frozen=True)
class OrderedSample:
    """A CensoredSample viewed through the duration ordering.

    ``order`` is the permutation (0-based row indices into the source sample)
    that sorts durations ascending; at tied durations events (delta = 1) come
    before censorings, and within the same (y, delta) group source order is
    preserved. ``y``, ``delta`` and ``x`` hold the reordered values, so
    ``delta[i]`` and ``x[i]`` are the indicator/covariates attached to the
    i-th smallest duration.
    """

    order: np.ndarray
    y: np.ndarray
    delta: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        for arr in (self.order, self.y, self.delta, self.x):
            arr.flags.writeable = False

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def k(self) -> int:
        return self.x.shape[1]


def _validate_columns(y: np.ndarray, delta: np.ndarray, x: np.ndarray) -> None:
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        raise DataValidationError(f"non-finite duration in row {bad[0]}")
    bad = np.flatnonzero(y < 0)
    if bad.size:
        raise DataValidationError(f"negative duration {y[bad[0]]} in row {bad[0]}")
    bad = np.flatnonzero((delta != 0) & (delta != 1))
    if bad.size:
        raise DataValidationError(f"event indicator {delta[bad[0]]} not in {{0,1}} in row {bad[0]}")
    bad = np.flatnonzero(~np.isfinite(x).all(axis=1))
    if bad.size:
        raise DataValidationError(f"non-finite covariate in row {bad[0]}")
    if not (delta == 1).any():
        raise DataValidationError("no uncensored observations: nothing is estimable")


def load_csv(
    path: str,
    duration_col: str,
    event_col: str,
    covariate_cols: list[str],
) -> CensoredSample:
    """Read a comma-delimited UTF-8 file with a header row into a CensoredSample.

    Raises SchemaError when a named column is absent, EmptyInputError when
    there are no data rows, and DataValidationError (citing the offending
    0-based data row) when a value cannot be parsed or violates its contract.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyInputError(f"{path}: file is empty")
        missing = [c for c in [duration_col, event_col, *covariate_cols] if c not in reader.fieldnames]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {missing}")
        y_rows, d_rows, x_rows = [], [], []
        for i, row in enumerate(reader):
            try:
                y_rows.append(float(row[duration_col]))
            except (TypeError, ValueError):
                raise DataValidationError(
                    f"{path}: row {i}: cannot parse duration {row[duration_col]!r}"
                ) from None
            d_raw = row[event_col]
            try:
                d_val = float(d_raw)
            except (TypeError, ValueError):
                raise DataValidationError(
                    f"{path}: row {i}: cannot parse event indicator {d_raw!r}"
                ) from None
            if d_val not in (0.0, 1.0):
                raise DataValidationError(
                    f"{path}: row {i}: event indicator {d_raw!r} not in {{0,1}}"
                )
            d_rows.append(int(d_val))
            try:
                x_rows.append([float(row[c]) for c in covariate_cols])
            except (TypeError, ValueError):
                raise DataValidationError(f"{path}: row {i}: cannot parse covariate") from None
    if not y_rows:
        raise EmptyInputError(f"{path}: no data rows")
    y = np.array(y_rows, dtype=float)
    delta = np.array(d_rows, dtype=np.int64)
    x = np.array(x_rows, dtype=float).reshape(len(y_rows), len(covariate_cols))
    try:
        return CensoredSample(y=y, delta=delta, x=x)
    except DataValidationError as exc:
        raise DataValidationError(f"{path}: {exc}") from None


def order_sample(sample: CensoredSample) -> OrderedSample:
    """Sort a sample by duration, events before censorings at ties, stably.

    The permutation is a bijection: the multiset of (y, delta, x) triples is
    preserved, only their order changes.
    """
    # lexsort keys: last key is primary. Sorting -delta within equal y puts
    # events (delta=1) first; lexsort is stable, so source order breaks the
    # remaining ties.
    order = np.lexsort((-sample.delta, sample.y))
    return OrderedSample(
        order=order.copy(),
        y=sample.y[order],
        delta=sample.delta[order],
        x=sample.x[order],
    )
