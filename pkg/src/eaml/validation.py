"""Input validation helpers shared across estimators."""

from __future__ import annotations

import numpy as np


class DataError(ValueError):
    """Raised when input data violates a contract (bad labels, schema, shapes)."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver exhausts its iteration budget.

    Carries the objective trace so callers can inspect the failure.
    """

    def __init__(self, message, loss_trace=None):
        super().__init__(message)
        self.loss_trace = list(loss_trace) if loss_trace is not None else []


def as_float_matrix(X, name="X"):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError(f"{name} must be 2-dimensional, got shape {X.shape}")
    return X


def check_binary_labels(y, n=None):
    y = np.asarray(y)
    if y.ndim != 1:
        raise DataError(f"labels must be 1-dimensional, got shape {y.shape}")
    if n is not None and len(y) != n:
        raise DataError(f"label length {len(y)} does not match {n} rows")
    values = np.unique(y)
    if not np.all(np.isin(values, [0, 1])):
        raise DataError(f"labels must be in {{0, 1}}, found {values}")
    return y.astype(np.int8)


def check_both_classes(y, context=""):
    y = np.asarray(y)
    if len(np.unique(y)) < 2:
        where = f" in {context}" if context else ""
        raise DataError(f"both outcome classes must be present{where}")
    return y


def check_fraction(value, name):
    if not 0.0 < value < 1.0:
        raise DataError(f"{name} must lie strictly between 0 and 1, got {value}")
    return float(value)
