"""Exceptions and small input-validation helpers shared across modules."""

from __future__ import annotations

import datetime as dt

import numpy as np
import pandas as pd


class InputError(ValueError):
    """Bad or missing input data (CLI exit code 1)."""


class NumericalError(RuntimeError):
    """A numerical routine failed (CLI exit code 2)."""


class ConvergenceError(NumericalError):
    """An iterative solver did not converge.

    Parameters
    ----------
    message : str
    objective : float, optional
        Objective value at the last iterate.
    trace : list of float, optional
        Objective (or log-likelihood) history.
    """

    def __init__(self, message, objective=None, trace=None):
        super().__init__(message)
        self.objective = objective
        self.trace = list(trace) if trace is not None else []


def as_date(value) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    if isinstance(value, pd.Timestamp):
        return value.date()
    return dt.date.fromisoformat(str(value))


def as_date_range(value) -> tuple[dt.date, dt.date]:
    """Normalise a ``(start, end)`` pair to inclusive dates."""
    start, end = value
    start, end = as_date(start), as_date(end)
    if end < start:
        raise InputError(f"date range ends before it starts: {start}..{end}")
    return start, end


def date_span(window) -> pd.DatetimeIndex:
    start, end = as_date_range(window)
    return pd.date_range(start, end, freq="D")


def check_daily_series(series, name="series") -> pd.Series:
    """Validate a ``DailySeries``: date index, strictly increasing, finite."""
    if not isinstance(series, pd.Series):
        raise InputError(f"{name} must be a pandas Series indexed by date")
    s = series.astype(float)
    if len(s) == 0:
        return pd.Series([], index=pd.DatetimeIndex([]), dtype=float)
    idx = pd.DatetimeIndex(s.index).normalize()
    s.index = idx
    if not idx.is_monotonic_increasing or idx.has_duplicates:
        raise InputError(f"{name} dates must be strictly increasing")
    if not np.all(np.isfinite(s.to_numpy())):
        raise InputError(f"{name} contains non-finite values")
    return s


def check_binary(y) -> np.ndarray:
    y = np.asarray(y)
    values = np.unique(y)
    if not set(values.tolist()) <= {0, 1}:
        raise InputError(f"labels must be 0/1, got {values.tolist()}")
    return y.astype(int)
