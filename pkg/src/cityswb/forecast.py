"""Additive trend + yearly seasonality forecaster.

The model is ``y(t) = g(t) + s(t) + noise`` where ``g`` is piecewise linear
with slope changes at fixed candidate changepoints and ``s`` is a Fourier
series with period 365.25 days. Given the changepoint locations every
parameter enters linearly, so fitting is a lasso-type problem: squared error
plus an L1 penalty ``1/tau * sum|delta_j|`` on the slope changes only.

Internally time is rescaled to [0, 1] over the training span and values are
standardised, so ``tau`` has the same meaning for every community.

Prediction intervals are simulated: future changepoints arrive at the
historical rate with Laplace slope changes whose scale is the mean absolute
fitted change, and Gaussian observation noise with the training residual
standard deviation is added per day.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import ConvergenceError, InputError, as_date_range, check_daily_series

YEAR_DAYS = 365.25


@dataclass
class PreparedSeries:
    """Dense daily values plus a mask of which days were actually observed."""

    values: pd.Series
    observed: np.ndarray

    def __len__(self):
        return len(self.values)


def prepare(series: pd.Series, window=None) -> PreparedSeries:
    """Interpolate gaps linearly, then take a trailing 7-day mean.

    The range is `window` trimmed to the first and last observed day inside
    it. Early days with fewer than 7 predecessors average what is available.
    """
    s = check_daily_series(series)
    if window is not None:
        start, end = as_date_range(window)
        s = s[(s.index >= pd.Timestamp(start)) & (s.index <= pd.Timestamp(end))]
    if len(s) < 2:
        raise InputError("need at least 2 observed values to prepare a series")
    full = pd.date_range(s.index[0], s.index[-1], freq="D")
    dense = s.reindex(full)
    observed = dense.notna().to_numpy()
    dense = dense.interpolate(method="linear")
    smooth = dense.rolling(7, min_periods=1).mean()
    smooth.index.name = "date"
    return PreparedSeries(values=smooth, observed=observed)


def _as_series(y) -> pd.Series:
    if isinstance(y, PreparedSeries):
        return y.values
    return check_daily_series(y, "y")


def _fourier(t_days, order):
    t_days = np.asarray(t_days, dtype=float)
    cols = []
    for n in range(1, order + 1):
        arg = 2.0 * np.pi * n * t_days / YEAR_DAYS
        cols.append(np.cos(arg))
        cols.append(np.sin(arg))
    return np.column_stack(cols) if cols else np.zeros((len(t_days), 0))


def _hinge(ts, cps):
    return np.maximum(ts[:, None] - np.asarray(cps)[None, :], 0.0)


def lasso_cd(G, c, yy, penalty, tol=1e-10, max_iter=100_000):
    """Minimise ``yy - 2 c.b + b.G.b + penalty * |b|_1`` by cyclic coordinate descent.

    Returns the solution and the objective after every sweep; the trace is
    non-increasing because each coordinate step is an exact minimisation.
    """
    p = len(c)
    beta = np.zeros(p)
    Gb = np.zeros(p)
    diag = np.diag(G).copy()
    half = 0.5 * penalty
    trace = [float(yy)]
    if p == 0:
        return beta, trace
    Gl = G.tolist()
    for _ in range(max_iter):
        max_step = 0.0
        for j in range(p):
            d = diag[j]
            if d <= 0.0:
                continue
            old = beta[j]
            rho = c[j] - Gb[j] + d * old
            if rho > half:
                new = (rho - half) / d
            elif rho < -half:
                new = (rho + half) / d
            else:
                new = 0.0
            step = new - old
            if step != 0.0:
                beta[j] = new
                Gb += step * np.asarray(Gl[j])
                max_step = max(max_step, abs(step))
        obj = float(yy - 2.0 * c @ beta + beta @ Gb + penalty * np.abs(beta).sum())
        trace.append(obj)
        if max_step <= tol:
            return beta, trace
    raise ConvergenceError(
        f"coordinate descent did not converge in {max_iter} sweeps "
        f"(objective {trace[-1]:.6g})", objective=trace[-1], trace=trace)


class TrendSeasonalityForecaster(BaseEstimator):
    """Piecewise-linear trend plus yearly Fourier seasonality.

    Parameters
    ----------
    n_changepoints : int, default=25
        Candidate slope changes, spread uniformly over the first
        ``changepoint_range`` of the training data.
    changepoint_range : float, default=0.8
    fourier_order : int, default=10
        Number of sine/cosine pairs for the 365.25-day season.
    tau : float, default=0.05
        Changepoint scale; the L1 weight on slope changes is ``1 / tau``.
    n_samples : int, default=1000
        Monte Carlo paths used for the 95% interval.
    seed : int, default=0
    tol : float, default=1e-10
        Coordinate descent stops when no coefficient moves more than this.
    max_iter : int, default=100000
    min_span_days : int, default=730
        Shortest training span accepted; yearly seasonality needs two cycles.

    Attributes
    ----------
    start_ : pandas.Timestamp
        First training day; time is measured in days from here.
    span_days_ : float
    changepoints_ : ndarray
        Changepoint positions in days since `start_`.
    intercept_, slope_ : float
        Base trend on the standardised scale (per unit of scaled time).
    deltas_ : ndarray
        Slope changes, standardised scale.
    fourier_coef_ : ndarray of shape (fourier_order, 2)
        ``(a_n, b_n)`` multiplying ``cos`` and ``sin``.
    sigma_ : float
        Training residual standard deviation in data units.
    objective_trace_ : list of float
    """

    def __init__(self, n_changepoints=25, changepoint_range=0.8, fourier_order=10,
                 tau=0.05, n_samples=1000, seed=0, tol=1e-10, max_iter=100_000,
                 min_span_days=730):
        self.n_changepoints = n_changepoints
        self.changepoint_range = changepoint_range
        self.fourier_order = fourier_order
        self.tau = tau
        self.n_samples = n_samples
        self.seed = seed
        self.tol = tol
        self.max_iter = max_iter
        self.min_span_days = min_span_days

    def _check_params(self):
        if self.fourier_order < 1:
            raise InputError("fourier_order must be >= 1")
        if not 0.0 < self.changepoint_range <= 1.0:
            raise InputError("changepoint_range must be in (0, 1]")
        if self.tau <= 0:
            raise InputError("tau must be positive")
        if self.n_changepoints < 0:
            raise InputError("n_changepoints must be >= 0")

    def _changepoint_days(self, t_days):
        n = len(t_days)
        if self.n_changepoints == 0:
            return np.zeros(0)
        hist = int(np.floor(n * self.changepoint_range))
        idx = np.linspace(0, max(hist - 1, 0), self.n_changepoints + 1).round().astype(int)[1:]
        cps = np.unique(t_days[idx])
        return cps[(cps > t_days[0]) & (cps < t_days[-1])]

    def fit(self, y, X=None):
        """Fit on a daily series (a `PreparedSeries` or date-indexed Series)."""
        self._check_params()
        s = _as_series(y)
        if len(s) < 2:
            raise InputError("need at least 2 training values")
        start = s.index[0]
        t_days = ((s.index - start) / pd.Timedelta(days=1)).to_numpy(dtype=float)
        span = float(t_days[-1])
        if span < self.min_span_days:
            raise InputError(
                f"training span {span:.0f} days is shorter than {self.min_span_days}")
        values = s.to_numpy(dtype=float)
        shift = float(values.mean())
        scale = float(values.std())
        if scale < 1e-12:
            scale = 1.0
        ys = (values - shift) / scale
        ts = t_days / span

        cps = self._changepoint_days(t_days)
        U = np.column_stack([np.ones_like(ts), ts, _fourier(t_days, self.fourier_order)])
        D = _hinge(ts, cps / span)

        # profile out the unpenalised block, leaving a lasso over the deltas
        Q, R = np.linalg.qr(U)
        Dp = D - Q @ (Q.T @ D)
        yp = ys - Q @ (Q.T @ ys)
        G = Dp.T @ Dp
        c = Dp.T @ yp
        deltas, trace = lasso_cd(G, c, float(yp @ yp), 1.0 / self.tau,
                                 tol=self.tol, max_iter=self.max_iter)
        alpha = np.linalg.solve(R, Q.T @ (ys - D @ deltas))

        resid = ys - U @ alpha - D @ deltas
        self.start_ = start
        self.end_ = s.index[-1]
        self.span_days_ = span
        self.y_shift_ = shift
        self.y_scale_ = scale
        self.changepoints_ = cps
        self.intercept_ = float(alpha[0])
        self.slope_ = float(alpha[1])
        self.fourier_coef_ = alpha[2:].reshape(self.fourier_order, 2)
        self.deltas_ = deltas
        self.sigma_ = float(resid.std() * scale)
        self.objective_trace_ = trace
        return self

    @classmethod
    def from_params(cls, start, span_days, intercept, slope, changepoints=(), deltas=(),
                    fourier_coef=None, sigma=0.0, **params):
        """Build a fitted model directly in data units (no standardisation)."""
        model = cls(**params)
        model.start_ = pd.Timestamp(start)
        model.span_days_ = float(span_days)
        model.end_ = model.start_ + pd.Timedelta(days=span_days)
        model.y_shift_ = 0.0
        model.y_scale_ = 1.0
        model.changepoints_ = np.asarray(changepoints, dtype=float)
        model.intercept_ = float(intercept)
        model.slope_ = float(slope)
        model.deltas_ = np.asarray(deltas, dtype=float)
        if fourier_coef is None:
            fourier_coef = np.zeros((model.fourier_order, 2))
        model.fourier_coef_ = np.asarray(fourier_coef, dtype=float).reshape(-1, 2)
        model.fourier_order = len(model.fourier_coef_)
        model.sigma_ = float(sigma)
        model.objective_trace_ = []
        return model

    # -- derived quantities in data units --

    @property
    def slope_per_day_(self) -> float:
        """Base trend slope in data units per day."""
        check_is_fitted(self, "deltas_")
        return self.slope_ * self.y_scale_ / self.span_days_

    @property
    def final_slope_per_day_(self) -> float:
        """Slope after the last changepoint, used for extrapolation."""
        check_is_fitted(self, "deltas_")
        return (self.slope_ + self.deltas_.sum()) * self.y_scale_ / self.span_days_

    def _t_days(self, dates):
        idx = pd.DatetimeIndex(pd.to_datetime(dates)).normalize()
        return idx, ((idx - self.start_) / pd.Timedelta(days=1)).to_numpy(dtype=float)

    def _components(self, t_days):
        ts = t_days / self.span_days_
        trend = self.intercept_ + self.slope_ * ts
        if len(self.changepoints_):
            trend = trend + _hinge(ts, self.changepoints_ / self.span_days_) @ self.deltas_
        season = _fourier(t_days, len(self.fourier_coef_)) @ self.fourier_coef_.ravel()
        return trend, season

    def decompose(self, dates) -> pd.DataFrame:
        """Trend and seasonal components in data units."""
        check_is_fitted(self, "deltas_")
        idx, t = self._t_days(dates)
        trend, season = self._components(t)
        return pd.DataFrame({"trend": trend * self.y_scale_ + self.y_shift_,
                             "seasonal": season * self.y_scale_}, index=idx)

    def predict_mean(self, dates) -> np.ndarray:
        check_is_fitted(self, "deltas_")
        _, t = self._t_days(dates)
        trend, season = self._components(t)
        return (trend + season) * self.y_scale_ + self.y_shift_

    def predict(self, dates, n_samples=None, seed=None) -> pd.DataFrame:
        """Point forecast with a simulated 95% prediction interval.

        Returns a frame indexed by date with columns yhat, lower95, upper95.
        Dates inside the training range only carry observation noise.
        """
        check_is_fitted(self, "deltas_")
        n_samples = self.n_samples if n_samples is None else n_samples
        seed = self.seed if seed is None else seed
        if n_samples < 100:
            raise InputError(f"n_samples must be >= 100, got {n_samples}")
        idx, t = self._t_days(dates)
        trend, season = self._components(t)
        center = trend + season
        ts = t / self.span_days_
        rng = np.random.default_rng(seed)

        sims = np.repeat(center[None, :], n_samples, axis=0)
        t_max = float(ts.max()) if len(ts) else 0.0
        rate = float(len(self.changepoints_))
        scale = float(np.mean(np.abs(self.deltas_))) if len(self.deltas_) else 0.0
        if t_max > 1.0 and rate > 0 and scale > 0:
            counts = rng.poisson(rate * (t_max - 1.0), size=n_samples)
            total = int(counts.sum())
            when = rng.uniform(1.0, t_max, size=total)
            size = rng.laplace(0.0, scale, size=total)
            owner = np.repeat(np.arange(n_samples), counts)
            for i, c, d in zip(owner, when, size):
                sims[i] += d * np.maximum(ts - c, 0.0)
        sigma = self.sigma_ / self.y_scale_
        if sigma > 0:
            sims += rng.normal(0.0, sigma, size=sims.shape)

        lower = np.percentile(sims, 2.5, axis=0)
        upper = np.percentile(sims, 97.5, axis=0)
        yhat = center * self.y_scale_ + self.y_shift_
        lower = np.minimum(lower * self.y_scale_ + self.y_shift_, yhat)
        upper = np.maximum(upper * self.y_scale_ + self.y_shift_, yhat)
        return pd.DataFrame({"yhat": yhat, "lower95": lower, "upper95": upper},
                            index=pd.DatetimeIndex(idx, name="date"))


def horizon_dates(horizon) -> pd.DatetimeIndex:
    start, end = as_date_range(horizon)
    return pd.date_range(start, end, freq="D")


DEFAULT_TRAIN_WINDOW = (dt.date(2017, 1, 1), dt.date(2020, 2, 29))
DEFAULT_HORIZON = (dt.date(2020, 3, 1), dt.date(2020, 12, 31))
