"""Deviation rule and recovery-pattern labels."""

from __future__ import annotations

import datetime as dt
import enum
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ._validation import InputError, as_date_range, date_span


class RecoveryLabel(str, enum.Enum):
    UNAFFECTED = "Unaffected"
    RECOVERED = "Recovered"
    NON_RECOVERED = "NonRecovered"

    def __str__(self):
        return self.value


# increasing resilience; used for rank correlations
ORDINAL = {RecoveryLabel.NON_RECOVERED: 0, RecoveryLabel.RECOVERED: 1, RecoveryLabel.UNAFFECTED: 2}


def _d(y, m, d):
    return dt.date(y, m, d)


@dataclass(frozen=True)
class StageWindows:
    """Date ranges for the deviation rule and for period-level features."""

    early: tuple = (_d(2020, 4, 1), _d(2020, 6, 30))
    middle: tuple = ((_d(2020, 7, 1), _d(2020, 9, 30)), (_d(2020, 10, 1), _d(2020, 12, 31)))
    feature_periods: dict = field(default_factory=lambda: {
        "early": (_d(2020, 3, 1), _d(2020, 6, 30)),
        "middle": (_d(2020, 7, 1), _d(2020, 9, 30)),
        "late": (_d(2020, 10, 1), _d(2020, 12, 31)),
    })

    def __post_init__(self):
        ranges = [as_date_range(self.early)] + [as_date_range(w) for w in self.middle]
        for (_, end), (start, _) in zip(ranges, ranges[1:]):
            if start <= end:
                raise InputError("stage windows must be chronological and non-overlapping")
        object.__setattr__(self, "early", ranges[0])
        object.__setattr__(self, "middle", tuple(ranges[1:]))

    @classmethod
    def from_config(cls, cfg: dict | None):
        if not cfg:
            return cls()
        kw = {}
        if "early" in cfg:
            kw["early"] = tuple(cfg["early"])
        if "middle" in cfg:
            kw["middle"] = tuple(tuple(w) for w in cfg["middle"])
        if "feature_periods" in cfg:
            kw["feature_periods"] = {k: as_date_range(v) for k, v in cfg["feature_periods"].items()}
        return cls(**kw)


def deviation_fraction(observed: pd.Series, forecast: pd.DataFrame, window,
                       min_coverage: float = 0.9) -> float:
    """Fraction of days in `window` where observed < lower95 (strictly).

    Days without an observation count as not below; at least `min_coverage`
    of the window's days must be observed.
    """
    days = date_span(window)
    start, end = days[0].date(), days[-1].date()
    missing = days.difference(forecast.index)
    if len(missing):
        raise InputError(f"window {start}..{end} is not covered by the forecast")
    obs = observed.reindex(days)
    have = obs.notna().to_numpy()
    if have.sum() < min_coverage * len(days):
        raise InputError(
            f"window {start}..{end}: only {int(have.sum())}/{len(days)} days observed")
    lower = forecast["lower95"].reindex(days).to_numpy()
    below = have & (obs.to_numpy() < lower)
    return float(below.sum() / len(days))


def classify_fractions(early: float, middle, threshold: float = 0.25) -> RecoveryLabel:
    """Apply the rule to precomputed fractions."""
    if not 0.0 < threshold < 1.0:
        raise InputError(f"threshold must be in (0, 1), got {threshold}")
    if early < threshold:
        return RecoveryLabel.UNAFFECTED
    if any(f < threshold for f in middle):
        return RecoveryLabel.RECOVERED
    return RecoveryLabel.NON_RECOVERED


def stage_fractions(observed, forecast, windows: StageWindows) -> tuple[float, list[float]]:
    early = deviation_fraction(observed, forecast, windows.early)
    middle = [deviation_fraction(observed, forecast, w) for w in windows.middle]
    return early, middle


def classify(observed, forecast, windows: StageWindows | None = None,
             threshold: float = 0.25) -> RecoveryLabel:
    windows = windows or StageWindows()
    early, middle = stage_fractions(observed, forecast, windows)
    return classify_fractions(early, middle, threshold)


def label_all(observed: dict, forecasts: dict, windows: StageWindows | None = None,
              threshold: float = 0.25) -> pd.DataFrame:
    """Label every community; includes the per-window fractions for audit.

    Columns: community, label, early_fraction, middle_fraction_1, ...
    """
    windows = windows or StageWindows()
    missing = sorted(set(observed) - set(forecasts))
    if missing:
        raise InputError(f"no forecast for communities: {', '.join(missing)}")
    rows = []
    for name in sorted(observed):
        early, middle = stage_fractions(observed[name], forecasts[name], windows)
        row = {"community": name,
               "label": classify_fractions(early, middle, threshold).value,
               "early_fraction": early}
        for i, f in enumerate(middle, 1):
            row[f"middle_fraction_{i}"] = f
        rows.append(row)
    cols = ["community", "label", "early_fraction"] + [
        f"middle_fraction_{i}" for i in range(1, len(windows.middle) + 1)]
    return pd.DataFrame(rows, columns=cols)


def label_counts(labels: pd.DataFrame) -> pd.Series:
    order = [l.value for l in RecoveryLabel]
    return labels["label"].value_counts().reindex(order, fill_value=0)


def encode_ordinal(labels) -> np.ndarray:
    return np.array([ORDINAL[RecoveryLabel(l)] for l in labels])
