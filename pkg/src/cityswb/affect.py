"""Lexicon category scoring and the daily WellBeing signal.

A lexicon maps category names to entries. An entry is either an exact
lowercase word or a prefix ending in ``*`` (``happi*`` matches ``happiness``).
A text's score for a category is the percentage of its tokens matching any
entry of that category.

WellBeing for a community-day is the z-scored positive-emotion rate minus
the z-scored negative-emotion rate, where the z-score statistics come from
a baseline window.
"""

from __future__ import annotations

import csv
import datetime as dt
import re
from collections import defaultdict
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import InputError, as_date_range, check_daily_series
from .corpus import CorpusIndex

POSITIVE = "posemo"
NEGATIVE = "negemo"
DEFAULT_FIT_WINDOW = (dt.date(2017, 1, 1), dt.date(2020, 2, 29))

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_TOKEN_RE = re.compile(r"(?:[^\W_]|')+")


@dataclass(frozen=True)
class Lexicon:
    """Category name -> entries. Prefix entries keep their trailing ``*``."""

    categories: dict[str, tuple[str, ...]]

    def __post_init__(self):
        for name, entries in self.categories.items():
            for entry in entries:
                _check_entry(name, entry)

    @property
    def names(self) -> list[str]:
        return sorted(self.categories)

    def __contains__(self, category) -> bool:
        return category in self.categories

    def exact(self, category) -> frozenset[str]:
        return frozenset(e for e in self.categories[category] if not e.endswith("*"))

    def prefixes(self, category) -> frozenset[str]:
        return frozenset(e[:-1] for e in self.categories[category] if e.endswith("*"))


def _check_entry(category, entry):
    if not entry or entry == "*":
        raise InputError(f"empty lexicon entry in category {category!r}")
    if entry != entry.lower():
        raise InputError(f"lexicon entry {entry!r} is not lowercase")
    if "*" in entry[:-1]:
        raise InputError(f"lexicon entry {entry!r}: wildcard only allowed at the end")


def load_lexicon(path=None) -> Lexicon:
    """Read a ``category,entry`` lexicon file; default is the bundled test lexicon."""
    if path is None:
        text = resources.files("cityswb").joinpath("data/test_lexicon.csv").read_text("utf-8")
        rows = text.splitlines()
        source = "bundled test lexicon"
    else:
        source = str(path)
        try:
            rows = Path(path).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise InputError(f"cannot read lexicon {path}: {exc}") from exc
    cats: dict[str, list[str]] = defaultdict(list)
    for lineno, row in enumerate(csv.reader(rows), 1):
        if not row or (len(row) == 1 and not row[0].strip()) or row[0].startswith("#"):
            continue
        if len(row) != 2:
            raise InputError(f"{source}:{lineno}: expected 'category,entry'")
        name, entry = row[0].strip().lower(), row[1].strip()
        if lineno == 1 and (name, entry) == ("category", "entry"):
            continue
        cats[name].append(entry)
    return Lexicon({k: tuple(v) for k, v in cats.items()})


def tokenize(text: str) -> list[str]:
    """Lowercase runs of letters, digits and apostrophes, URLs removed."""
    if not text:
        return []
    text = _URL_RE.sub(" ", text).replace("’", "'")
    return _TOKEN_RE.findall(text.lower())


def _token_hits(token, exact, prefixes, max_prefix):
    if token in exact:
        return True
    for n in range(1, min(len(token), max_prefix) + 1):
        if token[:n] in prefixes:
            return True
    return False


def score_text(tokens, lexicon: Lexicon, category: str) -> float:
    """Percent of `tokens` in `category`; 0.0 for an empty token list."""
    if category not in lexicon:
        raise InputError(f"unknown lexicon category {category!r}")
    if not tokens:
        return 0.0
    exact, prefixes = lexicon.exact(category), lexicon.prefixes(category)
    longest = max((len(p) for p in prefixes), default=0)
    hits = sum(_token_hits(t, exact, prefixes, longest) for t in tokens)
    return 100.0 * hits / len(tokens)


class LexiconVectorizer(TransformerMixin, BaseEstimator):
    """Turn raw texts into per-category token percentages.

    Parameters
    ----------
    lexicon : Lexicon, default=None
        Defaults to the bundled test lexicon.
    categories : sequence of str, default=None
        Output columns, in order. All lexicon categories when None.
    """

    def __init__(self, lexicon=None, categories=None):
        self.lexicon = lexicon
        self.categories = categories

    def fit(self, X=None, y=None):
        lex = self.lexicon if self.lexicon is not None else load_lexicon()
        cats = list(self.categories) if self.categories is not None else lex.names
        for c in cats:
            if c not in lex:
                raise InputError(f"unknown lexicon category {c!r}")
        self.lexicon_ = lex
        self.categories_ = cats
        self._exact = {}
        self._prefixes = {}
        for j, c in enumerate(cats):
            for e in lex.exact(c):
                self._exact.setdefault(e, set()).add(j)
            for p in lex.prefixes(c):
                self._prefixes.setdefault(p, set()).add(j)
        self._max_prefix = max((len(p) for p in self._prefixes), default=0)
        self._cache: dict[str, tuple[int, ...]] = {}
        return self

    def _match(self, token) -> tuple[int, ...]:
        hit = self._cache.get(token)
        if hit is None:
            found = set(self._exact.get(token, ()))
            for n in range(1, min(len(token), self._max_prefix) + 1):
                found |= self._prefixes.get(token[:n], set())
            hit = tuple(sorted(found))
            if len(self._cache) < 500_000:
                self._cache[token] = hit
        return hit

    def score_tokens(self, tokens) -> np.ndarray:
        check_is_fitted(self, "categories_")
        out = np.zeros(len(self.categories_))
        if not tokens:
            return out
        for tok in tokens:
            for j in self._match(tok):
                out[j] += 1.0
        return out * (100.0 / len(tokens))

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "categories_")
        return np.array([self.score_tokens(tokenize(t)) for t in X]).reshape(
            -1, len(self.categories_))

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "categories_")
        return np.asarray(self.categories_, dtype=object)


def daily_category_means(index: CorpusIndex, community: str,
                         vectorizer: LexiconVectorizer) -> pd.DataFrame:
    """Unweighted mean of per-record percents for every active day of `community`.

    Submissions and comments both count. Days without records are absent.
    """
    check_is_fitted(vectorizer, "categories_")
    days = index.day_list(community)
    rows = []
    for day in days:
        recs = index.records_on(community, day)
        scores = vectorizer.transform([r.body for r in recs])
        rows.append(scores.mean(axis=0))
    frame = pd.DataFrame(
        np.array(rows).reshape(len(days), len(vectorizer.categories_)),
        index=pd.DatetimeIndex(pd.to_datetime(days), name="date"),
        columns=vectorizer.categories_,
    )
    return frame


def daily_category_mean(index: CorpusIndex, lexicon: Lexicon, category: str,
                        community: str, day) -> float | None:
    """Mean category percent over one community-day; None when the day is empty."""
    recs = index.records_on(community, day)
    if not recs:
        return None
    return float(np.mean([score_text(tokenize(r.body), lexicon, category) for r in recs]))


def znorm(series: pd.Series, fit_window=DEFAULT_FIT_WINDOW) -> pd.Series:
    """Standardise with mean and sample std taken from `fit_window` only."""
    s = check_daily_series(series)
    start, end = as_date_range(fit_window)
    ref = s[(s.index >= pd.Timestamp(start)) & (s.index <= pd.Timestamp(end))]
    if len(ref) < 2:
        raise InputError(f"z-normalisation window {start}..{end} has fewer than 2 values")
    mu = float(ref.mean())
    sigma = float(ref.std(ddof=1))
    if not sigma >= 1e-12:
        raise InputError(f"degenerate series: std {sigma:g} over {start}..{end}")
    return (s - mu) / sigma


def wellbeing_series(pos: pd.Series, neg: pd.Series) -> pd.Series:
    """Pointwise ``pos - neg`` on the dates both series share."""
    pos = check_daily_series(pos, "pos")
    neg = check_daily_series(neg, "neg")
    common = pos.index.intersection(neg.index)
    out = pos.loc[common] - neg.loc[common]
    out.name = "wellbeing"
    return out


def wellbeing_frame(raw: pd.DataFrame, fit_window=DEFAULT_FIT_WINDOW) -> pd.DataFrame:
    """Per-day table with columns date, posemo_raw, negemo_raw, wellbeing."""
    pos = znorm(raw[POSITIVE], fit_window)
    neg = znorm(raw[NEGATIVE], fit_window)
    wb = wellbeing_series(pos, neg)
    out = pd.DataFrame({
        "date": wb.index.strftime("%Y-%m-%d"),
        "posemo_raw": raw[POSITIVE].loc[wb.index].to_numpy(),
        "negemo_raw": raw[NEGATIVE].loc[wb.index].to_numpy(),
        "wellbeing": wb.to_numpy(),
    })
    return out
