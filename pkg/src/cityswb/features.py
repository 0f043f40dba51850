"""Per-community feature groups and the assembled feature matrix."""

from __future__ import annotations

import csv
import logging
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ._validation import InputError, as_date_range
from .affect import LexiconVectorizer
from .corpus import CommunityInfo, CorpusIndex
from .interaction import GraphMetrics, TreeMetrics, community_graph_metrics, community_tree_metrics

logger = logging.getLogger(__name__)

LIWC_CATEGORIES = ("family", "friend", "work", "leisure", "home", "health",
                   "affiliation", "we", "focuspast", "focuspresent", "focusfuture")
DEMOGRAPHIC_COLUMNS = ("population_density", "median_age", "rent_vs_own",
                       "median_household_income", "median_housing_cost", "latitude")
GROUPS = ("demographics", "covid", "user_interaction", "post_interaction", "pragmatic", "liwc")
PRAGMATIC_SAMPLE = 18_250


def community_seed(seed: int, community: str) -> list[int]:
    """Seed material for a per-community generator, stable across processes."""
    return [int(seed), zlib.crc32(community.encode("utf-8"))]


# -- demographics --

def load_demographics(path) -> pd.DataFrame:
    """Read the demographics CSV, indexed by 5-digit county FIPS.

    A ``population`` column is optional; COVID per-person rates need it.
    """
    try:
        frame = pd.read_csv(path, dtype={"county_fips": str})
    except (OSError, pd.errors.ParserError) as exc:
        raise InputError(f"cannot read demographics {path}: {exc}") from exc
    missing = [c for c in ("county_fips",) + DEMOGRAPHIC_COLUMNS if c not in frame]
    if missing:
        raise InputError(f"{path}: missing columns {missing}")
    frame["county_fips"] = frame["county_fips"].str.strip().str.zfill(5)
    frame = frame.set_index("county_fips")
    vals = frame[list(DEMOGRAPHIC_COLUMNS)]
    bad = ~(vals > 0).all(axis=1) | ~frame["latitude"].between(17, 72)
    if bad.any():
        logger.warning("dropping %d demographic rows with out-of-range values: %s",
                       int(bad.sum()), list(frame.index[bad]))
        frame = frame[~bad]
    return frame


def demographic_features(demographics: pd.DataFrame, info: dict[str, CommunityInfo]) -> pd.DataFrame:
    rows = {}
    for name, ci in sorted(info.items()):
        if ci.county_fips not in demographics.index:
            logger.warning("no demographics for %s (county %s)", name, ci.county_fips)
            continue
        rows[name] = demographics.loc[ci.county_fips, list(DEMOGRAPHIC_COLUMNS)].astype(float)
    return pd.DataFrame.from_dict(rows, orient="index", columns=list(DEMOGRAPHIC_COLUMNS))


# -- COVID --

def load_covid(path) -> pd.DataFrame:
    """County cumulative cases/deaths: columns county_fips, date, cases, deaths."""
    try:
        frame = pd.read_csv(path, dtype={"county_fips": str}, parse_dates=["date"])
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise InputError(f"cannot read covid counts {path}: {exc}") from exc
    frame["county_fips"] = frame["county_fips"].str.strip().str.zfill(5)
    return frame


def load_masks(path) -> pd.DataFrame:
    """Daily mandate flags: columns county_fips, date, mandate (0/1)."""
    try:
        frame = pd.read_csv(path, dtype={"county_fips": str}, parse_dates=["date"])
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise InputError(f"cannot read mask mandates {path}: {exc}") from exc
    frame["county_fips"] = frame["county_fips"].str.strip().str.zfill(5)
    return frame


def _daily_new(cumulative: pd.Series, days: pd.DatetimeIndex, county: str, what: str) -> np.ndarray:
    """New counts per day of `days` from a cumulative series with gaps."""
    start = days[0] - pd.Timedelta(days=1)
    full = pd.date_range(min(start, cumulative.index.min()) if len(cumulative) else start,
                         days[-1], freq="D")
    cum = cumulative.reindex(full).ffill().fillna(0.0)
    fixed = cum.cummax()
    if (fixed != cum).any():
        logger.warning("county %s: cumulative %s decreases on %d days; clipped",
                       county, what, int((fixed != cum).sum()))
    new = fixed.diff().fillna(fixed.iloc[0]).clip(lower=0.0)
    return new.reindex(days).to_numpy()


def covid_features(covid: pd.DataFrame, population: dict[str, float], periods: dict,
                   masks: pd.DataFrame | None = None) -> pd.DataFrame:
    """Per-county average daily new cases/deaths per person and mask-mandate ratio.

    One column per (measure, period): ``cases_early``, ``deaths_early``,
    ``mask_early``, ... Counties without a positive population are dropped.
    Mask days missing from `masks` count as no mandate.
    """
    rows = {}
    by_county = {k: g.set_index("date").sort_index() for k, g in covid.groupby("county_fips")}
    mask_by = {}
    if masks is not None:
        mask_by = {k: g.set_index("date")["mandate"].astype(float)
                   for k, g in masks.groupby("county_fips")}
    for county, pop in sorted(population.items()):
        if not pop or pop <= 0:
            logger.warning("county %s: population missing or non-positive; dropped", county)
            continue
        g = by_county.get(county)
        row = {}
        for period, window in periods.items():
            days = pd.date_range(*as_date_range(window), freq="D")
            for what in ("cases", "deaths"):
                cum = g[what].astype(float) if g is not None else pd.Series(dtype=float)
                cum = cum[~cum.index.duplicated(keep="last")]
                new = _daily_new(cum, days, county, what)
                row[f"{what}_{period}"] = float(new.mean() / pop)
            flags = mask_by.get(county)
            on = flags.reindex(days).fillna(0.0).to_numpy() if flags is not None else np.zeros(len(days))
            row[f"mask_{period}"] = float((on > 0).sum() / len(days))
        rows[county] = row
    return pd.DataFrame.from_dict(rows, orient="index")


def community_covid_features(covid, masks, demographics, info, periods) -> pd.DataFrame:
    if "population" not in demographics:
        raise InputError("demographics need a 'population' column for COVID rates")
    pop = demographics["population"].astype(float).to_dict()
    per_county = covid_features(covid, pop, periods, masks)
    rows = {}
    for name, ci in sorted(info.items()):
        if ci.county_fips not in per_county.index:
            logger.warning("no COVID data for %s (county %s); dropped", name, ci.county_fips)
            continue
        rows[name] = per_county.loc[ci.county_fips]
    return pd.DataFrame.from_dict(rows, orient="index", columns=per_county.columns)


# -- lexicon --

def liwc_features(index: CorpusIndex, vectorizer: LexiconVectorizer, communities=None,
                  year: int = 2019) -> pd.DataFrame:
    """Mean per-record category percent over the community's records in `year`."""
    communities = index.communities if communities is None else communities
    rows = {}
    for name in sorted(communities):
        recs = index.records_of(name, year)
        if not recs:
            logger.warning("%s: no records in %d; dropped from lexicon features", name, year)
            continue
        rows[name] = vectorizer.transform([r.body for r in recs]).mean(axis=0)
    return pd.DataFrame.from_dict(rows, orient="index", columns=list(vectorizer.categories_))


# -- pragmatic --

def load_scores(path) -> dict[str, float]:
    """Read a ``post_id,score`` file; scores outside [0, 1] are rejected."""
    out = {}
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read scores {path}: {exc}") from exc
    with handle:
        for row in csv.DictReader(handle):
            score = float(row["score"])
            if not 0.0 <= score <= 1.0:
                raise InputError(f"{path}: score {score} for {row['post_id']} outside [0, 1]")
            out[row["post_id"]] = score
    return out


def fallback_scores(records, vectorizer: LexiconVectorizer, category: str) -> dict[str, float]:
    """Crude lexicon stand-in for a model score; test fixtures only."""
    j = list(vectorizer.categories_).index(category)
    X = vectorizer.transform([r.body for r in records])
    return {r.id: float(min(1.0, x / 100.0)) for r, x in zip(records, X[:, j])}


def sample_posts(index: CorpusIndex, community: str, year: int = 2019,
                 size: int = PRAGMATIC_SAMPLE, seed: int = 0) -> list[str]:
    """Uniform sample without replacement of record ids from `year`."""
    ids = sorted(r.id for r in index.records_of(community, year))
    if len(ids) <= size:
        return ids
    rng = np.random.default_rng(community_seed(seed, community))
    pick = rng.choice(len(ids), size=size, replace=False)
    return [ids[i] for i in sorted(pick)]


def pragmatic_features(index: CorpusIndex, scores: dict[str, dict[str, float]],
                       communities=None, year: int = 2019, size: int = PRAGMATIC_SAMPLE,
                       seed: int = 0) -> pd.DataFrame:
    """Mean score of each kind (e.g. toxicity, empathy) over a seeded post sample."""
    communities = index.communities if communities is None else communities
    names = sorted(scores)
    rows = {}
    for community in sorted(communities):
        sample = sample_posts(index, community, year, size, seed)
        row = {}
        for kind in names:
            got = [scores[kind][i] for i in sample if i in scores[kind]]
            if sample and len(got) < 0.5 * len(sample):
                logger.warning("%s: only %d/%d sampled posts have %s scores",
                               community, len(got), len(sample), kind)
            if got:
                row[kind] = float(np.mean(got))
        if len(row) < len(names):
            logger.warning("%s: no scored posts for %s; dropped from pragmatic features",
                           community, sorted(set(names) - set(row)))
            continue
        rows[community] = row
    return pd.DataFrame.from_dict(rows, orient="index", columns=names)


# -- interaction --

def interaction_features(index: CorpusIndex, communities=None, year: int | None = 2019):
    """User-interaction and post-interaction groups as two frames."""
    communities = index.communities if communities is None else communities
    user, post = {}, {}
    for name in sorted(communities):
        try:
            user[name] = community_graph_metrics(index, name, year).as_dict()
            post[name] = community_tree_metrics(index, name, year).as_dict()
        except InputError as exc:
            logger.warning("%s: interaction features unavailable (%s)", name, exc)
            user.pop(name, None)
    user_df = pd.DataFrame.from_dict(user, orient="index", columns=GraphMetrics.names())
    post_df = pd.DataFrame.from_dict(post, orient="index", columns=TreeMetrics.names())
    return user_df, post_df


# -- assembly --

@dataclass
class FeatureMatrix:
    """Feature frame with ``group.column`` names, plus a label per row."""

    X: pd.DataFrame
    y: pd.Series
    groups: dict[str, list[str]] = field(default_factory=dict)

    def select(self, groups, covid_periods=None) -> "FeatureMatrix":
        """Restrict to feature groups; optionally keep only some COVID periods."""
        cols = []
        kept = {}
        for g in GROUPS:
            if g not in groups:
                continue
            gc = self.groups.get(g, [])
            if g == "covid" and covid_periods is not None:
                gc = [c for c in gc if c.rsplit("_", 1)[-1] in covid_periods]
            kept[g] = gc
            cols.extend(gc)
        unknown = set(groups) - set(GROUPS)
        if unknown:
            raise InputError(f"unknown feature groups {sorted(unknown)}")
        return FeatureMatrix(self.X[cols], self.y, kept)

    def to_csv(self, path):
        out = self.X.copy()
        out.insert(0, "label", self.y)
        out.index.name = "community"
        out.to_csv(path, float_format="%.10g")

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        try:
            frame = pd.read_csv(path, index_col="community")
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read feature matrix {path}: {exc}") from exc
        y = frame.pop("label")
        groups: dict[str, list[str]] = {}
        for col in frame.columns:
            groups.setdefault(col.split(".", 1)[0], []).append(col)
        return cls(frame.astype(float), y, groups)

    def manifest(self) -> list[dict]:
        return [{"group": g, "column": c} for g in GROUPS for c in self.groups.get(g, [])]


def assemble(groups: dict[str, pd.DataFrame], labels: pd.Series) -> FeatureMatrix:
    """Inner-join feature groups on community, rows sorted by name.

    Column order follows the canonical group order, so the result does not
    depend on the order of `groups`. Communities missing from any group or
    lacking a label are dropped with a log line.
    """
    unknown = set(groups) - set(GROUPS)
    if unknown:
        raise InputError(f"unknown feature groups {sorted(unknown)}")
    order = [g for g in GROUPS if g in groups]
    if not order:
        raise InputError("no feature groups to assemble")
    common = None
    for g in order:
        frame = groups[g].dropna(how="any")
        dropped = set(groups[g].index) - set(frame.index)
        if dropped:
            logger.warning("%s: dropping communities with missing values: %s", g, sorted(dropped))
        common = set(frame.index) if common is None else common & set(frame.index)
    everyone = set().union(*(set(groups[g].index) for g in order))
    for name in sorted(everyone - common):
        absent = [g for g in order if name not in groups[g].dropna(how="any").index]
        logger.warning("%s: missing feature groups %s; dropped", name, absent)
    labels = labels.dropna()
    for name in sorted(common - set(labels.index)):
        logger.warning("%s: no label; dropped", name)
    rows = sorted(common & set(labels.index))
    if not rows:
        raise InputError("no community has every feature group and a label")
    parts = []
    manifest = {}
    for g in order:
        frame = groups[g].loc[rows].astype(float)
        frame.columns = [f"{g}.{c}" for c in frame.columns]
        manifest[g] = list(frame.columns)
        parts.append(frame)
    X = pd.concat(parts, axis=1)
    X.index.name = "community"
    y = labels.loc[rows]
    y.name = "label"
    return FeatureMatrix(X, y, manifest)
