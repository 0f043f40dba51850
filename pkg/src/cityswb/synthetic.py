"""Scripted synthetic archives with a known recovery pattern per community.

Used by the test suite and for trying the CLI without real data. Each
community's daily share of positive and negative lexicon words follows a
baseline with yearly seasonality; an injected dip after 2020-03-10 makes a
community affected, and ending the dip on 2020-06-30 makes it recover.
"""

from __future__ import annotations

import datetime as dt
import json
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd

from .affect import load_lexicon
from .resilience import RecoveryLabel

PATTERNS = (RecoveryLabel.UNAFFECTED, RecoveryLabel.RECOVERED, RecoveryLabel.NON_RECOVERED)
EVENT = dt.date(2020, 3, 10)
RECOVERY = dt.date(2020, 7, 1)

NEUTRAL = ("city", "street", "bus", "road", "downtown", "parking", "traffic", "bridge",
           "river", "weather", "rain", "snow", "coffee", "pizza", "store", "mall", "train",
           "station", "council", "mayor", "library", "museum", "zoo", "the", "a", "an", "and",
           "of", "to", "in", "on", "for", "with", "this", "that", "it", "there", "anyone",
           "know", "where", "which", "about", "near", "around", "north", "south", "east", "west")
CATEGORY_WORDS = ("family", "friend", "work", "leisure", "home", "health", "affiliation",
                  "we", "focuspast", "focuspresent", "focusfuture")


def _words(lexicon, category):
    exact = sorted(lexicon.exact(category))
    pref = sorted(p + "s" for p in lexicon.prefixes(category))
    return tuple(exact + pref)


def _dip(pattern, day: dt.date) -> float:
    if pattern == RecoveryLabel.UNAFFECTED or day < EVENT:
        return 0.0
    if pattern == RecoveryLabel.RECOVERED and day >= RECOVERY:
        return 0.0
    return 1.0


def generate(out_dir, patterns=PATTERNS, seed: int = 0, records_per_day: float = 8.0,
             start=dt.date(2017, 1, 1), end=dt.date(2020, 12, 31), dip: float = 0.025,
             tokens_per_record: int = 20, users_per_community: int = 80) -> dict:
    """Write a full synthetic input set to `out_dir` and return a config dict.

    Files: records.jsonl, communities.csv, demographics.csv, covid.csv,
    masks.csv, bric.csv, toxicity.csv, empathy.csv, lexicon.csv, config.json.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    lexicon = load_lexicon()
    pos_words = _words(lexicon, "posemo")
    neg_words = _words(lexicon, "negemo")
    topic_words = {c: _words(lexicon, c) for c in CATEGORY_WORDS}
    pos_arr, neg_arr = np.array(pos_words), np.array(neg_words)
    neutral_arr = np.array(NEUTRAL)
    days = pd.date_range(start, end, freq="D")
    epoch0 = [int(pd.Timestamp(d, tz="UTC").timestamp()) for d in days]

    names = [f"city{i:02d}" for i in range(len(patterns))]
    expected = {}
    communities = []
    toxicity = []
    empathy = []
    with (out / "records.jsonl").open("w", encoding="utf-8") as fh:
        for ci, (name, pattern) in enumerate(zip(names, patterns)):
            pattern = RecoveryLabel(pattern)
            expected[name] = pattern.value
            fips = f"{10001 + ci:05d}"
            communities.append({"community": name, "city": name.title(), "state": "ZZ",
                                "county_fips": fips})
            base_pos = rng.uniform(0.05, 0.07)
            base_neg = rng.uniform(0.025, 0.035)
            amp = rng.uniform(0.004, 0.01)
            phase = rng.uniform(0, 2 * np.pi)
            topic_p = rng.uniform(0.005, 0.03, size=len(CATEGORY_WORDS))
            tox_level = rng.uniform(0.05, 0.3)
            emp_level = rng.uniform(0.2, 0.6)
            n_users = max(5, int(users_per_community * rng.uniform(0.6, 1.4)))
            weights = 1.0 / np.arange(1, n_users + 1) ** 0.8
            weights /= weights.sum()
            serial = 0
            recent: list[tuple[str, str, int]] = []
            for d, day_start in zip(days, epoch0):
                doy = d.dayofyear
                season = amp * np.sin(2 * np.pi * doy / 365.25 + phase)
                shock = dip * _dip(pattern, d.date())
                p_pos = max(0.005, base_pos + season - shock)
                p_neg = max(0.005, base_neg - 0.5 * season + 0.8 * shock)
                n_rec = max(2, int(rng.poisson(records_per_day)))
                times = np.sort(rng.integers(0, 86400, size=n_rec))
                authors = rng.choice(n_users, size=n_rec, p=weights)
                sub_draw = rng.random(n_rec)
                todays = []
                for j in range(n_rec):
                    serial += 1
                    rid = f"{name}_{serial}"
                    author = f"{name}_u{int(authors[j])}"
                    created = day_start + int(times[j])
                    is_sub = j == 0 or sub_draw[j] < 0.3 or not (todays or recent)
                    n_tok = max(3, int(rng.poisson(tokens_per_record)))
                    u = rng.random(n_tok)
                    pick = rng.random(n_tok)
                    toks = np.where(
                        u < p_pos, pos_arr[(pick * len(pos_arr)).astype(int)],
                        np.where(u < p_pos + p_neg, neg_arr[(pick * len(neg_arr)).astype(int)],
                                 neutral_arr[(pick * len(neutral_arr)).astype(int)])).tolist()
                    hits = rng.random(len(CATEGORY_WORDS)) < topic_p * n_tok / 4
                    for c in np.flatnonzero(hits):
                        ws = topic_words[CATEGORY_WORDS[c]]
                        toks[rng.integers(len(toks))] = ws[rng.integers(len(ws))]
                    rec = {"id": rid, "author": author, "created_at": created,
                           "body": " ".join(toks), "community": name}
                    if is_sub:
                        rec.update(kind="submission", parent_id=None, link_id=rid)
                        link = rid
                    else:
                        pool = todays if todays and rng.random() < 0.8 else (recent or todays)
                        pid, link, _ = pool[rng.integers(len(pool))]
                        rec.update(kind="comment", parent_id=pid, link_id=link)
                    todays.append((rid, link, created))
                    fh.write(json.dumps(rec, sort_keys=True) + "\n")
                    if d.year == 2019:
                        toxicity.append((rid, float(np.clip(rng.normal(tox_level, 0.05), 0, 1))))
                        empathy.append((rid, float(np.clip(rng.normal(emp_level, 0.05), 0, 1))))
                recent = todays

    comm = pd.DataFrame(communities)
    comm.to_csv(out / "communities.csv", index=False)
    fips = comm["county_fips"].tolist()
    pd.DataFrame({
        "county_fips": fips,
        "population": rng.integers(100_000, 2_000_000, len(fips)),
        "population_density": rng.uniform(200, 12_000, len(fips)).round(1),
        "median_age": rng.uniform(28, 45, len(fips)).round(1),
        "rent_vs_own": rng.uniform(0.3, 2.5, len(fips)).round(3),
        "median_household_income": rng.integers(35_000, 120_000, len(fips)),
        "median_housing_cost": rng.integers(700, 2_800, len(fips)),
        "latitude": rng.uniform(25, 48, len(fips)).round(4),
    }).to_csv(out / "demographics.csv", index=False)

    covid_days = pd.date_range("2020-01-21", "2020-12-31", freq="D")
    crow, mrow = [], []
    for f in fips:
        rate = rng.uniform(1, 60)
        new_c = rng.poisson(rate * np.linspace(0.1, 3.0, len(covid_days)))
        new_d = rng.binomial(new_c, 0.015)
        cc, cd = np.cumsum(new_c), np.cumsum(new_d)
        for d, a, b in zip(covid_days, cc, cd):
            crow.append((f, d.strftime("%Y-%m-%d"), int(a), int(b)))
        mandate_start = pd.Timestamp("2020-04-10") + pd.Timedelta(days=int(rng.integers(0, 200)))
        for d in pd.date_range("2020-04-10", "2020-12-31", freq="D"):
            mrow.append((f, d.strftime("%Y-%m-%d"), int(d >= mandate_start)))
    pd.DataFrame(crow, columns=["county_fips", "date", "cases", "deaths"]).to_csv(
        out / "covid.csv", index=False)
    pd.DataFrame(mrow, columns=["county_fips", "date", "mandate"]).to_csv(
        out / "masks.csv", index=False)
    bric_cols = ["social", "economic", "housing_infrastructure", "institutional",
                 "community", "environmental"]
    bric = pd.DataFrame(rng.uniform(0.3, 0.8, (len(fips), len(bric_cols))).round(4),
                        columns=bric_cols)
    bric["aggregate"] = bric[bric_cols].sum(axis=1).round(4)
    bric.insert(0, "county_fips", fips)
    bric.to_csv(out / "bric.csv", index=False)
    pd.DataFrame(toxicity, columns=["post_id", "score"]).to_csv(out / "toxicity.csv", index=False)
    pd.DataFrame(empathy, columns=["post_id", "score"]).to_csv(out / "empathy.csv", index=False)
    (out / "lexicon.csv").write_text(
        resources.files("cityswb").joinpath("data/test_lexicon.csv").read_text("utf-8"),
        encoding="utf-8")
    pd.Series(expected, name="label").rename_axis("community").to_csv(out / "expected_labels.csv")

    config = {
        "paths": {
            "records": "records.jsonl", "communities": "communities.csv",
            "lexicon": "lexicon.csv", "demographics": "demographics.csv",
            "covid": "covid.csv", "mask": "masks.csv", "bric": "bric.csv",
            "scores": {"toxicity": "toxicity.csv", "empathy": "empathy.csv"},
        },
        "seed": int(seed),
        "out": "run",
    }
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    return config
