import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from cityswb._validation import InputError
from cityswb.affect import Lexicon, LexiconVectorizer
from cityswb.corpus import CommunityInfo, partition_by_day
from cityswb.features import (FeatureMatrix, assemble, community_covid_features, covid_features,
                              demographic_features, interaction_features, liwc_features,
                              load_demographics, load_scores, pragmatic_features, sample_posts)

from conftest import make_record

DAY_2019 = 1546300800
PERIOD = {"early": ("2020-03-02", "2020-03-04")}


def _covid(fips, cases, deaths=None, start="2020-03-01"):
    dates = pd.date_range(start, periods=len(cases), freq="D")
    deaths = deaths if deaths is not None else [0] * len(cases)
    return pd.DataFrame({"county_fips": fips, "date": dates, "cases": cases, "deaths": deaths})


def test_covid_daily_average_per_person():
    out = covid_features(_covid("00001", [0, 10, 10, 40]), {"00001": 1000.0}, PERIOD)
    assert out.loc["00001", "cases_early"] == pytest.approx(40 / 3 / 1000)
    assert out.loc["00001", "deaths_early"] == 0.0


def test_covid_decreasing_cumulative_clipped():
    out = covid_features(_covid("00001", [0, 10, 7, 12]), {"00001": 1.0}, PERIOD)
    # clipped cumulative 0,10,10,12 -> new 10,0,2
    assert out.loc["00001", "cases_early"] == pytest.approx(4.0)


def test_covid_zero_and_missing_county():
    out = covid_features(_covid("00001", [0, 0, 0, 0]), {"00001": 5.0, "00002": 5.0}, PERIOD)
    assert out.loc["00001", "cases_early"] == 0.0
    assert out.loc["00002", "cases_early"] == 0.0


def test_mask_ratio():
    days = pd.date_range("2020-04-01", "2020-06-30", freq="D")
    masks = pd.DataFrame({"county_fips": "00001", "date": days,
                          "mandate": (np.arange(len(days)) >= len(days) - 46).astype(int)})
    out = covid_features(_covid("00001", [0, 0]), {"00001": 1.0},
                         {"early": ("2020-04-01", "2020-06-30")}, masks)
    assert out.loc["00001", "mask_early"] == pytest.approx(46 / 91)


def test_mask_days_before_coverage_count_as_off():
    masks = pd.DataFrame({"county_fips": "00001",
                          "date": pd.date_range("2020-04-10", "2020-06-30", freq="D"),
                          "mandate": 1})
    out = covid_features(_covid("00001", [0]), {"00001": 1.0},
                         {"early": ("2020-03-01", "2020-06-30")}, masks)
    assert out.loc["00001", "mask_early"] == pytest.approx(82 / 122)


def test_covid_nonpositive_population_dropped():
    out = covid_features(_covid("00001", [0, 1]), {"00001": 0.0}, PERIOD)
    assert "00001" not in out.index


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 1000), min_size=4, max_size=10), st.integers(1, 10**6),
       st.integers(2, 50))
def test_covid_scale_invariance(new_cases, pop, k):
    cum = np.cumsum(new_cases)
    a = covid_features(_covid("x", cum), {"x": float(pop)}, PERIOD)
    b = covid_features(_covid("x", k * cum), {"x": float(k * pop)}, PERIOD)
    assert b.loc["x", "cases_early"] == pytest.approx(a.loc["x", "cases_early"], rel=1e-12)


def test_community_covid_features_needs_population(tmp_path):
    demo = pd.DataFrame({"latitude": [40.0]}, index=["00001"])
    with pytest.raises(InputError):
        community_covid_features(_covid("00001", [0]), None, demo, {}, PERIOD)


def test_load_demographics(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text(
        "county_fips,population_density,median_age,rent_vs_own,median_household_income,"
        "median_housing_cost,latitude\n"
        "1001,100,35,1.2,50000,900,32.5\n"
        "02002,100,35,1.2,50000,900,80.0\n"
        "03003,-5,35,1.2,50000,900,40.0\n")
    demo = load_demographics(path)
    assert list(demo.index) == ["01001"]
    info = {"a": CommunityInfo("a", "A", "AL", "01001"), "b": CommunityInfo("b", "B", "AK", "02002")}
    feats = demographic_features(demo, info)
    assert list(feats.index) == ["a"] and feats.loc["a", "median_age"] == 35.0
    path.write_text("county_fips,latitude\n01001,40\n")
    with pytest.raises(InputError):
        load_demographics(path)


LEX = Lexicon({"family": ("mom", "dad"), "work": ("job",)})


def test_liwc_features():
    recs = [make_record("a", body="mom x", created_at=DAY_2019, community="c1"),          # 50%
            make_record("b", body="mom x x x", created_at=DAY_2019 + 10, community="c1"),  # 25%
            make_record("c", body="mom", created_at=DAY_2019 - 100, community="c1"),       # 2018
            make_record("d", body="dad job", created_at=DAY_2019, community="c2"),
            make_record("e", body="dad", created_at=DAY_2019 - 100, community="c3")]
    idx = partition_by_day(recs)
    out = liwc_features(idx, LexiconVectorizer(LEX, ["family", "work"]).fit(), year=2019)
    assert list(out.index) == ["c1", "c2"]
    assert out.loc["c1", "family"] == pytest.approx(37.5)
    assert out.loc["c1", "work"] == 0.0
    assert out.loc["c2"].tolist() == [50.0, 50.0]


def _posts(community, n):
    return [make_record(f"{community}{i}", created_at=DAY_2019 + 60 * i, community=community)
            for i in range(n)]


def test_sample_posts_all_when_small_and_seeded_when_large():
    idx = partition_by_day(_posts("c", 50))
    assert len(sample_posts(idx, "c", 2019, size=100)) == 50
    a = sample_posts(idx, "c", 2019, size=20, seed=3)
    assert a == sample_posts(idx, "c", 2019, size=20, seed=3)
    assert len(set(a)) == 20
    assert a != sample_posts(idx, "c", 2019, size=20, seed=4)


def test_pragmatic_mean():
    idx = partition_by_day(_posts("c", 3) + _posts("d", 2))
    scores = {"toxicity": {"c0": 0.1, "c1": 0.2, "c2": 0.6, "d0": 0.5},
              "empathy": {"c0": 1.0, "c1": 0.0, "c2": 0.5}}
    out = pragmatic_features(idx, scores)
    assert out.loc["c", "toxicity"] == pytest.approx(0.3)
    assert out.loc["c", "empathy"] == pytest.approx(0.5)
    assert "d" not in out.index   # no empathy scores at all


def test_load_scores(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("post_id,score\na,0.25\nb,1\n")
    assert load_scores(path) == {"a": 0.25, "b": 1.0}
    path.write_text("post_id,score\na,1.5\n")
    with pytest.raises(InputError):
        load_scores(path)


def test_interaction_features_frames():
    recs = [make_record("p", author="A", created_at=DAY_2019, community="c"),
            make_record("r", author="B", created_at=DAY_2019 + 5, community="c", parent_id="p",
                        link_id="p")]
    user, post = interaction_features(partition_by_day(recs))
    assert user.loc["c", "edge_count"] == 1.0
    assert post.loc["c", "min_response_time_seconds"] == 5.0
    assert len(user.columns) == 9 and len(post.columns) == 5


def _groups():
    idx = ["a", "b", "c"]
    return {
        "demographics": pd.DataFrame({"median_age": [30.0, 40.0, 50.0]}, index=idx),
        "liwc": pd.DataFrame({"family": [1.0, 2.0, 3.0], "work": [0.0, 1.0, 0.5]}, index=idx),
        "covid": pd.DataFrame({"cases_early": [0.1, 0.2, 0.3]}, index=idx),
    }


LABELS = pd.Series({"a": "Unaffected", "b": "Recovered", "c": "NonRecovered"})


def test_assemble_basic():
    fm = assemble(_groups(), LABELS)
    assert list(fm.X.index) == ["a", "b", "c"]
    assert list(fm.X.columns) == ["demographics.median_age", "covid.cases_early",
                                  "liwc.family", "liwc.work"]
    assert fm.groups["liwc"] == ["liwc.family", "liwc.work"]


def test_assemble_drops_missing():
    g = _groups()
    g["demographics"] = g["demographics"].drop("b")
    assert list(assemble(g, LABELS).X.index) == ["a", "c"]
    assert list(assemble(_groups(), LABELS.drop("c")).X.index) == ["a", "b"]
    g["covid"] = g["covid"].loc[["b"]]
    with pytest.raises(InputError):
        assemble(g, LABELS)


@settings(max_examples=30, deadline=None)
@given(st.permutations(["demographics", "liwc", "covid"]))
def test_assemble_order_independent_and_idempotent(order):
    g = _groups()
    ref = assemble(g, LABELS)
    fm = assemble({k: g[k] for k in order}, LABELS)
    pd.testing.assert_frame_equal(fm.X, ref.X)
    again = assemble({k: fm.X[fm.groups[k]].rename(columns=lambda c: c.split(".", 1)[1])
                      for k in fm.groups}, fm.y)
    pd.testing.assert_frame_equal(again.X, ref.X)


def test_feature_matrix_roundtrip_and_select(tmp_path):
    g = _groups()
    g["covid"] = pd.DataFrame({"cases_early": [1.0, 2, 3], "cases_late": [4.0, 5, 6]},
                              index=["a", "b", "c"])
    fm = assemble(g, LABELS)
    fm.to_csv(tmp_path / "f.csv")
    back = FeatureMatrix.from_csv(tmp_path / "f.csv")
    pd.testing.assert_frame_equal(back.X, fm.X)
    assert back.groups == fm.groups
    sub = fm.select(["covid"], covid_periods=["early"])
    assert list(sub.X.columns) == ["covid.cases_early"]
    with pytest.raises(InputError):
        fm.select(["bogus"])
