"""Pipeline stages. Each stage reads upstream artifacts from the run directory
and writes plain CSV/JSON/SVG files plus a ``manifest.json`` with content
hashes of its inputs and outputs."""

from __future__ import annotations

import copy
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from ._validation import InputError, as_date_range
from .affect import NEGATIVE, POSITIVE, LexiconVectorizer, daily_category_means, load_lexicon, wellbeing_frame
from .corpus import (DEFAULT_STUDY_RANGE, DEFAULT_YEARS, Record, filter_active_communities,
                     load_community_info, load_records, partition_by_day)
from .features import (FeatureMatrix, LIWC_CATEGORIES, assemble, community_covid_features,
                       community_seed, demographic_features, interaction_features,
                       liwc_features, load_covid, load_demographics, load_masks,
                       load_scores, pragmatic_features)
from .forecast import DEFAULT_HORIZON, DEFAULT_TRAIN_WINDOW, TrendSeasonalityForecaster, prepare
from .model import FEATURE_SETS, TASKS, bric_correlations, load_bric, paired_accuracy_ttest, run_task
from .plotting import forecast_svg
from .resilience import StageWindows, label_all, label_counts

logger = logging.getLogger(__name__)

DEFAULTS = {
    "paths": {},
    "timezone": "UTC",
    "study_range": [str(d) for d in DEFAULT_STUDY_RANGE],
    "years": list(DEFAULT_YEARS),
    "min_days": 300,
    "include_comments": False,
    "zscore_window": [str(d) for d in DEFAULT_TRAIN_WINDOW],
    "train_window": [str(d) for d in DEFAULT_TRAIN_WINDOW],
    "horizon": [str(d) for d in DEFAULT_HORIZON],
    "forecaster": {"n_changepoints": 25, "changepoint_range": 0.8, "fourier_order": 10,
                   "tau": 0.05, "n_samples": 1000},
    "stages": {},
    "threshold": 0.25,
    "feature_year": 2019,
    "pragmatic_sample": 18_250,
    "model": {"l2": 1.0, "k_neighbors": 5},
    "seed": 0,
    "out": "run",
    "jobs": 1,
}


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in (extra or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


class RunConfig:
    """Merged run configuration; relative paths resolve against `base_dir`."""

    def __init__(self, data: dict | None = None, base_dir="."):
        self.data = _merge(DEFAULTS, data)
        self.base_dir = Path(base_dir)

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"config {path} is not valid JSON: {exc}") from exc
        return cls(data, path.parent)

    def __getitem__(self, key):
        return self.data[key]

    def path(self, key, required=True) -> Path | None:
        raw = self.data["paths"].get(key)
        if raw is None:
            if required:
                raise InputError(f"config has no paths.{key}")
            return None
        p = Path(raw)
        p = p if p.is_absolute() else self.base_dir / p
        if not p.exists():
            raise InputError(f"paths.{key} does not exist: {p}")
        return p

    def score_paths(self) -> dict[str, Path]:
        out = {}
        for kind, raw in sorted((self.data["paths"].get("scores") or {}).items()):
            p = Path(raw)
            p = p if p.is_absolute() else self.base_dir / p
            if not p.exists():
                raise InputError(f"paths.scores.{kind} does not exist: {p}")
            out[kind] = p
        return out

    @property
    def out(self) -> Path:
        p = Path(self.data["out"])
        return p if p.is_absolute() else self.base_dir / p

    @property
    def seed(self) -> int:
        if self.data.get("seed") is None:
            raise InputError("a seed is required")
        return int(self.data["seed"])

    @property
    def windows(self) -> StageWindows:
        return StageWindows.from_config(self.data.get("stages"))


# -- manifest helpers --

def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(stage_dir: Path, stage: str, cfg: RunConfig, inputs) -> dict:
    outputs = {}
    for p in sorted(stage_dir.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            outputs[p.relative_to(stage_dir).as_posix()] = sha256(p)
    base = cfg.base_dir.resolve()
    out = cfg.out.resolve()

    # upstream outputs are keyed as out/<stage>/..., raw inputs relative to the config
    def key(q: Path) -> str:
        q = q.resolve()
        if q.is_relative_to(out):
            return "out/" + q.relative_to(out).as_posix()
        return q.relative_to(base).as_posix() if q.is_relative_to(base) else q.as_posix()

    ins = {}
    for p in sorted({Path(p) for p in inputs}):
        if p.is_dir():
            for q in sorted(p.rglob("*")):
                if q.is_file() and q.name != "manifest.json":
                    ins[key(q)] = sha256(q)
        elif p.exists():
            ins[key(p)] = sha256(p)
    conf = {k: v for k, v in cfg.data.items() if k not in ("out", "jobs")}
    manifest = {"stage": stage, "config": conf, "inputs": ins, "outputs": outputs}
    (stage_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def _stage_dir(cfg: RunConfig, name: str, clean=True) -> Path:
    d = cfg.out / name
    if clean and d.exists():
        for p in sorted(d.rglob("*"), reverse=True):
            p.unlink() if p.is_file() else p.rmdir()
    d.mkdir(parents=True, exist_ok=True)
    return d


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise InputError(f"missing {path}; run the '{stage}' stage first")
    return path


def _map(fn, items, jobs):
    if jobs and jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# -- ingest --

def _record_json(r: Record) -> str:
    return json.dumps({"id": r.id, "author": r.author, "created_at": r.created_at,
                       "body": r.body, "community": r.community, "kind": r.kind,
                       "parent_id": r.parent_id, "link_id": r.link_id},
                      sort_keys=True, ensure_ascii=False)


def run_ingest(cfg: RunConfig) -> dict:
    src = cfg.path("records")
    stream = load_records(src, cfg["study_range"], cfg["timezone"])
    index = partition_by_day(stream, cfg["timezone"])
    kept = filter_active_communities(index, cfg["min_days"], cfg["years"], cfg["include_comments"])
    out = _stage_dir(cfg, "ingest")
    rec_dir = out / "records"
    rec_dir.mkdir()
    rows = []
    for name in index.communities:
        active = index.submission_days.get(name, set())
        if cfg["include_comments"]:
            active = active | index.comment_days.get(name, set())
        row = {"community": name, "n_records": sum(len(v) for v in index.days[name].values())}
        for y in cfg["years"]:
            row[f"active_days_{y}"] = sum(1 for d in active if d.year == y)
        row["retained"] = int(name in kept)
        rows.append(row)
        if name in kept:
            recs = sorted(index.records_of(name), key=lambda r: (r.created_at, r.id))
            with (rec_dir / f"{name}.jsonl").open("w", encoding="utf-8") as fh:
                for r in recs:
                    fh.write(_record_json(r) + "\n")
    pd.DataFrame(rows).to_csv(out / "communities.csv", index=False)
    summary = {"lines": stream.n_lines, "records": len(stream), "skipped": stream.skip_count,
               "duplicates": stream.duplicate_count, "out_of_range": stream.out_of_range,
               "communities": len(index.communities), "retained": len(kept)}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_manifest(out, "ingest", cfg, [src])
    logger.info("ingest: %d records, %d/%d communities retained",
                len(stream), len(kept), len(index.communities))
    return summary


def _ingested(cfg: RunConfig) -> list[Path]:
    d = _require(cfg.out / "ingest" / "records", "ingest")
    return sorted(d.glob("*.jsonl"))


def load_ingested(cfg: RunConfig, communities=None):
    files = _ingested(cfg)
    if communities is not None:
        files = [f for f in files if f.stem in set(communities)]
    records = []
    for f in files:
        records.extend(load_records(f, study_range=None).records)
    return partition_by_day(records, cfg["timezone"])


# -- wellbeing --

def _wellbeing_one(args):
    path, lexicon_path, tz, window = args
    index = partition_by_day(load_records(path, study_range=None).records, tz)
    vec = LexiconVectorizer(load_lexicon(lexicon_path), [POSITIVE, NEGATIVE]).fit()
    name = path.stem
    raw = daily_category_means(index, name, vec)
    return name, wellbeing_frame(raw, window)


def run_wellbeing(cfg: RunConfig) -> list[str]:
    lex = cfg.path("lexicon")
    lexicon = load_lexicon(lex)
    for cat in (POSITIVE, NEGATIVE):
        if cat not in lexicon:
            raise InputError(f"lexicon {lex} has no '{cat}' category")
    files = _ingested(cfg)
    out = _stage_dir(cfg, "wellbeing")
    window = as_date_range(cfg["zscore_window"])
    results = _map(_wellbeing_one, [(f, lex, cfg["timezone"], window) for f in files],
                   cfg["jobs"])
    for name, frame in results:
        frame.to_csv(out / f"{name}.csv", index=False)
    write_manifest(out, "wellbeing", cfg, [lex, cfg.out / "ingest" / "records"])
    return [name for name, _ in results]


def read_wellbeing(path) -> pd.Series:
    frame = pd.read_csv(path, parse_dates=["date"])
    return pd.Series(frame["wellbeing"].to_numpy(), index=pd.DatetimeIndex(frame["date"]),
                     name="wellbeing")


# -- forecast --

def _forecast_one(args):
    path, params, seed, full_range, train_window, horizon = args
    series = read_wellbeing(path)
    prepared = prepare(series, full_range)
    values = prepared.values
    t0, t1 = (pd.Timestamp(d) for d in train_window)
    train = values[(values.index >= t0) & (values.index <= t1)]
    model = TrendSeasonalityForecaster(**params, seed=seed).fit(train)
    h1 = pd.Timestamp(horizon[1])
    dates = pd.date_range(values.index[0], max(values.index[-1], h1), freq="D")
    fc = model.predict(dates)
    fc["observed"] = values.reindex(dates)
    info = {"community": path.stem, "slope_per_day": model.slope_per_day_,
            "final_slope_per_day": model.final_slope_per_day_, "sigma": model.sigma_,
            "active_changepoints": int(np.count_nonzero(model.deltas_))}
    return path.stem, fc, info


def run_forecast(cfg: RunConfig) -> list[str]:
    src = cfg.out / "wellbeing"
    files = sorted(_require(src, "wellbeing").glob("*.csv"))
    if not files:
        raise InputError(f"no wellbeing series in {src}; run the 'wellbeing' stage first")
    out = _stage_dir(cfg, "forecast")
    train_window = as_date_range(cfg["train_window"])
    horizon = as_date_range(cfg["horizon"])
    full = (train_window[0], horizon[1])
    params = dict(cfg["forecaster"])
    jobs = []
    for f in files:
        s = np.random.SeedSequence(community_seed(cfg.seed, f.stem)).generate_state(1)[0]
        jobs.append((f, params, int(s), full, train_window, horizon))
    rows = []
    for name, fc, info in _map(_forecast_one, jobs, cfg["jobs"]):
        frame = fc.reset_index()
        frame["date"] = frame["date"].dt.strftime("%Y-%m-%d")
        frame[["date", "yhat", "lower95", "upper95", "observed"]].to_csv(
            out / f"{name}.csv", index=False)
        rows.append(info)
    pd.DataFrame(rows).to_csv(out / "models.csv", index=False)
    write_manifest(out, "forecast", cfg, [src])
    return [r["community"] for r in rows]


def read_forecast(path) -> pd.DataFrame:
    frame = pd.read_csv(path, parse_dates=["date"]).set_index("date")
    return frame


# -- label --

def run_label(cfg: RunConfig) -> pd.DataFrame:
    src = cfg.out / "forecast"
    files = sorted(p for p in _require(src, "forecast").glob("*.csv") if p.name != "models.csv")
    if not files:
        raise InputError(f"no forecasts in {src}; run the 'forecast' stage first")
    horizon = as_date_range(cfg["horizon"])
    observed, forecasts = {}, {}
    for f in files:
        fc = read_forecast(f)
        observed[f.stem] = fc["observed"].dropna()
        forecasts[f.stem] = fc
    labels = label_all(observed, forecasts, cfg.windows, cfg["threshold"])
    out = _stage_dir(cfg, "label")
    labels.to_csv(out / "labels.csv", index=False)
    plots = out / "plots"
    plots.mkdir()
    for row in labels.itertuples():
        svg = forecast_svg(forecasts[row.community], marker=horizon[0],
                           title=f"{row.community}: {row.label}")
        (plots / f"{row.community}.svg").write_text(svg, encoding="utf-8")
    write_manifest(out, "label", cfg, [src])
    return labels


def read_labels(cfg: RunConfig) -> pd.DataFrame:
    return pd.read_csv(_require(cfg.out / "label" / "labels.csv", "label"))


# -- features --

def run_features(cfg: RunConfig) -> FeatureMatrix:
    labels = read_labels(cfg)
    names = labels["community"].tolist()
    index = load_ingested(cfg, names)
    year = int(cfg["feature_year"])
    inputs = [cfg.out / "label" / "labels.csv", cfg.out / "ingest" / "records"]
    groups = {}

    info_path = cfg.path("communities", required=False)
    info = {}
    if info_path is not None:
        info = {k: v for k, v in load_community_info(info_path).items() if k in set(names)}
        inputs.append(info_path)
    demo_path = cfg.path("demographics", required=False)
    demographics = None
    if demo_path is not None and info:
        demographics = load_demographics(demo_path)
        groups["demographics"] = demographic_features(demographics, info)
        inputs.append(demo_path)
    covid_path = cfg.path("covid", required=False)
    if covid_path is not None and demographics is not None:
        mask_path = cfg.path("mask", required=False) or cfg.path("masks", required=False)
        masks = load_masks(mask_path) if mask_path is not None else None
        groups["covid"] = community_covid_features(
            load_covid(covid_path), masks, demographics, info, cfg.windows.feature_periods)
        inputs += [p for p in (covid_path, mask_path) if p is not None]

    user, post = interaction_features(index, names, year)
    groups["user_interaction"] = user
    groups["post_interaction"] = post

    score_paths = cfg.score_paths()
    if score_paths:
        scores = {k: load_scores(p) for k, p in score_paths.items()}
        groups["pragmatic"] = pragmatic_features(index, scores, names, year,
                                                 int(cfg["pragmatic_sample"]), cfg.seed)
        inputs += list(score_paths.values())

    lex = cfg.path("lexicon")
    lexicon = load_lexicon(lex)
    cats = [c for c in LIWC_CATEGORIES if c in lexicon]
    if len(cats) < len(LIWC_CATEGORIES):
        logger.warning("lexicon lacks categories %s", sorted(set(LIWC_CATEGORIES) - set(cats)))
    if cats:
        groups["liwc"] = liwc_features(index, LexiconVectorizer(lexicon, cats).fit(), names, year)
        inputs.append(lex)

    for g in ("demographics", "covid", "pragmatic"):
        if g not in groups:
            logger.warning("feature group %s not configured; omitted", g)
    fm = assemble(groups, labels.set_index("community")["label"])
    out = _stage_dir(cfg, "features")
    fm.to_csv(out / "features.csv")
    (out / "columns.json").write_text(json.dumps(fm.manifest(), indent=2) + "\n")
    inter = pd.concat([user, post], axis=1)
    inter.index.name = "community"
    inter.to_csv(out / "interaction.csv")
    write_manifest(out, "features", cfg, inputs)
    return fm


def read_features(cfg: RunConfig) -> FeatureMatrix:
    return FeatureMatrix.from_csv(_require(cfg.out / "features" / "features.csv", "features"))


# -- train / report / correlate --

def _cv_params(cfg):
    m = cfg["model"]
    return {"l2": float(m.get("l2", 1.0)), "k_neighbors": int(m.get("k_neighbors", 5)),
            "seed": cfg.seed}


def run_train(cfg: RunConfig, task: str, feature_set: str):
    fm = read_features(cfg)
    report = run_task(fm, task, feature_set, **_cv_params(cfg))
    out = cfg.out / "train" / task / feature_set
    out = _stage_dir(cfg, str(out.relative_to(cfg.out)))
    report.metrics_frame(feature_set).to_csv(out / "metrics.csv")
    report.coefficient_frame().to_csv(out / "coefficients.csv", index=False)
    (out / "folds.json").write_text(json.dumps(report.folds, indent=2) + "\n")
    write_manifest(out, "train", cfg, [cfg.out / "features" / "features.csv"])
    return report


def run_correlate(cfg: RunConfig) -> pd.DataFrame:
    labels = read_labels(cfg)
    info_path = cfg.path("communities")
    bric_path = cfg.path("bric")
    info = load_community_info(info_path)
    table = bric_correlations(labels, {k: v.county_fips for k, v in info.items()},
                              load_bric(bric_path))
    out = _stage_dir(cfg, "correlate")
    table.to_csv(out / "bric_correlation.csv", index=False)
    write_manifest(out, "correlate", cfg, [info_path, bric_path, cfg.out / "label" / "labels.csv"])
    return table


def _available_sets(fm: FeatureMatrix):
    for name, groups in FEATURE_SETS.items():
        if name in ("all", "all-selected") or all(g in fm.groups for g in groups):
            if any(g in fm.groups for g in groups):
                yield name


def run_report(cfg: RunConfig) -> dict:
    labels = read_labels(cfg)
    fm = read_features(cfg)
    out = _stage_dir(cfg, "report")
    counts = label_counts(labels)
    counts.rename_axis("label").rename("communities").to_csv(out / "recovery_counts.csv")
    lines = ["# Run report", "", "## Recovery patterns", ""]
    lines += [f"- {k}: {v}" for k, v in counts.items()]
    lines.append(f"- All: {int(counts.sum())}")
    results = {}
    coef_set = {"impact": "all", "recovery": "all-selected"}
    for task in TASKS:
        tables = []
        reports = {}
        for fs in _available_sets(fm):
            try:
                reports[fs] = run_task(fm, task, fs, **_cv_params(cfg))
            except InputError as exc:
                logger.warning("%s/%s skipped: %s", task, fs, exc)
        if not reports:
            lines += ["", f"## {task}", "", "not enough labelled communities"]
            continue
        base = reports.get("demographics")
        for fs, rep in reports.items():
            row = rep.metrics_frame(fs)
            p, flag = (np.nan, False)
            if base is not None and fs != "demographics":
                p, flag = paired_accuracy_ttest(rep.predictions, base.predictions, rep.labels)
            row["p_vs_demographics"] = p
            row["p_degenerate"] = flag
            tables.append(row)
        table = pd.concat(tables)
        table.to_csv(out / f"{task}_results.csv")
        chosen = coef_set[task] if coef_set[task] in reports else next(iter(reports))
        reports[chosen].coefficient_frame().to_csv(out / f"{task}_coefficients.csv", index=False)
        results[task] = table
        lines += ["", f"## {task}", "", table.to_string(float_format=lambda v: f"{v:.3f}")]
    bric = cfg.out / "correlate" / "bric_correlation.csv"
    if bric.exists():
        lines += ["", "## BRIC correlation", "",
                  pd.read_csv(bric).to_string(index=False, float_format=lambda v: f"{v:.3f}")]
    (out / "report.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_manifest(out, "report", cfg, [cfg.out / "features" / "features.csv",
                                        cfg.out / "label" / "labels.csv"])
    return results


STAGES = ("ingest", "wellbeing", "forecast", "label", "features", "train", "correlate", "report")


def run_all(cfg: RunConfig):
    run_ingest(cfg)
    run_wellbeing(cfg)
    run_forecast(cfg)
    run_label(cfg)
    run_features(cfg)
    if cfg.data["paths"].get("bric") and cfg.data["paths"].get("communities"):
        try:
            run_correlate(cfg)
        except InputError as exc:
            logger.warning("correlate skipped: %s", exc)
    run_report(cfg)
