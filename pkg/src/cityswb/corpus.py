"""Ingest archived forum records, index them by community and calendar day.

Records are read from newline-delimited JSON. One object per line::

    {"id": "abc", "author": "u1", "created_at": 1556755199, "body": "...",
     "community": "Omaha", "kind": "submission", "parent_id": null,
     "link_id": "abc"}

Pushshift dumps use ``created_utc``, ``subreddit`` and ``t1_``/``t3_``
prefixed parent ids; those spellings are accepted as well. A submission's
``body`` is expected to already hold title and selftext joined.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator
from zoneinfo import ZoneInfo

from ._validation import InputError, as_date_range

logger = logging.getLogger(__name__)

DEFAULT_STUDY_RANGE = (dt.date(2017, 1, 1), dt.date(2020, 12, 31))
DEFAULT_YEARS = (2017, 2018, 2019, 2020)
DELETED_AUTHORS = frozenset({"[deleted]", "[removed]", ""})

_KINDS = ("submission", "comment")


@dataclass(frozen=True, slots=True)
class Record:
    id: str
    author: str
    created_at: int
    body: str
    community: str
    kind: str
    parent_id: str | None
    link_id: str

    @property
    def is_submission(self) -> bool:
        return self.kind == "submission"


@dataclass(frozen=True)
class CommunityInfo:
    community: str
    city: str
    state: str
    county_fips: str


@dataclass
class RecordStream:
    """Parsed records plus the bookkeeping needed to audit a load.

    ``n_lines == len(records) + skip_count + duplicate_count + out_of_range``
    """

    records: list[Record]
    n_lines: int = 0
    skip_count: int = 0
    duplicate_count: int = 0
    out_of_range: int = 0

    def __iter__(self) -> Iterator[Record]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


def _strip_prefix(value):
    if value is None:
        return None
    value = str(value)
    if len(value) > 3 and value[0] == "t" and value[2] == "_" and value[1].isdigit():
        return value[3:]
    return value


def _parse_time(value) -> int:
    if isinstance(value, bool):
        raise ValueError("boolean timestamp")
    if isinstance(value, (int, float)):
        return int(value)
    text = str(value).strip()
    if text.lstrip("-").isdigit():
        return int(text)
    stamp = dt.datetime.fromisoformat(text.replace("Z", "+00:00"))
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=dt.timezone.utc)
    return int(stamp.timestamp())


def parse_record(obj: dict) -> Record:
    """Build a `Record` from one decoded JSON object; raises ValueError/KeyError."""
    rid = _strip_prefix(obj["id"])
    kind = obj.get("kind")
    parent = _strip_prefix(obj.get("parent_id"))
    if kind is None:
        kind = "comment" if parent else "submission"
    if kind not in _KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    if kind == "comment" and not parent:
        raise ValueError("comment without parent_id")
    if kind == "submission":
        parent = None
    link = _strip_prefix(obj.get("link_id")) or (rid if kind == "submission" else None)
    if not link:
        raise ValueError("comment without link_id")
    created = obj["created_at"] if "created_at" in obj else obj["created_utc"]
    community = obj["community"] if "community" in obj else obj["subreddit"]
    body = obj.get("body")
    if body is None:
        body = ""
    if not isinstance(body, str):
        raise ValueError("body is not text")
    return Record(
        id=str(rid),
        author=str(obj.get("author") or ""),
        created_at=_parse_time(created),
        body=body,
        community=str(community),
        kind=kind,
        parent_id=parent,
        link_id=str(link),
    )


def _epoch_bounds(study_range, tz: ZoneInfo) -> tuple[int, int]:
    start, end = as_date_range(study_range)
    lo = dt.datetime.combine(start, dt.time(0), tz)
    hi = dt.datetime.combine(end + dt.timedelta(days=1), dt.time(0), tz)
    return int(lo.timestamp()), int(hi.timestamp())


def load_records(path, study_range=DEFAULT_STUDY_RANGE, timezone="UTC") -> RecordStream:
    """Read a JSONL archive.

    Malformed lines are logged and counted, never fatal. Duplicate ids keep
    the last occurrence. Records outside `study_range` (inclusive calendar
    days in `timezone`) are dropped and counted; pass ``None`` to keep all.
    """
    path = Path(path)
    try:
        handle = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read records file {path}: {exc}") from exc

    bounds = None
    if study_range is not None:
        bounds = _epoch_bounds(study_range, ZoneInfo(timezone))

    by_id: dict[str, Record] = {}
    stream = RecordStream(records=[])
    with handle:
        for lineno, line in enumerate(handle, 1):
            if not line.strip():
                continue
            stream.n_lines += 1
            try:
                rec = parse_record(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                stream.skip_count += 1
                logger.warning("%s:%d: skipping malformed record (%s)", path, lineno, exc)
                continue
            if bounds is not None and not (bounds[0] <= rec.created_at < bounds[1]):
                stream.out_of_range += 1
                continue
            if rec.id in by_id:
                stream.duplicate_count += 1
                logger.warning("%s:%d: duplicate id %s, keeping last", path, lineno, rec.id)
                del by_id[rec.id]
            by_id[rec.id] = rec
    stream.records = list(by_id.values())
    return stream


def load_community_info(path) -> dict[str, CommunityInfo]:
    """Read the community metadata CSV (community, city, state, county_fips)."""
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read community metadata {path}: {exc}") from exc
    out = {}
    with handle:
        for row in csv.DictReader(handle):
            fips = str(row["county_fips"]).strip().zfill(5)
            if len(fips) != 5 or not fips.isdigit():
                raise InputError(f"{path}: bad county_fips {row['county_fips']!r}")
            info = CommunityInfo(row["community"].strip(), row["city"].strip(),
                                 row["state"].strip(), fips)
            out[info.community] = info
    return out


@dataclass
class CorpusIndex:
    """Per-community, per-day record buckets. Read-only once built."""

    records: list[Record]
    timezone: str = "UTC"
    days: dict[str, dict[dt.date, list[int]]] = field(default_factory=dict)
    submission_days: dict[str, set[dt.date]] = field(default_factory=dict)
    comment_days: dict[str, set[dt.date]] = field(default_factory=dict)
    _by_id: dict[str, Record] | None = field(default=None, repr=False)

    @property
    def communities(self) -> list[str]:
        return sorted(self.days)

    def day_list(self, community: str) -> list[dt.date]:
        return sorted(self.days.get(community, {}))

    def records_on(self, community: str, day: dt.date) -> list[Record]:
        return [self.records[i] for i in self.days.get(community, {}).get(day, ())]

    def records_of(self, community: str, year: int | None = None) -> list[Record]:
        out = []
        for day in self.day_list(community):
            if year is None or day.year == year:
                out.extend(self.records_on(community, day))
        return out

    def by_id(self) -> dict[str, Record]:
        if self._by_id is None:
            self._by_id = {r.id: r for r in self.records}
        return self._by_id

    def day_of(self, rec: Record) -> dt.date:
        return day_of(rec.created_at, ZoneInfo(self.timezone))


def day_of(epoch_seconds: int, tz: ZoneInfo) -> dt.date:
    return dt.datetime.fromtimestamp(epoch_seconds, tz).date()


def partition_by_day(stream: Iterable[Record], timezone: str = "UTC") -> CorpusIndex:
    """Bucket records by (community, calendar day in `timezone`)."""
    tz = ZoneInfo(timezone)
    records = list(stream)
    days: dict[str, dict[dt.date, list[int]]] = defaultdict(lambda: defaultdict(list))
    sub_days: dict[str, set[dt.date]] = defaultdict(set)
    com_days: dict[str, set[dt.date]] = defaultdict(set)
    # fromtimestamp dominates; UTC offsets and DST switches fall on quarter hours
    cache: dict[int, dt.date] = {}
    for i, rec in enumerate(records):
        slot = rec.created_at // 900
        day = cache.get(slot)
        if day is None:
            day = day_of(rec.created_at, tz)
            cache[slot] = day
        days[rec.community][day].append(i)
        (sub_days if rec.is_submission else com_days)[rec.community].add(day)
    return CorpusIndex(
        records=records,
        timezone=timezone,
        days={c: dict(v) for c, v in days.items()},
        submission_days=dict(sub_days),
        comment_days=dict(com_days),
    )


def filter_active_communities(index: CorpusIndex, min_days: int = 300,
                              years=DEFAULT_YEARS, include_comments: bool = False) -> set[str]:
    """Communities with activity on at least `min_days` distinct days in every year.

    Only submissions count unless `include_comments` is set.
    """
    if not 1 <= min_days <= 366:
        raise InputError(f"min_days must be in [1, 366], got {min_days}")
    kept = set()
    for community in index.days:
        active = set(index.submission_days.get(community, ()))
        if include_comments:
            active |= index.comment_days.get(community, set())
        per_year = defaultdict(int)
        for day in active:
            per_year[day.year] += 1
        if all(per_year[y] >= min_days for y in years):
            kept.add(community)
    return kept
