import json

import pytest

from cityswb.corpus import Record
from cityswb.pipeline import RunConfig, run_all
from cityswb.synthetic import generate


def make_record(rid, author="a", created_at=0, body="", community="c", parent_id=None,
                link_id=None, kind=None):
    if kind is None:
        kind = "submission" if parent_id is None else "comment"
    return Record(id=rid, author=author, created_at=created_at, body=body, community=community,
                  kind=kind, parent_id=parent_id, link_id=link_id or (rid if parent_id is None else "p"))


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(row if isinstance(row, str) else json.dumps(row))
            fh.write("\n")
    return path


SIX = ["Unaffected", "Recovered", "NonRecovered"] * 2


@pytest.fixture(scope="session")
def synthetic_run(tmp_path_factory):
    """Six synthetic communities, two per recovery pattern, through every stage once."""
    root = tmp_path_factory.mktemp("synthetic")
    generate(root, patterns=SIX, seed=0)
    cfg = RunConfig.load(root / "config.json")
    run_all(cfg)
    return cfg


# acceptance criteria register their verdicts here; printed once at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
