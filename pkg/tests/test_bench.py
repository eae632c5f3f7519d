import json

import pytest

from beam.bench import (CSV_COLUMNS, BenchEntry, format_csv, format_table, judge,
                        load_manifest, run_entry, run_manifest)

from conftest import MANIFEST


def test_judge():
    assert judge("exact", 624, 624) == "yes"
    assert judge("exact", 624, 625) == "no"
    assert judge("approx", 100, 110) == "yes"
    assert judge("approx", 100, 111) == "no"
    assert judge("info", 10, 99) == "-"
    assert judge("exact", None, 3) == "-"
    with pytest.raises(ValueError):
        judge("fuzzy", 1, 1)


def test_shipped_manifest_resolves_programs():
    entries = load_manifest(MANIFEST)
    names = {e.name for e in entries}
    assert {"query", "zebra", "send_money", "queens-9", "check_list-8", "tak"} <= names
    for e in entries:
        assert e.program.endswith(".pl")


def write_manifest(tmp_path, entries):
    (tmp_path / "programs").mkdir()
    (tmp_path / "programs" / "p.pl").write_text("a(1). a(2).\nb(2).\n")
    m = tmp_path / "m.json"
    m.write_text(json.dumps({"programs_dir": "programs", "entries": entries}))
    return str(m)


def test_empty_manifest(tmp_path):
    m = write_manifest(tmp_path, [])
    rows = run_manifest(load_manifest(m))
    assert rows == []
    assert format_csv(rows) == ",".join(CSV_COLUMNS) + "\n"
    assert format_table(rows).startswith("name")


def test_missing_program_is_skipped(tmp_path):
    m = write_manifest(tmp_path, [{"name": "gone", "program": "nope.pl", "goal": "x"}])
    (row,) = run_manifest(load_manifest(m))
    assert row.passed == "skip" and row.status == "missing" and row.splits is None


def test_rows_per_strategy_and_only_filter(tmp_path):
    m = write_manifest(tmp_path, [
        {"name": "ab", "program": "p.pl", "goal": "a(X), b(X)",
         "strategies": ["lazy", "eager"], "expected_splits": {"lazy": 0, "eager": 0}},
        {"name": "other", "program": "p.pl", "goal": "a(X)"},
    ])
    rows = run_manifest(load_manifest(m), only={"ab"})
    assert [(r.name, r.strategy) for r in rows] == [("ab", "lazy"), ("ab", "eager")]
    assert all(r.answers == 1 and r.passed == "yes" for r in rows)
    lines = format_csv(rows).splitlines()
    assert lines[0].split(",") == CSV_COLUMNS and len(lines) == 3


def test_aborted_run_fails_its_row(tmp_path):
    (tmp_path / "loop.pl").write_text("loop :- loop.\n")
    e = BenchEntry("loop", str(tmp_path / "loop.pl"), "loop", expected_splits={"lazy": 0},
                   max_steps=100)
    row = run_entry(e, "lazy")
    assert row.status == "aborted" and row.passed == "no"
