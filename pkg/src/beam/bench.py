"""Benchmark manifest runner and report formatting."""

from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import dataclass, field

from .manager import run_query
from .program import LoadError, parse_program

__all__ = [
    "CSV_COLUMNS",
    "BenchEntry",
    "BenchRow",
    "load_manifest",
    "run_entry",
    "run_manifest",
    "judge",
    "format_table",
    "format_csv",
    "APPROX_TOLERANCE",
]

CSV_COLUMNS = ["name", "strategy", "splits", "reductions", "promotions", "answers", "ms",
               "expected_splits", "pass"]

# relative tolerance for rows whose program is a reconstruction
APPROX_TOLERANCE = 0.10


@dataclass
class BenchEntry:
    name: str
    program: str
    goal: str
    strategies: list = field(default_factory=lambda: ["lazy"])
    expected_splits: dict = field(default_factory=dict)
    match: str = "exact"          # exact | approx | info
    group: str = ""
    implicit_pruning: str = "leftmost"
    first: bool = False
    max_steps: int = 5_000_000


@dataclass
class BenchRow:
    name: str
    strategy: str
    splits: int | None = None
    reductions: int | None = None
    promotions: int | None = None
    answers: int | None = None
    ms: float | None = None
    expected_splits: int | None = None
    passed: str = "-"
    status: str = "ok"
    match: str = "exact"

    def as_csv(self) -> list:
        ms = "" if self.ms is None else f"{self.ms:.1f}"
        vals = [self.name, self.strategy, self.splits, self.reductions, self.promotions,
                self.answers, ms, self.expected_splits, self.passed]
        return ["" if v is None else v for v in vals]


def load_manifest(path: str) -> list:
    """Read a JSON manifest; program paths are resolved against its directory."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))
    pdir = os.path.join(base, data.get("programs_dir", "."))
    entries = []
    for raw in data.get("entries", []):
        e = BenchEntry(**raw)
        e.program = os.path.join(pdir, e.program)
        entries.append(e)
    return entries


def judge(match: str, expected, actual) -> str:
    """``yes``/``no`` for exact and approx rows, ``-`` when nothing is asserted."""
    if expected is None or actual is None or match == "info":
        return "-"
    if match == "exact":
        return "yes" if actual == expected else "no"
    if match == "approx":
        ok = abs(actual - expected) <= APPROX_TOLERANCE * expected
        return "yes" if ok else "no"
    raise ValueError(f"unknown match kind {match!r}")


def run_entry(e: BenchEntry, strategy: str, db_cache: dict | None = None) -> BenchRow:
    exp = e.expected_splits.get(strategy)
    row = BenchRow(e.name, strategy, expected_splits=exp, match=e.match)
    if not os.path.exists(e.program):
        row.status = "missing"
        row.passed = "skip"
        return row
    db = None if db_cache is None else db_cache.get(e.program)
    if db is None:
        with open(e.program, encoding="utf-8") as fh:
            db = parse_program(fh.read())
        if db_cache is not None:
            db_cache[e.program] = db
    t0 = time.perf_counter()
    res = run_query(db, e.goal, strategy=strategy, implicit_pruning=e.implicit_pruning,
                    first=e.first, max_steps=e.max_steps)
    row.ms = (time.perf_counter() - t0) * 1000.0
    st = res.stats
    row.splits, row.reductions, row.promotions = st.splits, st.reductions, st.promotions
    row.answers = st.answers
    row.status = res.status
    row.passed = judge(e.match, exp, st.splits) if res.status == "ok" else "no"
    return row


def run_manifest(entries, only=None, progress=None) -> list:
    rows = []
    cache: dict = {}
    for e in entries:
        if only and e.name not in only:
            continue
        for s in e.strategies:
            try:
                row = run_entry(e, s, cache)
            except LoadError as exc:
                row = BenchRow(e.name, s, status=f"load error: {exc}", passed="no")
            rows.append(row)
            if progress is not None:
                progress(row)
    return rows


def format_table(rows) -> str:
    head = ["name", "strategy", "splits", "expected", "match", "pass", "answers",
            "reductions", "promotions", "ms"]
    body = []
    for r in rows:
        body.append([
            r.name, r.strategy,
            "" if r.splits is None else str(r.splits),
            "" if r.expected_splits is None else str(r.expected_splits),
            r.match, r.passed,
            "" if r.answers is None else str(r.answers),
            "" if r.reductions is None else str(r.reductions),
            "" if r.promotions is None else str(r.promotions),
            "" if r.ms is None else f"{r.ms:.1f}",
        ])
    widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h)
              for i, h in enumerate(head)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(head, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for b in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(b, widths)).rstrip())
    return "\n".join(lines) + "\n"


def format_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.as_csv())
    return buf.getvalue()
