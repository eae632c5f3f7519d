import copy
import json

import pytest

from beam import run_query
from beam.oracle import (DepthExceeded, TraceParseError, answer_multiset, audit_trace,
                         load_trace, sld_solve)
from beam.program import parse_program

from conftest import program_text

FIG_PARENT = """
parent(john, richard).
parent(john, mary).
parent(patrick, paul).
parent(patrick, susan).
"""

FIG_ANCESTOR = """
ancestor(X,Y) :- parent(X,Y).
ancestor(X,Z) :- parent(X,Y), ancestor(Y,Z).
parent(a,fa).
parent(a,ma).
"""


def solve(text, query, **kw):
    return sld_solve(parse_program(text), query, **kw)


def test_parent_example():
    assert solve(FIG_PARENT, "parent(X,mary)") == [{"X": "john"}]


def test_ancestor_example_hand_derived():
    got = solve(FIG_ANCESTOR, "ancestor(a,Z)")
    assert answer_multiset(got) == [(("Z", "fa"),), (("Z", "ma"),)]


def test_unsatisfiable_query_gives_empty_set():
    assert solve(FIG_PARENT, "parent(mary,X)") == []


def test_depth_bound_is_reported_distinctly():
    with pytest.raises(DepthExceeded):
        solve("loop :- loop.", "loop", depth_bound=1000)


def test_cut_and_arithmetic():
    src = "f(X) :- g(X), !.\nf(9).\ng(1). g(2).\nh(Y) :- f(X), Y is X * 10 + 1.\n"
    assert solve(src, "h(Y)") == [{"Y": "11"}]
    assert solve("m(X) :- X > 1 | true.\nm(_).\n", "m(5)") == [{}]


def test_first_mode_and_canonical_names():
    assert solve("m(1). m(2).", "m(X)", first=True) == [{"X": "1"}]
    assert solve("f(g(X,Y,X)).", "f(A)") == [{"A": "g(_0,_1,_0)"}]


def test_answer_multiset_ignores_order_but_not_multiplicity():
    a = [{"X": "1"}, {"X": "2"}, {"X": "1"}]
    b = [{"X": "2"}, {"X": "1"}, {"X": "1"}]
    assert answer_multiset(a) == answer_multiset(b)
    assert answer_multiset(a) != answer_multiset(b[:2])


def trace_of(src, goal, **opts):
    events = []
    run_query(src, goal, trace=events.append, **opts)
    return json.loads(json.dumps(events))


def test_legal_queens_trace_audits_clean():
    src = program_text("queens.pl")
    rep = audit_trace(trace_of(src, "queens(6,Q)"), src)
    assert rep.ok, rep.first()
    assert rep.splits > 0 and rep.events > 0


def test_forged_promotion_at_two_alternative_orbox():
    src = "p(X) :- q(X).\nq(1).\nq(2) :- 1 > 2.\n"
    events = trace_of(src, "p(X)")
    promote = next(e for e in events if e["rule"] == "promote")
    promote["detail"]["alts"] = 2
    rep = audit_trace(events, src)
    assert not rep.ok
    assert "promotion requires single alternative" in rep.first()


def test_forged_split_of_box_with_unfired_cut():
    src = program_text("cut_example.pl")
    events = trace_of(src, "a(X),b(X)")
    split = next(e for e in events if e["rule"] == "split")
    split["detail"]["cut_pending"] = 1
    rep = audit_trace(events, src)
    assert any("unfired cut" in v for v in rep.violations)


def test_forged_split_while_work_pending():
    src = "a(1). a(2).\nb(1). b(2).\n"
    events = trace_of(src, "a(X), b(X)")
    split = next(e for e in events if e["rule"] == "split")
    split["detail"]["pending"]["agenda"] = 1
    rep = audit_trace(events, src)
    assert any("pending" in v for v in rep.violations)


def test_forged_eager_split_under_lazy_strategy():
    src = "a(1). a(2).\nb(1). b(2).\n"
    events = trace_of(src, "a(X), b(X)")
    split = next(e for e in events if e["rule"] == "split")
    split["detail"]["cause"] = "eager"
    rep = audit_trace(events, src)
    assert any("eager split" in v for v in rep.violations)


def test_forged_split_count_mismatch():
    src = "a(1). a(2).\nb(1). b(2).\n"
    events = trace_of(src, "a(X), b(X)")
    forged = copy.deepcopy(events)
    forged[-1]["stats"]["splits"] += 1
    assert audit_trace(events, src).ok
    assert not audit_trace(forged, src).ok


def test_malformed_trace_reports_line(tmp_path):
    p = tmp_path / "t.jsonl"
    p.write_text('{"rule": "start", "detail": {}}\nnot json\n')
    with pytest.raises(TraceParseError, match="line 2"):
        load_trace(str(p))
    with pytest.raises(TraceParseError, match="line 1"):
        load_trace(['{"no_rule": 1}'])
