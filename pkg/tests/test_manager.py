import io

import pytest

from beam import Engine, EngineError, Options, parse_program, run_query
from beam.oracle import answer_multiset, sld_solve

from conftest import program_text


def test_parent_query_is_deterministic():
    res = run_query(program_text("parent.pl"), "parent(X,mary)")
    assert res.answers == [{"X": "john"}]
    assert res.stats.splits == 0 and res.status == "ok"


def test_nondeterministic_query_splits_and_answers_in_any_order():
    src = "a(1). a(2). a(3).\nb(2). b(3). b(4).\n"
    res = run_query(src, "a(X), b(X)")
    assert answer_multiset(res.answers) == [(("X", "2"),), (("X", "3"),)]
    assert res.stats.splits >= 1


def test_promotion_of_single_alternative():
    res = run_query("p(X) :- q(X).\nq(1).\nq(2) :- fail.\n", "p(X)")
    assert res.answers == [{"X": "1"}]
    assert res.stats.splits == 0


def test_first_answer_mode():
    res = run_query("m(1). m(2). m(3).", "m(X)", first=True)
    assert len(res.answers) == 1 and res.stats.answers == 1


def test_unbound_answers_are_canonical():
    assert run_query("f(g(X,Y,X)).", "f(A)").answers == [{"A": "g(_0,_1,_0)"}]


def test_deadlock_exit_code():
    res = run_query("p :- X < 3, write(X).", "p")
    assert res.status == "deadlock" and res.exit_code == 2
    assert "suspended" in res.diagnostic


def test_step_bound_exit_code():
    res = run_query("loop :- loop.", "loop", max_steps=1000)
    assert res.status == "aborted" and res.exit_code == 3
    assert "1000" in res.diagnostic


def test_undefined_predicate_raises():
    with pytest.raises(EngineError, match="undefined predicate q/0"):
        run_query("p :- q.", "p")


def test_bad_options_rejected():
    with pytest.raises(ValueError):
        Options(strategy="depth-first")
    with pytest.raises(ValueError):
        Options(implicit_pruning="none")


def test_write_output_follows_leftmost_order():
    buf = io.StringIO()
    res = run_query("a(1). a(2).\nb(X) :- write(X), nl.\n", "a(X), b(X)", quiet=False, out=buf)
    assert res.output == "1\n2\n" == buf.getvalue()


def test_quiet_mode_still_records_output():
    res = run_query("hello :- write(hi), nl, write(there).", "hello")
    assert res.output == "hi\nthere"


def test_cut_commits_to_first_guard_answer():
    src = "f(X) :- g(X), !.\nf(9).\ng(1). g(2).\n"
    res = run_query(src, "f(X)")
    assert res.answers == [{"X": "1"}]


def test_commit_behaves_like_guard():
    src = "max(X,Y,X) :- X >= Y | true.\nmax(X,Y,Y) :- Y > X | true.\n"
    assert run_query(src, "max(3,5,M)").answers == [{"M": "5"}]
    assert run_query(src, "max(7,5,M)").answers == [{"M": "7"}]


def test_eager_strategy_splits_annotated_producer():
    src = program_text("ancestor_fig.pl")
    res = run_query(src, "ancestor(a,Z)", strategy="eager")
    assert answer_multiset(res.answers) == answer_multiset(sld_solve(parse_program(src),
                                                                     "ancestor(a,Z)"))
    assert res.stats.splits > 0


def test_full_pruning_prunes_once_a_solution_is_found():
    src = program_text("check_list.pl")
    full = run_query(src, "check_list(8,R)", implicit_pruning="full")
    assert full.stats.splits == 1 and len(full.answers) == 1


def test_stats_are_deterministic():
    src = program_text("queens.pl")
    a = run_query(src, "queens(6,Q)").stats.as_dict()
    b = run_query(src, "queens(6,Q)").stats.as_dict()
    a.pop("wall_time"), b.pop("wall_time")
    assert a == b


def test_trace_events_are_well_formed():
    events = []
    run_query(program_text("parent.pl"), "parent(X,Y)", trace=events.append)
    assert events[0]["rule"] == "start" and events[-1]["rule"] == "end"
    steps = [e["step"] for e in events]
    assert steps == sorted(steps)
    assert all(set(e) >= {"step", "rule", "box", "detail", "stats"} for e in events)
    assert events[-1]["stats"]["answers"] == 4


def test_instruction_level_trace():
    events = []
    run_query(program_text("parent.pl"), "parent(X,mary)", trace=events.append,
              trace_level="instr")
    assert any(e["rule"] == "instr" for e in events)


def test_engine_invariant_checks_run_every_step():
    db = parse_program(program_text("queens.pl"))
    eng = Engine(db, Options(check_invariants=True))
    res = eng.run("queens(5,Q)")
    assert res.status == "ok" and len(res.answers) == 10
