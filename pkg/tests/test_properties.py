import random

from hypothesis import given, settings
from hypothesis import strategies as st

from beam import answer_multiset, audit_trace, parse_program, run_query, sld_solve

from randprog import random_program

seeds = st.integers(min_value=0, max_value=2**32 - 1)


@settings(max_examples=150, deadline=None)
@given(seeds, st.sampled_from(["lazy", "eager"]))
def test_random_programs_agree_with_oracle(seed, strategy):
    src, goal = random_program(random.Random(seed))
    res = run_query(src, goal, strategy=strategy, check_invariants=True)
    assert res.status == "ok"
    want = sld_solve(parse_program(src), goal)
    assert answer_multiset(res.answers) == answer_multiset(want)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_random_traces_audit_clean(seed):
    src, goal = random_program(random.Random(seed))
    events = []
    res = run_query(src, goal, trace=events.append)
    rep = audit_trace(events, src)
    assert rep.ok, rep.first()
    assert rep.splits == res.stats.splits


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_full_pruning_never_loses_existence(seed):
    src, goal = random_program(random.Random(seed))
    full = run_query(src, goal, implicit_pruning="full")
    left = run_query(src, goal)
    assert bool(full.answers) == bool(left.answers)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_first_mode_returns_an_answer_of_the_full_set(seed):
    src, goal = random_program(random.Random(seed))
    allans = answer_multiset(run_query(src, goal).answers)
    first = run_query(src, goal, first=True).answers
    assert len(first) == min(1, len(allans))
    if first:
        assert answer_multiset(first)[0] in allans
