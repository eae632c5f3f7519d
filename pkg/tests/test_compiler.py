import pytest

from beam.compiler import compile_clause, compile_query, format_code
from beam.program import classify_vars, parse_program, parse_query


def seg_for(text, key, i=0):
    db = parse_program(text)
    c = classify_vars(db.predicates[key].clauses[i])
    return compile_clause(c, i + 1)


def ops(seg):
    return [ins[0] for ins in seg.instructions]


def test_fact_compiles_to_head_and_proceed():
    seg = seg_for("parent(a,fa).", ("parent", 2))
    assert ops(seg) == ["explore_alternative", "get_atom", "get_atom", "proceed"]
    assert seg.instructions[0] == ("explore_alternative", 1)


def test_recursive_clause_matches_reference_layout():
    seg = seg_for("a(X,Z) :- p(X,Y), a(Y,Z).", ("a", 2))
    text = format_code(seg)
    assert "prepare_calls 2 L1 L2" in text
    assert text.splitlines()[1:3] == ["    get_var          A1,Y3", "    get_var          A2,Y1"]
    assert text.count("call_pred") == 2
    assert seg.labels == {"L1": 4, "L2": 7}


def test_structures_lists_and_builtins():
    seg = seg_for("p(f(X,[a|T]),3) :- X > 1, !, q(T), write(X).\nq(_).", ("p", 2))
    o = ops(seg)
    for op in ("get_struct", "get_list", "unify_atom", "get_int", "call_builtin", "cut_op",
               "call_pred"):
        assert op in o
    assert seg.cut_positions == (1,)
    assert seg.instructions[o.index("prepare_calls")][1] == 4


def test_commit_and_cut_positions():
    seg = seg_for("s(X) :- X > 1 | t.\nt.", ("s", 1))
    assert len(seg.cut_positions) == 1
    assert "commit_op" in ops(seg) or "cut_op" in ops(seg)


def test_query_variables_stay_permanent():
    items, names = parse_query("p(X), q(Y)")
    seg = compile_query(items, names)
    assert len(seg.perm_slots) == 2
    assert ops(seg).count("call_pred") == 2
