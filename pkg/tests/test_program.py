import pytest

from beam.program import (Commit, Cut, Goal, LoadError, classify_vars, index_candidates,
                          parse_program, parse_query)
from beam.reader import PrologSyntaxError, parse_term
from beam.terms import Atom, Struct, deref, format_term


def test_reader_round_trips_common_syntax():
    for text, shown in [
        ("a :- b, c", "a :- b, c"),
        ("[1,2|T]", None),
        ("'hello world'", "'hello world'"),
        ("f(-1)", "f(-1)"),
        ("x =\\= y", "x =\\= y"),
    ]:
        t, _ = parse_term(text)
        if shown is not None:
            assert format_term(t) == shown


def test_reader_operator_priorities():
    t, names = parse_term("X is 1 + 2 * 3")
    assert t.name == "is"
    rhs = t.args[1]
    assert rhs.name == "+" and rhs.args[1].name == "*"
    assert set(names) == {"X"}


def test_reader_shares_named_variables():
    t, names = parse_term("f(X,Y,X)")
    assert t.args[0] is t.args[2] is names["X"]


def test_reader_skips_comments():
    t, _ = parse_term("% line\n a /* block */")
    assert t is Atom("a")


@pytest.mark.parametrize("bad", ["p(", "a ; b", "\"str\""])
def test_reader_reports_position(bad):
    with pytest.raises(PrologSyntaxError, match="line 1"):
        parse_term(bad)


def test_clauses_are_grouped_by_predicate_in_order():
    db = parse_program("p(1).\nq.\np(2).\n")
    p = db.predicates[("p", 1)]
    assert [deref(c.head.args[0]) for c in p.clauses] == [1, 2]
    assert db.predicates[("q", 0)].clauses


def test_body_flattening_marks_cut_and_commit():
    db = parse_program("p(X) :- q(X), !, r.\ns(X) :- X > 1 | t.\nq(_). r. t.\n")
    body = db.predicates[("p", 1)].clauses[0].body
    assert [type(b) for b in body] == [Goal, Cut, Goal]
    assert db.predicates[("p", 1)].clauses[0].has_cut
    assert isinstance(db.predicates[("s", 1)].clauses[0].body[1], Commit)


def test_eager_split_directive():
    db = parse_program(":- eager_split(member/2).\nmember(X,[X|_]).\n")
    assert db.predicates[("member", 2)].eager_split


@pytest.mark.parametrize("bad, msg", [
    (":- foo(bar).", "unsupported directive"),
    ("X.", "invalid clause head"),
    ("p :- 3.", "not callable"),
    ("p :- .", "unexpected"),
])
def test_load_errors(bad, msg):
    with pytest.raises(LoadError, match=msg):
        parse_program(bad)


def test_parse_query_returns_names():
    items, names = parse_query("?- p(X), q(Y)")
    assert len(items) == 2 and set(names) == {"X", "Y"}


def test_variable_classification():
    db = parse_program("a(X,Z) :- p(X,Y), a(Y,Z).\nb(X) :- c(X).\n")
    c = classify_vars(db.predicates[("a", 2)].clauses[0])
    x, z = c.varnames["X"], c.varnames["Z"]
    y = c.varnames["Y"]
    assert c.perm_vars == [y] and c.temp_vars == [x, z]
    # later last use gets the lower slot number
    assert (c.slots[z], c.slots[y], c.slots[x]) == (1, 2, 3)
    c = classify_vars(db.predicates[("b", 1)].clauses[0])
    assert c.perm_vars == [] and len(c.temp_vars) == 1


def test_first_argument_indexing_keeps_order():
    db = parse_program("p(a,1).\np(X,2).\np(b,3).\np(f(x),4).\n")
    p = db.predicates[("p", 2)]
    got = [deref(c.head.args[1]) for c in index_candidates(p, Atom("b"))]
    assert got == [2, 3]
    got = [deref(c.head.args[1]) for c in index_candidates(p, Struct("f", [Atom("y")]))]
    assert got == [2, 4]
    assert len(index_candidates(p, parse_term("Z")[0])) == 4
