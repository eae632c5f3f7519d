from types import SimpleNamespace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from beam.terms import (NIL, Atom, Store, Struct, Var, deref, format_term, list_items,
                        make_list, resolve)


def box(depth):
    return SimpleNamespace(depth=depth, externals=[])


def test_atoms_are_interned():
    assert Atom("foo") is Atom("foo")
    assert Atom("foo") is not Atom("bar")


def test_struct_needs_arguments():
    with pytest.raises(ValueError):
        Struct("f", [])


def test_deref_is_idempotent():
    home = box(0)
    a, b = Var(home), Var(home)
    a.value = b
    b.value = 7
    assert deref(a) == 7
    assert deref(deref(a)) == deref(a)


def test_local_binding_is_not_external():
    s = Store()
    b = box(1)
    v = Var(b)
    assert s.unify(v, Atom("x"), b)
    assert b.externals == []
    assert deref(v) is Atom("x")


def test_external_binding_recorded_for_ancestor_variable():
    s = Store()
    up, down = box(0), box(1)
    v = Var(up)
    assert s.unify(Struct("f", [v]), Struct("f", [3]), down)
    assert len(down.externals) == 1
    ext = down.externals[0]
    assert ext.var is v and ext.value == 3 and ext.owner is down


def test_failed_unify_rolls_back_everything():
    s = Store()
    up, down = box(0), box(1)
    x, y = Var(up), Var(down)
    t1 = Struct("f", [x, y, Atom("a")])
    t2 = Struct("f", [1, 2, Atom("b")])
    assert not s.unify(t1, t2, down)
    assert x.value is None and y.value is None
    assert down.externals == []


def test_var_var_binds_deeper_to_shallower():
    s = Store()
    up, down = box(0), box(2)
    old, young = Var(up), Var(down)
    assert s.unify(old, young, down)
    assert young.value is old and old.value is None


def test_undo_to_restores_values():
    s = Store()
    b = box(0)
    v, w = Var(b), Var(b)
    mark = len(s.trail)
    s.bind(v, 1, b)
    s.bind(w, 2, b)
    s.undo_to(mark)
    assert v.value is None and w.value is None


def test_on_bind_fires_for_suspended_variables():
    s = Store()
    seen = []
    s.on_bind = lambda var, b: seen.append(var)
    b = box(0)
    v = Var(b)
    v.suspensions.append("someone")
    s.bind(v, 1, b)
    assert seen == [v]


def test_resolve_handles_long_lists():
    items = list(range(50_000))
    t = make_list(items)
    assert list_items(resolve(t)) == items


def test_format_term_lists_and_operators():
    t = make_list([1, Atom("a")], Atom("b"))
    assert format_term(t) == "[1,a|b]"
    assert format_term(make_list([])) == "[]"
    assert format_term(Struct("+", [1, Struct("*", [2, 3])])) == "1+2*3"


terms = st.recursive(
    st.one_of(st.integers(-5, 5), st.sampled_from([Atom("a"), Atom("b"), NIL])),
    lambda inner: st.builds(lambda n, xs: Struct(n, xs), st.sampled_from(["f", "g"]),
                            st.lists(inner, min_size=1, max_size=3)),
    max_leaves=12,
)


@given(terms)
def test_ground_terms_unify_with_themselves(t):
    s = Store()
    assert s.unify(t, t, box(0))
    assert s.trail == []


@given(terms, terms)
def test_unify_is_all_or_nothing(t1, t2):
    s = Store()
    b = box(1)
    home = box(0)
    v = Var(home)
    ok = s.unify(Struct("p", [v, t1]), Struct("p", [0, t2]), b)
    if not ok:
        assert v.value is None and b.externals == []
    else:
        assert deref(v) == 0 and len(b.externals) == 1
