from types import SimpleNamespace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from beam.builtins import (BuiltinError, Fail, Success, Wait, WaitLeftmost, eval_arith,
                           eval_builtin)
from beam.terms import Atom, Store, Struct, Var, deref


@pytest.fixture
def env():
    b = SimpleNamespace(depth=0, externals=[])
    return Store(), b


def test_is_binds_result(env):
    s, b = env
    x = Var(b)
    assert isinstance(eval_builtin("is/2", [x, Struct("+", [1, 2])], s, b), Success)
    assert deref(x) == 3


def test_comparison_waits_on_unbound_operands(env):
    s, b = env
    v = Var(b)
    r = eval_builtin("</2", [v, 1], s, b)
    assert isinstance(r, Wait) and r.vars == (v,)


def test_comparison_results(env):
    s, b = env
    assert isinstance(eval_builtin("=</2", [1, 1], s, b), Success)
    assert isinstance(eval_builtin(">/2", [1, 2], s, b), Fail)
    assert isinstance(eval_builtin("=\\=/2", [1, 2], s, b), Success)


def test_unify_builtin(env):
    s, b = env
    assert isinstance(eval_builtin("=/2", [Struct("f", [1]), Struct("f", [2])], s, b), Fail)
    assert isinstance(eval_builtin("true/0", [], s, b), Success)
    assert isinstance(eval_builtin("fail/0", [], s, b), Fail)


def test_write_is_gated_on_leftmost(env):
    s, b = env
    assert isinstance(eval_builtin("write/1", [1], s, b, leftmost=lambda: False), WaitLeftmost)
    assert eval_builtin("write/1", [Atom("hi")], s, b, leftmost=lambda: True) == ("emit", "hi")
    assert eval_builtin("nl/0", [], s, b, leftmost=lambda: True) == ("emit", "\n")


def test_arith_errors(env):
    s, b = env
    with pytest.raises(BuiltinError, match="type error"):
        eval_builtin("is/2", [Var(b), Struct("+", [Atom("a"), 2])], s, b)
    with pytest.raises(BuiltinError, match="zero divisor"):
        eval_arith(Struct("//", [7, 0]))


def test_integer_division_truncates():
    assert eval_arith(Struct("//", [-7, 2])) == -3
    assert eval_arith(Struct("mod", [-7, 2])) == 1
    assert eval_arith(Struct("-", [5])) == -5


@given(st.integers(-1000, 1000), st.integers(-1000, 1000).filter(lambda x: x != 0))
def test_division_identity(a, b):
    q = eval_arith(Struct("//", [a, b]))
    assert abs(q) == abs(a) // abs(b)
    assert eval_arith(Struct("+", [Struct("*", [q, b]), Struct("-", [a, Struct("*", [q, b])])])) == a
