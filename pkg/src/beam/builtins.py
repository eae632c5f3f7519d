"""The builtin predicates and their suspension behaviour."""

from __future__ import annotations

from dataclasses import dataclass

from .terms import Atom, Struct, Var, deref, format_term

__all__ = [
    "BuiltinError",
    "Success",
    "Fail",
    "Wait",
    "WaitLeftmost",
    "eval_builtin",
    "eval_arith",
    "unbound_vars",
    "GUARD_SAFE",
]


class BuiltinError(Exception):
    """Type error in a builtin; aborts the run."""


@dataclass(frozen=True)
class Success:
    pass


@dataclass(frozen=True)
class Fail:
    pass


@dataclass(frozen=True)
class Wait:
    vars: tuple


@dataclass(frozen=True)
class WaitLeftmost:
    pass


SUCCESS = Success()
FAIL = Fail()

# builtins that may run before the suspension decision of a fresh alternative
GUARD_SAFE = frozenset(["=/2", "=</2", "</2", ">/2", ">=/2", "=:=/2", "=\\=/2", "is/2", "true/0", "fail/0"])

_ARITH = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
}


def unbound_vars(t) -> list:
    out: list = []
    stack = [t]
    while stack:
        x = deref(stack.pop())
        if type(x) is Var:
            if x not in out:
                out.append(x)
        elif type(x) is Struct:
            stack.extend(x.args)
    return out


class _NotGround(Exception):
    pass


def eval_arith(t) -> int:
    """Evaluate a ground integer expression over ``+ - * // mod``."""
    t = deref(t)
    if type(t) is int:
        return t
    if type(t) is Var:
        raise _NotGround()
    if type(t) is Struct:
        if len(t.args) == 2:
            a = eval_arith(t.args[0])
            b = eval_arith(t.args[1])
            op = t.name
            if op in _ARITH:
                return _ARITH[op](a, b)
            if op in ("//", "mod"):
                if b == 0:
                    raise BuiltinError("evaluation error: zero divisor")
                if op == "//":
                    q = abs(a) // abs(b)
                    return q if (a >= 0) == (b >= 0) else -q
                return a % b
        if len(t.args) == 1 and t.name == "-":
            return -eval_arith(t.args[0])
    raise BuiltinError(f"type error: cannot evaluate {format_term(t)}")


_COMPARE = {
    "=<": lambda a, b: a <= b,
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "=:=": lambda a, b: a == b,
    "=\\=": lambda a, b: a != b,
}


def eval_builtin(tag: str, args: list, store, box, leftmost=None):
    """Evaluate builtin ``tag`` (``name/arity``) in the context of ``box``.

    Returns :class:`Success`, :class:`Fail`, :class:`Wait` (operands not yet
    ground) or :class:`WaitLeftmost` (side effect not yet allowed).  ``leftmost``
    is a zero-argument callable consulted by ``write/1`` and ``nl/0``; when it
    returns true they yield ``("emit", text)`` instead of running the output
    themselves, so the caller owns the stream.
    """
    name = tag.rsplit("/", 1)[0]
    if name == "true":
        return SUCCESS
    if name == "fail":
        return FAIL
    if name == "=":
        return SUCCESS if store.unify(args[0], args[1], box) else FAIL
    if name in _COMPARE:
        try:
            a = eval_arith(args[0])
            b = eval_arith(args[1])
        except _NotGround:
            return Wait(tuple(unbound_vars(Struct("f", list(args)))))
        return SUCCESS if _COMPARE[name](a, b) else FAIL
    if name == "is":
        try:
            v = eval_arith(args[1])
        except _NotGround:
            return Wait(tuple(unbound_vars(args[1])))
        return SUCCESS if store.unify(args[0], v, box) else FAIL
    if name in ("write", "nl"):
        if leftmost is None or not leftmost():
            return WaitLeftmost()
        if name == "nl":
            return ("emit", "\n")
        x = deref(args[0])
        text = x.name if type(x) is Atom else format_term(x)
        return ("emit", text)
    raise BuiltinError(f"unknown builtin {tag}")
