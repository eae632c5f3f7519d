"""Herbrand terms, permanent variables and direction-disciplined unification.

Terms are plain Python objects: ``Atom`` instances (interned), Python ``int``,
``Struct`` (functor name plus a mutable argument list) and ``Var``.  Lists are
``'.'/2`` structures terminated by the atom ``[]``.

Binding a variable always goes through :class:`Store`, which knows which
and-box is doing the binding.  A binding made from a box deeper than the
variable's home box is *external* and is recorded on the box as an
:class:`ExternalBinding`; the variable keeps the working value so that
descendants can read it directly.
"""

from __future__ import annotations

import itertools

__all__ = [
    "Atom",
    "Struct",
    "Var",
    "ExternalBinding",
    "Store",
    "UnifyError",
    "NIL",
    "atom",
    "deref",
    "make_list",
    "list_items",
    "resolve",
    "format_term",
    "is_callable",
]


class UnifyError(Exception):
    pass


class Atom:
    __slots__ = ("name",)
    _table: dict[str, "Atom"] = {}

    def __new__(cls, name: str) -> "Atom":
        a = cls._table.get(name)
        if a is None:
            a = object.__new__(cls)
            a.name = name
            cls._table[name] = a
        return a

    def __repr__(self) -> str:
        return f"Atom({self.name!r})"

    def __reduce__(self):
        return (Atom, (self.name,))


def atom(name: str) -> Atom:
    return Atom(name)


NIL = Atom("[]")


class Struct:
    __slots__ = ("name", "args")

    def __init__(self, name: str, args):
        if not args:
            raise ValueError("compound terms need at least one argument")
        self.name = name
        self.args = list(args)

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def key(self) -> tuple[str, int]:
        return (self.name, len(self.args))

    def __repr__(self) -> str:
        return f"Struct({self.name!r}, {self.args!r})"


_var_ids = itertools.count(1)


class Var:
    """A permanent variable: a suspension-capable cell with a home and-box.

    ``value`` is ``None`` while the variable is unbound.  ``suspensions`` is an
    ordered list of and-boxes that recorded a binding for this variable or wait
    for it to become bound.
    """

    __slots__ = ("id", "value", "home", "suspensions", "name")

    def __init__(self, home=None, name: str | None = None):
        self.id = next(_var_ids)
        self.value = None
        self.home = home
        self.suspensions: list = []
        self.name = name

    def __repr__(self) -> str:
        if self.value is None:
            return f"_G{self.id}"
        return f"_G{self.id}={format_term(self.value)}"


class ExternalBinding:
    """A binding made by ``owner`` to a variable homed in a strict ancestor."""

    __slots__ = ("var", "value", "owner", "installed")

    def __init__(self, var: Var, value, owner):
        self.var = var
        self.value = value
        self.owner = owner
        self.installed = True

    def __repr__(self) -> str:
        return f"<ext {self.var!r} := {format_term(self.value)}>"


def deref(t):
    while type(t) is Var:
        v = t.value
        if v is None:
            return t
        t = v
    return t


def make_list(items, tail=NIL):
    out = tail
    for x in reversed(list(items)):
        out = Struct(".", [x, out])
    return out


def list_items(t):
    """Return the Python list for a proper list term, or ``None``."""
    out = []
    t = deref(t)
    while type(t) is Struct and t.name == "." and len(t.args) == 2:
        out.append(t.args[0])
        t = deref(t.args[1])
    if t is NIL:
        return out
    return None


def resolve(t):
    """Fully dereference ``t`` into a fresh term (unbound variables kept)."""
    t = deref(t)
    if type(t) is not Struct:
        return t
    # the last argument is followed in a loop so long lists do not recurse
    spine = []
    while type(t) is Struct:
        spine.append(t)
        t = deref(t.args[-1])
    for s in reversed(spine):
        t = Struct(s.name, [resolve(a) for a in s.args[:-1]] + [t])
    return t


def is_callable(t) -> bool:
    t = deref(t)
    return type(t) is Atom or type(t) is Struct


_SOLO = set("!;[]{}")
_SYMBOL_CHARS = set("+-*/\\^<>=~:.?@#&$")


def _quote_atom(name: str) -> str:
    if not name:
        return "''"
    if name in ("[]", "!", ";", "{}", ","):
        return name if name != "," else "','"
    if name[0].islower() and all(c.isalnum() or c == "_" for c in name):
        return name
    if all(c in _SYMBOL_CHARS for c in name):
        return name
    return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


_INFIX = {
    ":-": 1200, "|": 1100, "&&": 1050, ",": 1000,
    "=": 700, "\\=": 700, "is": 700, "=:=": 700, "=\\=": 700,
    "<": 700, ">": 700, "=<": 700, ">=": 700, "==": 700, "\\==": 700,
    "+": 500, "-": 500, "*": 400, "//": 400, "/": 400, "mod": 400,
}


def format_term(t, names: dict | None = None, prec: int = 1200) -> str:
    """Render a term in Prolog syntax (operators for the fixed table)."""
    t = deref(t)
    if type(t) is int:
        return str(t)
    if type(t) is Atom:
        s = _quote_atom(t.name)
        if t.name in _INFIX and prec < 1200:
            return "(" + s + ")" if _INFIX[t.name] > prec else s
        return s
    if type(t) is Var:
        if names and t in names:
            return names[t]
        return f"_G{t.id}"
    if t.name == "." and len(t.args) == 2:
        parts = []
        cur = t
        while type(cur) is Struct and cur.name == "." and len(cur.args) == 2:
            parts.append(format_term(cur.args[0], names, 999))
            cur = deref(cur.args[1])
        s = "[" + ",".join(parts)
        if cur is not NIL:
            s += "|" + format_term(cur, names, 999)
        return s + "]"
    if len(t.args) == 2 and t.name in _INFIX:
        p = _INFIX[t.name]
        left_p = p - 1 if t.name not in (",", "&&", "|", ":-") else p - 1
        right_p = p if t.name in (",", "&&", "|") else p - 1
        if t.name in ("+", "-", "*", "//", "/", "mod"):
            left_p, right_p = p, p - 1
        lhs = format_term(t.args[0], names, left_p)
        rhs = format_term(t.args[1], names, right_p)
        op = t.name
        if op.isalpha():
            s = f"{lhs} {op} {rhs}"
        elif op == ",":
            s = f"{lhs}, {rhs}"
        else:
            s = f"{lhs}{op}{rhs}" if op in ("+", "*", "/", "//") else f"{lhs} {op} {rhs}"
        return "(" + s + ")" if p > prec else s
    if len(t.args) == 1 and t.name == "-":
        inner = deref(t.args[0])
        s = "-" + format_term(inner, names, 200)
        if type(inner) is int:
            s = "- " + str(inner)
        return "(" + s + ")" if 200 > prec else s
    args = ",".join(format_term(a, names, 999) for a in t.args)
    return f"{_quote_atom(t.name)}({args})"


class Store:
    """Variable binding with external recording, trail and wake signalling.

    ``trail`` collects every variable bound during one unification so that a
    failed unification (or a speculative probe) can be rolled back in full.
    ``on_bind`` is called with each variable (and the binding box) that got
    bound while it had suspended boxes attached; the engine uses it to send wake signals.
    """

    def __init__(self):
        self.trail: list = []
        self.probing = False
        self.on_bind = None

    # -- locality --------------------------------------------------------

    @staticmethod
    def is_external(var: Var, box) -> bool:
        # Equal depth counters mean local; bindings only cross ancestor lines.
        return var.home.depth != box.depth

    # -- binding ---------------------------------------------------------

    def bind(self, var: Var, value, box) -> None:
        var.value = value
        self.trail.append(var)
        if self.probing:
            return
        if var.home.depth != box.depth:
            box.externals.append(ExternalBinding(var, value, box))
        if var.suspensions and self.on_bind is not None:
            self.on_bind(var, box)

    def bind_vars(self, a: Var, b: Var, box) -> None:
        """Bind two unbound permanent variables, deeper one to shallower."""
        if a is b:
            return
        da, db = a.home.depth, b.home.depth
        if da > db or (da == db and a.id > b.id):
            self.bind(a, b, box)
        else:
            self.bind(b, a, box)

    def undo_to(self, mark: int) -> None:
        trail = self.trail
        while len(trail) > mark:
            trail.pop().value = None

    # -- unification -----------------------------------------------------

    def unify(self, t1, t2, box) -> bool:
        """Unify without occurs-check; on failure every binding is undone.

        External bindings created along the way are appended to
        ``box.externals``; on failure those records are dropped too.
        """
        mark = len(self.trail)
        ext_mark = len(box.externals)
        try:
            ok = self._unify(t1, t2, box)
        except RecursionError:
            ok = False
        if not ok:
            self.undo_to(mark)
            del box.externals[ext_mark:]
        return ok

    def _unify(self, t1, t2, box) -> bool:
        stack = [(t1, t2)]
        while stack:
            a, b = stack.pop()
            a = deref(a)
            b = deref(b)
            if a is b:
                continue
            ta, tb = type(a), type(b)
            if ta is Var:
                if tb is Var:
                    self.bind_vars(a, b, box)
                else:
                    self.bind(a, b, box)
            elif tb is Var:
                self.bind(b, a, box)
            elif ta is int:
                if tb is not int or a != b:
                    return False
            elif ta is Atom:
                return False  # a is not b
            else:
                if tb is not Struct or a.name != b.name or len(a.args) != len(b.args):
                    return False
                stack.extend(zip(a.args, b.args))
        return True

    # -- rollback of recorded externals ----------------------------------

    @staticmethod
    def undo_externals(box) -> None:
        """Reset every variable bound by ``box``'s external records.

        The list stays on the box (it describes the box's constraints); each
        record is flagged as not installed.
        """
        for ext in reversed(box.externals):
            if ext.installed:
                ext.var.value = None
                ext.installed = False

    @staticmethod
    def redo_externals(box) -> None:
        for ext in box.externals:
            if ext.var.value is None:
                ext.var.value = ext.value
                ext.installed = True
            else:
                ext.installed = False
