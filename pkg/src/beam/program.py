"""Program loading: clauses, variable classification, predicate database."""

from __future__ import annotations

from dataclasses import dataclass, field

from .reader import PrologSyntaxError, parse_term, parse_terms
from .terms import Atom, Struct, Var, deref, format_term

__all__ = [
    "LoadError",
    "Goal",
    "Cut",
    "Commit",
    "SeqBarrier",
    "Clause",
    "Predicate",
    "Database",
    "BUILTINS",
    "parse_program",
    "parse_query",
    "flatten_body",
    "classify_vars",
    "index_key",
    "index_candidates",
]


class LoadError(Exception):
    pass


# name/arity -> tag; arities are fixed per tag
BUILTINS = {
    ("=", 2): "=",
    ("=<", 2): "=<",
    ("<", 2): "<",
    (">", 2): ">",
    (">=", 2): ">=",
    ("=:=", 2): "=:=",
    ("=\\=", 2): "=\\=",
    ("is", 2): "is",
    ("true", 0): "true",
    ("fail", 0): "fail",
    ("write", 1): "write",
    ("nl", 0): "nl",
}


@dataclass(frozen=True)
class Goal:
    term: object


@dataclass(frozen=True)
class Cut:
    pass


@dataclass(frozen=True)
class Commit:
    pass


@dataclass(frozen=True)
class SeqBarrier:
    pass


@dataclass
class Clause:
    head: object
    body: list
    varnames: dict = field(default_factory=dict)
    # filled by classify_vars
    perm_vars: list = field(default_factory=list)
    temp_vars: list = field(default_factory=list)
    slots: dict = field(default_factory=dict)
    classified: bool = False

    @property
    def has_cut(self) -> bool:
        return any(isinstance(b, Cut) for b in self.body)

    @property
    def has_commit(self) -> bool:
        return any(isinstance(b, Commit) for b in self.body)

    @property
    def is_fact(self) -> bool:
        return not self.body

    @property
    def key(self) -> tuple[str, int]:
        h = self.head
        if type(h) is Atom:
            return (h.name, 0)
        return (h.name, len(h.args))

    def goals(self) -> list:
        return [b.term for b in self.body if isinstance(b, Goal)]

    def to_text(self) -> str:
        names = {v: n for n, v in self.varnames.items()}
        head = format_term(self.head, names)
        if not self.body:
            return head + "."
        out = ""
        sep = ""
        for item in self.body:
            if isinstance(item, Commit):
                sep = " | "
                continue
            if isinstance(item, SeqBarrier):
                sep = " && "
                continue
            txt = "!" if isinstance(item, Cut) else format_term(item.term, names, 999)
            out += (sep or ", ") + txt if out else txt
            sep = ""
        return f"{head} :- {out}."


@dataclass
class Predicate:
    name: str
    arity: int
    clauses: list = field(default_factory=list)
    eager_split: bool = False
    builtin: str | None = None

    @property
    def key(self) -> tuple[str, int]:
        return (self.name, self.arity)


@dataclass
class Database:
    predicates: dict = field(default_factory=dict)
    directives: list = field(default_factory=list)

    def lookup(self, name: str, arity: int) -> Predicate | None:
        return self.predicates.get((name, arity))

    def add_clause(self, clause: Clause) -> None:
        key = clause.key
        if key in BUILTINS:
            raise LoadError(f"cannot redefine builtin {key[0]}/{key[1]}")
        pred = self.predicates.get(key)
        if pred is None:
            pred = self.predicates[key] = Predicate(*key)
        pred.clauses.append(clause)

    def to_text(self) -> str:
        lines = []
        for (name, arity) in sorted(k for k, p in self.predicates.items() if p.eager_split):
            lines.append(f":- eager_split({name}/{arity}).")
        for pred in self.predicates.values():
            for c in pred.clauses:
                lines.append(c.to_text())
        return "\n".join(lines) + "\n"


def flatten_body(t, allow_seq: bool = True) -> list:
    """Turn a body term into a list of body items.

    ``&&`` may only appear at the top level of a body; a ``&&`` nested under
    the parallel conjunction is rejected.
    """
    t = deref(t)
    if type(t) is Struct and len(t.args) == 2:
        if t.name == "&&":
            if not allow_seq:
                raise LoadError("sequential conjunction '&&' is not allowed under ','")
            return flatten_body(t.args[0], True) + [SeqBarrier()] + flatten_body(t.args[1], True)
        if t.name == "|":
            return flatten_body(t.args[0], allow_seq) + [Commit()] + flatten_body(t.args[1], allow_seq)
        if t.name == ",":
            return flatten_body(t.args[0], False) + flatten_body(t.args[1], False)
    if type(t) is Atom and t.name == "!":
        return [Cut()]
    if type(t) is Var:
        raise LoadError("variable goals are not supported")
    if type(t) is int:
        raise LoadError(f"integer {t} is not callable")
    return [Goal(t)]


def _vars_in(t, acc: list) -> list:
    stack = [t]
    while stack:
        x = deref(stack.pop())
        if type(x) is Var:
            if x not in acc:
                acc.append(x)
        elif type(x) is Struct:
            stack.extend(reversed(x.args))
    return acc


def _ordered_vars(t) -> list:
    out: list = []
    def walk(x):
        x = deref(x)
        if type(x) is Var:
            if x not in out:
                out.append(x)
        elif type(x) is Struct:
            for a in x.args:
                walk(a)
    walk(t)
    return out


def classify_vars(c: Clause) -> Clause:
    """Classify variables as permanent (body-only) or temporary, assign slots.

    Slots are numbered so that variables whose last use is in a later goal get
    lower numbers; ties keep first-occurrence order.  The head counts as goal 0.
    """
    head_vars = _ordered_vars(c.head)
    occurrence = list(head_vars)
    last_use = {v: 0 for v in head_vars}
    for gi, g in enumerate(c.goals(), start=1):
        for v in _ordered_vars(g):
            if v not in last_use:
                occurrence.append(v)
            last_use[v] = gi
    perm = [v for v in occurrence if v not in head_vars]
    order = sorted(occurrence, key=lambda v: (-last_use[v], occurrence.index(v)))
    c.slots = {v: i + 1 for i, v in enumerate(order)}
    c.perm_vars = perm
    c.temp_vars = list(head_vars)
    c.classified = True
    return c


def _make_clause(term, varnames: dict) -> Clause:
    term = deref(term)
    if type(term) is Struct and term.name == ":-" and len(term.args) == 2:
        head, body = deref(term.args[0]), term.args[1]
        items = flatten_body(body)
    else:
        head, items = term, []
    if type(head) is Var or type(head) is int:
        raise LoadError(f"invalid clause head {format_term(head)}")
    items = [b for b in items if not (isinstance(b, Goal) and deref(b.term) is Atom("true"))]
    return classify_vars(Clause(head, items, varnames))


def parse_program(text: str) -> Database:
    db = Database()
    try:
        for term, varnames in parse_terms(text):
            term = deref(term)
            if type(term) is Struct and term.name == ":-" and len(term.args) == 1:
                _directive(db, deref(term.args[0]))
                continue
            db.add_clause(_make_clause(term, varnames))
    except PrologSyntaxError as e:
        raise LoadError(str(e)) from e
    return db


def _directive(db: Database, d) -> None:
    if type(d) is Struct and d.name == "eager_split" and len(d.args) == 1:
        spec = deref(d.args[0])
        if type(spec) is Struct and spec.name == "/" and len(spec.args) == 2:
            name, arity = deref(spec.args[0]), deref(spec.args[1])
            if type(name) is Atom and type(arity) is int:
                key = (name.name, arity)
                pred = db.predicates.get(key)
                if pred is None:
                    pred = db.predicates[key] = Predicate(*key)
                pred.eager_split = True
                db.directives.append(("eager_split", key))
                return
    raise LoadError(f"unsupported directive {format_term(d)}")


def parse_query(text: str):
    """Parse a query string into ``(body_items, varnames)``."""
    src = text.strip()
    if src.startswith("?-"):
        src = src[2:]
    try:
        term, varnames = parse_term(src)
    except PrologSyntaxError as e:
        raise LoadError(str(e)) from e
    items = flatten_body(term)
    items = [b for b in items if not (isinstance(b, Goal) and deref(b.term) is Atom("true"))]
    return items, varnames


def index_key(t):
    """Indexing key of a dereferenced first argument (``None`` for variables)."""
    t = deref(t)
    ty = type(t)
    if ty is Var:
        return None
    if ty is int:
        return ("int", t)
    if ty is Atom:
        return ("atom", t.name)
    return ("struct", t.name, len(t.args))


def _clause_key(c: Clause):
    h = c.head
    if type(h) is Atom:
        return None
    return index_key(h.args[0])


def index_candidates(p: Predicate, first_arg) -> list:
    """Conservative clause selection on the first argument (order preserved)."""
    if p.arity == 0:
        return list(p.clauses)
    key = index_key(first_arg)
    if key is None:
        return list(p.clauses)
    out = []
    for c in p.clauses:
        ck = _clause_key(c)
        if ck is None or ck == key:
            out.append(c)
    return out
