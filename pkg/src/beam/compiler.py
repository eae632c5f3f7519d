"""Compile classified clauses and queries to abstract machine code.

An instruction is a tuple ``(opcode, *operands)``.  Registers are written as
``("A", i)`` for argument registers and ``("Y", n)`` for clause slots.  A
:class:`CodeSegment` holds one clause's instructions and its label table.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .program import BUILTINS, Clause, Commit, Cut, Goal, SeqBarrier, classify_vars
from .terms import NIL, Atom, Struct, Var, deref

__all__ = ["CodeSegment", "compile_clause", "compile_query", "format_code", "format_instruction"]


@dataclass
class CodeSegment:
    instructions: list
    labels: dict = field(default_factory=dict)
    nslots: int = 0
    perm_slots: tuple = ()
    clause: Clause | None = None
    alternative: int = 1
    # index of the k-th body item's first instruction, in body order
    call_starts: list = field(default_factory=list)
    body_kinds: list = field(default_factory=list)
    # position in the body item list of each cut/commit (empty if none)
    cut_positions: tuple = ()

    def __len__(self) -> int:
        return len(self.instructions)


def _reg(kind: str, n: int) -> tuple:
    return (kind, n)


class _ClauseCompiler:
    def __init__(self, clause: Clause):
        self.clause = clause
        self.slots = dict(clause.slots)
        self.next_slot = len(self.slots) + 1
        self.seen: set = set()
        self.code: list = []
        # body variable occurrence counts (void detection)
        self.counts: dict = {}
        for t in [clause.head] + clause.goals():
            self._count(t)

    def _count(self, t) -> None:
        t = deref(t)
        if type(t) is Var:
            self.counts[t] = self.counts.get(t, 0) + 1
        elif type(t) is Struct:
            for a in t.args:
                self._count(a)

    def fresh_slot(self) -> int:
        n = self.next_slot
        self.next_slot += 1
        return n

    # -- head ------------------------------------------------------------

    def head(self) -> None:
        h = deref(self.clause.head)
        if type(h) is Atom:
            return
        pending = []
        for i, arg in enumerate(h.args, start=1):
            self._get(_reg("A", i), arg, pending)
        while pending:
            reg, sub = pending.pop(0)
            self._get(reg, sub, pending)

    def _get(self, reg, t, pending) -> None:
        t = deref(t)
        emit = self.code.append
        if type(t) is Var:
            y = _reg("Y", self.slots[t])
            if t in self.seen:
                emit(("get_val", reg, y))
            else:
                self.seen.add(t)
                emit(("get_var", reg, y))
        elif type(t) is Atom:
            emit(("get_atom", reg, t.name))
        elif type(t) is int:
            emit(("get_int", reg, t))
        elif t.name == "." and len(t.args) == 2:
            emit(("get_list", reg))
            for a in t.args:
                self._unify_read(a, pending)
        else:
            emit(("get_struct", reg, (t.name, len(t.args))))
            for a in t.args:
                self._unify_read(a, pending)

    def _unify_read(self, t, pending) -> None:
        t = deref(t)
        emit = self.code.append
        if type(t) is Var:
            y = _reg("Y", self.slots[t])
            if t in self.seen:
                emit(("unify_val", y))
            else:
                self.seen.add(t)
                emit(("unify_var", y))
        elif type(t) is Atom:
            emit(("unify_atom", t.name))
        elif type(t) is int:
            emit(("unify_int", t))
        else:
            y = _reg("Y", self.fresh_slot())
            emit(("unify_var", y))
            pending.append((y, t))

    # -- body ------------------------------------------------------------

    def put_args(self, goal) -> None:
        goal = deref(goal)
        if type(goal) is Atom:
            return
        for i, arg in enumerate(goal.args, start=1):
            self._put(_reg("A", i), arg)

    def _build(self, t):
        """Emit code building compound ``t`` into a fresh slot; return the slot."""
        y = _reg("Y", self.fresh_slot())
        self._put(y, t)
        return y

    def _put(self, reg, t) -> None:
        t = deref(t)
        emit = self.code.append
        if type(t) is Var:
            y = _reg("Y", self.slots[t])
            if self.counts.get(t, 0) == 1 and t not in self.seen:
                self.seen.add(t)
                emit(("put_var", reg, y))
            else:
                self.seen.add(t)
                emit(("put_val", reg, y))
        elif type(t) is Atom:
            emit(("put_atom", reg, t.name))
        elif type(t) is int:
            emit(("put_int", reg, t))
        else:
            inner = {}
            for j, a in enumerate(t.args):
                a = deref(a)
                if type(a) is Struct:
                    inner[j] = self._build(a)
            if t.name == "." and len(t.args) == 2:
                emit(("put_list", reg))
            else:
                emit(("put_struct", reg, (t.name, len(t.args))))
            for j, a in enumerate(t.args):
                if j in inner:
                    emit(("unify_val", inner[j]))
                else:
                    self._unify_write(a)

    def _unify_write(self, t) -> None:
        t = deref(t)
        emit = self.code.append
        if type(t) is Var:
            y = _reg("Y", self.slots[t])
            if self.counts.get(t, 0) == 1 and t not in self.seen:
                self.seen.add(t)
                emit(("unify_var", y))
            else:
                self.seen.add(t)
                emit(("unify_val", y))
        elif type(t) is Atom:
            emit(("unify_atom", t.name))
        else:
            emit(("unify_int", t))

    def body(self, seg: CodeSegment) -> None:
        items = self.clause.body
        n = len(items)
        labels = [f"L{k}" for k in range(1, n + 1)]
        self.code.append(("prepare_calls", n, tuple(labels)))
        # body-only variables are created by prepare_calls; mark them seen so
        # multi-occurrence ones are loaded with put_val
        for v in self.clause.perm_vars:
            if self.counts.get(v, 0) > 1:
                self.seen.add(v)
        cuts = []
        for k, item in enumerate(items):
            seg.labels[labels[k]] = len(self.code)
            seg.call_starts.append(len(self.code))
            if isinstance(item, Goal):
                g = deref(item.term)
                key = (g.name, 0) if type(g) is Atom else (g.name, len(g.args))
                self.put_args(g)
                if key in BUILTINS:
                    self.code.append(("call_builtin", f"{key[0]}/{key[1]}"))
                    seg.body_kinds.append("builtin")
                else:
                    self.code.append(("call_pred", key))
                    seg.body_kinds.append("goal")
            elif isinstance(item, Cut):
                self.code.append(("cut_op",))
                seg.body_kinds.append("cut")
                cuts.append(k)
            elif isinstance(item, Commit):
                self.code.append(("commit_op",))
                seg.body_kinds.append("commit")
                cuts.append(k)
            elif isinstance(item, SeqBarrier):
                self.code.append(("seq_barrier",))
                seg.body_kinds.append("barrier")
        seg.cut_positions = tuple(cuts)


def compile_clause(c: Clause, i: int = 1) -> CodeSegment:
    """Compile one clause as alternative ``i`` of its predicate."""
    if not c.classified:
        raise ValueError("clause must be classified before compilation")
    cc = _ClauseCompiler(c)
    seg = CodeSegment([], clause=c, alternative=i)
    cc.code.append(("explore_alternative", i))
    cc.head()
    if c.body:
        cc.body(seg)
    else:
        cc.code.append(("proceed",))
    seg.instructions = cc.code
    seg.nslots = cc.next_slot
    seg.perm_slots = tuple(c.slots[v] for v in c.perm_vars)
    return seg


def compile_query(items, varnames: dict | None = None) -> CodeSegment:
    """Compile a query body; all query variables are permanent."""
    goal_terms = [b.term for b in items if isinstance(b, Goal)]
    head = Atom("$query")
    c = Clause(head, list(items), dict(varnames or {}))
    classify_vars(c)
    cc = _ClauseCompiler(c)
    # query variables stay permanent even when they occur once
    for v in c.perm_vars:
        cc.counts[v] = max(cc.counts.get(v, 0), 2)
    seg = CodeSegment([], clause=c, alternative=1)
    if items:
        cc.body(seg)
    else:
        cc.code.append(("proceed",))
    seg.instructions = cc.code
    seg.nslots = cc.next_slot
    seg.perm_slots = tuple(c.slots[v] for v in c.perm_vars)
    del goal_terms
    return seg


def _fmt_operand(x) -> str:
    if isinstance(x, tuple) and len(x) == 2 and x[0] in ("A", "Y") and isinstance(x[1], int):
        return f"{x[0]}{x[1]}"
    if isinstance(x, tuple) and len(x) == 2:
        return f"{x[0]}/{x[1]}"
    return str(x)


def format_instruction(ins) -> str:
    op = ins[0]
    if op == "prepare_calls":
        return " ".join([op, str(ins[1]), *ins[2]])
    if len(ins) == 1:
        return op
    return f"{op:<16} " + ",".join(_fmt_operand(x) for x in ins[1:])


def format_code(seg: CodeSegment) -> str:
    by_index = {v: k for k, v in seg.labels.items()}
    lines = []
    for idx, ins in enumerate(seg.instructions):
        if idx in by_index:
            lines.append(f" {by_index[idx]}:")
        lines.append("    " + format_instruction(ins))
    return "\n".join(lines)
