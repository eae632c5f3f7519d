"""Instruction execution between manager ports.

The emulator runs the straight-line parts of a code segment: head
unification (``get_*``/``unify_*``), argument construction (``put_*``) and
body preparation (``prepare_calls``).  Control instructions (``call_pred``,
``call_builtin``, ``cut_op``, ``commit_op``, ``seq_barrier``, ``proceed``)
hand control back to the manager.
"""

from __future__ import annotations

from .terms import Atom, Struct, Var, deref
from .tree import CallRecord, Frame

__all__ = ["new_var", "run_head", "load_args", "prepare_body", "slot_names"]

_names_cache: dict = {}


def new_var(box, name=None) -> Var:
    v = Var(home=box, name=name)
    box.locals.append(v)
    return v


def slot_names(seg) -> dict:
    """Map permanent slot numbers of ``seg`` to source variable names."""
    key = id(seg)
    hit = _names_cache.get(key)
    if hit is not None and hit[0] is seg:
        return hit[1]
    c = seg.clause
    names = {}
    if c is not None:
        by_var = {v: n for n, v in c.varnames.items()}
        for v, slot in c.slots.items():
            if v in by_var:
                names[slot] = by_var[v]
    _names_cache[key] = (seg, names)
    return names


def _read(reg, args, slots):
    return args[reg[1] - 1] if reg[0] == "A" else slots[reg[1]]


def run_head(store, seg, args, slots, box) -> int:
    """Run head code from after ``explore_alternative``.

    Returns the index of the ``prepare_calls``/``proceed`` instruction reached,
    or ``-1`` if unification failed.  Partial bindings are not undone here;
    the caller owns the trail mark.
    """
    code = seg.instructions
    pc = 1
    read = True
    cur = None
    s = 0
    unify = store.unify
    bind = store.bind
    while True:
        ins = code[pc]
        op = ins[0]
        if op == "get_var":
            slots[ins[2][1]] = args[ins[1][1] - 1]
        elif op == "get_val":
            if not unify(slots[ins[2][1]], args[ins[1][1] - 1], box):
                return -1
        elif op == "get_atom" or op == "get_int":
            want = Atom(ins[2]) if op == "get_atom" else ins[2]
            t = deref(_read(ins[1], args, slots))
            if type(t) is Var:
                bind(t, want, box)
            elif op == "get_atom":
                if t is not want:
                    return -1
            elif type(t) is not int or t != want:
                return -1
        elif op == "get_struct" or op == "get_list":
            name, arity = (".", 2) if op == "get_list" else ins[2]
            t = deref(_read(ins[1], args, slots))
            if type(t) is Struct:
                if t.name != name or len(t.args) != arity:
                    return -1
                read, cur, s = True, t.args, 0
            elif type(t) is Var:
                fresh = Struct(name, [None] * arity)
                bind(t, fresh, box)
                read, cur, s = False, fresh.args, 0
            else:
                return -1
        elif op == "unify_var":
            if read:
                slots[ins[1][1]] = cur[s]
            else:
                v = new_var(box)
                cur[s] = v
                slots[ins[1][1]] = v
            s += 1
        elif op == "unify_val":
            if read:
                if not unify(slots[ins[1][1]], cur[s], box):
                    return -1
            else:
                cur[s] = slots[ins[1][1]]
            s += 1
        elif op == "unify_atom" or op == "unify_int":
            want = Atom(ins[1]) if op == "unify_atom" else ins[1]
            if read:
                if not unify(cur[s], want, box):
                    return -1
            else:
                cur[s] = want
            s += 1
        elif op == "prepare_calls" or op == "proceed":
            return pc
        else:
            raise RuntimeError(f"unexpected instruction {op} in head code")
        pc += 1


def load_args(rec: CallRecord, box):
    """Run the ``put_*`` block of ``rec``; return ``(op, target, args)``.

    ``op`` is the control instruction ending the block (``call_pred``,
    ``call_builtin``, ``cut_op``, ``commit_op`` or ``seq_barrier``).
    """
    frame = rec.frame
    code = frame.seg.instructions
    slots = frame.slots
    regs: dict = {}
    pc = rec.start
    cur = None
    s = 0
    while True:
        ins = code[pc]
        op = ins[0]
        if op == "put_var":
            v = new_var(box)
            slots[ins[2][1]] = v
            regs[ins[1]] = v
        elif op == "put_val":
            regs[ins[1]] = slots[ins[2][1]]
        elif op == "put_atom":
            regs[ins[1]] = Atom(ins[2])
        elif op == "put_int":
            regs[ins[1]] = ins[2]
        elif op == "put_struct" or op == "put_list":
            name, arity = (".", 2) if op == "put_list" else ins[2]
            fresh = Struct(name, [None] * arity)
            if ins[1][0] == "Y":
                slots[ins[1][1]] = fresh
            else:
                regs[ins[1]] = fresh
            cur, s = fresh.args, 0
        elif op == "unify_var":
            v = new_var(box)
            slots[ins[1][1]] = v
            cur[s] = v
            s += 1
        elif op == "unify_val":
            cur[s] = slots[ins[1][1]]
            s += 1
        elif op == "unify_atom":
            cur[s] = Atom(ins[1])
            s += 1
        elif op == "unify_int":
            cur[s] = ins[1]
            s += 1
        elif op in ("call_pred", "call_builtin"):
            target = ins[1]
            n = target[1] if op == "call_pred" else int(target.rsplit("/", 1)[1])
            return op, target, [regs[("A", i)] for i in range(1, n + 1)]
        elif op in ("cut_op", "commit_op", "seq_barrier"):
            return op, None, []
        else:
            raise RuntimeError(f"unexpected instruction {op} in body code")
        pc += 1


def prepare_body(seg, frame: Frame, box, chain: tuple = ()) -> list:
    """Execute ``prepare_calls``: create permanent variables and call records."""
    slots = frame.slots
    names = slot_names(seg)
    for slot in seg.perm_slots:
        if slots[slot] is None:
            slots[slot] = new_var(box, names.get(slot))
    return [
        CallRecord(kind, frame, start, chain)
        for kind, start in zip(seg.body_kinds, seg.call_starts)
    ]
