"""Deep copy of an and-box subtree for the splitting rule."""

from __future__ import annotations

from .terms import ExternalBinding, Struct, Var, deref
from .tree import AltRecord, AndBox, CallRecord, ExternalConflict, Frame, OrBox, WaitingGround

__all__ = ["copy_for_split", "map_reason"]


class _Copier:
    def __init__(self):
        self.boxes: dict = {}
        self.vars: dict = {}
        self.frames: dict = {}
        self.orboxes: list = []

    def var(self, v):
        nv = self.vars.get(v)
        if nv is not None:
            return nv
        home = self.boxes.get(v.home)
        if home is None:
            return v
        nv = Var(home=home, name=v.name)
        home.locals.append(nv)
        self.vars[v] = nv
        return nv

    def term(self, t):
        t = deref(t)
        ty = type(t)
        if ty is Var:
            return self.var(t)
        if ty is not Struct:
            return t
        # walk the last-argument spine iteratively so long lists stay flat
        spine = []
        while type(t) is Struct:
            spine.append(t)
            t = deref(t.args[-1])
        tail = self.var(t) if type(t) is Var else t
        for s in reversed(spine):
            head = [self.term(a) for a in s.args[:-1]]
            if tail is s.args[-1] and all(h is a for h, a in zip(head, s.args)):
                tail = s
            else:
                tail = Struct(s.name, head + [tail])
        return tail

    def frame(self, f):
        if f is None:
            return None
        nf = self.frames.get(id(f))
        if nf is None:
            nf = Frame(f.seg, 0)
            nf.slots = list(f.slots)
            self.frames[id(f)] = nf
        return nf


def _clone_box(cp: _Copier, b: AndBox, parent: OrBox) -> AndBox:
    nb = AndBox(parent, b.depth)
    cp.boxes[b] = nb
    for v in b.locals:
        nv = Var(home=nb, name=v.name)
        cp.vars[v] = nv
        nb.locals.append(nv)
    for attr in ("side_effects", "state", "blocked", "held", "cut_pending", "label"):
        setattr(nb, attr, getattr(b, attr))
    nb.absorbed = list(b.absorbed)
    return nb


def copy_for_split(P: AndBox, O: OrBox, moved: list):
    """Copy ``P``'s subtree; the copy of ``O`` receives only ``moved`` alternatives.

    Returns ``(P2, O2, copier, pairs)`` where ``pairs`` lists every
    ``(original, copy)`` box pair.  The copy is not yet linked into ``P``'s
    parent or-box and no suspension bookkeeping has been done.
    """
    cp = _Copier()
    P2 = _clone_box(cp, P, P.parent)
    alt2 = AltRecord(P.alt.seg, P.alt.args)
    alt2.state = P.alt.state
    alt2.box = P2
    P2.alt = alt2
    O2 = None
    pairs = [(P, P2)]
    work = [(P, P2)]
    # pass 1: boxes, or-boxes, records, locals
    while work:
        b, nb = work.pop()
        for rec in b.calls:
            nr = CallRecord(rec.kind, rec.frame, rec.start, rec.chain)
            nr.state = rec.state
            nr.waiting = rec.waiting
            nb.calls.append(nr)
            o = rec.orbox
            if o is None:
                continue
            no = OrBox(nb, nr)
            no.sealed = o.sealed
            no.seg = o.seg
            nr.orbox = no
            cp.orboxes.append((o, no))
            alts = moved if o is O else o.alts
            if o is O:
                O2 = no
            for alt in alts:
                na = AltRecord(alt.seg, alt.args)
                na.state = alt.state
                no.alts.append(na)
                if alt.box is not None:
                    cb = _clone_box(cp, alt.box, no)
                    cb.alt = na
                    na.box = cb
                    pairs.append((alt.box, cb))
                    work.append((alt.box, cb))
    # pass 2: values, frames, externals
    for v, nv in list(cp.vars.items()):
        if v.value is not None:
            nv.value = cp.term(v.value)
    for b, nb in pairs:
        nb.frame = cp.frame(b.frame)
        for rec, nr in zip(b.calls, nb.calls):
            nr.frame = cp.frame(rec.frame)
            nr.chain = tuple(cp.frame(f) for f in rec.chain)
            nr.waiting = tuple(cp.var(v) for v in rec.waiting)
        for ext in b.externals:
            ne = ExternalBinding(cp.var(ext.var), cp.term(ext.value), nb)
            ne.installed = False
            nb.externals.append(ne)
        nb.qvars = [(n, cp.var(v)) for n, v in b.qvars]
    for f_id, nf in cp.frames.items():
        nf.slots = [None if x is None else cp.term(x) for x in nf.slots]
    for o, no in cp.orboxes:
        for na in no.alts:
            if na.args is not None:
                na.args = [cp.term(a) for a in na.args]
    if P.alt.args is not None:
        alt2.args = [cp.term(a) for a in P.alt.args]
    return P2, O2, cp, pairs


def map_reason(cp: _Copier, reason):
    if isinstance(reason, ExternalConflict):
        return ExternalConflict(tuple(cp.var(v) for v in reason.vars))
    if isinstance(reason, WaitingGround):
        return WaitingGround(tuple(cp.var(v) for v in reason.vars))
    return reason
