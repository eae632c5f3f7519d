"""And-Or tree: and-boxes, or-boxes, call and alternative records, suspension list."""

from __future__ import annotations

import itertools
from collections import OrderedDict
from dataclasses import dataclass

__all__ = [
    "Frame",
    "CallRecord",
    "AltRecord",
    "AndBox",
    "OrBox",
    "ExternalConflict",
    "WaitingLeftmost",
    "WaitingGround",
    "SuspensionList",
    "TreeError",
    "walk",
    "leftmost_suspended",
    "is_leftmost",
    "check_tree",
    "snapshot",
]


class TreeError(AssertionError):
    pass


_ids = itertools.count(1)


# -- suspension reasons ---------------------------------------------------


@dataclass(frozen=True)
class ExternalConflict:
    vars: tuple = ()


@dataclass(frozen=True)
class WaitingLeftmost:
    pass


@dataclass(frozen=True)
class WaitingGround:
    vars: tuple = ()


class Frame:
    """Slot vector of one clause activation, shared by that clause's calls."""

    __slots__ = ("slots", "seg")

    def __init__(self, seg, nslots: int):
        self.seg = seg
        self.slots = [None] * nslots


class CallRecord:
    """One body item of an and-box.

    ``kind`` is ``goal``, ``builtin``, ``cut``, ``commit`` or ``barrier``.
    ``frame`` is the activation the item's code reads; ``chain`` lists the
    activations this record was spliced through by determinate expansion, so
    cut and barrier scopes survive compression.
    """

    __slots__ = ("kind", "frame", "start", "state", "orbox", "chain", "waiting")

    def __init__(self, kind: str, frame: Frame, start: int, chain: tuple = ()):
        self.kind = kind
        self.frame = frame
        self.start = start
        self.state = "ready"
        self.orbox: OrBox | None = None
        self.chain = chain
        self.waiting: tuple = ()

    def in_scope_of(self, frame: Frame) -> bool:
        return self.frame is frame or frame in self.chain

    def __repr__(self) -> str:
        return f"<call {self.kind}@{self.start} {self.state}>"


class AltRecord:
    __slots__ = ("box", "seg", "args", "state")

    def __init__(self, seg, args):
        self.box: AndBox | None = None
        self.seg = seg
        self.args = args
        self.state = "ready"

    def __repr__(self) -> str:
        n = self.seg.alternative if self.seg is not None else "-"
        return f"<alt {n} {self.state}>"


class AndBox:
    __slots__ = (
        "id", "parent", "depth", "calls", "locals", "externals", "suspended",
        "side_effects", "state", "frame", "alive", "blocked", "watching",
        "cut_pending", "woken", "alt", "qvars", "label", "absorbed", "held",
    )

    def __init__(self, parent: "OrBox | None", depth: int, frame: Frame | None = None):
        self.id = next(_ids)
        self.parent = parent
        self.depth = depth
        self.calls: list[CallRecord] = []
        self.locals: list = []
        self.externals: list = []
        self.suspended = None
        self.side_effects = False
        self.state = "running"
        self.frame = frame
        self.alive = True
        self.blocked = False
        self.watching: dict = {}
        self.cut_pending = 0
        self.woken = False
        self.alt: AltRecord | None = None
        self.qvars: list = []
        self.label = ""
        # labels of boxes merged into this one by and-compression
        self.absorbed: list = []
        # rest segments with a barrier wait here until their clause's cuts fire
        self.held = False

    @property
    def nr_calls(self) -> int:
        return len(self.calls)

    @property
    def parent_box(self) -> "AndBox | None":
        return self.parent.parent if self.parent is not None else None

    def is_root(self) -> bool:
        return self.parent is None or self.parent.parent is None

    def __repr__(self) -> str:
        return f"<and#{self.id} d{self.depth} {self.state}{' ext' if self.externals else ''}>"


class OrBox:
    __slots__ = ("id", "parent", "call", "alts", "alive", "sealed", "seg")

    def __init__(self, parent: AndBox | None, call: CallRecord | None):
        self.id = next(_ids)
        self.parent = parent
        self.call = call
        self.alts: list[AltRecord] = []
        self.alive = True
        # segment or-boxes wrap the parts of a clause body around a cut; while
        # sealed they neither promote nor count as split points
        self.sealed = False
        self.seg: str | None = None

    @property
    def nr_all_alternatives(self) -> int:
        return len(self.alts)

    def __repr__(self) -> str:
        return f"<or#{self.id} n={len(self.alts)}>"


class SuspensionList:
    """Ordered registry of suspended and-boxes; woken entries sit at the front."""

    def __init__(self):
        self._entries: OrderedDict = OrderedDict()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, box) -> bool:
        return box in self._entries

    def __iter__(self):
        return iter(list(self._entries))

    def items(self):
        return list(self._entries.items())

    def reason(self, box):
        return self._entries.get(box)

    def add(self, box: AndBox, reason) -> None:
        if box in self._entries:
            raise TreeError(f"{box} already suspended")
        self._entries[box] = reason
        box.suspended = reason

    def update(self, box: AndBox, reason) -> None:
        """Add ``box`` or change the reason of its existing entry in place."""
        if box in self._entries:
            self._entries[box] = reason
            box.suspended = reason
        else:
            self.add(box, reason)

    def wake(self, box: AndBox) -> None:
        if box not in self._entries:
            raise TreeError(f"{box} is not suspended")
        self._entries.move_to_end(box, last=False)
        box.woken = True

    def remove(self, box: AndBox) -> None:
        if self._entries.pop(box, None) is not None or box.suspended is not None:
            box.suspended = None
        box.woken = False

    def discard(self, box: AndBox) -> None:
        self._entries.pop(box, None)
        box.suspended = None
        box.woken = False

    def first_woken(self):
        for box in self._entries:
            return box if box.woken else None
        return None

    def order(self) -> list:
        return list(self._entries)


# -- traversal ------------------------------------------------------------


def walk(orbox: OrBox):
    """Depth-first, left-to-right pre-order walk over and-boxes below ``orbox``."""
    stack = [iter(orbox.alts)]
    while stack:
        try:
            alt = next(stack[-1])
        except StopIteration:
            stack.pop()
            continue
        if isinstance(alt, AltRecord):
            b = alt.box
            if b is None:
                continue
            yield b
            stack.append(iter([rec.orbox for rec in b.calls if rec.orbox is not None]))
        else:
            stack.append(iter(alt.alts))


def leftmost_suspended(top: OrBox, suspensions: SuspensionList):
    """First box, in depth-first left-to-right order, suspended on externals."""
    for b in walk(top):
        if isinstance(suspensions.reason(b), ExternalConflict):
            return b
    return None


def is_leftmost(box: AndBox, across_roots: bool = True) -> bool:
    """True iff everything left of ``box`` on its root path has finished.

    With ``across_roots`` false the walk stops at the box's own root, so
    earlier independent configurations do not count.
    """
    b = box
    while b is not None:
        o = b.parent
        if o is None:
            return True
        parent = o.parent
        if parent is None and not across_roots:
            return True
        if not o.alts or o.alts[0].box is not b:
            return False
        if parent is None:
            return True
        if not parent.calls or parent.calls[0].orbox is not o:
            return False
        b = parent
    return True


# -- invariants -----------------------------------------------------------


def check_tree(top: OrBox, suspensions: SuspensionList) -> None:
    """Assert structural well-formedness; raise :class:`TreeError` on violation."""
    seen = set()
    for b in walk(top):
        if not b.alive:
            raise TreeError(f"dead box {b} still linked")
        o = b.parent
        if b.alt is None or b.alt.box is not b or b.alt not in o.alts:
            raise TreeError(f"{b} not linked from its or-box")
        pb = o.parent
        expect = 0 if pb is None else pb.depth + 1
        if b.depth != expect:
            raise TreeError(f"{b} depth {b.depth} != {expect}")
        for v in b.locals:
            if v.home is not b:
                raise TreeError(f"local {v!r} of {b} homed elsewhere")
        for ext in b.externals:
            if ext.var.home.depth >= b.depth:
                raise TreeError(f"external record {ext} of {b} is not external")
        for rec in b.calls:
            if rec.orbox is not None:
                if rec.orbox.parent is not b or rec.orbox.call is not rec:
                    raise TreeError(f"or-box of {rec} in {b} badly linked")
                if not rec.orbox.alive:
                    raise TreeError(f"dead or-box under {b}")
            elif rec.state == "running" and rec.kind == "goal":
                raise TreeError(f"running goal without or-box in {b}")
        if (b.suspended is not None) != (b in suspensions):
            raise TreeError(f"{b} suspension flag disagrees with list")
        seen.add(b)
    for b in suspensions:
        if b not in seen:
            raise TreeError(f"suspension list holds unreachable box {b}")


def snapshot(top: OrBox) -> dict:
    """Plain-data copy of the tree shape for oracles and tests."""
    def box(b):
        return {
            "id": b.id,
            "depth": b.depth,
            "state": b.state,
            "externals": len(b.externals),
            "suspended": type(b.suspended).__name__ if b.suspended else None,
            "calls": [
                {"kind": r.kind, "state": r.state, "or": orbox(r.orbox) if r.orbox else None}
                for r in b.calls
            ],
        }

    def orbox(o):
        return {"id": o.id, "alts": [box(a.box) if a.box else {"ready": True} for a in o.alts]}

    return orbox(top)
