"""The And-Or tree manager.

The engine keeps one configuration tree below a top or-box whose
alternatives are independent root configurations.  Work is driven by a
LIFO agenda of ``('box', B)`` and ``('alt', O)`` items; woken boxes on the
suspension list pre-empt the agenda, and splitting only happens from
``step_select_work`` once nothing else applies.

Variable bindings made by a box to a variable homed higher up are external:
they are visible only while that box is on the current context path.
``switch_to`` moves the path, uninstalling and reinstalling the external
records of the boxes it leaves and enters.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

from .builtins import (
    GUARD_SAFE,
    BuiltinError,
    Fail,
    Success,
    Wait,
    WaitLeftmost,
    eval_builtin,
)
from .compiler import compile_clause, compile_query, format_instruction
from .emulator import load_args, prepare_body, run_head
from .program import Database, index_candidates, parse_query
from .split import copy_for_split
from .terms import Store, Struct, Var, deref, format_term, resolve
from .tree import (
    AltRecord,
    AndBox,
    CallRecord,
    ExternalConflict,
    Frame,
    OrBox,
    SuspensionList,
    TreeError,
    WaitingGround,
    WaitingLeftmost,
    check_tree,
    is_leftmost,
    walk,
)

__all__ = [
    "Engine",
    "EngineError",
    "Options",
    "RunStats",
    "RunResult",
    "run_query",
    "canonical_answer",
]


class EngineError(Exception):
    """Run-time error: undefined predicate, builtin type error."""


@dataclass
class Options:
    strategy: str = "lazy"
    implicit_pruning: str = "leftmost"
    first: bool = False
    max_steps: int = 5_000_000
    quiet: bool = True
    trace: object = None
    trace_level: str = "rule"
    check_invariants: bool = False
    out: object = None

    def __post_init__(self):
        if self.strategy not in ("lazy", "eager"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.implicit_pruning not in ("leftmost", "full"):
            raise ValueError(f"unknown implicit pruning mode {self.implicit_pruning!r}")
        if self.trace_level not in ("rule", "instr"):
            raise ValueError(f"unknown trace level {self.trace_level!r}")


@dataclass
class RunStats:
    reductions: int = 0
    splits: int = 0
    promotions: int = 0
    and_compressions: int = 0
    suspensions: int = 0
    wakes: int = 0
    pruned_boxes: int = 0
    reclaimed_boxes: int = 0
    answers: int = 0
    steps: int = 0
    wall_time: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunResult:
    answers: list
    stats: RunStats
    status: str
    output: str = ""
    diagnostic: str = ""

    @property
    def exit_code(self) -> int:
        return {"ok": 0, "deadlock": 2, "aborted": 3}[self.status]


class _Probe:
    """Throw-away box for speculative head unification."""

    __slots__ = ("depth", "locals", "externals")

    def __init__(self, depth):
        self.depth = depth
        self.locals = []
        self.externals = []


def canonical_answer(pairs) -> dict:
    """Render ``(name, term)`` pairs with unbound variables renamed ``_0, _1, ...``."""
    names: dict = {}
    out = {}
    for name, t in pairs:
        t = resolve(t)
        stack = [t]
        order = []
        while stack:
            x = stack.pop()
            if type(x) is Var:
                if x not in names and x not in order:
                    order.append(x)
            elif type(x) is Struct:
                stack.extend(reversed(x.args))
        for v in order:
            names[v] = f"_{len(names)}"
        out[name] = format_term(t, names)
    return out


def _scoped(seg) -> bool:
    return "barrier" in seg.body_kinds


class Engine:
    def __init__(self, db: Database, options: Options | None = None):
        self.db = db
        self.opts = options or Options()
        self.store = Store()
        self.store.on_bind = self._on_bind
        self.stats = RunStats()
        self.suslist = SuspensionList()
        self.top = OrBox(None, None)
        self.path: list = []
        self.agenda: list = []
        self.cut_boxes: dict = {}
        self.lm_waiters: list = []
        self.answers: list = []
        self.output: list = []
        self.stopped = False
        self.step = 0
        self._code: dict = {}
        self.query_cuts = 0

    # -- code ------------------------------------------------------------

    def code_for(self, pred, clause):
        seg = self._code.get(id(clause))
        if seg is None:
            seg = compile_clause(clause, pred.clauses.index(clause) + 1)
            self._code[id(clause)] = seg
        return seg

    @staticmethod
    def _label(seg) -> str:
        name, arity = seg.clause.key
        return f"{name}/{arity}#{seg.alternative}"

    # -- tracing ---------------------------------------------------------

    def trace(self, rule: str, box, **detail) -> None:
        sink = self.opts.trace
        if sink is None:
            return
        sink({
            "step": self.step,
            "rule": rule,
            "box": box.id if box is not None else None,
            "detail": detail,
            "stats": {k: v for k, v in self.stats.as_dict().items() if k != "wall_time"},
        })

    def _trace_code(self, seg, lo: int, hi: int, box) -> None:
        if self.opts.trace is not None and self.opts.trace_level == "instr":
            code = [format_instruction(i) for i in seg.instructions[lo:hi + 1]]
            self.trace("instr", box, code=code)

    # -- context ---------------------------------------------------------

    def switch_to(self, box) -> None:
        new = []
        b = box
        while b is not None:
            new.append(b)
            b = b.parent_box
        new.reverse()
        old = self.path
        k = 0
        n = min(len(old), len(new))
        while k < n and old[k] is new[k]:
            k += 1
        for b in reversed(old[k:]):
            Store.undo_externals(b)
        for b in new[k:]:
            Store.redo_externals(b)
        self.path = new

    def _leave(self, box) -> None:
        """Make sure ``box`` is not on the context path."""
        if box in self.path:
            self.switch_to(box.parent_box)

    @staticmethod
    def _below(d, box) -> bool:
        """True iff ``d`` is ``box`` or one of its descendants."""
        depth = box.depth
        while d is not None and d.depth > depth:
            d = d.parent_box
        return d is box

    def _on_bind(self, var, box) -> None:
        for d in list(var.suspensions):
            if d.alive and not d.woken and d in self.suslist and self._below(d, box):
                self.suslist.wake(d)
                self.stats.wakes += 1

    def push(self, item) -> None:
        self.agenda.append(item)

    # -- suspension bookkeeping --------------------------------------------

    def refresh_suspension(self, b) -> None:
        ext_vars = []
        for e in b.externals:
            if e.var not in ext_vars:
                ext_vars.append(e.var)
        wait_vars = []
        lm = False
        for r in b.calls:
            if r.state == "waiting":
                for v in r.waiting:
                    v = deref(v)
                    if type(v) is Var and v not in wait_vars:
                        wait_vars.append(v)
            elif r.state == "waiting_leftmost":
                lm = True
        if ext_vars or b.state == "true":
            reason = ExternalConflict(tuple(ext_vars))
        elif wait_vars:
            reason = WaitingGround(tuple(wait_vars))
        elif lm:
            reason = WaitingLeftmost()
        else:
            reason = None
        watch = dict.fromkeys(ext_vars)
        watch.update(dict.fromkeys(wait_vars))
        old = b.watching
        for v in old:
            if v not in watch:
                v.suspensions.remove(b)
        for v in watch:
            if v not in old:
                v.suspensions.append(b)
        b.watching = watch
        if reason is None:
            self.suslist.discard(b)
        elif b.suspended != reason or b not in self.suslist:
            woken = b.woken
            self.suslist.update(b, reason)
            b.woken = woken

    def _unregister(self, b) -> None:
        for v in b.watching:
            v.suspensions.remove(b)
        b.watching = {}
        self.suslist.discard(b)

    def kill(self, box, count: bool = True) -> list:
        """Detach ``box`` and its subtree; return the labels of the killed boxes."""
        labels = []
        stack = [box]
        while stack:
            b = stack.pop()
            if not b.alive:
                continue
            b.alive = False
            self._unregister(b)
            self.cut_boxes.pop(b, None)
            labels.append(b.label)
            labels.extend(b.absorbed)
            if count:
                self.stats.reclaimed_boxes += 1
            for r in b.calls:
                o = r.orbox
                if o is not None:
                    o.alive = False
                    for a in o.alts:
                        if a.box is not None:
                            stack.append(a.box)
        return labels

    # -- driver ----------------------------------------------------------

    def setup(self, query) -> None:
        items, varnames = parse_query(query) if isinstance(query, str) else query
        seg = compile_query(items, varnames)
        self.query_seg = seg
        root = AndBox(self.top, 0)
        alt = AltRecord(None, None)
        alt.box = root
        alt.state = "running"
        root.alt = alt
        root.label = "$query"
        self.top.alts.append(alt)
        frame = Frame(seg, seg.nslots)
        root.frame = frame
        self.switch_to(root)
        records = prepare_body(seg, frame, root) if seg.body_kinds else []
        c = seg.clause
        root.qvars = [
            (name, frame.slots[c.slots[v]])
            for name, v in varnames.items()
            if not name.startswith("_") and v in c.slots
        ]
        self.query_cuts = len(seg.cut_positions)
        self.trace("start", root, query_cuts=self.query_cuts, strategy=self.opts.strategy,
                   implicit_pruning=self.opts.implicit_pruning)
        self.trace("root", root, orbox=self.top.id, label=root.label)
        self._install_body(root, records)
        if root.alive and not root.calls:
            self.box_done(root)
        elif root.alive:
            self.push(("box", root))

    def run(self, query) -> RunResult:
        t0 = time.perf_counter()
        self.setup(query)
        status = "ok"
        check = self.opts.check_invariants
        while not self.stopped:
            if self.stats.steps >= self.opts.max_steps:
                status = "aborted"
                break
            if not self.one_step():
                break
            if check:
                self.check_invariants()
        if status == "ok" and not self.stopped and self.top.alts:
            status = "deadlock"
        self.switch_to(None)
        self.stats.wall_time = time.perf_counter() - t0
        self.trace("end", None, status=status)
        diag = ""
        if status == "deadlock":
            diag = self.describe_stuck()
        elif status == "aborted":
            diag = f"step bound of {self.opts.max_steps} reached"
        return RunResult(list(self.answers), self.stats, status, "".join(self.output), diag)

    def one_step(self) -> bool:
        """Apply one manager step; return ``False`` when no work is left."""
        self.store.trail.clear()
        d = self.suslist.first_woken()
        if d is not None:
            self._count_step()
            self.step_wake(d)
            return True
        while self.agenda:
            kind, x = self.agenda.pop()
            if kind == "box":
                if not x.alive or x.blocked or x.held:
                    continue
                self._count_step()
                self.step_next_call(x)
                return True
            if not x.alive:
                continue
            self._count_step()
            self.step_next_alternative(x)
            return True
        self._count_step()
        return self.step_select_work()

    def _count_step(self) -> None:
        self.stats.steps += 1
        self.step = self.stats.steps

    def describe_stuck(self) -> str:
        lines = []
        for b, reason in self.suslist.items():
            lines.append(f"box {b.id} ({b.label or '?'}) suspended: {type(reason).__name__}")
        return "\n".join(lines) or "no runnable work and no suspended boxes"

    def check_invariants(self) -> None:
        check_tree(self.top, self.suslist)
        for b in walk(self.top):
            if b.externals and b not in self.suslist:
                raise TreeError(f"{b} has externals but is not registered")
            for v in b.watching:
                if b not in v.suspensions:
                    raise TreeError(f"{b} watches {v!r} without a suspension entry")
            for r in b.calls:
                o = r.orbox
                if o is not None and not o.alts:
                    raise TreeError(f"empty or-box left under {b}")

    # -- next_call -------------------------------------------------------

    def _next_ready(self, b):
        calls = b.calls
        barriers = []
        for i, r in enumerate(calls):
            k = r.kind
            if k == "barrier":
                if not any(c.in_scope_of(r.frame) for c in calls[:i]):
                    return r
                barriers.append(r)
                continue
            if barriers and any(r.in_scope_of(x.frame) for x in barriers):
                continue
            if k in ("cut", "commit", "seg") or r.state != "ready":
                continue
            return r
        return None

    def step_next_call(self, b) -> None:
        if not b.calls:
            if b.state != "true":
                self._after_box_change(b)
            return
        rec = self._next_ready(b)
        if rec is None:
            return
        self.switch_to(b)
        if rec.kind == "barrier":
            b.calls.remove(rec)
            self._after_box_change(b)
            return
        op, target, args = load_args(rec, b)
        if self.opts.trace is not None and self.opts.trace_level == "instr":
            seg = rec.frame.seg
            end = rec.start
            while seg.instructions[end][0] not in ("call_pred", "call_builtin"):
                end += 1
            self._trace_code(seg, rec.start, end, b)
        if op == "call_builtin":
            self._run_builtin(b, rec, target, args)
        else:
            self.call_pred(b, rec, target, args)

    def _run_builtin(self, b, rec, tag, args) -> None:
        def leftmost():
            return bool(b.calls) and b.calls[0] is rec and is_leftmost(b)

        try:
            res = eval_builtin(tag, args, self.store, b, leftmost)
        except BuiltinError as e:
            raise EngineError(str(e)) from e
        if isinstance(res, Success):
            b.calls.remove(rec)
            self._recheck_waiting(b)
            self._after_box_change(b)
        elif isinstance(res, Fail):
            self.fail_box(b)
        elif isinstance(res, Wait):
            rec.state = "waiting"
            rec.waiting = res.vars
            self._after_box_change(b)
        elif isinstance(res, WaitLeftmost):
            rec.state = "waiting_leftmost"
            self.lm_waiters.append((b, rec))
            self._after_box_change(b)
        else:
            text = res[1]
            self.output.append(text)
            if not self.opts.quiet and self.opts.out is not None:
                self.opts.out.write(text)
            b.calls.remove(rec)
            self._after_box_change(b)

    def _recheck_waiting(self, b) -> None:
        for r in b.calls:
            if r.state == "waiting" and any(type(deref(v)) is not Var for v in r.waiting):
                r.state = "ready"
                r.waiting = ()

    # -- reduction ---------------------------------------------------------

    def _probe(self, seg, args, b) -> bool:
        store = self.store
        store.probing = True
        mark = len(store.trail)
        try:
            return run_head(store, seg, args, [None] * seg.nslots, _Probe(b.depth + 1)) >= 0
        finally:
            store.undo_to(mark)
            store.probing = False

    def call_pred(self, b, rec, key, args) -> None:
        pred = self.db.lookup(*key)
        if pred is None:
            raise EngineError(f"undefined predicate {key[0]}/{key[1]}")
        cands = index_candidates(pred, args[0] if args else None)
        segs = []
        for c in cands:
            seg = self.code_for(pred, c)
            if self._probe(seg, args, b):
                segs.append(seg)
        if not segs:
            self.trace("reduce", b, kind="none", pred=f"{key[0]}/{key[1]}")
            self.fail_box(b)
            return
        if len(segs) == 1 and not segs[0].cut_positions:
            self.det_reduce(b, rec, segs[0], args)
            return
        o = OrBox(b, rec)
        rec.orbox = o
        rec.state = "running"
        for seg in segs:
            o.alts.append(AltRecord(seg, args))
        self.trace("reduce", b, kind="orbox", orbox=o.id, alts=len(segs),
                   labels=[self._label(s) for s in segs])
        if (self.opts.strategy == "eager" and pred.eager_split and len(segs) > 1
                and b.cut_pending == 0):
            self._eager_split(b, o)
            return
        self.push(("box", b))
        if len(o.alts) == 1:
            self.step_unique_alternative(o)
        else:
            self.push(("alt", o))

    def det_reduce(self, b, rec, seg, args) -> None:
        store = self.store
        frame = Frame(seg, seg.nslots)
        mark = len(store.trail)
        ext_mark = len(b.externals)
        pc = run_head(store, seg, args, frame.slots, b)
        self._trace_code(seg, 0, max(pc, 0), b)
        if pc < 0:
            store.undo_to(mark)
            del b.externals[ext_mark:]
            self.fail_box(b)
            return
        self.stats.reductions += 1
        idx = b.calls.index(rec)
        if seg.instructions[pc][0] == "proceed":
            new = []
        else:
            chain = rec.chain + (rec.frame,) if _scoped(rec.frame.seg) else rec.chain
            new = prepare_body(seg, frame, b, chain)
        b.calls[idx:idx + 1] = new
        self.trace("reduce", b, kind="det", label=self._label(seg), cuts=len(seg.cut_positions))
        self._recheck_waiting(b)
        self._after_box_change(b)

    def _after_box_change(self, b) -> None:
        """Route ``b`` after its calls or externals changed."""
        if not b.alive:
            return
        o = b.parent
        if b.externals and o is not self.top and not o.sealed:
            if len(o.alts) == 1:
                self.promote(b)
                return
            if b.cut_pending == 0 and not b.blocked:
                self.step_suspend(b)
                return
        if not b.calls and not b.blocked:
            self.box_done(b)
            return
        self.refresh_suspension(b)
        if not b.blocked and not b.held and self._next_ready(b) is not None:
            self.push(("box", b))

    # -- alternatives ------------------------------------------------------

    def step_next_alternative(self, o) -> None:
        nxt = [a for a in o.alts if a.box is None]
        if not nxt:
            return
        if len(nxt) > 1:
            self.push(("alt", o))
        self.explore(o, nxt[0])

    def step_unique_alternative(self, o) -> None:
        if not o.alive or len(o.alts) != 1 or o.sealed or o is self.top:
            return
        alt = o.alts[0]
        if alt.box is None:
            self.explore(o, alt)
        elif alt.box.alive:
            self.promote(alt.box)

    def explore(self, o, alt) -> None:
        p = o.parent
        a = AndBox(o, p.depth + 1)
        a.alt = alt
        alt.box = a
        alt.state = "running"
        seg = alt.seg
        a.label = self._label(seg)
        self.switch_to(a)
        frame = Frame(seg, seg.nslots)
        a.frame = frame
        store = self.store
        mark = len(store.trail)
        pc = run_head(store, seg, alt.args, frame.slots, a)
        self._trace_code(seg, 0, max(pc, 0), a)
        if pc < 0:
            store.undo_to(mark)
            a.externals.clear()
            self.trace("explore", a, orbox=o.id, label=a.label, head="fail")
            self.fail_box(a)
            return
        self.stats.reductions += 1
        self.trace("explore", a, orbox=o.id, label=a.label, head="ok",
                   externals=len(a.externals))
        records = [] if seg.instructions[pc][0] == "proceed" else prepare_body(seg, frame, a)
        self._install_body(a, records)
        if not a.alive:
            return
        if not seg.cut_positions and not self._guard_prefix(a):
            return
        if len(o.alts) == 1:
            self.promote(a)
            return
        if a.externals and a.cut_pending == 0:
            self.step_suspend(a)
            if not a.calls:
                self._guard_check(a)
            return
        if a.externals:
            self.refresh_suspension(a)
        if not a.calls:
            self.box_done(a)
        else:
            self.refresh_suspension(a)
            if self._next_ready(a) is not None:
                self.push(("box", a))

    def _guard_prefix(self, a) -> bool:
        """Run leading simple builtins of a fresh alternative; ``False`` if it failed."""
        while a.calls:
            rec = a.calls[0]
            if rec.kind != "builtin" or rec.state != "ready":
                break
            seg = rec.frame.seg
            end = rec.start
            while seg.instructions[end][0] != "call_builtin":
                end += 1
            tag = seg.instructions[end][1]
            if tag not in GUARD_SAFE:
                break
            _, _, args = load_args(rec, a)
            try:
                res = eval_builtin(tag, args, self.store, a)
            except BuiltinError as e:
                raise EngineError(str(e)) from e
            if isinstance(res, Success):
                a.calls.pop(0)
            elif isinstance(res, Fail):
                self.fail_box(a)
                return False
            else:
                rec.state = "waiting"
                rec.waiting = res.vars
                break
        return True

    def _install_body(self, a, records) -> None:
        """Set ``a``'s calls; bodies with cut/commit get segment wrappers."""
        if not any(r.kind in ("cut", "commit") for r in records):
            a.calls = records
            return
        parts = []
        cur = []
        for r in records:
            if r.kind in ("cut", "commit"):
                parts.append(cur)
                parts.append(r)
                cur = []
            else:
                cur.append(r)
        parts.append(cur)
        ncut = sum(1 for x in parts if isinstance(x, CallRecord))
        calls = []
        seen_cuts = 0
        fresh = []
        for x in parts:
            if isinstance(x, CallRecord):
                calls.append(x)
                seen_cuts += 1
                continue
            if not x:
                continue
            guard = seen_cuts < ncut
            srec = CallRecord("seg", a.frame, -1)
            srec.state = "running"
            so = OrBox(a, srec)
            so.sealed = True
            so.seg = "guard" if guard else "rest"
            srec.orbox = so
            salt = AltRecord(None, None)
            salt.state = "running"
            so.alts.append(salt)
            s = AndBox(so, a.depth + 1)
            s.alt = salt
            salt.box = s
            s.label = "$guard" if guard else "$rest"
            s.calls = x
            if not guard and any(r.kind == "barrier" for r in x):
                s.held = True
            calls.append(srec)
            fresh.append(s)
            self.trace("seg", s, orbox=so.id, parent=a.id, seg=so.seg, held=s.held)
        a.calls = calls
        a.cut_pending = ncut
        self.cut_boxes[a] = None
        for s in reversed(fresh):
            if not s.held:
                self.push(("box", s))

    def step_suspend(self, b) -> None:
        b.blocked = True
        self.stats.suspensions += 1
        self.refresh_suspension(b)
        self.trace("suspend", b, orbox=b.parent.id, externals=len(b.externals))
        self._leave(b)

    # -- promotion ---------------------------------------------------------

    def promote(self, a) -> None:
        o = a.parent
        p = o.parent
        self.trace("promote", a, orbox=o.id, alts=len(o.alts), parent=p.id)
        self.stats.promotions += 1
        self.switch_to(p)
        exts = a.externals
        a.externals = []
        self._unregister(a)
        a.blocked = False
        a.state = "running"
        compress = a.cut_pending == 0
        if compress:
            for v in a.locals:
                v.home = p
            p.locals.extend(a.locals)
            a.locals = []
        else:
            self._rehome_reachable(a, p, [e.value for e in exts])
        for e in exts:
            if not self.store.unify(e.var, e.value, p):
                self.fail_box(a)
                return
        if not a.alive:
            return
        if compress:
            self._compress(a)
            self._recheck_waiting(p)
            self._after_box_change(p)
        else:
            self._recheck_waiting(a)
            self._after_box_change(a)
            if p.alive:
                self._after_box_change(p)

    def _rehome_reachable(self, a, p, terms) -> None:
        moved = []
        stack = list(terms)
        while stack:
            t = deref(stack.pop())
            if type(t) is Var:
                if t.home is a:
                    t.home = p
                    moved.append(t)
            elif type(t) is Struct:
                stack.extend(t.args)
        if moved:
            keep = set(moved)
            a.locals = [v for v in a.locals if v not in keep]
            p.locals.extend(moved)

    def _compress(self, a) -> None:
        o = a.parent
        p = o.parent
        r = o.call
        idx = p.calls.index(r)
        ext = r.chain + (r.frame,) if _scoped(r.frame.seg) else r.chain
        if ext:
            for c in a.calls:
                c.chain = c.chain + ext
        p.calls[idx:idx + 1] = a.calls
        stack = []
        for c in a.calls:
            if c.orbox is not None:
                c.orbox.parent = p
                stack.extend(x.box for x in c.orbox.alts if x.box is not None)
        while stack:
            b = stack.pop()
            b.depth -= 1
            for c in b.calls:
                if c.orbox is not None:
                    stack.extend(x.box for x in c.orbox.alts if x.box is not None)
        p.absorbed.append(a.label)
        p.absorbed.extend(a.absorbed)
        self.lm_waiters = [(p if b is a else b, rec) for b, rec in self.lm_waiters]
        a.alive = False
        o.alive = False
        a.calls = []
        self.stats.and_compressions += 1
        self.trace("compress", a, orbox=o.id, into=p.id, label=a.label)

    # -- success -----------------------------------------------------------

    def box_done(self, a) -> None:
        """``a`` has no calls left (success port)."""
        o = a.parent
        if o is self.top:
            self.answer(a)
            return
        if o.sealed:
            a.state = "true"
            self.refresh_suspension(a)
            self.trace("success", a, orbox=o.id, seg=o.seg)
            self._leave(a)
            if o.seg == "guard":
                self.try_fire(o.parent)
            return
        if len(o.alts) == 1:
            self.promote(a)
            return
        a.state = "true"
        self.trace("success", a, orbox=o.id, alts=len(o.alts), externals=len(a.externals))
        if self.opts.implicit_pruning == "full" and not a.externals and a.cut_pending == 0:
            self._leave(a)
            self.prune(o, a.alt, "both", "true_in_or", a)
            self.promote(a)
            return
        self.refresh_suspension(a)
        self._leave(a)
        self._guard_check(a)

    step_success = box_done

    def _guard_check(self, t) -> None:
        """Re-test the cut above ``t`` when ``t`` may resolve a guard."""
        p = t.parent.parent
        if p is not None and p.alive and p.parent.sealed and p.parent.seg == "guard":
            self.try_fire(p.parent.parent)

    def answer(self, root) -> None:
        if self.stopped:
            return
        self.switch_to(root)
        ans = canonical_answer(root.qvars)
        self.answers.append(ans)
        self.stats.answers += 1
        self.trace("answer", root, answer=ans)
        self.switch_to(None)
        self.top.alts.remove(root.alt)
        self.kill(root)
        if self.opts.first:
            self.stopped = True

    # -- failure -----------------------------------------------------------

    def fail_box(self, a) -> None:
        """Fail ``a``; propagate through emptied or-boxes (False-in-And)."""
        while True:
            o = a.parent
            self.switch_to(o.parent)
            self.trace("fail", a, orbox=o.id)
            if a.alt in o.alts:
                o.alts.remove(a.alt)
            self.kill(a)
            if o is self.top:
                return
            if not o.alts:
                o.alive = False
                a = o.parent
                continue
            self._after_alt_removed(o)
            return

    step_fail = fail_box

    def _after_alt_removed(self, o) -> None:
        if not o.alive or o is self.top:
            return
        if o.sealed:
            if o.seg == "guard":
                self.try_fire(o.parent)
            return
        if len(o.alts) == 1:
            self.step_unique_alternative(o)

    def prune(self, o, keep, side: str, rule: str, by=None) -> list:
        """Remove alternatives of ``o`` right of ``keep`` (or all others for ``both``)."""
        i = o.alts.index(keep)
        victims = o.alts[i + 1:] if side == "right" else o.alts[:i] + o.alts[i + 1:]
        labels = []
        ids = [alt.box.id if alt.box is not None else None for alt in victims]
        for alt in victims:
            o.alts.remove(alt)
            if alt.box is not None:
                self._leave(alt.box)
                before = self.stats.reclaimed_boxes
                labels.extend(self.kill(alt.box))
                self.stats.pruned_boxes += self.stats.reclaimed_boxes - before
            elif alt.seg is not None:
                labels.append(self._label(alt.seg))
        if victims:
            self.trace("prune", by, orbox=o.id, removed=len(victims), cause=rule, labels=labels,
                       victims=ids)
        return labels

    # -- cut ---------------------------------------------------------------

    @staticmethod
    def _guard_branch(s):
        """Leftmost resolved branch inside guard box ``s``.

        Returns ``()`` when ``s`` itself is a true box, ``(t,)`` when ``s``
        holds a single or-box whose first alternative ``t`` is a true box,
        and ``None`` when the guard is not resolved yet.
        """
        if s is None or s.blocked:
            return None
        if not s.calls:
            return () if s.state == "true" else None
        if len(s.calls) != 1 or s.calls[0].orbox is None:
            return None
        t = s.calls[0].orbox.alts[0].box
        if t is None or t.calls or t.cut_pending:
            return None
        return (t,)

    def _cut_ready(self, a):
        """Guard segments before ``a``'s first cut, if all are resolved."""
        i = next(k for k, r in enumerate(a.calls) if r.kind in ("cut", "commit"))
        segs = []
        for r in a.calls[:i]:
            so = r.orbox
            if so is None or not so.alts:
                return None
            s = so.alts[0].box
            branch = self._guard_branch(s)
            if branch is None:
                return None
            segs.append((r, s, branch))
        return i, segs

    def _collapse(self, s, t):
        """Commit guard box ``s`` to the leftmost branch ``t`` of its or-box.

        Returns the labels of the pruned branches, or ``None`` on a conflict.
        """
        self.switch_to(s)
        exts = t.externals
        t.externals = []
        self._unregister(t)
        for v in t.locals:
            v.home = s
        s.locals.extend(t.locals)
        t.locals = []
        for e in exts:
            if not self.store.unify(e.var, e.value, s):
                t.externals = exts
                self.fail_box(t)
                return None
        io = t.parent
        labels = self.prune(io, t.alt, "right", "guard", s)
        s.calls = []
        s.absorbed.append(t.label)
        s.absorbed.extend(t.absorbed)
        t.alive = False
        io.alive = False
        self.stats.and_compressions += 1
        self.trace("compress", t, orbox=io.id, into=s.id, label=t.label)
        return labels

    def try_fire(self, a) -> bool:
        if not a.alive or a.cut_pending == 0:
            return False
        got = self._cut_ready(a)
        if got is None:
            return False
        i, segs = got
        depth = a.depth
        quiet = not a.externals and all(
            e.var.home.depth >= depth
            for _, s, branch in segs for b in (s,) + branch for e in b.externals
        )
        if not quiet and not is_leftmost(a, across_roots=False):
            return False
        pruned = []
        for _, s, branch in segs:
            if branch:
                got = self._collapse(s, branch[0])
                if got is None:
                    return True
                pruned.extend(got)
        cut = a.calls[i]
        self.switch_to(a)
        for r, s, _ in segs:
            so = r.orbox
            exts = s.externals
            s.externals = []
            self._unregister(s)
            for v in s.locals:
                v.home = a
            a.locals.extend(s.locals)
            s.locals = []
            for e in exts:
                if not self.store.unify(e.var, e.value, a):
                    s.externals = exts
                    self.fail_box(s)
                    return True
            pruned.extend(self.prune(so, so.alts[0], "right", "guard", a))
            a.calls.remove(r)
            a.absorbed.append(s.label)
            s.alive = False
            so.alive = False
        a.calls.remove(cut)
        a.cut_pending -= 1
        o = a.parent
        if o is not self.top:
            side = "right" if cut.kind == "cut" else "both"
            pruned.extend(self.prune(o, a.alt, side, cut.kind, a))
        self.trace("cut", a, kind=cut.kind, orbox=o.id, labels=pruned,
                   quiet=quiet, remaining=a.cut_pending)
        if a.cut_pending == 0:
            self.cut_boxes.pop(a, None)
            for r in list(a.calls):
                so = r.orbox
                if r.kind == "seg" and so is not None:
                    so.sealed = False
                    for alt in so.alts:
                        if alt.box is not None and alt.box.held:
                            alt.box.held = False
                            self.push(("box", alt.box))
            for r in list(a.calls):
                so = r.orbox
                if r.kind == "seg" and so is not None and so.alive and a.alive:
                    if len(so.alts) == 1:
                        self.step_unique_alternative(so)
        if not a.alive:
            return True
        self._recheck_waiting(a)
        if o is not self.top and len(o.alts) == 1:
            self.promote(a)
        else:
            self._after_box_change(a)
        return True

    # -- wake ----------------------------------------------------------------

    def step_wake(self, d) -> None:
        """Environment synchronization of a woken box."""
        self.suslist.discard(d)
        self.switch_to(d.parent_box)
        exts = d.externals
        d.externals = []
        self.switch_to(d)
        self.trace("wake", d, externals=len(exts))
        for e in exts:
            if not self.store.unify(e.var, e.value, d):
                self.fail_box(d)
                return
        if not d.alive:
            return
        self._recheck_waiting(d)
        if not d.externals:
            d.blocked = False
        o = d.parent
        if d.externals and o is not self.top and not o.sealed and len(o.alts) == 1:
            self.promote(d)
            return
        if not d.calls and not d.blocked and d.state == "true":
            d.state = "running"
        self._after_box_change(d)
        if d.alive and d.blocked:
            self._leave(d)
            if not d.calls:
                self._guard_check(d)

    # -- select_work ---------------------------------------------------------

    def step_select_work(self) -> bool:
        if self.cut_boxes:
            for b in walk(self.top):
                if b in self.cut_boxes and self.try_fire(b):
                    return True
        if self.lm_waiters:
            keep = []
            released = None
            for b, rec in self.lm_waiters:
                if not b.alive or rec not in b.calls or rec.state != "waiting_leftmost":
                    continue
                if released is None and b.calls[0] is rec and is_leftmost(b):
                    released = b
                    rec.state = "ready"
                    continue
                keep.append((b, rec))
            self.lm_waiters = keep
            if released is not None:
                self.refresh_suspension(released)
                if not released.blocked:
                    self.push(("box", released))
                return True
        for b in walk(self.top):
            if not isinstance(self.suslist.reason(b), ExternalConflict):
                continue
            o = b.parent
            if o is self.top or o.sealed or len(o.alts) < 2:
                continue
            p = o.parent
            if p.cut_pending:
                continue
            self.split(p, o, "lazy")
            return True
        return False

    # -- splitting -----------------------------------------------------------

    def _pending_flags(self) -> dict:
        live = sum(
            1 for k, x in self.agenda
            if x.alive and (k == "alt" or not (x.blocked or x.held))
        )
        return {"woken": int(self.suslist.first_woken() is not None), "agenda": live}

    def split(self, p, o, cause: str):
        """Splitting: ``p`` becomes ``p`` with ``o``'s first alternative and a
        copy of ``p`` holding the remaining ones."""
        flags = self._pending_flags()
        self.switch_to(None)
        q = p.parent
        moved = o.alts[1:]
        p2, o2, cp, pairs = copy_for_split(p, o, moved)
        q.alts.insert(q.alts.index(p.alt) + 1, p2.alt)
        reg = []
        for b, nb in pairs:
            reg.append((nb, b.woken and b in self.suslist, b in self.cut_boxes))
        recmap = {}
        for b, nb in pairs:
            for r, nr in zip(b.calls, nb.calls):
                recmap[id(r)] = (nb, nr)
        waiters = [recmap[id(rec)] for b, rec in self.lm_waiters if id(rec) in recmap]
        for alt in moved:
            o.alts.remove(alt)
            if alt.box is not None:
                self.kill(alt.box, count=False)
        self.lm_waiters = [(b, r) for b, r in self.lm_waiters if b.alive] + waiters
        pushes = []
        for nb, woken, cutbox in reg:
            self.refresh_suspension(nb)
            if woken and nb in self.suslist:
                self.suslist.wake(nb)
            if cutbox:
                self.cut_boxes[nb] = None
            for r in nb.calls:
                if r.orbox is not None and any(x.box is None for x in r.orbox.alts):
                    pushes.append(("alt", r.orbox))
            if not nb.blocked and not nb.held and self._next_ready(nb) is not None:
                pushes.append(("box", nb))
        for item in reversed(pushes):
            self.push(item)
        self.stats.splits += 1
        self.trace(
            "split", p,
            orbox=o.id, new_orbox=o2.id, alts=len(o2.alts),
            parent=p.id, copy=p2.id, parent_or=q.id,
            copied_orboxes={str(a.id): b.id for a, b in cp.orboxes},
            copied_boxes={str(a.id): b.id for a, b in pairs},
            cut_pending=p.cut_pending, label=p.label, cause=cause, pending=flags,
        )
        self._after_alt_removed(o)
        if o2.alive and len(o2.alts) == 1:
            self.step_unique_alternative(o2)
        return p2, o2

    def _eager_split(self, b, o) -> None:
        """Producer splitting at call time: one configuration per alternative."""
        self.push(("box", b))
        while b.alive and o.alive and len(o.alts) > 1:
            b, o = self.split(b, o, "eager")


def run_query(db, goal, **opts) -> RunResult:
    """Run ``goal`` (query text) against ``db`` (a :class:`Database` or program text)."""
    if isinstance(db, str):
        from .program import parse_program

        db = parse_program(db)
    return Engine(db, Options(**opts)).run(goal)
