"""Reference checks that do not share the engine's machinery.

``sld_solve`` is a plain depth-first SLD interpreter (clause order, leftmost
selection, standard cut) with its own substitution store.  ``audit_trace``
replays an engine trace on a shadow And-Or tree built from the events alone
and reports rule applications whose preconditions did not hold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .manager import canonical_answer
from .program import BUILTINS, Commit, Cut, Database, Goal, SeqBarrier, parse_program, parse_query
from .terms import Atom, Struct, Var, deref, format_term

__all__ = [
    "DepthExceeded",
    "OracleError",
    "sld_solve",
    "answer_multiset",
    "AuditReport",
    "TraceParseError",
    "audit_trace",
    "load_trace",
]


class DepthExceeded(Exception):
    """The resolution-step bound was reached before the search finished."""


class OracleError(Exception):
    """A builtin was used outside its domain (e.g. unbound arithmetic)."""


# -- SLD interpreter -----------------------------------------------------------


class _V:
    __slots__ = ("n",)
    _count = 0

    def __init__(self):
        _V._count += 1
        self.n = _V._count


class _Subst:
    def __init__(self):
        self.b: dict = {}
        self.trail: list = []

    def walk(self, t):
        while type(t) is _V:
            v = self.b.get(t)
            if v is None:
                return t
            t = v
        return t

    def bind(self, v, t):
        self.b[v] = t
        self.trail.append(v)

    def undo(self, mark):
        tr = self.trail
        while len(tr) > mark:
            del self.b[tr.pop()]

    def unify(self, x, y) -> bool:
        stack = [(x, y)]
        while stack:
            a, b = stack.pop()
            a, b = self.walk(a), self.walk(b)
            if a is b:
                continue
            if type(a) is _V:
                self.bind(a, b)
            elif type(b) is _V:
                self.bind(b, a)
            elif type(a) is Struct:
                if type(b) is not Struct or a.name != b.name or len(a.args) != len(b.args):
                    return False
                stack.extend(zip(a.args, b.args))
            elif a != b or type(a) is not type(b):
                return False
        return True

    def full(self, t):
        """Resolve ``t`` completely (iterative along the last argument)."""
        t = self.walk(t)
        if type(t) is not Struct:
            return t
        spine = []
        while type(t) is Struct:
            spine.append(t)
            t = self.walk(t.args[-1])
        for s in reversed(spine):
            t = Struct(s.name, [self.full(a) for a in s.args[:-1]] + [t])
        return t


def _rename(t, m: dict):
    t = deref(t)
    if type(t) is Var:
        v = m.get(t)
        if v is None:
            v = m[t] = _V()
        return v
    if type(t) is Struct:
        return Struct(t.name, [_rename(a, m) for a in t.args])
    return t


def _arith(s: _Subst, t):
    t = s.walk(t)
    if type(t) is int:
        return t
    if type(t) is _V:
        raise OracleError("arithmetic on an unbound variable")
    if type(t) is Struct and len(t.args) == 2:
        a, b = _arith(s, t.args[0]), _arith(s, t.args[1])
        op = t.name
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "//":
            if b == 0:
                raise OracleError("division by zero")
            q = abs(a) // abs(b)
            return q if (a >= 0) == (b >= 0) else -q
        if op == "mod":
            if b == 0:
                raise OracleError("division by zero")
            return a % b
    if type(t) is Struct and t.name == "-" and len(t.args) == 1:
        return -_arith(s, t.args[0])
    raise OracleError(f"not an integer expression: {t!r}")


_CMP = {
    "<": lambda a, b: a < b,
    "=<": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "=:=": lambda a, b: a == b,
    "=\\=": lambda a, b: a != b,
}


def _show(s: _Subst, t) -> str:
    t = s.full(t)
    names: dict = {}

    def back(x):
        if type(x) is _V:
            v = names.get(x)
            if v is None:
                v = names[x] = Var()
            return v
        if type(x) is Struct:
            return Struct(x.name, [back(a) for a in x.args])
        return x

    x = back(t)
    return x.name if type(x) is Atom else format_term(x)


@dataclass
class _Solved:
    answers: list
    output: str
    steps: int


def sld_solve(db, query, depth_bound: int = 1_000_000, first: bool = False) -> list:
    """Enumerate the answers of ``query`` over ``db`` in Prolog order.

    ``db`` may be program text or a :class:`Database`; ``query`` a goal string.
    Each answer is a dict ``{name: text}`` with unbound variables renamed
    ``_0, _1, ...`` (same rendering as the engine).  Raises
    :class:`DepthExceeded` after ``depth_bound`` resolution steps.
    """
    return _solve(db, query, depth_bound, first).answers


def _solve(db, query, depth_bound, first) -> _Solved:
    if isinstance(db, str):
        db = parse_program(db)
    items, varnames = parse_query(query) if isinstance(query, str) else query
    s = _Subst()
    qmap: dict = {}
    goals = None
    for it in reversed(items):
        goals = (_item(it, qmap), 0, goals)
    qvars = [(n, qmap.get(v)) for n, v in varnames.items() if not n.startswith("_")]
    out: list = []
    answers: list = []
    steps = 0
    # choicepoint: (goal term, cut height, continuation, clause list, next index, trail mark)
    cps: list = []
    while True:
        if goals is None:
            pairs = []
            for name, v in qvars:
                pairs.append((name, v))
            answers.append(_canon(s, pairs))
            if first:
                break
            goals = _retry(s, cps)
            if goals is False:
                break
            continue
        item, height, rest = goals
        steps += 1
        if steps > depth_bound:
            raise DepthExceeded(f"more than {depth_bound} resolution steps")
        kind = item[0]
        if kind == "cut":
            del cps[height:]
            goals = rest
            continue
        if kind == "nop":
            goals = rest
            continue
        t = s.walk(item[1])
        if type(t) is _V:
            raise OracleError("unbound goal")
        key = (t.name, len(t.args)) if type(t) is Struct else (t.name, 0)
        args = t.args if type(t) is Struct else []
        if key in BUILTINS:
            ok = _builtin(s, key[0], args, out)
            goals = rest if ok else _retry(s, cps)
            if goals is False:
                break
            continue
        pred = db.lookup(*key)
        clauses = pred.clauses if pred is not None else []
        goals = _try(s, cps, t, clauses, 0, rest)
        if goals is False:
            break
    return _Solved(answers, "".join(out), steps)


def _item(it, m):
    if isinstance(it, (Cut, Commit)):
        return ("cut",)
    if isinstance(it, SeqBarrier):
        return ("nop",)
    return ("goal", _rename(it.term, m))


def _try(s, cps, t, clauses, i, rest):
    while i < len(clauses):
        c = clauses[i]
        mark = len(s.trail)
        m: dict = {}
        head = _rename(c.head, m)
        height = len(cps)
        if s.unify(head, t):
            if i + 1 < len(clauses):
                cps.append((t, clauses, i + 1, rest, mark))
            goals = rest
            body = [_item(b, m) for b in c.body]
            for b in reversed(body):
                goals = (b, height, goals)
            return goals
        s.undo(mark)
        i += 1
    return _retry(s, cps)


def _retry(s, cps):
    if not cps:
        return False
    t, clauses, i, rest, mark = cps.pop()
    s.undo(mark)
    return _try(s, cps, t, clauses, i, rest)


def _builtin(s, name, args, out) -> bool:
    if name == "true":
        return True
    if name == "fail":
        return False
    if name == "=":
        mark = len(s.trail)
        if s.unify(args[0], args[1]):
            return True
        s.undo(mark)
        return False
    if name == "is":
        v = _arith(s, args[1])
        mark = len(s.trail)
        if s.unify(args[0], v):
            return True
        s.undo(mark)
        return False
    if name in _CMP:
        return _CMP[name](_arith(s, args[0]), _arith(s, args[1]))
    if name == "write":
        out.append(_show(s, args[0]))
        return True
    if name == "nl":
        out.append("\n")
        return True
    raise OracleError(f"unknown builtin {name}")


def _canon(s, pairs) -> dict:
    """Translate a solution to engine terms and render it canonically."""
    names: dict = {}

    def back(x):
        if type(x) is _V:
            v = names.get(x)
            if v is None:
                v = names[x] = Var()
            return v
        if type(x) is Struct:
            spine = []
            while type(x) is Struct:
                spine.append(x)
                x = x.args[-1]
            tail = back(x)
            for st in reversed(spine):
                tail = Struct(st.name, [back(a) for a in st.args[:-1]] + [tail])
            return tail
        return x

    return canonical_answer([(n, back(s.full(v)) if v is not None else Var()) for n, v in pairs])


def answer_multiset(answers) -> list:
    """Order-independent canonical form of a list of answer dicts."""
    return sorted(tuple(sorted(a.items())) for a in answers)


# -- trace audit ---------------------------------------------------------------


class TraceParseError(Exception):
    def __init__(self, msg: str, line: int):
        super().__init__(f"line {line}: {msg}")
        self.line = line


@dataclass
class AuditReport:
    events: int = 0
    splits: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def first(self) -> str | None:
        return self.violations[0] if self.violations else None


def load_trace(source) -> list:
    """Read a JSON-lines trace from a path or an iterable of lines."""
    if isinstance(source, str):
        with open(source, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    else:
        lines = list(source)
    events = []
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            e = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceParseError(f"invalid JSON ({exc.msg})", n) from None
        if not isinstance(e, dict) or "rule" not in e or "detail" not in e:
            raise TraceParseError("event needs 'rule' and 'detail'", n)
        e["_line"] = n
        events.append(e)
    return events


class _Shadow:
    """And-Or tree rebuilt from trace events only."""

    def __init__(self, db: Database):
        self.db = db
        self.boxes: dict = {}   # id -> dict(orbox, alive, susp, label, cuts)
        self.ors: dict = {}     # id -> dict(parent, count, alive, sealed, promoted, top)
        self.kids: dict = {}    # box id -> set of or-box ids
        self.members: dict = {}  # or-box id -> set of box ids

    def clause_cuts(self, label) -> int:
        if not label or "#" not in label:
            return 0
        pa, _, k = label.rpartition("#")
        name, _, ar = pa.rpartition("/")
        try:
            pred = self.db.lookup(name, int(ar))
            c = pred.clauses[int(k) - 1]
        except (ValueError, AttributeError, IndexError, TypeError):
            return 0
        return sum(1 for b in c.body if isinstance(b, (Cut, Commit)))

    def new_or(self, oid, parent, count, sealed=False, top=False):
        self.ors[oid] = dict(parent=parent, count=count, alive=True, sealed=sealed,
                             promoted=False, top=top)
        if parent is not None:
            self.kids.setdefault(parent, set()).add(oid)

    def new_box(self, bid, oid, label, cuts=0):
        self.boxes[bid] = dict(orbox=oid, alive=True, susp=False, label=label, cuts=cuts)
        self.members.setdefault(oid, set()).add(bid)

    def kill(self, bid):
        stack = [bid]
        while stack:
            b = stack.pop()
            rec = self.boxes.get(b)
            if rec is None or not rec["alive"]:
                continue
            rec["alive"] = False
            for o in self.kids.get(b, ()):
                orec = self.ors[o]
                if orec["alive"]:
                    orec["alive"] = False
                    stack.extend(self.members.get(o, ()))

    def live_box(self, bid) -> bool:
        r = self.boxes.get(bid)
        return r is not None and r["alive"]


def audit_trace(trace, program) -> AuditReport:
    """Replay ``trace`` (path, JSON lines, or event dicts) against ``program``.

    Checks, in the order events occurred:
    (a) under the lazy strategy no split happens while another rule is
        applicable: no woken box or runnable call is pending and no live
        or-box outside the top level is down to one alternative;
    (b) failure propagation is never deferred: when a failure empties an
        or-box the very next event fails that or-box's parent box;
    (c) promotion only happens at or-boxes with exactly one alternative;
    (d) the and-box being split does not hold an unfired cut or commit.
    Also: eager splits only at producer predicates, and the final split and
    promotion counters equal the number of split and promote events.
    """
    db = program if isinstance(program, Database) else parse_program(program)
    if isinstance(trace, (str, bytes)) or (isinstance(trace, list) and trace and isinstance(trace[0], str)):
        events = load_trace(trace)
    else:
        events = list(trace)
    rep = AuditReport()
    sh = _Shadow(db)
    strategy = "lazy"
    expect_fail = None
    last_stats = None
    promotes = 0

    def bad(e, msg):
        rep.violations.append(f"step {e.get('step')} ({e['rule']}): {msg}")

    for e in events:
        rule = e["rule"]
        if rule == "instr":
            continue
        rep.events += 1
        d = e.get("detail") or {}
        box = e.get("box")
        if expect_fail is not None:
            if rule != "fail" or box != expect_fail:
                bad(e, f"failure of box {expect_fail} deferred (false-in-and not applied first)")
            expect_fail = None
        if rule == "start":
            strategy = d.get("strategy", "lazy")
        elif rule == "root":
            sh.new_or(d["orbox"], None, 1, top=True)
            sh.new_box(box, d["orbox"], d.get("label"))
        elif rule == "reduce":
            if d.get("kind") == "orbox":
                sh.new_or(d["orbox"], box, d["alts"])
            elif d.get("kind") == "det" and d.get("cuts"):
                bad(e, "determinate reduce-and-promote applied to a clause with a cut")
        elif rule == "explore":
            if d["orbox"] not in sh.ors or not sh.ors[d["orbox"]]["alive"]:
                bad(e, f"explore in unknown or dead or-box {d['orbox']}")
            sh.new_box(box, d["orbox"], d.get("label"), sh.clause_cuts(d.get("label")))
        elif rule == "seg":
            sh.new_or(d["orbox"], d["parent"], 1, sealed=True)
            sh.new_box(box, d["orbox"], d.get("seg"))
        elif rule == "suspend":
            if box in sh.boxes:
                sh.boxes[box]["susp"] = True
        elif rule == "wake":
            if box in sh.boxes:
                sh.boxes[box]["susp"] = False
        elif rule == "promote":
            o = sh.ors.get(d["orbox"])
            if d.get("alts") != 1 or o is None or o["count"] != 1:
                bad(e, "promotion requires single alternative")
            if not sh.live_box(box):
                bad(e, f"promotion of dead box {box}")
            if o is not None:
                o["promoted"] = True
            if box in sh.boxes:
                sh.boxes[box]["susp"] = False
        elif rule == "compress":
            o = sh.ors.get(d["orbox"])
            rec = sh.boxes.get(box)
            if rec is not None:
                if rec["cuts"] > 0:
                    bad(e, f"and-compression of box {box} with an unfired cut")
                rec["alive"] = False
                for k in sh.kids.pop(box, set()):
                    sh.ors[k]["parent"] = d["into"]
                    sh.kids.setdefault(d["into"], set()).add(k)
            if o is not None:
                o["alive"] = False
        elif rule == "fail":
            o = sh.ors.get(d["orbox"])
            sh.kill(box)
            if o is not None:
                o["count"] -= 1
                if o["count"] == 0 and not o["top"]:
                    o["alive"] = False
                    expect_fail = o["parent"]
        elif rule == "prune":
            o = sh.ors.get(d["orbox"])
            if o is not None:
                o["count"] -= d.get("removed", 0)
                if o["count"] < 1:
                    bad(e, f"pruning emptied or-box {d['orbox']}")
            for v in d.get("victims") or ():
                if v is not None:
                    sh.kill(v)
        elif rule == "cut":
            rec = sh.boxes.get(box)
            if rec is not None:
                if rec["cuts"] <= 0:
                    bad(e, f"cut fired in box {box} that holds no pending cut")
                rec["cuts"] -= 1
        elif rule == "answer":
            o = sh.ors.get(sh.boxes.get(box, {}).get("orbox"))
            sh.kill(box)
            if o is not None:
                o["count"] -= 1
        elif rule == "split":
            _audit_split(sh, e, d, strategy, db, bad)
            _apply_split(sh, d)
            rep.splits += 1
        elif rule == "end":
            last_stats = e.get("stats")
        if rule == "promote":
            promotes += 1
    if expect_fail is not None:
        rep.violations.append(f"failure of box {expect_fail} never propagated")
    if last_stats is not None:
        if last_stats.get("splits") != rep.splits:
            rep.violations.append(
                f"split counter {last_stats.get('splits')} != {rep.splits} split events")
        if last_stats.get("promotions") != promotes:
            rep.violations.append(
                f"promotion counter {last_stats.get('promotions')} != {promotes} promote events")
    return rep


def _audit_split(sh: _Shadow, e, d, strategy, db, bad) -> None:
    p = d["parent"]
    if not sh.live_box(p):
        bad(e, f"split of dead box {p}")
    o = sh.ors.get(d["orbox"])
    if o is None or o["count"] < 2:
        bad(e, "split needs an or-box with at least two alternatives")
    rec = sh.boxes.get(p)
    if (rec is not None and rec["cuts"] > 0) or d.get("cut_pending"):
        bad(e, f"split of box {p} ({rec and rec['label']}) holding an unfired cut")
    cause = d.get("cause")
    if cause == "eager":
        if strategy != "eager":
            bad(e, "eager split under the lazy strategy")
        else:
            labels = [sh.boxes[b]["label"] for b in sh.members.get(d["orbox"], ())
                      if sh.boxes[b]["alive"]]
            pred = None
            for lab in labels:
                if lab and "#" in lab:
                    pred = lab.rpartition("#")[0]
            if pred is not None:
                name, _, ar = pred.rpartition("/")
                pr = db.lookup(name, int(ar))
                if pr is None or not pr.eager_split:
                    bad(e, f"eager split on {pred}, which is not a producer")
        return
    pend = d.get("pending") or {}
    if pend.get("woken") or pend.get("agenda"):
        bad(e, f"split while other work was pending {pend}")
    for oid, rec in sh.ors.items():
        if rec["alive"] and not rec["top"] and not rec["sealed"] and not rec["promoted"] \
                and rec["count"] == 1 and sh.live_box(rec["parent"]):
            bad(e, f"split while or-box {oid} had a unique alternative to promote")
            break


def _apply_split(sh: _Shadow, d) -> None:
    O = d["orbox"]
    moved = d["alts"]
    omap = {int(k): v for k, v in d.get("copied_orboxes", {}).items()}
    bmap = {int(k): v for k, v in d.get("copied_boxes", {}).items()}
    p, p2 = d["parent"], d["copy"]
    for ob, nb in bmap.items():
        rec = sh.boxes.get(ob)
        if rec is None:
            continue
        if ob == p:
            oid = d["parent_or"]
        else:
            oid = omap.get(rec["orbox"], rec["orbox"])
        sh.boxes[nb] = dict(rec, orbox=oid)
        sh.members.setdefault(oid, set()).add(nb)
    for oo, no in omap.items():
        rec = sh.ors.get(oo)
        if rec is None:
            continue
        parent = bmap.get(rec["parent"], rec["parent"])
        sh.new_or(no, parent, moved if oo == O else rec["count"], sealed=rec["sealed"])
        sh.ors[no]["promoted"] = rec["promoted"]
    # originals of the moved alternatives leave the first configuration
    for ob in bmap:
        rec = sh.boxes.get(ob)
        if rec is not None and rec["orbox"] == O and ob != p:
            sh.kill(ob)
    sh.ors[O]["count"] -= moved
    sh.ors[d["parent_or"]]["count"] += 1
