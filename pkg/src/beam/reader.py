"""Tokenizer and operator-precedence parser for the supported Prolog subset."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .terms import NIL, Atom, Struct, Var, make_list

__all__ = ["PrologSyntaxError", "Reader", "parse_terms", "parse_term"]


class PrologSyntaxError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{msg} at line {line}, column {col}")
        self.line = line
        self.col = col


# name -> (priority, type)
INFIX_OPS = {
    ":-": (1200, "xfx"),
    "|": (1100, "xfy"),
    "&&": (1050, "xfy"),
    ",": (1000, "xfy"),
    "=": (700, "xfx"),
    "\\=": (700, "xfx"),
    "is": (700, "xfx"),
    "=:=": (700, "xfx"),
    "=\\=": (700, "xfx"),
    "<": (700, "xfx"),
    ">": (700, "xfx"),
    "=<": (700, "xfx"),
    ">=": (700, "xfx"),
    "==": (700, "xfx"),
    "\\==": (700, "xfx"),
    "+": (500, "yfx"),
    "-": (500, "yfx"),
    "*": (400, "yfx"),
    "/": (400, "yfx"),
    "//": (400, "yfx"),
    "mod": (400, "yfx"),
}
PREFIX_OPS = {
    ":-": (1200, "fx"),
    "?-": (1200, "fx"),
    "-": (200, "fy"),
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|%[^\n]*|/\*.*?\*/)
  | (?P<int>\d+)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<name>[a-z][A-Za-z0-9_]*)
  | (?P<qatom>'(?:[^'\\]|\\.|'')*')
  | (?P<punct>[()\[\],|])
  | (?P<end>\.(?=\s|%|$))
  | (?P<symbol>[+\-*/\\^<>=~:.?@\#&$]+)
  | (?P<solo>[!;])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass
class Token:
    kind: str
    text: str
    pos: int
    layout_before: bool


class Reader:
    """Parse a source text into clause terms with per-clause variable maps."""

    def __init__(self, text: str):
        self.text = text
        self.tokens = self._tokenize(text)
        self.i = 0
        self.varmap: dict[str, Var] = {}
        self.var_order: list[str] = []

    def _linecol(self, pos: int) -> tuple[int, int]:
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, col

    def error(self, msg: str, pos: int | None = None):
        if pos is None:
            pos = self.tokens[self.i].pos if self.i < len(self.tokens) else len(self.text)
        line, col = self._linecol(pos)
        return PrologSyntaxError(msg, line, col)

    def _tokenize(self, text: str) -> list[Token]:
        out = []
        pos = 0
        layout = True
        n = len(text)
        while pos < n:
            m = _TOKEN_RE.match(text, pos)
            if not m:
                line = text.count("\n", 0, pos) + 1
                col = pos - (text.rfind("\n", 0, pos) + 1) + 1
                raise PrologSyntaxError(f"unexpected character {text[pos]!r}", line, col)
            kind = m.lastgroup
            s = m.group(kind)
            if kind == "ws":
                layout = True
            else:
                if kind == "qatom":
                    s = s[1:-1].replace("''", "'")
                    s = re.sub(r"\\(.)", lambda mm: {"n": "\n", "t": "\t"}.get(mm.group(1), mm.group(1)), s)
                    kind = "name"
                elif kind in ("symbol", "solo"):
                    kind = "name"
                out.append(Token(kind, s, pos, layout))
                layout = False
            pos = m.end()
        return out

    # -- token helpers ---------------------------------------------------

    def peek(self) -> Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise self.error("unexpected end of input")
        self.i += 1
        return tok

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.next()
        if tok.kind != kind and not (kind == "punct" and tok.kind == "name" and tok.text == text):
            raise self.error(f"expected {text or kind}, got {tok.text!r}", tok.pos)
        if text is not None and tok.text != text:
            raise self.error(f"expected {text!r}, got {tok.text!r}", tok.pos)
        return tok

    def at_end(self) -> bool:
        return self.i >= len(self.tokens)

    # -- clause level ----------------------------------------------------

    def read_clause(self):
        """Return ``(term, varnames)`` for the next clause, or ``None`` at end."""
        if self.at_end():
            return None
        self.varmap = {}
        self.var_order = []
        t = self.parse(1200)
        tok = self.peek()
        if tok is None or tok.kind != "end":
            raise self.error("operator expected")
        self.i += 1
        return t, dict(self.varmap)

    # -- expressions -----------------------------------------------------

    def parse(self, max_prec: int):
        left, left_prec = self.parse_primary(max_prec)
        return self.parse_infix(left, left_prec, max_prec)

    def parse_infix(self, left, left_prec: int, max_prec: int):
        while True:
            tok = self.peek()
            if tok is None:
                return left
            name = tok.text if tok.kind in ("name", "punct") else None
            if name not in INFIX_OPS:
                return left
            prec, typ = INFIX_OPS[name]
            if prec > max_prec:
                return left
            la = prec - 1 if typ[0] == "x" else prec
            ra = prec - 1 if typ[2] == "x" else prec
            if left_prec > la:
                return left
            self.i += 1
            right = self.parse(ra)
            left = Struct(name, [left, right])
            left_prec = prec

    def _var(self, name: str):
        if name == "_":
            v = Var(name="_")
            return v
        v = self.varmap.get(name)
        if v is None:
            v = Var(name=name)
            self.varmap[name] = v
            self.var_order.append(name)
        return v

    def parse_arglist(self) -> list:
        args = [self.parse(999)]
        while True:
            tok = self.next()
            if tok.text == ",":
                args.append(self.parse(999))
            elif tok.text == ")":
                return args
            else:
                raise self.error(f"expected ',' or ')', got {tok.text!r}", tok.pos)

    def parse_primary(self, max_prec: int):
        tok = self.next()
        k, s = tok.kind, tok.text
        if k == "int":
            return int(s), 0
        if k == "var":
            return self._var(s), 0
        if k == "punct":
            if s == "(":
                t = self.parse(1200)
                self.expect("punct", ")")
                return t, 0
            if s == "[":
                nxt = self.peek()
                if nxt is not None and nxt.text == "]":
                    self.i += 1
                    return self._after_name("[]", max_prec, tok)
                items = [self.parse(999)]
                tail = NIL
                while True:
                    t2 = self.next()
                    if t2.text == ",":
                        items.append(self.parse(999))
                    elif t2.text == "|":
                        tail = self.parse(999)
                        self.expect("punct", "]")
                        break
                    elif t2.text == "]":
                        break
                    else:
                        raise self.error(f"unexpected {t2.text!r} in list", t2.pos)
                return make_list(items, tail), 0
            if s == "|" or s == ",":
                raise self.error(f"unexpected {s!r}", tok.pos)
            raise self.error(f"unexpected {s!r}", tok.pos)
        if k == "end":
            raise self.error("unexpected end of clause", tok.pos)
        # a name
        nxt = self.peek()
        if nxt is not None and nxt.text == "(" and not nxt.layout_before:
            self.i += 1
            args = self.parse_arglist()
            return Struct(s, args), 0
        if s == "-" and nxt is not None and nxt.kind == "int" and not nxt.layout_before:
            self.i += 1
            return -int(nxt.text), 0
        if s in PREFIX_OPS and nxt is not None and not self._is_term_end(nxt):
            prec, typ = PREFIX_OPS[s]
            if prec > max_prec:
                prec = 999
            argmax = prec - 1 if typ == "fx" else prec
            arg = self.parse(argmax)
            return Struct(s, [arg]), prec
        return self._after_name(s, max_prec, tok)

    def _is_term_end(self, tok: Token) -> bool:
        if tok.kind == "end":
            return True
        if tok.kind == "punct" and tok.text in (")", "]", ",", "|"):
            return True
        if tok.kind == "name" and tok.text in INFIX_OPS:
            return True
        return False

    def _after_name(self, s: str, max_prec: int, tok: Token):
        prec = 0
        if s in INFIX_OPS or s in PREFIX_OPS:
            prec = max(INFIX_OPS.get(s, (0,))[0], PREFIX_OPS.get(s, (0,))[0])
            if prec > max_prec:
                prec = 0
        return Atom(s), prec


def parse_terms(text: str):
    """Yield ``(term, varnames)`` for every clause in ``text``."""
    r = Reader(text)
    while True:
        c = r.read_clause()
        if c is None:
            return
        yield c


def parse_term(text: str):
    """Parse a single term (a trailing full stop is optional)."""
    src = text.strip()
    if not src.endswith("."):
        src += " ."
    items = list(parse_terms(src))
    if len(items) != 1:
        raise PrologSyntaxError("expected exactly one term")
    return items[0]
