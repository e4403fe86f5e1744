"""Temporal pattern DSL.

Grammar::

    pattern := term { "W[" number "," number "]" term }
    term    := PATH | "(" pattern ")"
    number  := decimal hours, at most two fraction digits

``W`` (either case) is the sequence-within-window operator and associates to
the left: ``a W[1,2] b W[3,4] c`` is ``(a W[1,2] b) W[3,4] c``. Windows are
stored in integer seconds; two fraction digits of an hour are always a whole
number of seconds, so conversion is exact.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal
from typing import Union

from .errors import PatternSyntaxError, UnknownEventType, WindowError
from .ledger import PATH_RE, SECONDS_PER_HOUR, Taxonomy

# smallest window step the grammar can express: 0.01 h
WINDOW_QUANTUM_S = 36


@dataclass(frozen=True)
class Atom:
    path: str

    def __post_init__(self):
        if not isinstance(self.path, str) or not PATH_RE.fullmatch(self.path):
            raise PatternSyntaxError(f"invalid type path {self.path!r}", 0)


@dataclass(frozen=True)
class Seq:
    left: "Pattern"
    right: "Pattern"
    window: tuple[int, int]

    def __post_init__(self):
        a, b = self.window
        object.__setattr__(self, "window", (int(a), int(b)))
        check_window(a, b)


Pattern = Union[Atom, Seq]


def check_window(a_s: int, b_s: int) -> None:
    if a_s < 0:
        raise WindowError(f"window start {a_s}s is negative")
    if a_s > b_s:
        raise WindowError(f"window start {a_s}s exceeds end {b_s}s")
    if a_s % WINDOW_QUANTUM_S or b_s % WINDOW_QUANTUM_S:
        raise WindowError(f"window [{a_s},{b_s}]s is not a multiple of 0.01 h")


def hours_to_seconds(h) -> int:
    d = Decimal(str(h))
    s = d * SECONDS_PER_HOUR
    if s != s.to_integral_value():
        raise WindowError(f"{h} h is not a whole number of seconds")
    return int(s)


def seconds_to_hours_text(s: int) -> str:
    """Shortest exact decimal for ``s`` seconds in hours."""
    d = (Decimal(int(s)) / SECONDS_PER_HOUR).normalize()
    text = format(d, "f")
    return text


def atoms(p: Pattern) -> list[str]:
    if isinstance(p, Atom):
        return [p.path]
    return atoms(p.left) + atoms(p.right)


def depth(p: Pattern) -> int:
    if isinstance(p, Atom):
        return 0
    return 1 + max(depth(p.left), depth(p.right))


# --- tokenizer -------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<op>[Ww]\s*\[)
  | (?P<path>[a-z0-9_]+(?:\.[a-z0-9_]+)*)
  | (?P<num>-\d+(?:\.\d+)?)
  | (?P<punct>[(),\]])
    """,
    re.VERBOSE,
)


_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = []  # (kind, value, char_offset)
        pos = 0
        n = len(text)
        while pos < n:
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                self._fail(f"unexpected character {text[pos]!r}", pos)
            kind = m.lastgroup
            if kind != "ws":
                self.tokens.append((kind, m.group(), pos))
            pos = m.end()
        self.tokens.append(("eof", "", n))
        self.i = 0

    def _fail(self, msg, char_pos):
        raise PatternSyntaxError(msg, len(self.text[:char_pos].encode("utf-8")))

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind, value=None, what=None):
        tok = self.advance()
        if tok[0] != kind or (value is not None and tok[1] != value):
            shown = "end of input" if tok[0] == "eof" else repr(tok[1])
            self._fail(f"expected {what or value or kind}, found {shown}", tok[2])
        return tok

    def parse(self) -> Pattern:
        p = self.pattern()
        tok = self.peek()
        if tok[0] != "eof":
            self._fail(f"expected 'W[' or end of input, found {tok[1]!r}", tok[2])
        return p

    def pattern(self) -> Pattern:
        left = self.term()
        while self.peek()[0] == "op":
            op = self.advance()
            a = self.number()
            self.expect("punct", ",", "','")
            b = self.number()
            self.expect("punct", "]", "']'")
            right = self.term()
            if a < 0 or b < 0:
                raise WindowError(f"negative window bound at byte {self._byte(op[2])}")
            if a > b:
                raise WindowError(
                    f"window start exceeds end at byte {self._byte(op[2])}: "
                    f"{seconds_to_hours_text(a)} > {seconds_to_hours_text(b)}"
                )
            left = Seq(left, right, (a, b))
        return left

    def _byte(self, char_pos):
        return len(self.text[:char_pos].encode("utf-8"))

    def term(self) -> Pattern:
        tok = self.peek()
        if tok[0] == "path":
            self.advance()
            return Atom(tok[1])
        if tok == ("punct", "(", tok[2]):
            self.advance()
            p = self.pattern()
            self.expect("punct", ")", "')'")
            return p
        shown = "end of input" if tok[0] == "eof" else repr(tok[1])
        self._fail(f"expected type path or '(', found {shown}", tok[2])

    def number(self) -> int:
        # unsigned numbers lex as paths (digits are legal path characters)
        tok = self.advance()
        text = tok[1]
        if tok[0] not in ("num", "path") or not _NUMBER_RE.fullmatch(text):
            shown = "end of input" if tok[0] == "eof" else repr(text)
            self._fail(f"expected number of hours, found {shown}", tok[2])
        if "." in text and len(text.split(".")[1]) > 2:
            self._fail(f"at most two fraction digits allowed in {text!r}", tok[2])
        return int(Decimal(text) * SECONDS_PER_HOUR)


def parse_pattern(text: str) -> Pattern:
    return _Parser(text).parse()


def format_pattern(p: Pattern) -> str:
    if isinstance(p, Atom):
        return p.path
    right = format_pattern(p.right)
    if isinstance(p.right, Seq):
        right = f"({right})"
    a, b = p.window
    return f"{format_pattern(p.left)} W[{seconds_to_hours_text(a)},{seconds_to_hours_text(b)}] {right}"


def validate_pattern(p: Pattern, taxonomy: Taxonomy) -> None:
    """Raise UnknownEventType naming every atom missing from ``taxonomy``."""
    missing = []
    for path in atoms(p):
        if path not in taxonomy and path not in missing:
            missing.append(path)
    if missing:
        raise UnknownEventType(missing)
