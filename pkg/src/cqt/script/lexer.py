from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import CQTError


class ScriptError(CQTError):
    """Any error tied to a location in a .cqp source."""

    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.message = message


class LexError(ScriptError):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # NUMBER, PARAM, IDENT, OP, NEWLINE, EOF
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<param>\$\{[A-Za-z_][A-Za-z0-9_]*\})
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>>=|[()\[\],=+\-*/])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            ch = text[pos]
            if ch == "$":
                raise LexError(line, col, "malformed parameter reference; expected ${name}")
            raise LexError(line, col, f"unexpected character {ch!r}")
        kind = m.lastgroup
        if kind == "newline":
            tokens.append(Token("NEWLINE", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind.upper(), m.group(), line, col))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens
