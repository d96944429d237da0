"""Tokenizer shared by the model and property parsers."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError

IDENT = "IDENT"
NUMBER = "NUMBER"
STRING = "STRING"
SYMBOL = "SYMBOL"
EOF = "EOF"

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>//[^\n]*)
  | (?P<nl>\n)
  | (?P<number>\d+\.\d+|\d+(?![.\d])|\d+(?=\.\.))
  | (?P<string>"[^"\n]*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym><<|>>|\.\.|<=|>=|!=|->|[-+*/()\[\]{}<>=!&|:;,'?])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int

    def __repr__(self):
        return f"{self.kind}({self.text!r})@{self.line}:{self.column}"


def tokenize(text: str) -> list[Token]:
    tokens = []
    line = 1
    line_start = 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        pos = m.end()
        if m.lastgroup in ("ws", "comment"):
            continue
        if m.lastgroup == "nl":
            line += 1
            line_start = pos
            continue
        col = m.start() - line_start + 1
        kind = {
            "number": NUMBER,
            "string": STRING,
            "ident": IDENT,
            "sym": SYMBOL,
        }[m.lastgroup]
        tokens.append(Token(kind, m.group(), line, col))
    tokens.append(Token(EOF, "", line, pos - line_start + 1))
    return tokens


class TokenStream:
    """Cursor over a token list with parse-error helpers."""

    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != EOF:
            self.pos += 1
        return tok

    def at_symbol(self, *texts: str) -> bool:
        tok = self.peek()
        return tok.kind == SYMBOL and tok.text in texts

    def at_keyword(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == IDENT and tok.text in words

    def accept_symbol(self, *texts: str) -> Token | None:
        if self.at_symbol(*texts):
            return self.next()
        return None

    def accept_keyword(self, *words: str) -> Token | None:
        if self.at_keyword(*words):
            return self.next()
        return None

    def expect_symbol(self, text: str) -> Token:
        tok = self.peek()
        if tok.kind == SYMBOL and tok.text == text:
            return self.next()
        raise self.error(f"expected {text!r}")

    def expect_keyword(self, word: str) -> Token:
        tok = self.peek()
        if tok.kind == IDENT and tok.text == word:
            return self.next()
        raise self.error(f"expected {word!r}")

    def expect_ident(self, what: str = "identifier") -> Token:
        tok = self.peek()
        if tok.kind != IDENT:
            raise self.error(f"expected {what}")
        return self.next()

    def expect_string(self) -> str:
        tok = self.peek()
        if tok.kind != STRING:
            raise self.error("expected quoted string")
        self.next()
        return tok.text[1:-1]

    def error(self, message: str) -> ParseError:
        tok = self.peek()
        where = "end of input" if tok.kind == EOF else f"{tok.text!r}"
        return ParseError(f"{message}, found {where}", tok.line, tok.column)
