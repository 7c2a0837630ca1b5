"""Tokenizer for the sirsql dialect.

Identifiers may contain ``#`` (S#, P#) and can be quoted with double quotes
or square brackets.  Comments are ``--`` to end of line and ``/* ... */``.
Keywords are not reserved at the lexer level; the parser matches token text
case-insensitively, so names like STATUS stay plain identifiers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParseError

# token kinds
IDENT = "IDENT"
NUMBER = "NUMBER"
STRING = "STRING"
OP = "OP"
EOF = "EOF"

_OPERATORS = (
    "||", "<=", ">=", "<>", "!=",
    "(", ")", ",", ";", ".", "*", "/", "+", "-", "=", "<", ">", "%",
)


@dataclass
class Token:
    kind: str
    value: str
    line: int
    col: int
    quoted: bool = field(default=False)

    def matches(self, word: str) -> bool:
        """Case-insensitive keyword match; quoted identifiers never match."""
        return self.kind == IDENT and not self.quoted and self.value.upper() == word.upper()


def _ident_start(ch: str) -> bool:
    return ch.isalpha() or ch == "_"


def _ident_part(ch: str) -> bool:
    return ch.isalnum() or ch in "_#$"


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)

    def bump(text):
        nonlocal line, col
        for ch in text:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1

    while i < n:
        ch = source[i]
        if ch in " \t\r\n":
            bump(ch)
            i += 1
            continue
        if source.startswith("--", i):
            end = source.find("\n", i)
            end = n if end == -1 else end
            bump(source[i:end])
            i = end
            continue
        if source.startswith("/*", i):
            end = source.find("*/", i + 2)
            if end == -1:
                raise ParseError("unterminated block comment", line, col)
            bump(source[i:end + 2])
            i = end + 2
            continue
        if ch == "'":
            j = i + 1
            out = []
            while True:
                if j >= n:
                    raise ParseError("unterminated string literal", line, col)
                if source[j] == "'":
                    if j + 1 < n and source[j + 1] == "'":
                        out.append("'")
                        j += 2
                        continue
                    break
                out.append(source[j])
                j += 1
            tokens.append(Token(STRING, "".join(out), line, col))
            bump(source[i:j + 1])
            i = j + 1
            continue
        if ch == '"' or ch == "[":
            closer = '"' if ch == '"' else "]"
            j = source.find(closer, i + 1)
            if j == -1:
                raise ParseError("unterminated quoted identifier", line, col)
            tokens.append(Token(IDENT, source[i + 1:j], line, col, quoted=True))
            bump(source[i:j + 1])
            i = j + 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (source[j].isdigit() or (source[j] == "." and not seen_dot)):
                if source[j] == ".":
                    # a dot not followed by a digit ends the number (qualified names)
                    if j + 1 >= n or not source[j + 1].isdigit():
                        break
                    seen_dot = True
                j += 1
            tokens.append(Token(NUMBER, source[i:j], line, col))
            bump(source[i:j])
            i = j
            continue
        if _ident_start(ch):
            j = i
            while j < n and _ident_part(source[j]):
                j += 1
            tokens.append(Token(IDENT, source[i:j], line, col))
            bump(source[i:j])
            i = j
            continue
        for op in _OPERATORS:
            if source.startswith(op, i):
                tokens.append(Token(OP, op, line, col))
                bump(op)
                i += len(op)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)

    tokens.append(Token(EOF, "", line, col))
    return tokens
