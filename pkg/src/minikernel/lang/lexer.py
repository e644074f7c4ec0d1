"""Tokenizer for MiniKernel source.

Hand-rolled because the token set is tiny and we want exact line/column
positions for diagnostics.  Comments run from ``#`` to end of line.
Integer literals accept C-style suffixes (L, U, UL in either order,
case-insensitive); float literals need a decimal point or exponent and
accept an ``f`` suffix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List


class LexError(Exception):
    def __init__(self, message: str, line: int, col: int) -> None:
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "keyword" | "int" | "float" | "punct" | "eof"
    text: str
    line: int
    col: int
    # parsed payloads for literals
    int_value: int = 0
    int_suffix: str = ""  # "", "l", "u", "ul"
    float_value: float = 0.0
    float_suffix: str = ""  # "", "f"


KEYWORDS = frozenset({
    "wrapper", "kernel", "launch", "let", "assert",
    "if", "else", "for", "barrier", "return",
    "shared", "extern", "tensor", "handle",
    "true", "false",
    "i16", "i32", "i64", "u16", "u32", "u64", "f16", "f32", "f64", "bool",
})

# longest-match first
_PUNCTS = [
    "<<<", ">>>",
    "<<=", ">>=",
    "==", "!=", "<=", ">=", "&&", "||", "<<", ">>", "+=", "-=", "*=",
    "(", ")", "{", "}", "[", "]", "<", ">", ",", ";", ":", ".",
    "+", "-", "*", "/", "%", "=", "!",
]


def tokenize(source: str) -> List[Token]:
    return list(_scan(source))


def _scan(source: str) -> Iterator[Token]:
    i = 0
    line = 1
    col = 1
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            tok, i2 = _number(source, i, line, col)
            col += i2 - i
            i = i2
            yield tok
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            kind = "keyword" if text in KEYWORDS else "ident"
            yield Token(kind, text, line, col)
            col += j - i
            i = j
            continue
        for p in _PUNCTS:
            if source.startswith(p, i):
                if p in ("<<=", ">>="):
                    raise LexError(f"unsupported operator {p!r}", line, col)
                yield Token("punct", p, line, col)
                col += len(p)
                i += len(p)
                break
        else:
            raise LexError(f"unexpected character {ch!r}", line, col)
    yield Token("eof", "", line, col)


def _number(source: str, i: int, line: int, col: int) -> tuple[Token, int]:
    n = len(source)
    j = i
    is_float = False
    if source.startswith(("0x", "0X"), i):
        j = i + 2
        while j < n and (source[j] in "0123456789abcdefABCDEF"):
            j += 1
        if j == i + 2:
            raise LexError("hex literal needs digits", line, col)
        digits = source[i:j]
        value = int(digits, 16)
    else:
        while j < n and source[j].isdigit():
            j += 1
        if j < n and source[j] == ".":
            is_float = True
            j += 1
            while j < n and source[j].isdigit():
                j += 1
        if j < n and source[j] in "eE":
            k = j + 1
            if k < n and source[k] in "+-":
                k += 1
            if k < n and source[k].isdigit():
                is_float = True
                j = k
                while j < n and source[j].isdigit():
                    j += 1
        digits = source[i:j]
        value = 0 if is_float else int(digits)

    if is_float:
        suffix = ""
        if j < n and source[j] in "fF":
            suffix = "f"
            j += 1
        tok = Token("float", source[i:j], line, col,
                    float_value=float(digits), float_suffix=suffix)
        return tok, j

    suffix = ""
    k = j
    while k < n and source[k] in "uUlL":
        suffix += source[k].lower()
        k += 1
    if suffix not in ("", "l", "u", "ul", "lu"):
        raise LexError(f"bad integer suffix {suffix!r}", line, col)
    if suffix == "lu":
        suffix = "ul"
    if k < n and (source[k].isalnum() or source[k] == "_"):
        raise LexError("bad numeric literal", line, col)
    tok = Token("int", source[i:k], line, col, int_value=value, int_suffix=suffix)
    return tok, k
