"""Byte-level Java lexer.

Tokens carry byte offsets into the original buffer so downstream rewriting
can splice source exactly. Bytes >= 0x80 are treated as identifier letters;
multibyte UTF-8 sequences never contain ASCII punctuation bytes, so offset
arithmetic stays exact without decoding.

`>` is always emitted as a single token. The parser merges adjacent `>`
tokens into shift/compare operators; the lexer cannot tell `>>` the shift
from `>>` closing two nested type-argument lists.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import JavaParseError

KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized
    this throw throws transient try void volatile while
    null true false""".split()
)

# null/true/false are literals in the language grammar but reserved words;
# lexing them as keywords keeps identifier handling honest. Contextual
# keywords (var, record, yield, sealed, permits) lex as IDENT.

IDENT = "ident"
KEYWORD = "keyword"
INT_LIT = "int"
FLOAT_LIT = "float"
CHAR_LIT = "char"
STRING_LIT = "string"
TEXT_BLOCK = "textblock"
OP = "op"
EOF = "eof"

# Multi-byte operators, longest first. No >-family entries: see module doc.
_OPERATORS = [
    b"<<=", b"...", b"->", b"::", b"++", b"--", b"&&", b"||", b"<<", b"<=",
    b"==", b"!=", b"+=", b"-=", b"*=", b"/=", b"&=", b"|=", b"^=", b"%=",
]
_SINGLE = set(b"+-*/%&|^!~?:;,.(){}[]<>=@")


@dataclass(frozen=True)
class Token:
    type: str
    value: str
    start: int
    end: int

    def __repr__(self) -> str:  # compact for test failure output
        return f"{self.type}:{self.value}@{self.start}"


def _is_ident_start(b: int) -> bool:
    return (
        65 <= b <= 90 or 97 <= b <= 122 or b == 95 or b == 36 or b >= 0x80
    )


def _is_ident_part(b: int) -> bool:
    return _is_ident_start(b) or 48 <= b <= 57


def _line_col(buf: bytes, pos: int) -> tuple[int, int]:
    line = buf.count(b"\n", 0, pos) + 1
    last_nl = buf.rfind(b"\n", 0, pos)
    return line, pos - last_nl


def lex(buf: bytes, path: str | None = None) -> tuple[list[Token], list[tuple[int, int]]]:
    """Tokenize a Java buffer.

    Returns (tokens, line_comments) where line_comments is a list of
    (start, end) byte spans for // comments, kept for graph construction.
    Block comments are skipped entirely.
    """
    tokens: list[Token] = []
    comments: list[tuple[int, int]] = []
    i = 0
    n = len(buf)

    def err(msg: str, pos: int) -> JavaParseError:
        line, col = _line_col(buf, pos)
        return JavaParseError(msg, line, col, path)

    while i < n:
        b = buf[i]
        if b in (0x20, 0x09, 0x0D, 0x0A, 0x0C):
            i += 1
            continue
        if b == 0x2F and i + 1 < n:  # '/'
            nxt = buf[i + 1]
            if nxt == 0x2F:  # line comment
                end = buf.find(b"\n", i)
                end = n if end == -1 else end
                comments.append((i, end))
                i = end
                continue
            if nxt == 0x2A:  # block comment
                close = buf.find(b"*/", i + 2)
                if close == -1:
                    raise err("unterminated block comment", i)
                i = close + 2
                continue
        if _is_ident_start(b):
            j = i + 1
            while j < n and _is_ident_part(buf[j]):
                j += 1
            word = buf[i:j].decode("utf-8", errors="replace")
            ttype = KEYWORD if word in KEYWORDS else IDENT
            tokens.append(Token(ttype, word, i, j))
            i = j
            continue
        if 48 <= b <= 57 or (b == 0x2E and i + 1 < n and 48 <= buf[i + 1] <= 57):
            tok, i = _lex_number(buf, i, err)
            tokens.append(tok)
            continue
        if b == 0x22:  # '"'
            if buf[i : i + 3] == b'"""':
                close = buf.find(b'"""', i + 3)
                while close != -1 and buf[close - 1] == 0x5C:
                    close = buf.find(b'"""', close + 1)
                if close == -1:
                    raise err("unterminated text block", i)
                j = close + 3
                tokens.append(
                    Token(TEXT_BLOCK, buf[i:j].decode("utf-8", "replace"), i, j)
                )
                i = j
                continue
            j = _scan_quoted(buf, i, 0x22, err)
            tokens.append(Token(STRING_LIT, buf[i:j].decode("utf-8", "replace"), i, j))
            i = j
            continue
        if b == 0x27:  # "'"
            j = _scan_quoted(buf, i, 0x27, err)
            tokens.append(Token(CHAR_LIT, buf[i:j].decode("utf-8", "replace"), i, j))
            i = j
            continue
        matched = False
        for op in _OPERATORS:
            if buf[i : i + len(op)] == op:
                tokens.append(Token(OP, op.decode(), i, i + len(op)))
                i += len(op)
                matched = True
                break
        if matched:
            continue
        if b in _SINGLE:
            tokens.append(Token(OP, chr(b), i, i + 1))
            i += 1
            continue
        raise err(f"unexpected byte 0x{b:02x}", i)

    tokens.append(Token(EOF, "", n, n))
    return tokens, comments


def _scan_quoted(buf: bytes, start: int, quote: int, err) -> int:
    i = start + 1
    n = len(buf)
    while i < n:
        b = buf[i]
        if b == 0x5C:  # backslash
            i += 2
            continue
        if b == quote:
            return i + 1
        if b == 0x0A:
            break
        i += 1
    raise err("unterminated literal", start)


def _lex_number(buf: bytes, start: int, err) -> tuple[Token, int]:
    n = len(buf)
    i = start
    is_float = False
    if buf[i] == 0x30 and i + 1 < n and buf[i + 1] in (0x78, 0x58):  # 0x
        i += 2
        while i < n and (buf[i : i + 1].isalnum() or buf[i] == 0x5F or buf[i] == 0x2E):
            if buf[i] == 0x2E:
                is_float = True  # hex float, rare but legal
            i += 1
        return Token(FLOAT_LIT if is_float else INT_LIT,
                     buf[start:i].decode(), start, i), i
    if buf[i] == 0x30 and i + 1 < n and buf[i + 1] in (0x62, 0x42):  # 0b
        i += 2
        while i < n and (48 <= buf[i] <= 49 or buf[i] == 0x5F):
            i += 1
        if i < n and buf[i] in (0x6C, 0x4C):
            i += 1
        return Token(INT_LIT, buf[start:i].decode(), start, i), i

    def digits(j: int) -> int:
        while j < n and (48 <= buf[j] <= 57 or buf[j] == 0x5F):
            j += 1
        return j

    i = digits(i)
    if i < n and buf[i] == 0x2E and not (i + 1 < n and buf[i + 1] == 0x2E):
        is_float = True
        i = digits(i + 1)
    if i < n and buf[i] in (0x65, 0x45):  # exponent
        j = i + 1
        if j < n and buf[j] in (0x2B, 0x2D):
            j += 1
        if j < n and 48 <= buf[j] <= 57:
            is_float = True
            i = digits(j)
    if i < n and buf[i] in (0x66, 0x46, 0x64, 0x44):  # f F d D
        is_float = True
        i += 1
    elif i < n and buf[i] in (0x6C, 0x4C):  # l L
        i += 1
    return Token(FLOAT_LIT if is_float else INT_LIT,
                 buf[start:i].decode(), start, i), i
