"""Tolerant lexical utilities for C/C++ text.

Nothing here builds a real AST. The scanner classifies every character as
code, comment, or string/char literal, which is enough to strip comments for
normalization, count decision points, and let the perturbation engine match
patterns without being fooled by literals. Preprocessor lines are left as
opaque code. Raw string literals are not recognized.
"""

from __future__ import annotations

import re

CODE = 0
COMMENT = 1
LITERAL = 2


class ParseFailure(ValueError):
    """Source too broken for lexical analysis (unterminated block comment)."""


def scan(text: str, strict: bool = True) -> list[int]:
    """Per-character classification of ``text`` into code/comment/literal.

    With ``strict`` an unterminated block comment raises; otherwise it is
    classified as comment to end of input.
    """
    n = len(text)
    mask = [CODE] * n
    i = 0
    state = CODE
    closer = ""
    while i < n:
        ch = text[i]
        if state == CODE:
            if ch == "/" and i + 1 < n and text[i + 1] == "/":
                state = COMMENT
                closer = "\n"
                mask[i] = mask[i + 1] = COMMENT
                i += 2
                continue
            if ch == "/" and i + 1 < n and text[i + 1] == "*":
                state = COMMENT
                closer = "*/"
                mask[i] = mask[i + 1] = COMMENT
                i += 2
                continue
            if ch == '"' or ch == "'":
                state = LITERAL
                closer = ch
                mask[i] = LITERAL
                i += 1
                continue
            i += 1
            continue
        if state == COMMENT:
            if closer == "\n":
                if ch == "\n":
                    # Backslash continuation extends a line comment.
                    if i > 0 and text[i - 1] == "\\":
                        mask[i] = COMMENT
                        i += 1
                        continue
                    state = CODE
                    i += 1
                    continue
                mask[i] = COMMENT
                i += 1
                continue
            # block comment
            mask[i] = COMMENT
            if ch == "*" and i + 1 < n and text[i + 1] == "/":
                mask[i + 1] = COMMENT
                state = CODE
                i += 2
                continue
            i += 1
            continue
        # string or char literal
        if ch == "\\" and i + 1 < n:
            mask[i] = LITERAL
            mask[i + 1] = LITERAL
            i += 2
            continue
        if ch == "\n":
            # Unterminated literal: recover at end of line.
            state = CODE
            i += 1
            continue
        mask[i] = LITERAL
        if ch == closer:
            state = CODE
        i += 1
    if strict and state == COMMENT and closer == "*/":
        raise ParseFailure("unterminated block comment")
    return mask


def strip_comments(text: str) -> str:
    """Replace every comment with a single space, preserving newlines.

    Tolerant: an unterminated block comment is stripped to end of input.
    """
    mask = scan(text, strict=False)
    out: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        if mask[i] == COMMENT:
            j = i
            while j < n and mask[j] == COMMENT:
                if text[j] == "\n":
                    out.append("\n")
                j += 1
            out.append(" ")
            i = j
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


def code_view(text: str) -> str:
    """Text with comment and literal characters blanked (newlines kept)."""
    mask = scan(text)
    return "".join(
        ch if mask[i] == CODE or ch == "\n" else " "
        for i, ch in enumerate(text)
    )


def line_code_views(lines: list[str]) -> list[str]:
    """Per-line code views for an already-split file (no trailing newlines)."""
    view = code_view("\n".join(lines))
    return view.split("\n")


IDENT_RE = re.compile(r"[A-Za-z_]\w*")
INT_LITERAL_RE = re.compile(r"(?<![\w.])(\d+)([uUlL]{0,3})(?![\w.])")

CPP_KEYWORDS = frozenset(
    """alignas alignof and asm auto bool break case catch char class const constexpr
    const_cast continue decltype default delete do double dynamic_cast else enum
    explicit export extern false float for friend goto if inline int long mutable
    namespace new noexcept not nullptr operator or private protected public
    register reinterpret_cast return short signed sizeof static static_assert
    static_cast struct switch template this throw true try typedef typeid typename
    union unsigned using virtual void volatile wchar_t while size_t ssize_t
    int8_t int16_t int32_t int64_t uint8_t uint16_t uint32_t uint64_t NULL""".split()
)

PRIMITIVE_TYPES = frozenset(
    """void bool char short int long float double signed unsigned size_t ssize_t
    wchar_t int8_t int16_t int32_t int64_t uint8_t uint16_t uint32_t uint64_t""".split()
)

CONTROL_KEYWORDS = frozenset(
    "if else for while do switch case default goto try catch".split()
)


def identifiers(code: str) -> set[str]:
    """Identifier tokens in a code view, keywords excluded."""
    return {m.group() for m in IDENT_RE.finditer(code)} - CPP_KEYWORDS


def match_paren(text: str, open_index: int, open_ch: str = "(", close_ch: str = ")") -> int:
    """Index of the bracket closing ``text[open_index]``; -1 if unbalanced.

    ``text`` must already be a code view (literals blanked).
    """
    depth = 0
    for i in range(open_index, len(text)):
        ch = text[i]
        if ch == open_ch:
            depth += 1
        elif ch == close_ch:
            depth -= 1
            if depth == 0:
                return i
    return -1


def split_top_level(text: str, separator: str) -> list[str]:
    """Split a code-view expression on a separator at bracket depth zero."""
    parts: list[str] = []
    depth = 0
    current: list[str] = []
    i = 0
    n = len(text)
    sep_len = len(separator)
    while i < n:
        ch = text[i]
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        if depth == 0 and text.startswith(separator, i):
            # Guard multi-char operator boundaries: '&&' inside '&&&' etc. is
            # not a concern for the separators used here (',', '&&', '||',
            # '+', '-'), but '+'/'-' must not split '++'/'--'/'+=' or
            # scientific literals.
            if separator in "+-":
                prev = text[i - 1] if i > 0 else ""
                nxt = text[i + 1] if i + 1 < n else ""
                exponent = prev in "eE" and i > 1 and text[i - 2].isdigit()
                if prev == separator or nxt == separator or nxt == "=" or exponent:
                    current.append(ch)
                    i += 1
                    continue
            parts.append("".join(current))
            current = []
            i += sep_len
            continue
        current.append(ch)
        i += 1
    parts.append("".join(current))
    return parts
