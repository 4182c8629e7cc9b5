"""Line-oriented source document with protected-line bookkeeping.

Transformations edit a :class:`SourceDoc` through primitives that track, for
every current line, which original line it came from. Protected original
lines can never be rewritten or deleted; structural rewrites that rebuild a
span must carry every protected line through byte-identically.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass, field

from ..csource import CONTROL_KEYWORDS, line_code_views, match_paren


class SiteBlocked(Exception):
    """A transformation site overlaps a protected line; skip the site."""


class ProtectedLineViolation(RuntimeError):
    """Engine-level guard: a protected line vanished from the output."""


@dataclass
class SourceDoc:
    lines: list[str]
    origin: list[int | None]
    protected: frozenset[int]
    trailing_newline: bool = True
    _views: list[str] | None = field(default=None, repr=False)

    @classmethod
    def from_text(cls, text: str, protected=()) -> "SourceDoc":
        trailing = text.endswith("\n")
        lines = text.split("\n")
        if trailing:
            lines = lines[:-1]
        protected_set = frozenset(int(p) for p in protected)
        bad = [p for p in protected_set if not 1 <= p <= len(lines)]
        if bad:
            raise ValueError(f"protected lines outside the source: {sorted(bad)}")
        return cls(
            lines=list(lines),
            origin=list(range(1, len(lines) + 1)),
            protected=protected_set,
            trailing_newline=trailing or not lines,
        )

    def clone(self) -> "SourceDoc":
        return SourceDoc(
            lines=list(self.lines),
            origin=list(self.origin),
            protected=self.protected,
            trailing_newline=self.trailing_newline,
        )

    def text(self) -> str:
        body = "\n".join(self.lines)
        return body + "\n" if self.trailing_newline and body else body

    def views(self) -> list[str]:
        """Per-line code views (comments and literals blanked)."""
        if self._views is None:
            self._views = line_code_views(self.lines)
        return self._views

    def _dirty(self) -> None:
        self._views = None

    def is_protected(self, index: int) -> bool:
        return self.origin[index] in self.protected

    def protected_in(self, start: int, stop: int) -> list[int]:
        return [i for i in range(start, stop) if self.is_protected(i)]

    # -- edit primitives ----------------------------------------------------

    def replace_line(self, index: int, new_lines: list[str]) -> None:
        if self.is_protected(index):
            raise SiteBlocked(f"line {index + 1} is protected")
        self.lines[index : index + 1] = new_lines
        self.origin[index : index + 1] = [None] * len(new_lines)
        self._dirty()

    def insert_lines(self, index: int, new_lines: list[str]) -> None:
        self.lines[index:index] = new_lines
        self.origin[index:index] = [None] * len(new_lines)
        self._dirty()

    def delete_line(self, index: int) -> None:
        if self.is_protected(index):
            raise SiteBlocked(f"line {index + 1} is protected")
        del self.lines[index]
        del self.origin[index]
        self._dirty()

    def replace_span(self, start: int, stop: int, new_lines: list[str]) -> None:
        """Replace lines[start:stop]. Every protected line inside the span
        must reappear byte-identical in ``new_lines`` (e.g. loop-body copies);
        its provenance is re-attached to the first identical new line."""
        kept = {}
        for i in self.protected_in(start, stop):
            if self.lines[i] not in new_lines:
                raise SiteBlocked(
                    f"protected line {self.origin[i]} would not survive the rewrite"
                )
            kept[self.lines[i]] = self.origin[i]
        new_origin: list[int | None] = []
        for line in new_lines:
            if line in kept:
                new_origin.append(kept.pop(line))
            else:
                new_origin.append(None)
        self.lines[start:stop] = new_lines
        self.origin[start:stop] = new_origin
        self._dirty()


# ---------------------------------------------------------------------------
# Offset-based structure helpers (operate on the joined code view)


class DocIndex:
    """Joined code view of a document plus offset/line conversions."""

    def __init__(self, doc: SourceDoc):
        self.doc = doc
        self.views = doc.views()
        self.joined = "\n".join(self.views)
        self.line_starts = [0]
        for view in self.views[:-1]:
            self.line_starts.append(self.line_starts[-1] + len(view) + 1)

    def to_offset(self, line: int, col: int) -> int:
        return self.line_starts[line] + col

    def to_line_col(self, offset: int) -> tuple[int, int]:
        line = bisect.bisect_right(self.line_starts, offset) - 1
        return line, offset - self.line_starts[line]

    def depth_map(self) -> list[int]:
        """Brace depth before each character of the joined view."""
        depths = [0] * (len(self.joined) + 1)
        depth = 0
        for i, ch in enumerate(self.joined):
            depths[i] = depth
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth = max(0, depth - 1)
        depths[len(self.joined)] = depth
        return depths

    def skip_space(self, offset: int) -> int:
        joined = self.joined
        n = len(joined)
        while offset < n and joined[offset] in " \t\n":
            offset += 1
        return offset

    def statement_end(self, offset: int) -> int:
        """Offset of the last character of the statement starting at/after
        ``offset`` in the code view (handles blocks, if/else chains, loops)."""
        joined = self.joined
        n = len(joined)
        start = self.skip_space(offset)
        if start >= n:
            return n - 1
        ch = joined[start]
        if ch == "{":
            close = match_paren(joined, start, "{", "}")
            return close if close >= 0 else n - 1
        word = re.match(r"[A-Za-z_]\w*", joined[start:])
        keyword = word.group() if word else ""
        if keyword in ("if", "for", "while", "switch"):
            paren = joined.find("(", start)
            if paren < 0:
                return self._simple_end(start)
            close = match_paren(joined, paren)
            if close < 0:
                return self._simple_end(start)
            if keyword == "while":
                # could be a do-while tail: `} while (...);`
                after = self.skip_space(close + 1)
                if after < n and joined[after] == ";":
                    return after
            body_end = self.statement_end(close + 1)
            if keyword == "if":
                after = self.skip_space(body_end + 1)
                if joined.startswith("else", after) and not re.match(r"\w", joined[after + 4 : after + 5] or ""):
                    return self.statement_end(after + 4)
            return body_end
        if keyword == "do":
            body_end = self.statement_end(start + 2)
            semi = joined.find(";", body_end)
            return semi if semi >= 0 else n - 1
        return self._simple_end(start)

    def _simple_end(self, start: int) -> int:
        joined = self.joined
        depth = 0
        for i in range(start, len(joined)):
            ch = joined[i]
            if ch in "([{":
                depth += 1
            elif ch in ")]}":
                depth -= 1
            elif ch == ";" and depth <= 0:
                return i
        return len(joined) - 1


@dataclass(frozen=True)
class FuncSpan:
    name: str
    params: str
    header_start: int  # 0-based line of the signature
    body_open: int     # line holding the opening brace
    body_close: int    # line holding the matching closing brace

    def body_range(self) -> tuple[int, int]:
        """Line range strictly inside the body braces."""
        return (self.body_open + 1, self.body_close)


FUNC_NAME = re.compile(r"\b([A-Za-z_][\w:]*)\s*\(")
NOT_FUNCTION_NAMES = CONTROL_KEYWORDS | {"return", "sizeof", "defined", "throw", "new", "delete"}


def find_functions(index: DocIndex) -> list[FuncSpan]:
    """File-scope function definitions, found by tolerant signature matching."""
    joined = index.joined
    depths = index.depth_map()
    spans: list[FuncSpan] = []
    for match in FUNC_NAME.finditer(joined):
        name = match.group(1)
        if name.split("::")[-1] in NOT_FUNCTION_NAMES:
            continue
        if depths[match.start()] != 0:
            continue
        # Exclude expression contexts (initializers, macro bodies).
        before = joined[: match.start()].rstrip()
        if before and before[-1] in "=,(&|!+-*/<>?:":
            continue
        line, _ = index.to_line_col(match.start())
        if index.doc.views()[line].lstrip().startswith("#"):
            continue
        paren_open = match.end() - 1
        paren_close = match_paren(joined, paren_open)
        if paren_close < 0:
            continue
        after = index.skip_space(paren_close + 1)
        # tolerate `const`, `noexcept`, `override` before the brace
        while True:
            word = re.match(r"(const|noexcept|override)\b", joined[after:])
            if not word:
                break
            after = index.skip_space(after + word.end())
        if after >= len(joined) or joined[after] != "{":
            continue
        body_close_off = match_paren(joined, after, "{", "}")
        if body_close_off < 0:
            continue
        header_line, _ = index.to_line_col(match.start())
        open_line, _ = index.to_line_col(after)
        close_line, _ = index.to_line_col(body_close_off)
        spans.append(
            FuncSpan(
                name=name,
                params=joined[paren_open + 1 : paren_close],
                header_start=header_line,
                body_open=open_line,
                body_close=close_line,
            )
        )
    return spans


@dataclass(frozen=True)
class ControlSite:
    keyword: str
    line: int          # 0-based line of the keyword (single-line headers only)
    kw_col: int
    cond_open: int     # column of '('
    cond_close: int    # column of ')'
    condition: str     # code-view text between the parentheses


def control_sites(index: DocIndex, keywords: tuple[str, ...]) -> list[ControlSite]:
    """Single-line control headers (`kw (...)`) in document order."""
    sites: list[ControlSite] = []
    pattern = re.compile(r"\b(" + "|".join(keywords) + r")\b")
    for line_no, view in enumerate(index.views):
        for match in pattern.finditer(view):
            rest = view[match.end():]
            paren_rel = len(rest) - len(rest.lstrip())
            paren_col = match.end() + paren_rel
            if paren_col >= len(view) or view[paren_col] != "(":
                continue
            close_col = match_paren(view, paren_col)
            if close_col < 0:
                continue  # multi-line header: skipped
            sites.append(
                ControlSite(
                    keyword=match.group(1),
                    line=line_no,
                    kw_col=match.start(),
                    cond_open=paren_col,
                    cond_close=close_col,
                    condition=view[paren_col + 1 : close_col],
                )
            )
    return sites


def indent_of(line: str) -> str:
    return line[: len(line) - len(line.lstrip())]


def fresh_name(base: str, taken: set[str], counter: int = 1) -> str:
    if base not in taken:
        return base
    while f"{base}_{counter}" in taken:
        counter += 1
    return f"{base}_{counter}"
