"""Removal of marker comments and diagnostic prints that leak the flaw location.

Matches the benchmark-suite annotation style: block or line comments carrying
FLAW / FIX / POTENTIAL FLAW / INCIDENTAL / GOOD / BAD markers, and print-style
call statements whose string literals mention the same markers. Protected
lines are exempt, since they carry the root cause itself.
"""

from __future__ import annotations

import re

from ..csource import COMMENT, LITERAL, scan
from .source import SourceDoc

HINT_MARKER = re.compile(
    r"\b(?:POTENTIAL\s+FLAW|FLAW|FIX|FIXME|INCIDENTAL|GOOD|BAD)\b", re.IGNORECASE
)

PRINT_CALL = re.compile(r"^\s*\w*(?:print|Print|puts|log|Log)\w*\s*\(.*\)\s*;\s*$")
STREAM_PRINT = re.compile(r"^\s*(?:std\s*::\s*)?(?:cout|cerr|clog)\b.*;\s*$")


def _comment_blocks(text: str) -> list[tuple[int, int]]:
    """Maximal comment regions as (start, stop) offsets (stop exclusive)."""
    mask = scan(text)
    blocks: list[tuple[int, int]] = []
    i = 0
    n = len(text)
    while i < n:
        if mask[i] == COMMENT:
            j = i
            while j < n and mask[j] == COMMENT:
                j += 1
            blocks.append((i, j))
            i = j
        else:
            i += 1
    return blocks


def eliminate_hints(source: str, protected_lines=()) -> str:
    """Strip hint comments and marker-bearing print statements from C/C++ text."""
    doc = SourceDoc.from_text(source, protected_lines)
    eliminate_hints_doc(doc)
    return doc.text()


def _remove_hint_comments(doc: SourceDoc) -> list[dict]:
    removed: list[dict] = []
    text = "\n".join(doc.lines)
    line_starts = [0]
    for line in doc.lines[:-1]:
        line_starts.append(line_starts[-1] + len(line) + 1)

    def line_of(offset: int) -> int:
        import bisect

        return bisect.bisect_right(line_starts, offset) - 1

    hits = [
        (start, stop)
        for start, stop in _comment_blocks(text)
        if HINT_MARKER.search(text[start:stop])
    ]
    # Collect cut ranges per line so several comments on one line slice once.
    cuts: dict[int, list[tuple[int, int]]] = {}
    for start, stop in hits:
        first, last = line_of(start), line_of(max(start, stop - 1))
        if any(doc.is_protected(i) for i in range(first, last + 1)):
            continue
        for i in range(first, last + 1):
            lo = max(0, start - line_starts[i])
            hi = min(len(doc.lines[i]), stop - line_starts[i])
            cuts.setdefault(i, []).append((lo, hi))
    # Bottom-up so deletions keep earlier indices valid.
    for i in sorted(cuts, reverse=True):
        line = doc.lines[i]
        kept = line
        for lo, hi in sorted(cuts[i], reverse=True):
            kept = kept[:lo] + kept[hi:]
        if kept.strip():
            doc.replace_line(i, [kept.rstrip()])
        else:
            doc.delete_line(i)
        removed.append({"line": i + 1, "kind": "comment", "text": line})
    return removed


def _remove_hint_prints(doc: SourceDoc) -> list[dict]:
    removed: list[dict] = []
    index = 0
    while index < len(doc.lines):
        if doc.is_protected(index):
            index += 1
            continue
        line = doc.lines[index]
        if not (PRINT_CALL.match(line) or STREAM_PRINT.match(line)):
            index += 1
            continue
        mask = scan(line)
        literal_hit = HINT_MARKER.search(
            "".join(ch if mask[k] == LITERAL else " " for k, ch in enumerate(line))
        )
        if literal_hit:
            doc.delete_line(index)
            removed.append({"line": index + 1, "kind": "print", "text": line})
            continue
        index += 1
    return removed


def eliminate_hints_doc(doc: SourceDoc) -> list[dict]:
    removed = _remove_hint_comments(doc)
    removed.extend(_remove_hint_prints(doc))
    return removed
