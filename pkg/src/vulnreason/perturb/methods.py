"""Catalog and implementations of the 25 semantic-preserving transformations.

Six categories: Basic (10), Condition (6), Loop (2), Logic (2),
Decomposition (2), Arithmetic (3). Every implementation is deliberately
conservative: a site is transformed only when the rewrite is provably
behavior-preserving at the text level (short-circuit order, evaluation
counts, scopes and loop control flow all considered), otherwise the site is
skipped. All edits honor protected lines and are deterministic for a fixed
seed.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field

from ..csource import (
    CONTROL_KEYWORDS,
    INT_LITERAL_RE,
    PRIMITIVE_TYPES,
    identifiers,
    match_paren,
)
from .source import (
    ControlSite,
    DocIndex,
    SiteBlocked,
    SourceDoc,
    control_sites,
    find_functions,
    fresh_name,
    indent_of,
)

WORD = re.compile(r"[A-Za-z_]\w*")


@dataclass(frozen=True)
class PerturbationMethod:
    id: str
    category: str
    summary: str


@dataclass
class ApplyConfig:
    all_sites: bool = True
    sample_rate: float = 1.0


@dataclass
class ApplyContext:
    rng: random.Random
    config: ApplyConfig = field(default_factory=ApplyConfig)
    applied: list[dict] = field(default_factory=list)

    def take(self) -> bool:
        if self.config.all_sites:
            return True
        return self.rng.random() < self.config.sample_rate

    def record(self, method: str, line: int, detail: str) -> None:
        self.applied.append({"method": method, "line": line + 1, "detail": detail})


_REGISTRY: dict[str, PerturbationMethod] = {}
_IMPL: dict[str, object] = {}


def method_catalog() -> dict[str, PerturbationMethod]:
    return dict(_REGISTRY)


def get_method(method_id: str) -> PerturbationMethod:
    try:
        return _REGISTRY[method_id]
    except KeyError:
        raise KeyError(
            f"unknown perturbation method {method_id!r}; known: {sorted(_REGISTRY)}"
        ) from None


def implementation(method_id: str):
    get_method(method_id)
    return _IMPL[method_id]


def _register(method_id: str, category: str, summary: str):
    def wrap(fn):
        _REGISTRY[method_id] = PerturbationMethod(method_id, category, summary)
        _IMPL[method_id] = fn
        return fn

    return wrap


# ---------------------------------------------------------------------------
# shared line classifiers


def _words(view: str) -> set[str]:
    return set(WORD.findall(view))


def _simple_stmt(doc: SourceDoc, i: int) -> bool:
    """Single-line statement ending in ';' with no braces or control words."""
    view = doc.views()[i]
    stripped = view.strip()
    if not stripped.endswith(";") or "{" in view or "}" in view:
        return False
    if doc.lines[i].lstrip().startswith("#"):
        return False
    if _words(view) & CONTROL_KEYWORDS:
        return False
    if re.match(r"^\s*\w+\s*:(?!:)", view):  # label
        return False
    return bool(stripped[:-1].strip())


DECL_HEAD = re.compile(
    r"^\s*((?:(?:const|static|register|volatile|constexpr|extern|unsigned|signed)\s+)*)"
    r"([A-Za-z_][\w:]*(?:\s+(?:unsigned|signed|int|long|short|char|double))*)"
    r"\s*((?:\*\s*)*)\s*([A-Za-z_]\w*)\s*(=|;|\[|,)"
)

# template-typed declarations: vector<T> name, map<K, V<X>> name, T<U> *name
TEMPLATE_DECL = re.compile(
    r"^\s*(?:(?:const|static|register|volatile|constexpr|extern)\s+)*"
    r"[A-Za-z_][\w:]*\s*<[^;={}]*>\s*[&*\s]*[A-Za-z_]\w*\s*(=|;|\[|\(|,|\{)"
)


def _is_declaration(view: str) -> bool:
    if TEMPLATE_DECL.match(view):
        return True
    m = DECL_HEAD.match(view)
    if not m:
        return False
    base = m.group(2).split()[0]
    if base in CONTROL_KEYWORDS or base in ("return", "goto", "delete", "new", "throw"):
        return False
    # Require a real separator between type and declarator.
    if m.start(4) <= m.end(2) and not m.group(3).strip():
        return False
    return True


def _has_call(view: str) -> bool:
    return bool(re.search(r"[A-Za-z_]\w*\s*\(", view))


def _taken_names(doc: SourceDoc) -> set[str]:
    names: set[str] = set()
    for view in doc.views():
        names |= _words(view)
    return names


def _function_lines(doc: SourceDoc) -> set[int]:
    index = DocIndex(doc)
    inside: set[int] = set()
    for span in find_functions(index):
        inside.update(range(span.body_open + 1, span.body_close))
    return inside


# ---------------------------------------------------------------------------
# Basic methods


@_register("add_exception", "Basic",
           "Wrap expression statements in a rethrowing try/catch block")
def _add_exception(doc: SourceDoc, ctx: ApplyContext) -> None:
    body_lines = _function_lines(doc)
    i = 0
    while i < len(doc.lines):
        if (
            i in body_lines
            and not doc.is_protected(i)
            and _simple_stmt(doc, i)
            and not _is_declaration(doc.views()[i])
            and ctx.take()
        ):
            raw = doc.lines[i]
            pad = indent_of(raw)
            doc.replace_line(i, [
                f"{pad}try {{",
                f"{pad}    {raw.strip()}",
                f"{pad}}} catch (...) {{",
                f"{pad}    throw;",
                f"{pad}}}",
            ])
            ctx.record("add_exception", i, "wrapped statement in try/catch")
            body_lines = _function_lines(doc)
            i += 5
            continue
        i += 1


_PURE_ASSIGN = re.compile(r"^\s*(?:[A-Za-z_][\w:]*\s+)*\**\s*([A-Za-z_]\w*)\s*=\s*[^;]+;\s*$")


def _swap_eligible(doc: SourceDoc, i: int) -> set[str] | None:
    """Identifier footprint of a side-effect-free assign/decl line, else None."""
    view = doc.views()[i]
    if not _simple_stmt(doc, i):
        return None
    if _has_call(view) or "++" in view or "--" in view:
        return None
    if not _PURE_ASSIGN.match(view):
        return None
    if view.count("=") != 1:
        return None
    return _words(view) - CONTROL_KEYWORDS - PRIMITIVE_TYPES - {"const", "static"}


@_register("change_statement_order", "Basic",
           "Swap adjacent pure statements that share no identifiers")
def _change_statement_order(doc: SourceDoc, ctx: ApplyContext) -> None:
    body_lines = _function_lines(doc)
    i = 0
    while i + 1 < len(doc.lines):
        if (
            i in body_lines and i + 1 in body_lines
            and not doc.is_protected(i) and not doc.is_protected(i + 1)
            and indent_of(doc.lines[i]) == indent_of(doc.lines[i + 1])
        ):
            a = _swap_eligible(doc, i)
            b = _swap_eligible(doc, i + 1)
            if a is not None and b is not None and not (a & b) and ctx.take():
                first, second = doc.lines[i], doc.lines[i + 1]
                doc.replace_line(i, [second])
                doc.replace_line(i + 1, [first])
                ctx.record("change_statement_order", i, "swapped adjacent statements")
                i += 2
                continue
        i += 1


def _param_names(params: str) -> list[tuple[str, bool]]:
    """(name, is_pointer) for each parameter in a signature fragment."""
    out: list[tuple[str, bool]] = []
    if not params.strip() or params.strip() == "void":
        return out
    from ..csource import split_top_level

    for piece in split_top_level(params, ","):
        piece = piece.strip()
        if not piece or piece == "...":
            continue
        pointer = "*" in piece or "[" in piece
        no_brackets = re.sub(r"\[[^\]]*\]", " ", piece)
        names = [w for w in WORD.findall(no_brackets)
                 if w not in PRIMITIVE_TYPES and w not in ("const", "struct", "union", "enum", "register")]
        if names:
            out.append((names[-1], pointer))
    return out


@_register("check_arguments", "Basic",
           "Insert no-op null checks for pointer parameters")
def _check_arguments(doc: SourceDoc, ctx: ApplyContext) -> None:
    index = DocIndex(doc)
    insertions: list[tuple[int, list[str]]] = []
    for span in find_functions(index):
        pointer_params = [name for name, is_ptr in _param_names(span.params) if is_ptr]
        if not pointer_params or not ctx.take():
            continue
        first_body = span.body_open + 1
        if first_body >= len(doc.lines):
            continue
        pad = indent_of(doc.lines[first_body]) or "    "
        checks = [f"{pad}if (!({name})) {{ }}" for name in pointer_params]
        insertions.append((first_body, checks))
        ctx.record("check_arguments", span.body_open,
                   f"null checks for {', '.join(pointer_params)} in {span.name}")
    for at, lines in sorted(insertions, reverse=True):
        doc.insert_lines(at, lines)


JUNK_FUNC_NAMES = ("calc_offset", "scan_window", "merge_totals", "fold_metric",
                   "blend_values", "trace_margin", "pack_span", "norm_delta")


def _junk_function(name: str, rng: random.Random) -> list[str]:
    a, b = rng.randint(2, 60), rng.randint(2, 60)
    shapes = [
        [
            f"static int {name}(int a, int b) {{",
            f"    int local_mark = {a};",
            f"    if (local_mark > {a + b}) {{",
            "        return a - b + local_mark;",
            "    }",
            "    return a + b;",
            "}",
        ],
        [
            f"static int {name}(int a, int b) {{",
            f"    long wide_sum = {a}L;",
            f"    for (int k = 0; k < 1 / 2; ++k) {{",
            "        wide_sum += a;",
            "    }",
            f"    return a + b + (int)(wide_sum - {a}L);",
            "}",
        ],
        [
            f"static int {name}(int a, int b) {{",
            f"    int shadow = a * 1 + {b};",
            f"    shadow = shadow - {b};",
            "    return shadow + b;",
            "}",
        ],
    ]
    return rng.choice(shapes)


def _first_function_line(doc: SourceDoc) -> int:
    index = DocIndex(doc)
    spans = find_functions(index)
    if spans:
        return min(s.header_start for s in spans)
    # fall back to after the last preprocessor directive
    last_pp = -1
    for i, line in enumerate(doc.lines):
        if line.lstrip().startswith("#"):
            last_pp = i
    return last_pp + 1


@_register("insert_junk_function", "Basic",
           "Insert an uncalled helper function")
def _insert_junk_function(doc: SourceDoc, ctx: ApplyContext) -> None:
    if not ctx.take():
        return
    taken = _taken_names(doc)
    name = fresh_name(ctx.rng.choice(JUNK_FUNC_NAMES), taken)
    body = _junk_function(name, ctx.rng)
    at = _first_function_line(doc)
    doc.insert_lines(at, body + [""])
    ctx.record("insert_junk_function", at, f"inserted {name}")


JUNK_VAR_NAMES = ("aux_count", "spare_total", "pad_width", "slack_units",
                  "fill_mark", "loop_guard", "score_bias", "step_gap")


@_register("insert_junk_loop", "Basic",
           "Insert loops whose bodies never execute")
def _insert_junk_loop(doc: SourceDoc, ctx: ApplyContext) -> None:
    index = DocIndex(doc)
    taken = _taken_names(doc)
    insertions = []
    for span in find_functions(index):
        if not ctx.take():
            continue
        first_body = span.body_open + 1
        if first_body >= len(doc.lines):
            continue
        pad = indent_of(doc.lines[first_body]) or "    "
        var = fresh_name(ctx.rng.choice(JUNK_VAR_NAMES), taken)
        taken.add(var)
        bound = ctx.rng.choice(("0", "1 / 2", "0 / 4"))
        insertions.append((first_body, [
            f"{pad}for (int {var} = 0; {var} < {bound}; ++{var}) {{",
            f"{pad}    {var} += {ctx.rng.randint(1, 9)};",
            f"{pad}}}",
        ]))
        ctx.record("insert_junk_loop", span.body_open, f"dead loop in {span.name}")
    for at, lines in sorted(insertions, reverse=True):
        doc.insert_lines(at, lines)


@_register("insert_variables", "Basic",
           "Insert local variables that are never used")
def _insert_variables(doc: SourceDoc, ctx: ApplyContext) -> None:
    index = DocIndex(doc)
    taken = _taken_names(doc)
    insertions = []
    for span in find_functions(index):
        if not ctx.take():
            continue
        first_body = span.body_open + 1
        if first_body >= len(doc.lines):
            continue
        pad = indent_of(doc.lines[first_body]) or "    "
        var = fresh_name(ctx.rng.choice(JUNK_VAR_NAMES), taken)
        taken.add(var)
        kind, value = ctx.rng.choice((("int", str(ctx.rng.randint(2, 99))),
                                      ("long", f"{ctx.rng.randint(100, 9999)}L"),
                                      ("int", str(ctx.rng.randint(100, 999)))))
        insertions.append((first_body, [f"{pad}{kind} {var} = {value};"]))
        ctx.record("insert_variables", span.body_open, f"unused {var} in {span.name}")
    for at, lines in sorted(insertions, reverse=True):
        doc.insert_lines(at, lines)


MOVE_DECL = re.compile(
    r"^(\s*)((?:(?:unsigned|signed|long|short)\s+)*[A-Za-z_][\w:]*)"
    r"\s*((?:\*\s*)*)\s*([A-Za-z_]\w*)\s*=\s*([^;]+);\s*$"
)


@_register("move_assignments", "Basic",
           "Split initialized declarations into declaration plus assignment")
def _move_assignments(doc: SourceDoc, ctx: ApplyContext) -> None:
    body_lines = _function_lines(doc)
    i = 0
    while i < len(doc.lines):
        view = doc.views()[i]
        m = MOVE_DECL.match(view)
        ok = (
            m is not None
            and i in body_lines
            and not doc.is_protected(i)
            and _simple_stmt(doc, i)
            and not _words(view) & {"const", "static", "constexpr", "auto"}
            and "&" not in view
        )
        if ok:
            base = m.group(2).split()[0]
            stars = m.group(3).strip()
            name = m.group(4)
            separated = bool(stars) or m.start(4) > m.end(2)
            typed = base in PRIMITIVE_TYPES or bool(stars)
            init_raw = doc.lines[i][m.start(5):m.end(5)]
            init_view = m.group(5)
            if "," in init_view or "{" in init_view:
                typed = False
            if name in identifiers(init_view):
                typed = False
            if separated and typed and ctx.take():
                pad = m.group(1)
                decl_type = doc.lines[i][m.start(2):m.end(3)].rstrip()
                doc.replace_line(i, [
                    f"{pad}{decl_type} {name};".replace("  ", " "),
                    f"{pad}{name} = {init_raw};",
                ])
                ctx.record("move_assignments", i, f"split declaration of {name}")
                body_lines = _function_lines(doc)
                i += 2
                continue
        i += 1


@_register("statement_wrapping", "Basic",
           "Wrap statements in an always-true if or a single-pass for")
def _statement_wrapping(doc: SourceDoc, ctx: ApplyContext) -> None:
    body_lines = _function_lines(doc)
    taken = _taken_names(doc)
    i = 0
    while i < len(doc.lines):
        view = doc.views()[i]
        if (
            i in body_lines
            and not doc.is_protected(i)
            and _simple_stmt(doc, i)
            and not _is_declaration(view)
            and ctx.take()
        ):
            raw = doc.lines[i]
            pad = indent_of(raw)
            use_for = ctx.rng.random() < 0.5
            if use_for and not (_words(view) & {"break", "continue", "return"}):
                var = fresh_name("wrap_pass", taken)
                taken.add(var)
                doc.replace_line(i, [
                    f"{pad}for (int {var} = 0; {var} < 1; ++{var}) {{",
                    f"{pad}    {raw.strip()}",
                    f"{pad}}}",
                ])
                ctx.record("statement_wrapping", i, "wrapped in single-pass for")
            else:
                doc.replace_line(i, [
                    f"{pad}if (1) {{",
                    f"{pad}    {raw.strip()}",
                    f"{pad}}}",
                ])
                ctx.record("statement_wrapping", i, "wrapped in if (1)")
            body_lines = _function_lines(doc)
            i += 3
            continue
        i += 1


RENAME_FUNC_POOL = ("process_data", "handle_buffer", "run_stage", "perform_check",
                    "execute_step", "compute_block", "apply_transform",
                    "dispatch_call", "evaluate_entry", "collect_output")


def _rename_identifier(doc: SourceDoc, old: str, new: str,
                       line_range: tuple[int, int] | None = None) -> int:
    """Consistently rename ``old`` outside literals, members, and protected
    lines. Returns the number of replaced occurrences."""
    pattern = re.compile(rf"\b{re.escape(old)}\b")
    first, last = line_range if line_range else (0, len(doc.lines))
    replaced = 0
    for i in range(first, min(last, len(doc.lines))):
        if doc.is_protected(i):
            continue
        view = doc.views()[i]
        raw = doc.lines[i]
        spans = []
        for m in pattern.finditer(view):
            before = view[: m.start()].rstrip()
            if before.endswith(".") or before.endswith("->") or before.endswith("::"):
                continue
            spans.append((m.start(), m.end()))
        if not spans:
            continue
        out = []
        prev = 0
        for start, stop in spans:
            out.append(raw[prev:start])
            out.append(new)
            prev = stop
        out.append(raw[prev:])
        doc.replace_line(i, ["".join(out)])
        replaced += len(spans)
    return replaced


def _appears_on_protected(doc: SourceDoc, name: str) -> bool:
    pattern = re.compile(rf"\b{re.escape(name)}\b")
    for i in range(len(doc.lines)):
        if doc.is_protected(i) and pattern.search(doc.views()[i]):
            return True
    return False


@_register("function_rename", "Basic",
           "Rename locally defined functions consistently at every site")
def _function_rename(doc: SourceDoc, ctx: ApplyContext) -> None:
    index = DocIndex(doc)
    spans = find_functions(index)
    taken = _taken_names(doc)
    pool = list(RENAME_FUNC_POOL)
    ctx.rng.shuffle(pool)
    pool_iter = iter(pool)
    for span in spans:
        name = span.name
        if name in ("main",) or "::" in name:
            continue
        if _appears_on_protected(doc, name) or not ctx.take():
            continue
        try:
            candidate = next(pool_iter)
        except StopIteration:
            candidate = "renamed_routine"
        new = fresh_name(candidate, taken)
        taken.add(new)
        count = _rename_identifier(doc, name, new)
        if count:
            ctx.record("function_rename", span.header_start, f"{name} -> {new}")


VAR_SUFFIXES = ("_block", "_buf", "_val", "_item", "_ref", "_slot")

LOCAL_DECL = re.compile(
    r"\b((?:unsigned|signed|long|short|int|char|float|double|bool|size_t|wchar_t|"
    r"int8_t|int16_t|int32_t|int64_t|uint8_t|uint16_t|uint32_t|uint64_t)\b[\w\s]*?)"
    r"((?:\*\s*)*)([A-Za-z_]\w*)\s*(=|;|\[|,|\))"
)


@_register("variables_rename", "Basic",
           "Rename function-local variables consistently within their scope")
def _variables_rename(doc: SourceDoc, ctx: ApplyContext) -> None:
    index = DocIndex(doc)
    spans = find_functions(index)
    function_names = {s.name for s in spans}
    for span in spans:
        local_names: list[str] = []
        for name, _ptr in _param_names(span.params):
            local_names.append(name)
        for i in range(span.body_open + 1, span.body_close):
            view = doc.views()[i]
            for m in LOCAL_DECL.finditer(view):
                name = m.group(3)
                if name not in PRIMITIVE_TYPES and name not in local_names:
                    local_names.append(name)
        taken = _taken_names(doc)
        outside = "\n".join(
            doc.views()[i]
            for i in range(len(doc.lines))
            if not span.header_start <= i <= span.body_close
        )
        for name in local_names:
            if name in function_names or _appears_on_protected(doc, name):
                continue
            if re.search(rf"\b{re.escape(name)}\b", outside):
                continue  # same identifier used elsewhere; leave it alone
            if not ctx.take():
                continue
            new = fresh_name(name + ctx.rng.choice(VAR_SUFFIXES), taken)
            taken.add(new)
            count = _rename_identifier(
                doc, name, new, (span.header_start, span.body_close + 1)
            )
            if count:
                ctx.record("variables_rename", span.header_start, f"{name} -> {new}")
        # spans computed on the original doc stay valid: renames keep line counts


# ---------------------------------------------------------------------------
# Condition methods


def _block_close_line(index: DocIndex, site: ControlSite) -> tuple[int, int] | None:
    """(line, col) of the '}' closing the braced body of a control site."""
    after = index.to_offset(site.line, site.cond_close) + 1
    after = index.skip_space(after)
    if after >= len(index.joined) or index.joined[after] != "{":
        return None
    close = match_paren(index.joined, after, "{", "}")
    if close < 0:
        return None
    return index.to_line_col(close)


def _followed_by_else(index: DocIndex, line: int, col: int) -> bool:
    offset = index.skip_space(index.to_offset(line, col) + 1)
    return index.joined.startswith("else", offset)


@_register("add_condition", "Condition",
           "Complete if statements with an explicit empty else branch")
def _add_condition(doc: SourceDoc, ctx: ApplyContext) -> None:
    while True:
        index = DocIndex(doc)
        changed = False
        for site in control_sites(index, ("if",)):
            close = _block_close_line(index, site)
            if close is None:
                continue
            close_line, close_col = close
            if _followed_by_else(index, close_line, close_col):
                continue
            if doc.is_protected(close_line) or not ctx.take():
                continue
            raw = doc.lines[close_line]
            if raw[close_col + 1:].strip():
                continue  # something trails the brace on this line; skip
            doc.replace_line(close_line, [raw[: close_col + 1] + " else { }"])
            ctx.record("add_condition", site.line, "added empty else branch")
            changed = True
            break
        if not changed:
            return


@_register("div_if_else", "Condition",
           "Turn else-if chains into explicitly nested else blocks")
def _div_if_else(doc: SourceDoc, ctx: ApplyContext) -> None:
    for _ in range(100):
        index = DocIndex(doc)
        joined = index.joined
        match = None
        for m in re.finditer(r"\belse(\s+)if\b", joined):
            line, col = index.to_line_col(m.start())
            if not doc.is_protected(line) and ctx.take():
                match = m
                break
        if match is None:
            return
        if_off = match.start() + len("else") + len(match.group(1))
        end_off = index.statement_end(if_off)
        end_line, end_col = index.to_line_col(end_off)
        start_line, start_col = index.to_line_col(match.start())
        if doc.is_protected(end_line):
            return
        raw = doc.lines[start_line]
        # `else if` may not cross lines here because \s+ could include \n;
        # handle only the same-line form.
        if "\n" in match.group(1):
            return
        else_end = start_col + 4
        new_first = raw[:else_end] + " {" + raw[else_end:]
        doc.replace_line(start_line, [new_first])
        # The insertion shifted columns on start_line by 2; the end position
        # moves only if it sits on the same line.
        if end_line == start_line:
            end_col += 2
        pad = indent_of(new_first)
        end_raw = doc.lines[end_line]
        if end_raw[end_col + 1:].strip():
            doc.replace_line(end_line, [end_raw[: end_col + 1] + " }" + end_raw[end_col + 1:]])
        else:
            doc.insert_lines(end_line + 1, [f"{pad}}}"])
        ctx.record("div_if_else", start_line, "nested else-if under else block")


def _top_level_split(cond: str, op: str) -> list[str] | None:
    from ..csource import split_top_level

    parts = split_top_level(cond, op)
    return parts if len(parts) > 1 else None


@_register("div_composed_if", "Condition",
           "Split conjunctive if conditions into nested ifs")
def _div_composed_if(doc: SourceDoc, ctx: ApplyContext) -> None:
    while True:
        index = DocIndex(doc)
        done = True
        for site in control_sites(index, ("if",)):
            if doc.is_protected(site.line):
                continue
            cond = site.condition
            if "||" in cond or "?" in cond:
                continue
            parts = _top_level_split(cond, "&&")
            if not parts:
                continue
            close = _block_close_line(index, site)
            if close is None:
                continue
            close_line, close_col = close
            if close_line == site.line:
                continue
            if _followed_by_else(index, close_line, close_col):
                continue
            if doc.is_protected(close_line) or doc.lines[close_line][close_col + 1:].strip():
                continue
            if doc.lines[site.line][: site.kw_col].strip() or not ctx.take():
                continue
            raw = doc.lines[site.line]
            pad = indent_of(raw)
            head = raw[: site.kw_col]
            raw_first = doc.lines[site.line][site.cond_open + 1 : site.cond_close]
            # Use raw text offsets for the condition pieces (views blank literals).
            split_at = len(parts[0])
            raw_a = raw_first[:split_at].strip()
            raw_b = raw_first[split_at + 2 :].strip()
            doc.replace_line(site.line, [
                f"{head}if ({raw_a}) {{",
                f"{pad}    if ({raw_b}) {{",
            ])
            close_raw = doc.lines[close_line + 1]
            doc.replace_line(close_line + 1, [
                close_raw[: close_col + 1] ,
                f"{pad}}}",
            ])
            ctx.record("div_composed_if", site.line, f"split '&&' condition")
            done = False
            break
        if done:
            return


@_register("if_continue_to_if_else", "Condition",
           "Wrap the remainder of a loop body in else after an if-continue")
def _if_continue_to_if_else(doc: SourceDoc, ctx: ApplyContext) -> None:
    for _ in range(50):  # offsets go stale after an edit: one site per pass
        index = DocIndex(doc)
        joined = index.joined
        depths = index.depth_map()
        edited = False
        for site in control_sites(index, ("if",)):
            after_off = index.to_offset(site.line, site.cond_close) + 1
            after = index.skip_space(after_off)
            single = re.match(r"continue\s*;", joined[after:])
            braced = None
            if joined[after:after + 1] == "{":
                close = match_paren(joined, after, "{", "}")
                if close > 0 and re.fullmatch(r"\s*continue\s*;\s*", joined[after + 1:close]):
                    braced = close
            if not single and braced is None:
                continue
            stmt_end = after + single.end() - 1 if single else braced
            follower = index.skip_space(stmt_end + 1)
            if joined.startswith("else", follower):
                continue  # already wrapped
            # Find the enclosing block opener; it must be a loop header.
            if_off = index.to_offset(site.line, site.kw_col)
            target_depth = depths[if_off] - 1
            opener = -1
            for off in range(if_off - 1, -1, -1):
                if joined[off] == "{" and depths[off] == target_depth:
                    opener = off
                    break
            if opener < 0:
                continue
            opener_line, _ = index.to_line_col(opener)
            opener_view = index.views[opener_line]
            if not re.search(r"\b(for|while|do)\b", opener_view):
                continue
            loop_close = match_paren(joined, opener, "{", "}")
            if loop_close < 0:
                continue
            rest = joined[stmt_end + 1 : loop_close]
            if not rest.strip():
                continue
            if re.search(r"\b(case|default)\s*:", rest):
                continue
            end_line, end_col = index.to_line_col(stmt_end)
            close_line, close_col = index.to_line_col(loop_close)
            if end_line == close_line:
                continue
            if doc.is_protected(end_line) or doc.is_protected(close_line):
                continue
            if doc.lines[end_line][end_col + 1 :].strip():
                continue
            if doc.lines[close_line][:close_col].strip():
                continue
            if not ctx.take():
                continue
            pad = indent_of(doc.lines[site.line])
            doc.replace_line(end_line, [doc.lines[end_line][: end_col + 1] + " else {"])
            doc.insert_lines(close_line, [f"{pad}}}"])
            ctx.record("if_continue_to_if_else", site.line, "wrapped loop remainder in else")
            edited = True
            break
        if not edited:
            return


IF_EQ_LITERAL = re.compile(r"^\s*([A-Za-z_]\w*)\s*==\s*([-+]?\d+[uUlL]{0,3})\s*$")


@_register("if_to_switch", "Condition",
           "Convert equality if statements into switch dispatch")
def _if_to_switch(doc: SourceDoc, ctx: ApplyContext) -> None:
    while True:
        index = DocIndex(doc)
        done = True
        for site in control_sites(index, ("if",)):
            if doc.is_protected(site.line):
                continue
            m = IF_EQ_LITERAL.match(site.condition)
            if not m:
                continue
            close = _block_close_line(index, site)
            if close is None:
                continue
            close_line, close_col = close
            if close_line == site.line:
                continue
            if _followed_by_else(index, close_line, close_col):
                continue
            body_view = "\n".join(index.views[site.line + 1 : close_line])
            if re.search(r"\b(break|case|default|goto|switch)\b", body_view):
                continue
            if doc.is_protected(close_line) or doc.lines[close_line][close_col + 1:].strip():
                continue
            if doc.lines[site.line][: site.kw_col].strip() or not ctx.take():
                continue
            variable, literal = m.group(1), m.group(2)
            pad = indent_of(doc.lines[site.line])
            doc.replace_line(site.line, [
                f"{pad}switch ({variable}) {{",
                f"{pad}case {literal}: {{",
            ])
            close_raw = doc.lines[close_line + 1]
            doc.replace_line(close_line + 1, [
                f"{pad}}} break;",
                f"{pad}default: break;",
                close_raw,
            ])
            ctx.record("if_to_switch", site.line, f"if ({variable} == {literal}) -> switch")
            done = False
            break
        if done:
            return


CASE_LABEL = re.compile(r"^\s*case\s+([^:]+):\s*(\{)?\s*$")
DEFAULT_LABEL = re.compile(r"^\s*default\s*:\s*(\{)?\s*$")
SIMPLE_EXPR = re.compile(r"^[\w\.\[\]\->\s]+$")


@_register("switch_to_if", "Condition",
           "Convert simple break-terminated switches into if/else chains")
def _switch_to_if(doc: SourceDoc, ctx: ApplyContext) -> None:
    while True:
        index = DocIndex(doc)
        done = True
        for site in control_sites(index, ("switch",)):
            if doc.is_protected(site.line):
                continue
            raw_expr = doc.lines[site.line][site.cond_open + 1 : site.cond_close]
            if not SIMPLE_EXPR.match(raw_expr):
                continue
            close = _block_close_line(index, site)
            if close is None:
                continue
            close_line, close_col = close
            if doc.is_protected(close_line) or doc.lines[close_line][close_col + 1:].strip():
                continue
            open_off = index.skip_space(index.to_offset(site.line, site.cond_close) + 1)
            open_line, _ = index.to_line_col(open_off)
            if open_line != site.line:
                continue
            # Collect label lines directly inside the switch body. Labels are
            # located on the code view but sliced from the raw line so char
            # literals survive.
            depths = index.depth_map()
            labels: list[tuple[int, str | None, bool]] = []
            level_ok = True
            body_depth = depths[open_off] + 1
            for i in range(site.line + 1, close_line):
                view = index.views[i]
                line_off = index.to_offset(i, len(view) - len(view.lstrip()))
                case_m = CASE_LABEL.match(view)
                default_m = DEFAULT_LABEL.match(view)
                if case_m or default_m:
                    if depths[line_off] != body_depth:
                        level_ok = False
                        break
                    if case_m:
                        raw_label = doc.lines[i][case_m.start(1):case_m.end(1)].strip()
                        labels.append((i, raw_label, bool(case_m.group(2))))
                    else:
                        labels.append((i, None, bool(default_m.group(1))))
            if not level_ok or not labels:
                continue
            if any(lbl is None for _, lbl, _ in labels[:-1]):
                continue  # default must come last for a clean chain
            if any(index.views[i].strip() for i in range(site.line + 1, labels[0][0])):
                continue  # statements before the first label are not coverable
            # Verify each group is break- or return-terminated with no inner
            # break/continue/goto, then build the replacement block.
            groups: list[tuple[str | None, list[str]]] = []
            fallthrough = False
            for gi, (label_line, label, braced) in enumerate(labels):
                end = labels[gi + 1][0] if gi + 1 < len(labels) else close_line
                body = list(range(label_line + 1, end))
                if braced:
                    # drop the group's own closing brace line
                    closers = [i for i in body if index.views[i].strip() == "}"]
                    tail = [i for i in body if index.views[i].strip()]
                    if not closers or not tail or closers[-1] != tail[-1]:
                        fallthrough = True
                        break
                    body = [i for i in body if i != closers[-1]]
                views = [index.views[i] for i in body]
                joined_body = "\n".join(views)
                if re.search(r"\b(goto|switch|case|default)\b", joined_body):
                    fallthrough = True
                    break
                breaks = [i for i in body if re.fullmatch(r"\s*break\s*;\s*", index.views[i])]
                last_code = [i for i in body if index.views[i].strip()]
                last_line = last_code[-1] if last_code else -1
                return_terminated = last_line >= 0 and re.match(r"\s*return\b", index.views[last_line])
                terminated = bool(breaks) or bool(return_terminated)
                if len(breaks) > 1 or (breaks and breaks[-1] != last_line):
                    fallthrough = True
                    break
                if re.search(r"\bcontinue\b", joined_body):
                    fallthrough = True
                    break
                is_last = gi + 1 == len(labels)
                if not terminated and not is_last:
                    fallthrough = True
                    break
                keep = [doc.lines[i] for i in body if i not in breaks]
                groups.append((label, keep))
            if fallthrough or not ctx.take():
                continue
            pad = indent_of(doc.lines[site.line])
            out: list[str] = []
            first = True
            for label, body_lines in groups:
                if label is None:
                    out.append(f"{pad}}} else {{" if not first else f"{pad}{{")
                else:
                    joiner = "if" if first else "} else if"
                    out.append(f"{pad}{joiner} (({raw_expr}) == ({label})) {{")
                out.extend(body_lines)
                first = False
            out.append(f"{pad}}}")
            try:
                doc.replace_span(site.line, close_line + 1, out)
            except SiteBlocked:
                continue
            ctx.record("switch_to_if", site.line, f"switch ({raw_expr.strip()}) -> if chain")
            done = False
            break
        if done:
            return


# ---------------------------------------------------------------------------
# Loop methods


WHILE_LT_LITERAL = re.compile(r"^\s*([A-Za-z_]\w*)\s*<\s*(\d+)\s*$")
FOR_HEADER = re.compile(
    r"^\s*(?:(?P<type>(?:unsigned\s+|signed\s+)?[A-Za-z_]\w*)\s+)?(?P<var>[A-Za-z_]\w*)\s*=\s*(?P<start>\d+)\s*$"
)


def _loop_body(index: DocIndex, site: ControlSite) -> tuple[int, int] | None:
    """(body_first_line, close_line) for a braced loop with its own lines."""
    close = _block_close_line(index, site)
    if close is None:
        return None
    close_line, close_col = close
    if close_line <= site.line:
        return None
    if index.doc.lines[close_line][:close_col].strip():
        return None
    if index.doc.lines[close_line][close_col + 1:].strip():
        return None
    return site.line + 1, close_line


@_register("div_loop", "Loop",
           "Split a literal-bounded loop into two sequential loops")
def _div_loop(doc: SourceDoc, ctx: ApplyContext) -> None:
    index = DocIndex(doc)
    applied_spans: list[tuple[int, int]] = []
    sites = []
    for site in control_sites(index, ("while", "for")):
        body = _loop_body(index, site)
        if body is None:
            continue
        first, close_line = body
        body_view = "\n".join(index.views[first:close_line])
        if re.search(r"\b(break|goto)\b", body_view):
            continue
        sites.append((site, first, close_line))
    for site, first, close_line in reversed(sites):  # bottom-up keeps lines valid
        if any(s < close_line and e > site.line for s, e in applied_spans):
            continue  # overlaps an already-rewritten region
        body_raw = doc.lines[first:close_line]
        pad = indent_of(doc.lines[site.line])
        close_raw = doc.lines[close_line]
        head_raw = doc.lines[site.line]
        if site.keyword == "while":
            m = WHILE_LT_LITERAL.match(site.condition)
            if not m or int(m.group(2)) < 2:
                continue
            var, bound = m.group(1), m.group(2)
            if re.search(r"\bwhile\b", head_raw[: site.kw_col]):
                continue
            if not ctx.take():
                continue
            new = (
                [head_raw[: site.kw_col] + f"while ({var} < {bound} / 2) {{"]
                + body_raw
                + [close_raw]
                + [pad + f"while ({var} < {bound}) {{"]
                + body_raw
                + [close_raw]
            )
            try:
                doc.replace_span(site.line, close_line + 1, new)
            except SiteBlocked:
                continue
            ctx.record("div_loop", site.line, f"split while bound {bound}")
            applied_spans.append((site.line, close_line))
        else:
            parts = site.condition.split(";")
            if len(parts) != 3:
                continue
            init, cond, step = (p.strip() for p in parts)
            m_init = FOR_HEADER.match(init)
            m_cond = WHILE_LT_LITERAL.match(cond)
            if not m_init or not m_cond or int(m_cond.group(2)) < 2:
                continue
            var, bound = m_cond.group(1), m_cond.group(2)
            if m_init.group("var") != var or m_init.group("start") != "0":
                continue
            if step not in (f"{var}++", f"++{var}", f"{var} += 1", f"{var}+=1"):
                continue
            if not ctx.take():
                continue
            decl_type = m_init.group("type")
            lead = head_raw[: site.kw_col]
            if decl_type and decl_type not in ("unsigned", "signed") and decl_type in PRIMITIVE_TYPES | {"size_t"}:
                new = (
                    [lead + "{", pad + f"    {decl_type} {var};"]
                    + [pad + f"    for ({var} = 0; {var} < {bound} / 2; {step}) {{"]
                    + body_raw
                    + [close_raw]
                    + [pad + f"    for (; {var} < {bound}; {step}) {{"]
                    + body_raw
                    + [close_raw, pad + "}"]
                )
            elif decl_type is None:
                new = (
                    [lead + f"for ({var} = 0; {var} < {bound} / 2; {step}) {{"]
                    + body_raw
                    + [close_raw]
                    + [pad + f"for (; {var} < {bound}; {step}) {{"]
                    + body_raw
                    + [close_raw]
                )
            else:
                continue
            try:
                doc.replace_span(site.line, close_line + 1, new)
            except SiteBlocked:
                continue
            ctx.record("div_loop", site.line, f"split for bound {bound}")
            applied_spans.append((site.line, close_line))


@_register("for_while_transformation", "Loop",
           "Rewrite for loops as while loops and vice versa")
def _for_while_transformation(doc: SourceDoc, ctx: ApplyContext) -> None:
    index = DocIndex(doc)
    applied_spans: list[tuple[int, int]] = []
    sites = []
    for site in control_sites(index, ("while", "for")):
        body = _loop_body(index, site)
        if body is None:
            continue
        sites.append((site, body[0], body[1]))
    for site, first, close_line in reversed(sites):
        if any(s < close_line and e > site.line for s, e in applied_spans):
            continue
        head_raw = doc.lines[site.line]
        pad = indent_of(head_raw)
        close_raw = doc.lines[close_line]
        if site.keyword == "while":
            if re.search(r"}\s*$", head_raw[: site.kw_col]):
                continue  # do-while tail
            if not ctx.take():
                continue
            raw_cond = head_raw[site.cond_open + 1 : site.cond_close]
            new_head = (
                head_raw[: site.kw_col]
                + f"for (; {raw_cond}; )"
                + head_raw[site.cond_close + 1 :]
            )
            try:
                doc.replace_line(site.line, [new_head])
            except SiteBlocked:
                continue
            ctx.record("for_while_transformation", site.line, "while -> for")
            applied_spans.append((site.line, close_line))
        else:
            body_view = "\n".join(index.views[first:close_line])
            if re.search(r"\bcontinue\b", body_view):
                continue
            semis = [k for k, ch in enumerate(site.condition) if ch == ";"]
            if len(semis) != 2:
                continue
            raw_cond_full = doc.lines[site.line][site.cond_open + 1 : site.cond_close]
            init = raw_cond_full[: semis[0]].strip()
            cond = raw_cond_full[semis[0] + 1 : semis[1]].strip()
            step = raw_cond_full[semis[1] + 1 :].strip()
            if not ctx.take():
                continue
            cond = cond or "1"
            body_raw = doc.lines[first:close_line]
            inner_pad = indent_of(body_raw[0]) if body_raw else pad + "    "
            new = [head_raw[: site.kw_col] + "{"]
            if init:
                new.append(pad + f"    {init};")
            new.append(pad + f"    while ({cond}) {{")
            new.extend(body_raw)
            if step:
                new.append(inner_pad + f"{step};")
            new.append(close_raw)
            new.append(pad + "}")
            try:
                doc.replace_span(site.line, close_line + 1, new)
            except SiteBlocked:
                continue
            ctx.record("for_while_transformation", site.line, "for -> while")
            applied_spans.append((site.line, close_line))


# ---------------------------------------------------------------------------
# Logic methods


COMPARISON = re.compile(r"^\s*([^()&|!=<>?]+?)\s*(==|!=|<=|>=|<|>)\s*([^()&|!=<>?]+?)\s*$")
MIRROR = {"==": "==", "!=": "!=", "<": ">", "<=": ">=", ">": "<", ">=": "<="}
NEGATE = {"==": "!=", "!=": "=="}


def _pure_operand(text: str) -> bool:
    return "(" not in text and "++" not in text and "--" not in text and "=" not in text


def _rewrite_condition(doc: SourceDoc, ctx: ApplyContext, keywords, rewrite, method_id):
    rewritten: set[tuple[int, str]] = set()
    while True:
        index = DocIndex(doc)
        done = True
        for site in control_sites(index, keywords):
            if doc.is_protected(site.line) or (site.line, site.condition) in rewritten:
                continue
            raw_cond = doc.lines[site.line][site.cond_open + 1 : site.cond_close]
            if raw_cond != site.condition:
                continue  # condition contains literals; stay conservative
            new_cond = rewrite(site.condition)
            if new_cond is None or not ctx.take():
                continue
            raw = doc.lines[site.line]
            doc.replace_line(site.line, [
                raw[: site.cond_open + 1] + new_cond + raw[site.cond_close :]
            ])
            rewritten.add((site.line, new_cond))
            ctx.record(method_id, site.line, f"{site.condition.strip()} -> {new_cond}")
            done = False
            break
        if done:
            return


@_register("equi_boolean_logic", "Logic",
           "Replace comparisons with equivalent negated forms")
def _equi_boolean_logic(doc: SourceDoc, ctx: ApplyContext) -> None:
    def rewrite(cond: str) -> str | None:
        m = COMPARISON.match(cond)
        if m and m.group(2) in NEGATE and _pure_operand(m.group(1)) and _pure_operand(m.group(3)):
            return f"!({m.group(1).strip()} {NEGATE[m.group(2)]} {m.group(3).strip()})"
        if re.fullmatch(r"\s*[A-Za-z_]\w*\s*", cond):
            return f"!!({cond.strip()})"
        return None

    _rewrite_condition(doc, ctx, ("if", "while"), rewrite, "equi_boolean_logic")


@_register("swap_boolean_expression", "Logic",
           "Mirror the operands of pure comparisons")
def _swap_boolean_expression(doc: SourceDoc, ctx: ApplyContext) -> None:
    def rewrite(cond: str) -> str | None:
        m = COMPARISON.match(cond)
        if not m:
            return None
        left, op, right = m.group(1).strip(), m.group(2), m.group(3).strip()
        if not (_pure_operand(left) and _pure_operand(right)):
            return None
        return f"{right} {MIRROR[op]} {left}"

    _rewrite_condition(doc, ctx, ("if", "while"), rewrite, "swap_boolean_expression")


# ---------------------------------------------------------------------------
# Decomposition methods


COND_FUNC_NAMES = ("bound_check", "range_gate", "limit_probe", "state_test", "flag_scan")
INT_CONST_COND = re.compile(r"^\s*(\d+)\s*$")
VAR_CMP_LITERAL = re.compile(r"^\s*([A-Za-z_]\w*)\s*(==|!=|<=|>=|<|>)\s*(\d+)\s*$")


def _declared_type(doc: SourceDoc, span, name: str) -> str | None:
    """Primitive type of a local or parameter, if it can be read off a declaration."""
    pattern = re.compile(
        r"\b((?:unsigned\s+|signed\s+)?(?:long\s+long|long|int|short|char|size_t|bool|"
        r"int8_t|int16_t|int32_t|int64_t|uint8_t|uint16_t|uint32_t|uint64_t))"
        rf"\s+{re.escape(name)}\b\s*[=;,)\[]"
    )
    for i in range(span.header_start, span.body_close + 1):
        m = pattern.search(doc.views()[i])
        if m:
            return m.group(1)
    return None


@_register("extract_if", "Decomposition",
           "Hoist if/while conditions into helper predicate functions")
def _extract_if(doc: SourceDoc, ctx: ApplyContext) -> None:
    helpers: list[str] = []
    taken = _taken_names(doc)
    index = DocIndex(doc)
    spans = find_functions(index)
    for site in control_sites(index, ("if", "while")):
        if doc.is_protected(site.line):
            continue
        raw_cond = doc.lines[site.line][site.cond_open + 1 : site.cond_close]
        if raw_cond != site.condition:
            continue
        enclosing = next((s for s in spans if s.body_open < site.line < s.body_close), None)
        const = INT_CONST_COND.match(site.condition)
        cmp = VAR_CMP_LITERAL.match(site.condition)
        new_cond = None
        if const and ctx.take():
            name = fresh_name(ctx.rng.choice(COND_FUNC_NAMES), taken)
            taken.add(name)
            helpers.extend([
                f"static int {name}(void) {{",
                f"    return {const.group(1)};",
                "}",
                "",
            ])
            new_cond = f"{name}()"
        elif cmp and enclosing is not None:
            var_type = _declared_type(doc, enclosing, cmp.group(1))
            if var_type and ctx.take():
                name = fresh_name(ctx.rng.choice(COND_FUNC_NAMES), taken)
                taken.add(name)
                helpers.extend([
                    f"static int {name}({var_type} probe) {{",
                    f"    return probe {cmp.group(2)} {cmp.group(3)};",
                    "}",
                    "",
                ])
                new_cond = f"{name}({cmp.group(1)})"
        if new_cond is None:
            continue
        raw = doc.lines[site.line]
        doc.replace_line(site.line, [
            raw[: site.cond_open + 1] + new_cond + raw[site.cond_close :]
        ])
        ctx.record("extract_if", site.line, f"({site.condition.strip()}) -> {new_cond}")
    if helpers:
        doc.insert_lines(_first_function_line(doc), helpers)


IDENT_FUNC_NAMES = ("carry_value", "bridge_sum", "relay_total", "pass_through")


@_register("extract_arithmetic", "Decomposition",
           "Route integer literals through identity helper functions")
def _extract_arithmetic(doc: SourceDoc, ctx: ApplyContext) -> None:
    body_lines = _function_lines(doc)
    taken = _taken_names(doc)
    helper = fresh_name(ctx.rng.choice(IDENT_FUNC_NAMES), taken)
    offset = ctx.rng.randint(2, 9)
    replaced = 0
    for i in sorted(body_lines):
        if doc.is_protected(i) or i >= len(doc.lines):
            continue
        view = doc.views()[i]
        stripped = view.strip()
        if (
            doc.lines[i].lstrip().startswith("#")
            or re.match(r"^\s*(case|default)\b", view)
            or _words(view) & {"static", "constexpr", "enum", "const"}
        ):
            continue
        raw = doc.lines[i]
        out: list[str] = []
        prev = 0
        changed = False
        for m in INT_LITERAL_RE.finditer(view):
            before = view[: m.start()].rstrip()
            prev_ch = before[-1] if before else ""
            new_array_extent = prev_ch == "[" and "new" in _words(before)
            allowed = (
                prev_ch in "=(,<>+-*%;&|"
                or before.endswith("return")
                or new_array_extent
            )
            if int(m.group(1)) == 0:
                continue  # zero stays literal: it may be a null pointer constant
            if not allowed or not ctx.take():
                continue
            literal = raw[m.start() : m.end()]
            out.append(raw[prev : m.start()])
            out.append(f"{helper}({literal}, {offset}, {offset})")
            prev = m.end()
            changed = True
            replaced += 1
        if changed:
            out.append(raw[prev:])
            doc.replace_line(i, ["".join(out)])
            ctx.record("extract_arithmetic", i, f"wrapped literals via {helper}")
            body_lines = _function_lines(doc)
    if replaced:
        doc.insert_lines(_first_function_line(doc), [
            f"static long {helper}(long base, long lift, long drop) {{",
            "    return base + lift - drop;",
            "}",
            "",
        ])


# ---------------------------------------------------------------------------
# Arithmetic methods


@_register("equi_arithmetic_expression", "Arithmetic",
           "Rewrite integer literals as equivalent constant expressions")
def _equi_arithmetic_expression(doc: SourceDoc, ctx: ApplyContext) -> None:
    for i in range(len(doc.lines)):
        if doc.is_protected(i) or doc.lines[i].lstrip().startswith("#"):
            continue
        view = doc.views()[i]
        raw = doc.lines[i]
        out: list[str] = []
        prev = 0
        changed = False
        for m in INT_LITERAL_RE.finditer(view):
            value = int(m.group(1))
            suffix = m.group(2)
            if value == 0:
                continue  # zero stays literal: it may be a null pointer constant
            if value > 1 << 20 or not ctx.take():
                continue
            k = ctx.rng.randint(1, 9)
            forms = [
                f"({m.group(1)}{suffix} + {k} - {k})",
                f"({m.group(1)}{suffix} * 1)",
                f"(0 + {m.group(1)}{suffix})",
            ]
            if value % 2 == 0:
                forms.append(f"({value // 2}{suffix} * 2)")
            replacement = ctx.rng.choice(forms)
            out.append(raw[prev : m.start()])
            out.append(replacement)
            prev = m.end()
            changed = True
        if changed:
            out.append(raw[prev:])
            doc.replace_line(i, ["".join(out)])
            ctx.record("equi_arithmetic_expression", i, "rewrote integer literals")


SUM_ASSIGN = re.compile(
    r"^(\s*)((?:(?:unsigned|signed|long|short)\s+)*[A-Za-z_]\w*\s+)?([A-Za-z_]\w*)\s*=\s*([^;]+);\s*$"
)


def _split_sum_terms(expr: str) -> list[tuple[str, str]] | None:
    """[(op, term), ...] with op of the first term '+'; None if not a pure sum."""
    if re.search(r"[(){}\[\]?:]|\+\+|--|[*/%]|<<|>>|[&|^~]|==|!=|<=|>=|<|>", expr):
        return None
    terms: list[tuple[str, str]] = []
    current: list[str] = []
    op = "+"
    i = 0
    while i < len(expr):
        ch = expr[i]
        if ch in "+-":
            prev = expr[:i].rstrip()
            if prev and (prev[-1].isalnum() or prev[-1] in "_."):
                terms.append((op, "".join(current).strip()))
                current = []
                op = ch
                i += 1
                continue
        current.append(ch)
        i += 1
    terms.append((op, "".join(current).strip()))
    if len(terms) < 3 or any(not t for _, t in terms):
        return None
    return terms


@_register("expression_div", "Arithmetic",
           "Split long additive expressions into accumulation steps")
def _expression_div(doc: SourceDoc, ctx: ApplyContext) -> None:
    body_lines = _function_lines(doc)
    i = 0
    while i < len(doc.lines):
        ok = i in body_lines and not doc.is_protected(i) and _simple_stmt(doc, i)
        if ok:
            view = doc.views()[i]
            raw = doc.lines[i]
            m = SUM_ASSIGN.match(view)
            if m is not None and view == raw:
                # literal-free line (views equal raw), so offsets are safe
                decl, lhs, rhs = m.group(2), m.group(3), m.group(4)
                terms = _split_sum_terms(rhs)
                eligible = (
                    terms is not None
                    and lhs not in identifiers(rhs)
                    and not (decl and _words(decl) & {"const", "static", "constexpr"})
                )
                if eligible and ctx.take():
                    pad = m.group(1)
                    first_op, first_term = terms[0]
                    second_op, second_term = terms[1]
                    head = f"{pad}{decl or ''}{lhs} = {'-' if first_op == '-' else ''}{first_term} {second_op} {second_term};"
                    tail = [
                        f"{pad}{lhs} = {lhs} {op} {term};"
                        for op, term in terms[2:]
                    ]
                    doc.replace_line(i, [head] + tail)
                    ctx.record("expression_div", i, f"split {len(terms)}-term sum into steps")
                    body_lines = _function_lines(doc)
                    i += 1 + len(tail)
                    continue
        i += 1


COMPOUND_ASSIGN = re.compile(
    r"^(\s*)([A-Za-z_][\w\.\[\]\->]*)\s*(\+|-|\*|/|%|&|\||\^|<<|>>)=\s*([^;]+);\s*$"
)
INCREMENT_STMT = re.compile(r"^(\s*)(?:(\+\+|--)\s*([A-Za-z_][\w\.\[\]\->]*)|([A-Za-z_][\w\.\[\]\->]*)\s*(\+\+|--))\s*;\s*$")


@_register("modify_operations", "Arithmetic",
           "Expand compound assignments and bare increments to plain form")
def _modify_operations(doc: SourceDoc, ctx: ApplyContext) -> None:
    body_lines = _function_lines(doc)
    for i in sorted(body_lines):
        if i >= len(doc.lines) or doc.is_protected(i):
            continue
        view = doc.views()[i]
        if not _simple_stmt(doc, i) or view != doc.lines[i]:
            continue  # require a literal-free single statement line
        m = COMPOUND_ASSIGN.match(view)
        if m:
            pad, lhs, op, rhs = m.groups()
            if _pure_operand(lhs) and ctx.take():
                doc.replace_line(i, [f"{pad}{lhs} = {lhs} {op} ({rhs.strip()});"])
                ctx.record("modify_operations", i, f"{lhs} {op}= ... expanded")
            continue
        m = INCREMENT_STMT.match(view)
        if m:
            pad = m.group(1)
            op = m.group(2) or m.group(5)
            lhs = m.group(3) or m.group(4)
            if _pure_operand(lhs) and ctx.take():
                plain = "+" if op == "++" else "-"
                doc.replace_line(i, [f"{pad}{lhs} = {lhs} {plain} 1;"])
                ctx.record("modify_operations", i, f"{lhs}{op} expanded")


CATEGORY_ORDER = ("Basic", "Condition", "Loop", "Logic", "Decomposition", "Arithmetic")

EXPECTED_CATEGORY_COUNTS = {
    "Basic": 10,
    "Condition": 6,
    "Loop": 2,
    "Logic": 2,
    "Decomposition": 2,
    "Arithmetic": 3,
}


def _check_catalog() -> None:
    from collections import Counter

    counts = Counter(m.category for m in _REGISTRY.values())
    assert dict(counts) == EXPECTED_CATEGORY_COUNTS, counts
    assert len(_REGISTRY) == 25, len(_REGISTRY)


_check_catalog()
