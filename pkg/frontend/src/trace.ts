/** Reasoning-trace presentation model.
 *
 * Structured traces render as an ordered, depth-indented dependency list
 * whose "Step X" citations become in-page links. Anything unparseable falls
 * back to a raw-text panel so a malformed trace never blocks the queue.
 */

import type { TraceDoc, TraceNode } from "./types.js";

export type ParsedTrace =
  | { ok: true; doc: TraceDoc; depths: Map<number, number> }
  | { ok: false; error: string; raw: string };

const KINDS = new Set(["source", "intermediate", "verified_sink", "sanitized_sink"]);

export function parseTrace(trace: string | TraceDoc | unknown): ParsedTrace {
  let doc: unknown = trace;
  const raw = typeof trace === "string" ? trace : JSON.stringify(trace, null, 2);
  if (typeof trace === "string") {
    try {
      doc = JSON.parse(trace);
    } catch (error) {
      return { ok: false, error: `not a structured trace: ${String(error)}`, raw };
    }
  }
  const candidate = doc as TraceDoc;
  if (!candidate || typeof candidate !== "object" || !Array.isArray(candidate.thinking)) {
    return { ok: false, error: "document has no thinking array", raw };
  }
  const seen = new Set<number>();
  for (const node of candidate.thinking) {
    if (
      typeof node.step_id !== "number" ||
      node.step_id < 1 ||
      seen.has(node.step_id) ||
      !KINDS.has(node.kind) ||
      typeof node.statement !== "string"
    ) {
      return { ok: false, error: `malformed node near step ${String(node?.step_id)}`, raw };
    }
    for (const dep of node.direct_dependent_steps ?? []) {
      if (!seen.has(dep)) {
        return { ok: false, error: `step ${node.step_id} cites unknown step ${dep}`, raw };
      }
    }
    seen.add(node.step_id);
  }
  return { ok: true, doc: candidate, depths: traceDepths(candidate.thinking) };
}

/** Longest-path depth per step; used for the indented rendering. */
export function traceDepths(nodes: TraceNode[]): Map<number, number> {
  const depths = new Map<number, number>();
  for (const node of nodes) {
    const deps = node.direct_dependent_steps ?? [];
    const depth = deps.length
      ? Math.max(...deps.map((d) => (depths.get(d) ?? 0) + 1))
      : 0;
    depths.set(node.step_id, depth);
  }
  return depths;
}

const STEP_TAG = /\bstep\s+(\d+)\b/gi;

/** Split a justification into text runs and Step-X citation links. */
export function citationSegments(
  text: string,
  known: Set<number>,
): Array<{ kind: "text"; text: string } | { kind: "link"; text: string; step: number }> {
  const segments: Array<{ kind: "text"; text: string } | { kind: "link"; text: string; step: number }> = [];
  let last = 0;
  for (const match of text.matchAll(STEP_TAG)) {
    const step = Number(match[1]);
    const start = match.index ?? 0;
    if (!known.has(step)) continue;
    if (start > last) segments.push({ kind: "text", text: text.slice(last, start) });
    segments.push({ kind: "link", text: match[0], step });
    last = start + match[0].length;
  }
  if (last < text.length) segments.push({ kind: "text", text: text.slice(last) });
  return segments;
}

export function renderTrace(container: HTMLElement, parsed: ParsedTrace): void {
  container.textContent = "";
  if (!parsed.ok) {
    const panel = document.createElement("div");
    panel.className = "error-panel";
    const heading = document.createElement("strong");
    heading.textContent = `Trace could not be parsed: ${parsed.error}`;
    const pre = document.createElement("pre");
    pre.className = "raw-trace";
    pre.textContent = parsed.raw;
    panel.append(heading, pre);
    container.append(panel);
    return;
  }
  const known = new Set(parsed.doc.thinking.map((n) => n.step_id));
  const list = document.createElement("ol");
  list.className = "trace-list";
  for (const node of parsed.doc.thinking) {
    const item = document.createElement("li");
    item.id = `step-${node.step_id}`;
    item.className = `trace-step kind-${node.kind}`;
    item.style.marginLeft = `${(parsed.depths.get(node.step_id) ?? 0) * 1.25}rem`;

    const badge = document.createElement("span");
    badge.className = "kind-badge";
    badge.textContent = node.kind;

    const head = document.createElement("div");
    head.className = "step-head";
    const tag = document.createElement("span");
    tag.className = "step-tag";
    tag.textContent = `Step ${node.step_id}`;
    head.append(tag, badge);

    const statement = document.createElement("p");
    statement.className = "statement";
    statement.textContent = node.statement;

    const justification = document.createElement("p");
    justification.className = "justification";
    for (const segment of citationSegments(node.justification ?? "", known)) {
      if (segment.kind === "text") {
        justification.append(document.createTextNode(segment.text));
      } else {
        const link = document.createElement("a");
        link.className = "step-link";
        link.href = `#step-${segment.step}`;
        link.textContent = segment.text;
        justification.append(link);
      }
    }

    item.append(head, statement, justification);
    list.append(item);
  }
  container.append(list);
}
