/** Review screen: code + context on the left, trace / ground truth / label
 * form on the right. The submit button stays disabled until 1..4 codes are
 * selected, with the reason spelled out next to it. */

import type { ApiClient } from "./api.js";
import type { AnnotationTask, Codebook, Verdict } from "./types.js";
import { MAX_CODES } from "./types.js";
import { parseTrace, renderTrace } from "./trace.js";

export interface ReviewCallbacks {
  onSubmitted?: (task: AnnotationTask) => void;
  onError?: (message: string) => void;
}

function section(title: string, collapsible = false): HTMLElement {
  if (collapsible) {
    const details = document.createElement("details");
    const summary = document.createElement("summary");
    summary.textContent = title;
    details.append(summary);
    details.className = "context-section";
    return details;
  }
  const wrapper = document.createElement("section");
  const heading = document.createElement("h3");
  heading.textContent = title;
  wrapper.append(heading);
  return wrapper;
}

function codeBlock(text: string): HTMLPreElement {
  const pre = document.createElement("pre");
  pre.className = "code";
  pre.textContent = text;
  return pre;
}

function groundTruthPanel(task: AnnotationTask): HTMLElement {
  const panel = section("Ground truth");
  panel.className = "ground-truth";
  const list = document.createElement("dl");
  for (const [key, value] of Object.entries(task.ground_truth ?? {})) {
    if (value === null || value === undefined || value === "") continue;
    const term = document.createElement("dt");
    term.textContent = key;
    const detail = document.createElement("dd");
    detail.textContent = typeof value === "string" ? value : JSON.stringify(value);
    list.append(term, detail);
  }
  panel.append(list);
  return panel;
}

function sourcePanel(task: AnnotationTask): HTMLElement {
  const panel = section("Code under review");
  panel.className = "source-panel";
  const gt = task.ground_truth as Record<string, unknown>;
  const source = typeof gt["source"] === "string" ? (gt["source"] as string) : null;
  if (source) panel.append(codeBlock(source));
  const contextKeys: Array<[string, string]> = [
    ["calleeMethods", "Callee methods"],
    ["callerMethods", "Caller methods"],
    ["globalVars", "Global variables"],
    ["typeDefs", "Type definitions"],
    ["importLibs", "Imports"],
  ];
  for (const [key, title] of contextKeys) {
    const fragments = gt[key];
    if (!Array.isArray(fragments) || fragments.length === 0) continue;
    const block = section(`${title} (${fragments.length})`, true);
    for (const fragment of fragments) block.append(codeBlock(String(fragment)));
    panel.append(block);
  }
  if (!source) {
    const note = document.createElement("p");
    note.className = "muted";
    note.textContent = `sample ${task.sample_id}`;
    panel.append(note);
  }
  return panel;
}

export function renderReviewScreen(
  container: HTMLElement,
  task: AnnotationTask,
  codebook: Codebook,
  api: ApiClient,
  callbacks: ReviewCallbacks = {},
): void {
  container.textContent = "";
  const root = document.createElement("div");
  root.className = "review-screen";

  const header = document.createElement("header");
  const title = document.createElement("h2");
  title.textContent = `${task.task_id} — ${task.model_name}`;
  const state = document.createElement("span");
  state.className = `state-badge state-${task.state}`;
  state.textContent = `${task.state} (v${task.version})`;
  const verdict = document.createElement("span");
  verdict.className = `verdict-badge verdict-${task.judge_verdict.toLowerCase()}`;
  verdict.textContent = `judge: ${task.judge_verdict}`;
  header.append(title, state, verdict);
  root.append(header);

  const columns = document.createElement("div");
  columns.className = "columns";
  const left = document.createElement("div");
  left.className = "column left";
  left.append(sourcePanel(task));

  const right = document.createElement("div");
  right.className = "column right";
  const tracePanel = section("Reasoning trace");
  const traceBox = document.createElement("div");
  traceBox.className = "trace-box";
  renderTrace(traceBox, parseTrace(task.trace));
  tracePanel.append(traceBox);
  right.append(tracePanel, groundTruthPanel(task));

  columns.append(left, right);
  root.append(columns);

  // --- label form -----------------------------------------------------

  const form = document.createElement("form");
  form.className = "label-form";
  const codesBox = section("Error codes (pick 1–4)");
  const selected = new Set<string>();
  const checkboxes = new Map<string, HTMLInputElement>();

  const explanation = document.createElement("p");
  explanation.className = "form-explanation";

  const submit = document.createElement("button");
  submit.type = "submit";
  submit.className = "submit-label";
  submit.textContent = "Submit label";

  const refresh = () => {
    if (selected.size === 0) {
      submit.disabled = true;
      explanation.textContent = "Select at least one error code.";
    } else if (selected.size > MAX_CODES) {
      submit.disabled = true;
      explanation.textContent =
        `At most ${MAX_CODES} codes per label; deselect ${selected.size - MAX_CODES}.`;
    } else {
      submit.disabled = false;
      explanation.textContent = `${selected.size} code(s) selected.`;
    }
  };

  for (const code of codebook.order) {
    const entry = codebook.codes[code];
    const row = document.createElement("label");
    row.className = "code-row";
    const box = document.createElement("input");
    box.type = "checkbox";
    box.value = code;
    box.addEventListener("change", () => {
      if (box.checked) selected.add(code);
      else selected.delete(code);
      refresh();
    });
    checkboxes.set(code, box);
    const name = document.createElement("strong");
    name.textContent = code;
    const description = document.createElement("span");
    description.className = "code-description";
    description.textContent = entry ? ` ${entry.name} — ${entry.description}` : "";
    row.append(box, name, description);
    codesBox.append(row);
  }

  const verdictBox = section("Judge verdict");
  const override = document.createElement("select");
  override.className = "verdict-override";
  for (const [value, label] of [
    ["", `keep ${task.judge_verdict}`],
    ["MATCH", "override to MATCH"],
    ["MISMATCH", "override to MISMATCH"],
  ]) {
    const option = document.createElement("option");
    option.value = value ?? "";
    option.textContent = label ?? "";
    verdictBox.append();
    override.append(option);
  }
  verdictBox.append(override);

  const noteBox = section("Note");
  const note = document.createElement("textarea");
  note.className = "label-note";
  noteBox.append(note);

  form.append(codesBox, verdictBox, noteBox, explanation, submit);
  refresh();

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    if (submit.disabled) return;
    const corrected = override.value === "" ? null : (override.value as Verdict);
    api
      .submitLabel(task.task_id, {
        codes: [...selected],
        corrected_verdict: corrected,
        note: note.value,
        expected_version: task.version,
      })
      .then((updated) => callbacks.onSubmitted?.(updated))
      .catch((error) => callbacks.onError?.(String(error)));
  });

  root.append(form);
  container.append(root);
}

/** Adjudication form shown for conflicted tasks. */
export function renderAdjudication(
  container: HTMLElement,
  task: AnnotationTask,
  codebook: Codebook,
  api: ApiClient,
  callbacks: ReviewCallbacks = {},
): void {
  const panel = section("Adjudicate conflict");
  panel.className = "adjudication";
  const labels = document.createElement("ul");
  for (const label of task.labels) {
    const item = document.createElement("li");
    const verdictNote = label.corrected_verdict ? `, verdict ${label.corrected_verdict}` : "";
    item.textContent = `${label.annotator_id}: ${label.codes.join(", ")}${verdictNote}`;
    labels.append(item);
  }
  panel.append(labels);

  const selected = new Set<string>();
  const explanation = document.createElement("p");
  explanation.className = "form-explanation";
  const submit = document.createElement("button");
  submit.textContent = "Resolve with merged codes";
  const refresh = () => {
    submit.disabled = selected.size === 0 || selected.size > MAX_CODES;
    explanation.textContent = submit.disabled
      ? `Pick 1–${MAX_CODES} merged codes.`
      : `${selected.size} merged code(s).`;
  };
  for (const code of codebook.order) {
    const row = document.createElement("label");
    row.className = "code-row";
    const box = document.createElement("input");
    box.type = "checkbox";
    box.value = code;
    const union = new Set(task.labels.flatMap((l) => l.codes));
    box.checked = union.has(code) && union.size <= MAX_CODES;
    if (box.checked) selected.add(code);
    box.addEventListener("change", () => {
      if (box.checked) selected.add(code);
      else selected.delete(code);
      refresh();
    });
    row.append(box, document.createTextNode(` ${code}`));
    panel.append(row);
  }
  const noteInput = document.createElement("input");
  noteInput.type = "text";
  noteInput.placeholder = "resolution note";
  submit.addEventListener("click", () => {
    api
      .adjudicate(task.task_id, {
        merged_codes: [...selected],
        resolution_note: noteInput.value,
        expected_version: task.version,
      })
      .then((updated) => callbacks.onSubmitted?.(updated))
      .catch((error) => callbacks.onError?.(String(error)));
  });
  panel.append(noteInput, explanation, submit);
  refresh();
  container.append(panel);
}
