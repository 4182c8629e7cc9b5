// @vitest-environment happy-dom
/** UI contract: the review screen enforces the four-code rule and renders
 * Step-X dependency links for the structured example trace. The task and
 * codebook come from a real server over HTTP. */

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { renderReviewScreen } from "../src/review.js";
import { citationSegments, parseTrace, renderTrace } from "../src/trace.js";
import type { Codebook } from "../src/types.js";
import { nodeFetch, startServer, taskDoc, type ServerHandle } from "./helpers.js";

// The DOM environment's fetch does not reach real sockets; route the API
// client through the node:http shim instead.
globalThis.fetch = nodeFetch as unknown as typeof fetch;

const FIXTURE_PATH = join(__dirname, "..", "..", "tests", "data", "flawed_check_trace.json");
const FIXTURE = JSON.parse(readFileSync(FIXTURE_PATH, "utf-8"));

let server: ServerHandle;
let api: ApiClient;
let codebook: Codebook;

beforeAll(async () => {
  server = await startServer([
    taskDoc("trace-task", FIXTURE),
    taskDoc("broken-task", "{ not json"),
  ]);
  api = new ApiClient(server.baseUrl);
  await api.openSession("alice");
  codebook = await api.codebook();
}, 30_000);

afterAll(async () => {
  await server.stop();
});

function mount(): HTMLElement {
  document.body.innerHTML = "";
  const root = document.createElement("div");
  document.body.append(root);
  return root;
}

describe("review screen", () => {
  it("renders the 12-step trace with working Step-X dependency links", async () => {
    const task = await api.getTask("trace-task");
    const root = mount();
    renderReviewScreen(root, task, codebook, api);

    const steps = root.querySelectorAll(".trace-step");
    expect(steps.length).toBe(12);
    // step 8 cites steps 5, 6 and 7; each citation is an in-page link
    const step8 = root.querySelector("#step-8")!;
    const hrefs = [...step8.querySelectorAll("a.step-link")].map((a) =>
      a.getAttribute("href"),
    );
    expect(hrefs).toEqual(["#step-5", "#step-6", "#step-7"]);
    // every link target exists
    for (const link of root.querySelectorAll("a.step-link")) {
      const target = link.getAttribute("href")!.slice(1);
      expect(root.querySelector(`#${target}`), target).not.toBeNull();
    }
    // sinks carry their kind badges
    expect(root.querySelector("#step-11")!.className).toContain("verified_sink");
    expect(root.querySelector("#step-12")!.className).toContain("sanitized_sink");
  });

  it("enforces the 1..4 code rule on the submit button", async () => {
    const task = await api.getTask("trace-task");
    const root = mount();
    renderReviewScreen(root, task, codebook, api);

    const submit = root.querySelector<HTMLButtonElement>("button.submit-label")!;
    const explanation = root.querySelector(".form-explanation")!;
    const boxes = [...root.querySelectorAll<HTMLInputElement>(".code-row input")];
    expect(boxes.length).toBe(12);
    expect(submit.disabled).toBe(true);
    expect(explanation.textContent).toContain("at least one");

    const toggle = (box: HTMLInputElement, on: boolean) => {
      box.checked = on;
      box.dispatchEvent(new Event("change"));
    };

    for (const box of boxes.slice(0, 4)) toggle(box, true);
    expect(submit.disabled).toBe(false);

    toggle(boxes[4]!, true); // fifth code
    expect(submit.disabled).toBe(true);
    expect(explanation.textContent).toContain("At most 4");

    toggle(boxes[4]!, false);
    expect(submit.disabled).toBe(false);
  });

  it("submits a label through the API and the task advances", async () => {
    const created = await api.createTask(taskDoc("submit-task", FIXTURE) as never);
    const root = mount();
    let updated: unknown = null;
    renderReviewScreen(root, created, codebook, api, {
      onSubmitted: (task) => {
        updated = task;
      },
    });
    const boxes = [...root.querySelectorAll<HTMLInputElement>(".code-row input")];
    boxes[2]!.checked = true;
    boxes[2]!.dispatchEvent(new Event("change"));
    root.querySelector("form.label-form")!.dispatchEvent(new Event("submit"));
    await new Promise((resolve) => setTimeout(resolve, 300));
    expect(updated).not.toBeNull();
    expect((updated as { state: string }).state).toBe("labeled");
    const fresh = await api.getTask("submit-task");
    expect(fresh.labels[0]!.codes).toEqual(["CS2"]);
    expect(fresh.labels[0]!.annotator_id).toBe("alice");
  });

  it("shows an error panel with the raw text for malformed traces", async () => {
    const task = await api.getTask("broken-task");
    const root = mount();
    renderReviewScreen(root, task, codebook, api);
    const panel = root.querySelector(".error-panel");
    expect(panel).not.toBeNull();
    expect(panel!.querySelector(".raw-trace")!.textContent).toContain("{ not json");
    // the label form still renders: a malformed trace never blocks the queue
    expect(root.querySelector("button.submit-label")).not.toBeNull();
  });
});

describe("queue and adjudication", () => {
  it("renders the queue and honors the state filter", async () => {
    const { renderQueue } = await import("../src/queue.js");
    const root = mount();
    renderQueue(root, api);
    await new Promise((resolve) => setTimeout(resolve, 300));
    const allRows = root.querySelectorAll("tr.task-row").length;
    expect(allRows).toBeGreaterThanOrEqual(2);

    const filter = root.querySelector<HTMLSelectElement>("select.state-filter")!;
    filter.value = "unlabeled";
    filter.dispatchEvent(new Event("change"));
    await new Promise((resolve) => setTimeout(resolve, 300));
    const filtered = [...root.querySelectorAll("tr.task-row")];
    expect(filtered.length).toBeLessThanOrEqual(allRows);
    for (const row of filtered) {
      expect(row.querySelector(".state-badge")!.textContent).toBe("unlabeled");
    }
  });

  it("adjudicates a conflicted task through the form", async () => {
    const bob = new ApiClient(server.baseUrl);
    await bob.openSession("bob");
    await api.createTask(taskDoc("conflict-ui", FIXTURE) as never);
    await api.submitLabel("conflict-ui", { codes: ["CS2"], expected_version: 0 });
    await bob.submitLabel("conflict-ui", { codes: ["AR1"], expected_version: 1 });
    const task = await api.getTask("conflict-ui");
    expect(task.state).toBe("conflict");

    const { renderAdjudication } = await import("../src/review.js");
    const root = mount();
    let resolved: unknown = null;
    renderAdjudication(root, task, codebook, api, {
      onSubmitted: (updated) => {
        resolved = updated;
      },
    });
    // both labels are listed for the adjudicator
    const listed = [...root.querySelectorAll(".adjudication li")].map((n) => n.textContent);
    expect(listed.some((t) => t!.includes("alice") && t!.includes("CS2"))).toBe(true);
    expect(listed.some((t) => t!.includes("bob") && t!.includes("AR1"))).toBe(true);
    // the union of labels fits, so it is preselected; resolve with it
    const button = [...root.querySelectorAll("button")].find(
      (b) => b.textContent?.includes("Resolve"),
    )!;
    expect(button.disabled).toBe(false);
    button.click();
    await new Promise((resolve2) => setTimeout(resolve2, 300));
    expect((resolved as { state: string }).state).toBe("resolved");
    const fresh = await api.getTask("conflict-ui");
    expect(fresh.adjudication?.merged_codes).toEqual(["CS2", "AR1"]);
  });
});

describe("trace model", () => {
  it("computes citation segments only for known steps", () => {
    const segments = citationSegments("From Step 2 and Step 99.", new Set([1, 2]));
    const links = segments.filter((s) => s.kind === "link");
    expect(links).toEqual([{ kind: "link", text: "Step 2", step: 2 }]);
  });

  it("rejects forward citations as malformed", () => {
    const parsed = parseTrace({
      sample_id: "x",
      thinking: [
        { step_id: 1, kind: "intermediate", statement: "s",
          direct_dependent_steps: [2], justification: "From Step 2." },
        { step_id: 2, kind: "source", statement: "s",
          direct_dependent_steps: null, justification: "" },
      ],
    });
    expect(parsed.ok).toBe(false);
    const container = document.createElement("div");
    renderTrace(container, parsed);
    expect(container.querySelector(".error-panel")).not.toBeNull();
  });

  it("indents by dependency depth", () => {
    const parsed = parseTrace(FIXTURE);
    expect(parsed.ok).toBe(true);
    if (parsed.ok) {
      expect(parsed.depths.get(1)).toBe(0);
      expect(parsed.depths.get(8)).toBe(2);
      expect(parsed.depths.get(11)).toBe(5);
    }
  });
});
