/** Task queue: filterable listing with per-task state badges. */

import type { ApiClient } from "./api.js";
import type { TaskPage, TaskState } from "./types.js";

export interface QueueCallbacks {
  onOpen?: (taskId: string) => void;
  onError?: (message: string) => void;
}

const STATES: Array<TaskState | ""> = ["", "unlabeled", "labeled", "conflict", "resolved"];

export function renderQueue(
  container: HTMLElement,
  api: ApiClient,
  callbacks: QueueCallbacks = {},
): void {
  container.textContent = "";
  const root = document.createElement("div");
  root.className = "queue";

  const controls = document.createElement("div");
  controls.className = "queue-controls";
  const stateFilter = document.createElement("select");
  stateFilter.className = "state-filter";
  for (const state of STATES) {
    const option = document.createElement("option");
    option.value = state;
    option.textContent = state || "all states";
    stateFilter.append(option);
  }
  const modelFilter = document.createElement("input");
  modelFilter.placeholder = "model filter";
  modelFilter.className = "model-filter";
  controls.append(stateFilter, modelFilter);

  const table = document.createElement("table");
  table.className = "task-table";
  const head = document.createElement("tr");
  for (const column of ["task", "sample", "model", "judge", "state", "labels"]) {
    const cell = document.createElement("th");
    cell.textContent = column;
    head.append(cell);
  }
  table.append(head);

  const status = document.createElement("p");
  status.className = "queue-status";

  const load = () => {
    const filter: { state?: TaskState; model?: string } = {};
    if (stateFilter.value) filter.state = stateFilter.value as TaskState;
    if (modelFilter.value) filter.model = modelFilter.value;
    api
      .listTasks(filter)
      .then((page: TaskPage) => {
        table.querySelectorAll("tr.task-row").forEach((row) => row.remove());
        for (const task of page.tasks) {
          const row = document.createElement("tr");
          row.className = "task-row";
          row.dataset["taskId"] = task.task_id;
          const link = document.createElement("a");
          link.href = `#/tasks/${task.task_id}`;
          link.textContent = task.task_id;
          link.addEventListener("click", (event) => {
            event.preventDefault();
            callbacks.onOpen?.(task.task_id);
          });
          const cells = [
            link,
            document.createTextNode(task.sample_id),
            document.createTextNode(task.model_name),
            document.createTextNode(task.judge_verdict),
            stateBadge(task.state),
            document.createTextNode(String(task.labels.length)),
          ];
          for (const content of cells) {
            const cell = document.createElement("td");
            cell.append(content);
            row.append(cell);
          }
          table.append(row);
        }
        status.textContent = `${page.total} task(s)`;
      })
      .catch((error) => callbacks.onError?.(String(error)));
  };

  stateFilter.addEventListener("change", load);
  modelFilter.addEventListener("change", load);
  root.append(controls, table, status);
  container.append(root);
  load();
}

function stateBadge(state: TaskState): HTMLElement {
  const badge = document.createElement("span");
  badge.className = `state-badge state-${state}`;
  badge.textContent = state;
  return badge;
}
