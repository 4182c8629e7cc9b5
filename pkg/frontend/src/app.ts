/** Application shell: session handling plus a tiny hash router
 * (#/tasks for the queue, #/tasks/<id> for the review screen). */

import { ApiClient } from "./api.js";
import { renderQueue } from "./queue.js";
import { renderAdjudication, renderReviewScreen } from "./review.js";
import type { Codebook } from "./types.js";

export function startApp(root: HTMLElement, baseUrl = ""): void {
  const api = new ApiClient(baseUrl);
  let codebook: Codebook | null = null;

  const banner = document.createElement("div");
  banner.className = "banner";
  const main = document.createElement("main");
  root.append(banner, main);

  const showError = (message: string) => {
    banner.textContent = message;
    banner.classList.add("error");
  };

  const sessionForm = () => {
    main.textContent = "";
    const form = document.createElement("form");
    form.className = "session-form";
    const input = document.createElement("input");
    input.placeholder = "annotator id";
    const go = document.createElement("button");
    go.textContent = "Start session";
    form.append(input, go);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      api
        .openSession(input.value.trim())
        .then(() => {
          banner.textContent = `signed in as ${api.annotatorId}`;
          banner.classList.remove("error");
          route();
        })
        .catch((error) => showError(String(error)));
    });
    main.append(form);
  };

  const openQueue = () => {
    renderQueue(main, api, {
      onOpen: (taskId) => {
        window.location.hash = `#/tasks/${taskId}`;
      },
      onError: showError,
    });
  };

  const openTask = async (taskId: string) => {
    try {
      codebook = codebook ?? (await api.codebook());
      const task = await api.getTask(taskId);
      renderReviewScreen(main, task, codebook, api, {
        onSubmitted: () => {
          window.location.hash = "#/tasks";
        },
        onError: showError,
      });
      if (task.state === "conflict") {
        renderAdjudication(main, task, codebook, api, {
          onSubmitted: () => {
            window.location.hash = "#/tasks";
          },
          onError: showError,
        });
      }
    } catch (error) {
      showError(String(error));
    }
  };

  const route = () => {
    const hash = window.location.hash;
    const match = /^#\/tasks\/(.+)$/.exec(hash);
    if (!api.annotatorId) {
      sessionForm();
    } else if (match && match[1]) {
      void openTask(match[1]);
    } else {
      openQueue();
    }
  };

  window.addEventListener("hashchange", route);
  route();
}
