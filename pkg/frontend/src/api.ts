/** Typed client for the annotation review API. */

import type {
  AdjudicationSubmission,
  AnnotationTask,
  Codebook,
  LabelSubmission,
  TaskPage,
  TaskState,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`${status}: ${detail}`);
  }
}

async function parseError(response: Response): Promise<never> {
  let detail = response.statusText;
  try {
    const body = (await response.json()) as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    // keep the status text
  }
  throw new ApiError(response.status, detail);
}

export interface TaskFilter {
  state?: TaskState;
  model?: string;
  annotator?: string;
  page?: number;
  page_size?: number;
}

export class ApiClient {
  private token: string | null = null;
  annotatorId: string | null = null;

  constructor(private baseUrl: string = "") {}

  private headers(authenticated: boolean): Record<string, string> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (authenticated) {
      if (!this.token) throw new ApiError(401, "no active session");
      headers["Authorization"] = `Bearer ${this.token}`;
    }
    return headers;
  }

  async openSession(annotatorId: string): Promise<void> {
    const response = await fetch(`${this.baseUrl}/api/v1/session`, {
      method: "POST",
      headers: this.headers(false),
      body: JSON.stringify({ annotator_id: annotatorId }),
    });
    if (!response.ok) await parseError(response);
    const body = (await response.json()) as { token: string };
    this.token = body.token;
    this.annotatorId = annotatorId;
  }

  async listTasks(filter: TaskFilter = {}): Promise<TaskPage> {
    const params = new URLSearchParams();
    for (const [key, value] of Object.entries(filter)) {
      if (value !== undefined) params.set(key, String(value));
    }
    const query = params.toString();
    const response = await fetch(
      `${this.baseUrl}/api/v1/tasks${query ? `?${query}` : ""}`,
    );
    if (!response.ok) await parseError(response);
    return (await response.json()) as TaskPage;
  }

  async getTask(taskId: string): Promise<AnnotationTask> {
    const response = await fetch(`${this.baseUrl}/api/v1/tasks/${taskId}`);
    if (!response.ok) await parseError(response);
    return (await response.json()) as AnnotationTask;
  }

  async createTask(doc: Partial<AnnotationTask> & { task_id: string }): Promise<AnnotationTask> {
    const response = await fetch(`${this.baseUrl}/api/v1/tasks`, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(doc),
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as AnnotationTask;
  }

  async submitLabel(taskId: string, label: LabelSubmission): Promise<AnnotationTask> {
    const response = await fetch(`${this.baseUrl}/api/v1/tasks/${taskId}/labels`, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(label),
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as AnnotationTask;
  }

  async adjudicate(taskId: string, record: AdjudicationSubmission): Promise<AnnotationTask> {
    const response = await fetch(`${this.baseUrl}/api/v1/tasks/${taskId}/adjudicate`, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(record),
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as AnnotationTask;
  }

  async codebook(): Promise<Codebook> {
    const response = await fetch(`${this.baseUrl}/api/v1/codebook`);
    if (!response.ok) await parseError(response);
    return (await response.json()) as Codebook;
  }

  async exportData(format: "jsonl" | "csv"): Promise<string> {
    const response = await fetch(`${this.baseUrl}/api/v1/export?format=${format}`);
    if (!response.ok) await parseError(response);
    return await response.text();
  }
}
