/** Test harness: spawn a real annotation server and wait for readiness. */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { request } from "node:http";
import { tmpdir } from "node:os";
import { join } from "node:path";

/** Minimal fetch over node:http, immune to the DOM test environment's own
 * network stack. Covers exactly what ApiClient needs. */
export function nodeFetch(
  url: string,
  init: { method?: string; headers?: Record<string, string>; body?: string } = {},
): Promise<{
  ok: boolean;
  status: number;
  statusText: string;
  json: () => Promise<unknown>;
  text: () => Promise<string>;
}> {
  return new Promise((resolve, reject) => {
    const req = request(
      url,
      { method: init.method ?? "GET", headers: init.headers ?? {} },
      (res) => {
        const chunks: Buffer[] = [];
        res.on("data", (chunk: Buffer) => chunks.push(chunk));
        res.on("end", () => {
          const body = Buffer.concat(chunks).toString("utf-8");
          const status = res.statusCode ?? 0;
          resolve({
            ok: status >= 200 && status < 300,
            status,
            statusText: res.statusMessage ?? "",
            json: () => Promise.resolve(JSON.parse(body)),
            text: () => Promise.resolve(body),
          });
        });
      },
    );
    req.on("error", reject);
    if (init.body) req.write(init.body);
    req.end();
  });
}

export interface ServerHandle {
  baseUrl: string;
  port: number;
  dataDir: string;
  process: ChildProcess;
  stop: () => Promise<void>;
}

export const ROSTER = { annotators: ["alice", "bob", "carol"], secret: "ui-test-secret" };

export async function startServer(seedTasks: object[] = []): Promise<ServerHandle> {
  const dataDir = mkdtempSync(join(tmpdir(), "review-ui-"));
  const rosterPath = join(dataDir, "roster.json");
  writeFileSync(rosterPath, JSON.stringify(ROSTER));
  if (seedTasks.length) {
    writeFileSync(
      join(dataDir, "tasks.jsonl"),
      seedTasks.map((t) => JSON.stringify(t)).join("\n") + "\n",
    );
  }
  const port = 8600 + Math.floor(Math.random() * 800);
  const child = spawn(
    "vulnreason",
    ["serve", "--host", "127.0.0.1", "--port", String(port),
     "--data-dir", dataDir, "--annotators", rosterPath],
    { stdio: "ignore" },
  );
  const baseUrl = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 20_000;
  let ready = false;
  while (Date.now() < deadline) {
    try {
      const response = await nodeFetch(`${baseUrl}/api/v1/tasks`);
      if (response.ok) {
        ready = true;
        break;
      }
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  if (!ready) {
    child.kill();
    throw new Error(`server did not come up on ${baseUrl}`);
  }
  return {
    baseUrl,
    port,
    dataDir,
    process: child,
    stop: () =>
      new Promise<void>((resolve) => {
        child.once("exit", () => resolve());
        child.kill("SIGTERM");
        setTimeout(() => {
          child.kill("SIGKILL");
          resolve();
        }, 3_000).unref();
      }),
  };
}

export function taskDoc(taskId: string, trace: unknown, model = "model-a"): object {
  return {
    task_id: taskId,
    sample_id: `sample-${taskId}`,
    model_name: model,
    trace,
    judge_verdict: "MISMATCH",
    ground_truth: {
      cwe_id: "CWE-787",
      root_cause: "flawed boundary check admits the 64-byte write",
      fixing_pattern: "use a strict comparison",
    },
  };
}
