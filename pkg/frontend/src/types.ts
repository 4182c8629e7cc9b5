/** Wire types for the annotation review service (/api/v1). */

export type TaskState = "unlabeled" | "labeled" | "conflict" | "resolved";
export type Verdict = "MATCH" | "MISMATCH";

export interface TraceNode {
  step_id: number;
  kind: "source" | "intermediate" | "verified_sink" | "sanitized_sink";
  statement: string;
  direct_dependent_steps: number[] | null;
  justification: string;
}

export interface TraceDoc {
  sample_id: string;
  thinking: TraceNode[];
}

export interface AnnotationLabel {
  annotator_id: string;
  codes: string[];
  corrected_verdict: Verdict | null;
  note: string;
  timestamp: number;
}

export interface Adjudication {
  task_id: string;
  participants: string[];
  merged_codes: string[];
  resolution_note: string;
}

export interface AnnotationTask {
  task_id: string;
  sample_id: string;
  model_name: string;
  /** Either free text or a structured trace document. */
  trace: string | TraceDoc;
  judge_verdict: Verdict;
  ground_truth: Record<string, unknown>;
  state: TaskState;
  version: number;
  labels: AnnotationLabel[];
  adjudication: Adjudication | null;
}

export interface TaskPage {
  tasks: AnnotationTask[];
  total: number;
  page: number;
}

export interface CodebookEntry {
  category: string;
  name: string;
  description: string;
}

export interface Codebook {
  order: string[];
  codes: Record<string, CodebookEntry>;
}

export interface LabelSubmission {
  codes: string[];
  corrected_verdict?: Verdict | null;
  note?: string;
  expected_version: number;
}

export interface AdjudicationSubmission {
  merged_codes: string[];
  resolution_note: string;
  expected_version: number;
}

export const MAX_CODES = 4;
