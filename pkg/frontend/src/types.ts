/** Wire types for the experiment service. */

export type Slot = "A" | "B" | "C" | "D";

export const SLOTS: readonly Slot[] = ["A", "B", "C", "D"];

export interface CloudEntry {
  term: string;
  freq: number;
  /** term frequency relative to the cloud's most frequent term, in (0, 1] */
  weight: number;
}

export interface CloudView {
  /** 0-based grid cell assigned by the server */
  row: number;
  col: number;
  entries: CloudEntry[];
}

export interface TaskPayload {
  task_id: string;
  query_id: number;
  query_text: string;
  clouds: Record<Slot, CloudView>;
}

/** POST /api/response body; field order here is the wire order. */
export interface SubmitBody {
  task_id: string;
  user_id: string;
  ranking: Slot[];
  understood: boolean;
  salient_terms: string[];
  duration_seconds: number;
  comment: string;
}

export interface SubmitReply {
  accepted: boolean;
  valid: boolean;
  reasons: string[];
}

export interface TaskProgress {
  task_id: string;
  query_id: number;
  valid_responses: number;
  total_responses: number;
  done: boolean;
}

export interface Progress {
  target_responses: number;
  total_tasks: number;
  completed_tasks: number;
  tasks: TaskProgress[];
}
