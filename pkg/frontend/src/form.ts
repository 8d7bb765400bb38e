/** Submission gating and the wire serialization of a response.
 *
 * The service re-validates everything; this module only decides when the
 * submit button unlocks and what bytes go over the wire.
 */

import { SLOTS, Slot, SubmitBody } from "./types.js";

export const MIN_SECONDS = 20;
export const SALIENT_TERM_COUNT = 2;

export interface FormState {
  /** ranking[0] is the cloud ranked most relevant; null = not chosen yet */
  ranking: Array<Slot | null>;
  understood: boolean;
  salientTerms: string[];
  /** seconds since the task was shown */
  elapsedSeconds: number;
}

export function emptyForm(): FormState {
  return {
    ranking: [null, null, null, null],
    understood: false,
    salientTerms: ["", ""],
    elapsedSeconds: 0,
  };
}

export function isCompletePermutation(
  ranking: Array<Slot | null>,
): ranking is Slot[] {
  if (ranking.length !== SLOTS.length) return false;
  const seen = new Set<Slot>();
  for (const slot of ranking) {
    if (slot === null || !SLOTS.includes(slot)) return false;
    seen.add(slot);
  }
  return seen.size === SLOTS.length;
}

function filledTerms(state: FormState): string[] {
  return state.salientTerms.map((t) => t.trim()).filter((t) => t.length > 0);
}

/** Unmet submit requirements, in display order; empty means ready. */
export function missingRequirements(
  state: FormState,
  minSeconds: number = MIN_SECONDS,
): string[] {
  const missing: string[] = [];
  if (!isCompletePermutation(state.ranking)) {
    missing.push("rank all four clouds, each exactly once");
  }
  if (!state.understood) {
    missing.push("confirm you understood the query");
  }
  if (filledTerms(state).length !== SALIENT_TERM_COUNT) {
    missing.push("give exactly two salient terms from your top cloud");
  }
  if (state.elapsedSeconds < minSeconds) {
    missing.push(`spend at least ${minSeconds}s on the task`);
  }
  return missing;
}

export function canSubmit(
  state: FormState,
  minSeconds: number = MIN_SECONDS,
): boolean {
  return missingRequirements(state, minSeconds).length === 0;
}

/** Build the POST body from a form that passed canSubmit. */
export function buildBody(
  taskId: string,
  userId: string,
  state: FormState,
  comment = "",
): SubmitBody {
  if (!isCompletePermutation(state.ranking)) {
    throw new Error("ranking is not a complete permutation");
  }
  return {
    task_id: taskId,
    user_id: userId,
    ranking: [...state.ranking],
    understood: state.understood,
    salient_terms: filledTerms(state),
    duration_seconds: state.elapsedSeconds,
    comment,
  };
}

/** The exact bytes sent over the wire; key order is the SubmitBody order. */
export function serializeBody(body: SubmitBody): string {
  return JSON.stringify(body);
}
