/** Fetch wrappers for the experiment service. */

import { serializeBody } from "./form.js";
import { Progress, SubmitBody, SubmitReply, TaskPayload } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  /** Next task for this assessor, or null when none remain (204). */
  async nextTask(userId: string): Promise<TaskPayload | null> {
    const url = `${this.baseUrl}/api/task?user=${encodeURIComponent(userId)}`;
    const res = await fetch(url);
    if (res.status === 204) return null;
    if (!res.ok) throw new ApiError(res.status, `task request failed: ${res.status}`);
    return (await res.json()) as TaskPayload;
  }

  async submit(body: SubmitBody): Promise<SubmitReply> {
    const res = await fetch(`${this.baseUrl}/api/response`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: serializeBody(body),
    });
    if (res.status === 409) {
      throw new ApiError(409, "this task was already submitted for this user");
    }
    if (!res.ok) throw new ApiError(res.status, `submit failed: ${res.status}`);
    return (await res.json()) as SubmitReply;
  }

  async progress(): Promise<Progress> {
    const res = await fetch(`${this.baseUrl}/api/progress`);
    if (!res.ok) throw new ApiError(res.status, `progress failed: ${res.status}`);
    return (await res.json()) as Progress;
  }
}
