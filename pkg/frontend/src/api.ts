/** Typed client for the session service. Every outbound rating payload is
 * validated against the shared schema before it leaves the browser. */

import { RatingSubmission, validateRatingSubmission } from "./schema.js";

export interface Reply {
  label: string;
  text: string;
  strategy: string;
}

export interface SessionInfo {
  session_id: string;
  arm: "single" | "ab";
  labels: string[];
}

export interface RatingResult {
  stored: boolean;
  unblinded_mapping: Record<string, string>;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url, init);
  } catch (error) {
    throw new ApiError(0, `network failure: ${String(error)}`);
  }
  let body: unknown = null;
  try {
    body = await response.json();
  } catch {
    // non-JSON error bodies are fine, detail stays generic
  }
  if (!response.ok) {
    const detail =
      body && typeof body === "object" && "detail" in body
        ? String((body as { detail: unknown }).detail)
        : response.statusText;
    throw new ApiError(response.status, detail);
  }
  return body as T;
}

function post<T>(url: string, payload: unknown): Promise<T> {
  return request<T>(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
  });
}

export class Client {
  constructor(public baseUrl = "") {}

  createSession(arm: "single" | "ab", models: string[], scenario?: string): Promise<SessionInfo> {
    return post<SessionInfo>(`${this.baseUrl}/sessions`, {
      arm,
      models,
      scenario: scenario ?? null,
    });
  }

  postMessage(sessionId: string, text: string): Promise<{ replies: Reply[] }> {
    return post<{ replies: Reply[] }>(`${this.baseUrl}/sessions/${sessionId}/messages`, { text });
  }

  submitRating(sessionId: string, payload: RatingSubmission): Promise<RatingResult> {
    const problems = validateRatingSubmission(payload);
    if (problems.length) {
      throw new ApiError(0, `payload rejected client-side: ${problems.join("; ")}`);
    }
    return post<RatingResult>(`${this.baseUrl}/sessions/${sessionId}/rating`, payload);
  }

  exportUrl(sessionId: string): string {
    return `${this.baseUrl}/sessions/${sessionId}/export`;
  }

  strategies(): Promise<{ strategies: string[] }> {
    return request<{ strategies: string[] }>(`${this.baseUrl}/strategies`);
  }
}
