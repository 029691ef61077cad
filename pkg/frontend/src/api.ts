// Thin typed client for the exploration service. Every error becomes an
// ApiFailure carrying the service's {code, message, detail} body.

import type {
  ApiError,
  PredictPayload,
  PreferenceRow,
  RecommendPayload,
  RunDoc,
  SessionDoc,
} from "./types.js";

export class ApiFailure extends Error {
  readonly code: string;
  readonly detail: unknown;
  readonly status: number;

  constructor(status: number, body: ApiError) {
    super(body.message);
    this.status = status;
    this.code = body.code;
    this.detail = body.detail;
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(path, init);
  if (!resp.ok) {
    let body: ApiError;
    try {
      body = (await resp.json()) as ApiError;
    } catch {
      body = { code: "unknown", message: resp.statusText, detail: null };
    }
    throw new ApiFailure(resp.status, body);
  }
  return (await resp.json()) as T;
}

function post<T>(path: string, body: unknown): Promise<T> {
  return request<T>(path, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
}

export const api = {
  createSession(dataset: string, ae: string, flow: string, seed = 0) {
    return post<{ session_id: string }>("/sessions", { dataset, ae, flow, seed });
  },
  getSession(sessionId: string) {
    return request<SessionDoc>(`/sessions/${sessionId}`);
  },
  predict(sessionId: string, params: number[], n: number, seed?: number) {
    const body: Record<string, unknown> = { params, n };
    if (seed !== undefined) body.seed = seed;
    return post<PredictPayload>(`/sessions/${sessionId}/predict`, body);
  },
  addPreference(sessionId: string, params: number[], score: number) {
    return post<{ preferences: PreferenceRow[] }>(
      `/sessions/${sessionId}/preferences`, { params, score });
  },
  deletePreference(sessionId: string, index: number) {
    return request<{ preferences: PreferenceRow[] }>(
      `/sessions/${sessionId}/preferences/${index}`, { method: "DELETE" });
  },
  startGa(sessionId: string, config: Record<string, unknown>, weights: { w1: number; w2: number; w3: number }) {
    return post<{ run_id: string; status: string }>(
      `/sessions/${sessionId}/ga`, { config, weights });
  },
  pollGa(sessionId: string, runId: string) {
    return request<RunDoc>(`/sessions/${sessionId}/ga/${runId}`);
  },
  promote(sessionId: string, runId: string, candidateId: number, score: number) {
    return post<{ preferences: PreferenceRow[] }>(
      `/sessions/${sessionId}/ga/${runId}/promote`,
      { candidate_id: candidateId, score });
  },
  recommend(sessionId: string, runId: string, k: number) {
    return post<RecommendPayload>(`/sessions/${sessionId}/recommend`,
      { run_id: runId, k });
  },
};

/**
 * Poll a GA run every `intervalMs` until it leaves the running state; at
 * most one request is in flight at any time.
 */
export async function pollRunUntilDone(
  sessionId: string,
  runId: string,
  onUpdate: (doc: RunDoc) => void,
  intervalMs = 500,
): Promise<RunDoc> {
  for (;;) {
    const doc = await api.pollGa(sessionId, runId);
    onUpdate(doc);
    if (doc.status !== "running") return doc;
    await new Promise((resolve) => setTimeout(resolve, intervalMs));
  }
}
