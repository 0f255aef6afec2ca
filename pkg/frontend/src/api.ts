// Thin typed client over the engine's JSON endpoints. No client-side
// mutation of engine state: every method maps one request to one response.

import {
  ApiError,
  CreateSessionResponse,
  FeedbackBody,
  QueryResponse,
  SummaryResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const text = await res.text();
    if (!res.ok) {
      let detail = text;
      try {
        const body = JSON.parse(text);
        detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
      } catch {
        // non-JSON error body: keep raw text
      }
      throw new ApiError(res.status, detail);
    }
    return JSON.parse(text) as T;
  }

  healthz(): Promise<{ status: string }> {
    return this.request("/healthz");
  }

  createSession(body: {
    mode: string;
    corpus_id: string;
    budget: number;
    unit?: string;
    seed?: number;
  }): Promise<CreateSessionResponse> {
    return this.request("/sessions", { method: "POST", body: JSON.stringify(body) });
  }

  getQuery(sessionId: string): Promise<QueryResponse> {
    return this.request(`/sessions/${sessionId}/query`);
  }

  postFeedback(sessionId: string, body: FeedbackBody): Promise<{ status: string }> {
    return this.request(`/sessions/${sessionId}/feedback`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  getSummary(sessionId: string): Promise<SummaryResponse> {
    return this.request(`/sessions/${sessionId}/summary`);
  }

  summarize(body: { corpus_id: string; budget: number; seed?: number }): Promise<SummaryResponse> {
    return this.request("/summarize", { method: "POST", body: JSON.stringify(body) });
  }
}

// Polling helper for GET /query: linear backoff, capped.
export async function pollQuery(
  client: ApiClient,
  sessionId: string,
  opts: { baseDelayMs?: number; maxDelayMs?: number; maxAttempts?: number; sleep?: (ms: number) => Promise<void> } = {},
): Promise<QueryResponse> {
  const base = opts.baseDelayMs ?? 250;
  const cap = opts.maxDelayMs ?? 4000;
  const attempts = opts.maxAttempts ?? 10;
  const sleep = opts.sleep ?? ((ms) => new Promise((r) => setTimeout(r, ms)));
  let lastError: unknown = null;
  for (let i = 0; i < attempts; i++) {
    try {
      return await client.getQuery(sessionId);
    } catch (err) {
      lastError = err;
      if (err instanceof ApiError && err.status !== 404) throw err;
      await sleep(Math.min(cap, base * (i + 1)));
    }
  }
  throw lastError instanceof Error ? lastError : new Error("polling gave up");
}
