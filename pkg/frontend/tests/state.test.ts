import { describe, expect, it } from "vitest";

import { ApiClient, FetchLike } from "../src/api.js";
import { feedbackBody, feedbackFlow, quantize } from "../src/state.js";
import { SessionView } from "../src/types.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

interface Recorded {
  url: string;
  method: string;
  body: unknown;
}

function scriptedClient(
  script: Array<{ match: RegExp; status: number; body: unknown }>,
  record: Recorded[] = [],
): ApiClient {
  const fetchImpl: FetchLike = async (url, init) => {
    record.push({
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(String(init.body)) : null,
    });
    for (const step of script) {
      if (step.match.test(`${init?.method ?? "GET"} ${url}`)) {
        return jsonResponse(step.status, step.body);
      }
    }
    throw new Error(`no scripted response for ${url}`);
  };
  return new ApiClient("http://engine", fetchImpl);
}

function baseView(): SessionView {
  return {
    sessionId: "s1",
    mode: "adaptive",
    status: "awaiting_feedback",
    round: 2,
    pending: { kind: "concept_group", concepts: [] },
    summary: null,
    entered: {},
    error: null,
    scoreTrajectory: [],
    rougeTrajectory: [],
  };
}

const okQuery = { status: "awaiting_feedback", query: null, schema_version: 1 };
const okSummary = {
  status: "awaiting_feedback",
  summary: {
    sentence_ids: [0],
    word_count: 5,
    budget: 40,
    score_breakdown: { objective: 1.5 },
    sentences: [{ sentence_id: 0, text: "t", concepts: [] }],
  },
  schema_version: 1,
};

describe("feedbackBody", () => {
  it("maps accept with sliders to the exact API schema", () => {
    expect(feedbackBody({ conceptId: 3, action: 1, weight: 0.7, confidence: 0.9 })).toEqual({
      kind: "concept",
      target: 3,
      action: 1,
      weight: 0.7,
      confidence: 0.9,
    });
  });

  it("maps a preference click to a winner body", () => {
    expect(feedbackBody({ winner: "left" })).toEqual({ winner: "left" });
  });

  it("quantises slider values to 0.05 steps", () => {
    expect(quantize(0.7341)).toBeCloseTo(0.75, 10);
    expect(quantize(0.02)).toBe(0);
    expect(quantize(1.2)).toBe(1);
    const body = feedbackBody({ conceptId: 1, action: -1, weight: 0.333, confidence: 0.666 });
    expect(body).toMatchObject({ weight: 0.35, confidence: 0.65 });
  });
});

describe("feedbackFlow", () => {
  it("posts feedback and advances only after 2xx", async () => {
    const record: Recorded[] = [];
    const client = scriptedClient(
      [
        { match: /POST .*\/feedback/, status: 200, body: { status: "awaiting_feedback" } },
        { match: /GET .*\/query/, status: 200, body: okQuery },
        { match: /GET .*\/summary/, status: 200, body: okSummary },
      ],
      record,
    );
    const next = await feedbackFlow(client, baseView(), {
      conceptId: 5,
      action: 1,
      weight: 0.7,
      confidence: 0.9,
    });
    expect(record[0].body).toEqual({
      kind: "concept",
      target: 5,
      action: 1,
      weight: 0.7,
      confidence: 0.9,
    });
    expect(next.round).toBe(3);
    expect(next.error).toBeNull();
    expect(next.summary?.sentence_ids).toEqual([0]);
    expect(next.scoreTrajectory).toEqual([1.5]);
  });

  it("re-fetches the query on 409 without losing entered values", async () => {
    const staleQuery = {
      status: "awaiting_feedback",
      query: { kind: "concept_pair", left: { label: "a" }, right: { label: "b" } },
      schema_version: 1,
    };
    const client = scriptedClient([
      { match: /POST .*\/feedback/, status: 409, body: { detail: "session already converged" } },
      { match: /GET .*\/query/, status: 200, body: staleQuery },
    ]);
    const entered = { conceptId: 5, action: 1 as const, weight: 0.4, confidence: 1 };
    const next = await feedbackFlow(client, baseView(), entered);
    expect(next.entered).toEqual(entered); // nothing lost
    expect(next.error).toContain("session already converged");
    expect(next.pending?.kind).toBe("concept_pair"); // re-fetched and re-rendered
    expect(next.round).toBe(2); // no advance
  });

  it("surfaces 422 inline and keeps the view unchanged", async () => {
    const client = scriptedClient([
      { match: /POST .*\/feedback/, status: 422, body: { detail: "weight must be in [0, 1]" } },
    ]);
    const view = baseView();
    const entered = { conceptId: 2, action: -1 as const, weight: 0.9, confidence: 0.5 };
    const next = await feedbackFlow(client, view, entered);
    expect(next.error).toContain("weight must be in");
    expect(next.entered).toEqual(entered);
    expect(next.pending).toEqual(view.pending);
    expect(next.round).toBe(view.round);
  });

  it("reports incomplete input without any network call", async () => {
    const record: Recorded[] = [];
    const client = scriptedClient([], record);
    const next = await feedbackFlow(client, baseView(), { weight: 0.5 });
    expect(next.error).toContain("incomplete feedback");
    expect(record).toHaveLength(0);
  });
});
