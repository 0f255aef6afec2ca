// The session state machine. All transitions are pure with respect to
// the API responses: the next view is built only after a 2xx; 409 and
// 422 surface inline and never wipe what the user has entered.

import { ApiClient } from "./api.js";
import {
  ApiError,
  ConceptFeedbackBody,
  EnteredValues,
  FeedbackBody,
  PreferenceBody,
  SessionView,
} from "./types.js";

export const SLIDER_STEP = 0.05;

export function quantize(value: number, step = SLIDER_STEP): number {
  const snapped = Math.round(value / step) * step;
  return Math.min(1, Math.max(0, Number(snapped.toFixed(2))));
}

export function feedbackBody(entered: EnteredValues): FeedbackBody {
  if (entered.winner) {
    const body: PreferenceBody = { winner: entered.winner };
    return body;
  }
  if (entered.conceptId === undefined || entered.action === undefined) {
    throw new Error("incomplete feedback: pick a concept and an action");
  }
  const body: ConceptFeedbackBody = {
    kind: "concept",
    target: entered.conceptId,
    action: entered.action,
    weight: quantize(entered.weight ?? 1.0),
    confidence: quantize(entered.confidence ?? 1.0) || SLIDER_STEP,
  };
  return body;
}

export async function refreshView(
  client: ApiClient,
  view: SessionView,
): Promise<SessionView> {
  const [query, summary] = await Promise.all([
    client.getQuery(view.sessionId),
    client.getSummary(view.sessionId),
  ]);
  const scoreTrajectory = [...view.scoreTrajectory];
  const rougeTrajectory = [...view.rougeTrajectory];
  if (summary.summary) {
    const bd = summary.summary.score_breakdown;
    const score = bd.objective ?? bd.total;
    if (score !== undefined) scoreTrajectory.push(score);
    if (bd.rouge1 !== undefined) rougeTrajectory.push(bd.rouge1);
  }
  return {
    ...view,
    status: query.status,
    pending: query.query,
    summary: summary.summary,
    entered: {},
    error: null,
    scoreTrajectory,
    rougeTrajectory,
  };
}

export async function startSession(
  client: ApiClient,
  opts: { mode: "adaptive" | "sumrecom"; corpusId: string; budget: number; unit?: string; seed?: number },
): Promise<SessionView> {
  const created = await client.createSession({
    mode: opts.mode,
    corpus_id: opts.corpusId,
    budget: opts.budget,
    unit: opts.unit ?? "unigram",
    seed: opts.seed ?? 0,
  });
  const blank: SessionView = {
    sessionId: created.session_id,
    mode: opts.mode,
    status: "awaiting_feedback",
    round: 0,
    pending: null,
    summary: null,
    entered: {},
    error: null,
    scoreTrajectory: [],
    rougeTrajectory: [],
  };
  return refreshView(client, blank);
}

// The core contract: post exactly the entered feedback; advance only on
// success. A 409 means the query went stale, so it is re-fetched and
// re-rendered with the entered values intact; a 422 keeps everything and
// shows the server's message.
export async function feedbackFlow(
  client: ApiClient,
  view: SessionView,
  entered: EnteredValues,
): Promise<SessionView> {
  let body: FeedbackBody;
  try {
    body = feedbackBody(entered);
  } catch (err) {
    return { ...view, entered, error: (err as Error).message };
  }
  try {
    await client.postFeedback(view.sessionId, body);
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      const query = await client.getQuery(view.sessionId);
      return {
        ...view,
        status: query.status,
        pending: query.query,
        entered,
        error: `query no longer pending (${err.detail})`,
      };
    }
    if (err instanceof ApiError && err.status === 422) {
      return { ...view, entered, error: err.detail };
    }
    throw err;
  }
  const next = await refreshView(client, view);
  return { ...next, round: view.round + 1 };
}

export async function rejectSentence(
  client: ApiClient,
  view: SessionView,
  sentenceId: number,
): Promise<SessionView> {
  try {
    await client.postFeedback(view.sessionId, { kind: "reject_sentence", target: sentenceId });
  } catch (err) {
    if (err instanceof ApiError && (err.status === 409 || err.status === 422)) {
      return { ...view, error: err.detail };
    }
    throw err;
  }
  const next = await refreshView(client, view);
  return { ...next, round: view.round + 1 };
}
