// Shapes of the engine's HTTP API (schema_version 1) and the client view.

export interface ConceptExample {
  sentence_id: number;
  text: string;
}

export interface ConceptCard {
  concept_id: number;
  label: string;
  base_score: number;
  examples: ConceptExample[];
}

export interface ConceptGroupQuery {
  kind: "concept_group";
  concepts: ConceptCard[];
}

export interface PairSide {
  concept_id?: number;
  label?: string;
  index?: number;
  sentence_ids?: number[];
  text?: string[];
}

export interface PairQuery {
  kind: "concept_pair" | "summary_pair";
  left: PairSide;
  right: PairSide;
}

export type PendingQuery = ConceptGroupQuery | PairQuery;

export interface SummarySentence {
  sentence_id: number;
  text: string;
  concepts: number[];
}

export interface SummaryPayload {
  sentence_ids: number[];
  word_count: number;
  budget: number;
  score_breakdown: Record<string, number>;
  sentences: SummarySentence[];
}

export interface QueryResponse {
  status: "awaiting_feedback" | "converged";
  query: PendingQuery | null;
  schema_version: number;
}

export interface SummaryResponse {
  status: "awaiting_feedback" | "converged";
  summary: SummaryPayload | null;
  schema_version: number;
}

export interface CreateSessionResponse {
  session_id: string;
  mode: string;
  status: string;
  schema_version: number;
}

export type ConceptFeedbackBody = {
  kind: "concept";
  target: number;
  action: 1 | -1;
  weight: number;
  confidence: number;
};

export type SentenceRejectionBody = { kind: "reject_sentence"; target: number };
export type PreferenceBody = { winner: "left" | "right" };
export type FeedbackBody = ConceptFeedbackBody | SentenceRejectionBody | PreferenceBody;

// Values the user has entered but not yet successfully submitted; they
// must survive 409/422 responses.
export interface EnteredValues {
  conceptId?: number;
  action?: 1 | -1;
  weight?: number;
  confidence?: number;
  winner?: "left" | "right";
}

export interface SessionView {
  sessionId: string;
  mode: "adaptive" | "sumrecom";
  status: "awaiting_feedback" | "converged";
  round: number;
  pending: PendingQuery | null;
  summary: SummaryPayload | null;
  entered: EnteredValues;
  error: string | null;
  scoreTrajectory: number[];
  rougeTrajectory: number[];
}

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}
