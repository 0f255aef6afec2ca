// Export builders for the converged-session screen.

import { SessionView, SummaryPayload } from "./types.js";

export function summaryAsText(summary: SummaryPayload): string {
  return summary.sentences.map((s) => s.text).join("\n") + "\n";
}

export function summaryAsJson(view: SessionView): string {
  return JSON.stringify(
    {
      schema_version: 1,
      session_id: view.sessionId,
      mode: view.mode,
      rounds: view.round,
      summary: view.summary,
      score_trajectory: view.scoreTrajectory,
      rouge_trajectory: view.rougeTrajectory,
    },
    null,
    2,
  );
}
