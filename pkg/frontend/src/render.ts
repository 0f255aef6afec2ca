// Pure HTML renderers: every view is a string, so the render layer is
// testable without a browser and the DOM layer stays a thin shell.

import { buildSummaryDiff } from "./diff.js";
import {
  ConceptGroupQuery,
  PairQuery,
  SessionView,
  SummaryPayload,
} from "./types.js";

export const MAX_VISIBLE_CONCEPTS = 7; // cognitive-load cap per round

const esc = (s: string): string =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");

export function renderConceptGroup(query: ConceptGroupQuery): string {
  const cards = query.concepts.slice(0, MAX_VISIBLE_CONCEPTS).map((c) => {
    const examples = c.examples
      .map((e) => `<li class="example" data-sentence-id="${e.sentence_id}">${esc(e.text)}</li>`)
      .join("");
    return `
      <div class="concept-card" data-concept-id="${c.concept_id}">
        <h4>${esc(c.label)} <small>salience ${c.base_score.toFixed(2)}</small></h4>
        <ul>${examples}</ul>
        <label>weight
          <input type="range" class="weight" min="0" max="1" step="0.05" value="0.5">
        </label>
        <label>confidence
          <input type="range" class="confidence" min="0.05" max="1" step="0.05" value="1">
        </label>
        <button class="accept" data-concept-id="${c.concept_id}">accept</button>
        <button class="reject" data-concept-id="${c.concept_id}">reject</button>
      </div>`;
  });
  return `<div class="concept-group">${cards.join("")}</div>`;
}

export function renderPair(query: PairQuery): string {
  if (query.kind === "concept_pair") {
    return `
      <div class="pair concept-pair">
        <button class="pick" data-winner="left">${esc(query.left.label ?? "")}</button>
        <span>vs</span>
        <button class="pick" data-winner="right">${esc(query.right.label ?? "")}</button>
      </div>`;
  }
  return renderComparePanel(query);
}

// Side-by-side summary comparison: shared sentences dimmed, unique ones
// highlighted; clicking a side posts that side as the preference winner.
export function renderComparePanel(query: PairQuery): string {
  const diff = buildSummaryDiff(
    { sentence_ids: query.left.sentence_ids ?? [], texts: query.left.text },
    { sentence_ids: query.right.sentence_ids ?? [], texts: query.right.text },
  );
  const column = (rows: typeof diff.left, winner: "left" | "right") => `
    <div class="compare-column">
      <ol>
        ${rows
          .map(
            (r) =>
              `<li class="${r.shared ? "shared" : "unique"}" data-key="${r.key}">${esc(r.text)}</li>`,
          )
          .join("")}
      </ol>
      <button class="pick" data-winner="${winner}">prefer this summary</button>
    </div>`;
  return `
    <div class="pair summary-pair compare-panel" data-highlights="${diff.highlightCount}">
      ${column(diff.left, "left")}
      ${column(diff.right, "right")}
    </div>`;
}

export function renderSummary(summary: SummaryPayload): string {
  const rows = summary.sentences
    .map(
      (s) => `
      <li data-sentence-id="${s.sentence_id}">
        ${esc(s.text)}
        ${s.concepts.length ? `<small class="provenance">via concepts ${s.concepts.join(", ")}</small>` : ""}
        <button class="drop" data-sentence-id="${s.sentence_id}">reject sentence</button>
      </li>`,
    )
    .join("");
  const score = Object.entries(summary.score_breakdown)
    .map(([k, v]) => `${esc(k)}=${v.toFixed(3)}`)
    .join(" ");
  return `
    <div class="summary">
      <ol>${rows}</ol>
      <p class="meta">${summary.word_count}/${summary.budget} words; ${score}</p>
    </div>`;
}

export function renderTrajectory(view: SessionView): string {
  const series = view.rougeTrajectory.length ? view.rougeTrajectory : view.scoreTrajectory;
  const label = view.rougeTrajectory.length ? "ROUGE-1" : "objective";
  if (!series.length) return "";
  const max = Math.max(...series.map(Math.abs), 1e-9);
  const bars = series
    .map((v) => `<span class="bar" style="height:${Math.round((Math.abs(v) / max) * 40) + 2}px" title="${v.toFixed(3)}"></span>`)
    .join("");
  return `<div class="trajectory"><small>${label} by round</small>${bars}</div>`;
}

export function renderView(view: SessionView): string {
  const error = view.error ? `<div class="error" role="alert">${esc(view.error)}</div>` : "";
  if (view.status === "converged") {
    return `
      ${error}
      <h3>Final summary</h3>
      ${view.summary ? renderSummary(view.summary) : "<p>none</p>"}
      ${renderTrajectory(view)}
      <button id="export-text">export text</button>
      <button id="export-json">export JSON</button>`;
  }
  let queryHtml = "<p>waiting for the next query…</p>";
  if (view.pending?.kind === "concept_group") queryHtml = renderConceptGroup(view.pending);
  else if (view.pending) queryHtml = renderPair(view.pending);
  return `
    ${error}
    <h3>Round ${view.round}</h3>
    ${queryHtml}
    <h3>Current summary</h3>
    ${view.summary ? renderSummary(view.summary) : "<p>not available yet</p>"}
    ${renderTrajectory(view)}`;
}
