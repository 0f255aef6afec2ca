// Sentence-level comparison model for the side-by-side summary panel:
// shared sentences are dimmed, unique ones highlighted. The highlight
// count is exactly the symmetric difference of the two sentence sets.

export interface DiffSentence {
  key: string;
  text: string;
  shared: boolean;
}

export interface SummaryDiff {
  left: DiffSentence[];
  right: DiffSentence[];
  highlightCount: number;
}

export interface DiffInput {
  sentence_ids: number[];
  texts?: string[];
}

export function buildSummaryDiff(left: DiffInput, right: DiffInput): SummaryDiff {
  const leftKeys = new Set(left.sentence_ids.map(String));
  const rightKeys = new Set(right.sentence_ids.map(String));

  const side = (input: DiffInput, other: Set<string>): DiffSentence[] =>
    input.sentence_ids.map((id, i) => ({
      key: String(id),
      text: input.texts?.[i] ?? String(id),
      shared: other.has(String(id)),
    }));

  const leftRows = side(left, rightKeys);
  const rightRows = side(right, leftKeys);
  const highlightCount =
    leftRows.filter((r) => !r.shared).length + rightRows.filter((r) => !r.shared).length;
  return { left: leftRows, right: rightRows, highlightCount };
}

export function symmetricDifferenceSize(a: number[], b: number[]): number {
  const sa = new Set(a);
  const sb = new Set(b);
  let n = 0;
  for (const x of sa) if (!sb.has(x)) n++;
  for (const x of sb) if (!sa.has(x)) n++;
  return n;
}
