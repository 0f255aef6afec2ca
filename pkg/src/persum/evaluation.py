"""ROUGE-1/2/L from scratch, the ground-truth summary reward, simulated users.

All functions are pure; SimUser owns its RNG so noisy answers replay
deterministically for a fixed seed.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .corpus import Concept
from .errors import EmptyReference, UnknownTarget

TokenList = list


@dataclass
class RougeScore:
    metric: str
    mode: str
    value: float
    truncation: int | None = None

    def as_dict(self):
        return {
            "metric": self.metric,
            "mode": self.mode,
            "value": self.value,
            "truncation": self.truncation,
        }


def ngram_counts(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate, references, n: int = 1, mode: str = "recall",
            truncation: int | None = None) -> RougeScore:
    """Clipped n-gram overlap, pooled over references.

    Recall counts matches per reference (clipped) over the total reference
    gram mass; precision clips against the element-wise max of the
    reference multisets.
    """
    if not references or all(len(r) == 0 for r in references):
        raise EmptyReference("rouge_n needs at least one non-empty reference")
    cand = list(candidate)[:truncation] if truncation is not None else list(candidate)
    cand_counts = ngram_counts(cand, n)

    match_total = 0
    ref_total = 0
    union: Counter = Counter()
    for ref in references:
        rc = ngram_counts(ref, n)
        ref_total += sum(rc.values())
        match_total += sum(min(c, rc[g]) for g, c in cand_counts.items() if g in rc)
        for g, c in rc.items():
            union[g] = max(union[g], c)

    recall = match_total / ref_total if ref_total else 0.0
    if mode == "recall":
        return RougeScore(f"rouge{n}", mode, recall, truncation)
    cand_total = sum(cand_counts.values())
    prec_match = sum(min(c, union[g]) for g, c in cand_counts.items() if g in union)
    precision = prec_match / cand_total if cand_total else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return RougeScore(f"rouge{n}", "f1", f1, truncation)


def lcs_length(a, b) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate, references, mode: str = "recall",
            truncation: int | None = None) -> RougeScore:
    """LCS-based score, averaged per reference."""
    if not references or all(len(r) == 0 for r in references):
        raise EmptyReference("rouge_l needs at least one non-empty reference")
    cand = list(candidate)[:truncation] if truncation is not None else list(candidate)
    vals = []
    for ref in references:
        if not ref:
            continue
        lcs = lcs_length(cand, ref)
        recall = lcs / len(ref)
        if mode == "recall":
            vals.append(recall)
        else:
            precision = lcs / len(cand) if cand else 0.0
            vals.append(2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0)
    return RougeScore("rougeL", mode, float(np.mean(vals)), truncation)


def redundancy(sentences_tokens) -> float:
    """Intra-summary pairwise token overlap divided by summary length."""
    n = len(sentences_tokens)
    if n < 2:
        return 0.0
    total = 0.0
    for i in range(n):
        si = set(sentences_tokens[i])
        for j in range(i + 1, n):
            sj = set(sentences_tokens[j])
            if si or sj:
                if list(sentences_tokens[i]) == list(sentences_tokens[j]):
                    total += 1.0
                else:
                    inter = len(si & sj)
                    total += inter / len(si | sj) if inter else 0.0
    return total / n


@dataclass
class RewardCoeffs:
    rouge1: float = 0.8
    rouge2: float = 0.5
    redundancy: float = 0.25


@dataclass
class SimUser:
    """Oracle that answers feedback queries like the simulation experiments.

    kind 'dictionary' reads utilities from concept_truth; kind 'reference'
    derives them from reference-summary membership (max utility when the
    concept appears in a reference, else zero).
    """

    kind: str = "dictionary"
    concept_truth: dict = field(default_factory=dict)
    references: list = field(default_factory=list)
    reward_coeffs: RewardCoeffs = field(default_factory=RewardCoeffs)
    seed: int = 0
    noise: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.noise < 0.5:
            raise ValueError("noise must be in [0, 0.5)")
        self._rng = np.random.default_rng(self.seed)

    # -- utilities -----------------------------------------------------
    def utility(self, label: str) -> float:
        if self.kind == "reference":
            toks = tuple(label.split())
            k = len(toks)
            for ref in self.references:
                if any(tuple(ref[i:i + k]) == toks for i in range(len(ref) - k + 1)):
                    return 1.0
            return 0.0
        if label not in self.concept_truth:
            raise UnknownTarget(f"concept '{label}' is not in the user dictionary")
        return float(self.concept_truth[label])

    def _max_utility(self) -> float:
        if self.kind == "reference":
            return 1.0
        return max(self.concept_truth.values()) if self.concept_truth else 1.0

    def _flip(self) -> bool:
        return self.noise > 0 and self._rng.random() < self.noise

    # -- answers ---------------------------------------------------------
    def answer_concept(self, concept: Concept) -> dict:
        """(action, weight, confidence) feedback for a single concept."""
        u = self.utility(concept.label)
        top = self._max_utility()
        return {
            "concept_id": concept.concept_id,
            "action": 1 if u > 0 else -1,
            "weight": u / top if top > 0 else 0.0,
            "confidence": 1.0,
        }

    def answer_concept_pair(self, left: Concept, right: Concept) -> str:
        ul, ur = self.utility(left.label), self.utility(right.label)
        winner = "left" if ul > ur else "right"
        if ul == ur:
            winner = "left" if left.label <= right.label else "right"
        if self._flip():
            winner = "right" if winner == "left" else "left"
        return winner

    def answer_summary_pair(self, left_sentences, right_sentences, references) -> str:
        vl = ground_truth_reward(self, left_sentences, references)
        vr = ground_truth_reward(self, right_sentences, references)
        winner = "left" if vl >= vr else "right"
        if self._flip():
            winner = "right" if winner == "left" else "left"
        return winner


def answer(user: SimUser, query):
    """Dispatch a query to the simulated user.

    Accepts a Concept (feedback request), a (Concept, Concept) pair, or a
    (summary_sentences, summary_sentences, references) triple.
    """
    if isinstance(query, Concept):
        return user.answer_concept(query)
    if isinstance(query, tuple) and len(query) == 2 and all(isinstance(q, Concept) for q in query):
        return user.answer_concept_pair(*query)
    if isinstance(query, tuple) and len(query) == 3:
        return user.answer_summary_pair(*query)
    raise UnknownTarget(f"cannot answer query of type {type(query)!r}")


def ground_truth_reward(user: SimUser, summary_sentences, references) -> float:
    """V = a*ROUGE-1 + b*ROUGE-2 - c*redundancy with the simulation coefficients."""
    if not references:
        raise EmptyReference("ground-truth reward needs reference summaries")
    cand = [t for s in summary_sentences for t in s]
    r1 = rouge_n(cand, references, n=1, mode="recall").value
    r2 = rouge_n(cand, references, n=2, mode="recall").value if len(cand) >= 2 else 0.0
    red = redundancy(summary_sentences)
    c = user.reward_coeffs
    return c.rouge1 * r1 + c.rouge2 * r2 - c.redundancy * red
