"""Interactive concept-feedback summarisation loop.

A session starts from the generic model summary, then folds user events
(concept accept/reject with weight and confidence, sentence rejections)
into a per-sentence objective and re-solves the budgeted selection after
every event. The event log is the session: replaying it reproduces the
state bit-exactly.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import exdos
from .corpus import Concept, Corpus, extract_concepts
from .errors import (
    InfeasibleBudget,
    SessionConverged,
    UnknownConcept,
    UnknownSentence,
)
from .exdos import ExDosHyper, ExDosModel, Summary

EPSILON_UNQUERIED = 0.01
EXACT_SOLVE_LIMIT = 15


@dataclass
class ConceptFeedback:
    concept_id: int
    action: int              # +1 accept, -1 reject
    weight: float            # in [0, 1]
    confidence: float = 1.0  # in (0, 1]
    round: int = 0

    def __post_init__(self):
        if self.action not in (1, -1):
            raise ValueError("action must be +1 or -1")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError("weight must be in [0, 1]")
        if not 0.0 < self.confidence <= 1.0:
            raise ValueError("confidence must be in (0, 1]")


@dataclass
class SentenceRejection:
    sentence_id: int
    round: int = 0


@dataclass
class SessionState:
    corpus: Corpus
    budget_words: int
    unit: str
    seed: int
    model: ExDosModel
    concepts: dict[int, Concept]
    sentence_weights: dict[int, float]
    queried: set[int] = field(default_factory=set)
    round: int = 0
    current_summary: Summary | None = None
    event_log: list[dict] = field(default_factory=list)
    hyper: ExDosHyper = field(default_factory=ExDosHyper)
    initial_summary: Summary | None = None

    def header(self) -> dict:
        return {
            "schema_version": 1,
            "budget_words": self.budget_words,
            "unit": self.unit,
            "seed": self.seed,
        }


def start_session(corpus: Corpus, budget_words: int, unit: str = "unigram",
                  seed: int = 0, model: ExDosModel | None = None,
                  hyper: ExDosHyper | None = None) -> SessionState:
    """Initialise a session: generic summary first, concepts ready to query."""
    hyper = hyper or ExDosHyper()
    if not corpus.featurized:
        raise InfeasibleBudget("corpus must be featurised before a session starts")
    if model is None:
        data = exdos.labeled_set_from_corpus(corpus)
        model = exdos.train(data, K=2, hyper=hyper, seed=seed)
    concepts = {c.concept_id: c for c in extract_concepts(corpus, unit)}
    initial = exdos.select_summary(model, corpus, budget_words, hyper=hyper, seed=seed)
    session = SessionState(
        corpus=corpus,
        budget_words=budget_words,
        unit=unit,
        seed=seed,
        model=model,
        concepts=concepts,
        sentence_weights={s.id: 1.0 for s in corpus.sentences},
        current_summary=initial,
        hyper=hyper,
        initial_summary=initial,
    )
    return session


def next_query_group(session: SessionState, group_size: int = 3) -> list[dict]:
    """Top unqueried concepts by salience, each with example sentences."""
    pending = [c for c in session.concepts.values() if c.status == "unqueried"]
    if not pending:
        raise SessionConverged("no unqueried concepts remain")
    pending.sort(key=lambda c: (-c.base_score, c.label))
    group = []
    for c in pending[:max(1, group_size)]:
        examples = [
            session.corpus.sentences[sid]
            for sid in sorted(c.mention_sentence_ids)[:3]
        ]
        group.append({"concept": c, "examples": examples})
    return group


def sentence_gain(session: SessionState, sentence_id: int) -> float:
    """Per-sentence objective contribution under the current concept state.

    Queried concepts contribute action * confidence * weight; unqueried
    ones a small epsilon-scaled salience so early summaries stay
    informative. Concepts count once per sentence.
    """
    gain = 0.0
    for cid in session.corpus.sentences[sentence_id].concept_ids:
        c = session.concepts[cid]
        if c.status == "unqueried":
            gain += EPSILON_UNQUERIED * c.base_score
        else:
            action = 1 if c.status == "accepted" else -1
            gain += action * c.confidence * c.user_weight
    return gain


def _record(session, event: dict):
    session.event_log.append(event)
    session.round += 1


def apply_feedback(session: SessionState, feedback) -> SessionState:
    """Fold one feedback event into the session and re-solve the summary."""
    if isinstance(feedback, ConceptFeedback):
        if feedback.concept_id not in session.concepts:
            raise UnknownConcept(f"no concept with id {feedback.concept_id}")
        c = session.concepts[feedback.concept_id]
        c.status = "accepted" if feedback.action == 1 else "rejected"
        c.user_weight = feedback.weight
        c.confidence = feedback.confidence
        session.queried.add(c.concept_id)
        _record(session, {
            "round": session.round,
            "kind": "concept",
            "target": feedback.concept_id,
            "action": feedback.action,
            "weight": feedback.weight,
            "confidence": feedback.confidence,
        })
    elif isinstance(feedback, SentenceRejection):
        if feedback.sentence_id not in session.sentence_weights:
            raise UnknownSentence(f"no sentence with id {feedback.sentence_id}")
        session.sentence_weights[feedback.sentence_id] = 0.0
        _record(session, {
            "round": session.round,
            "kind": "reject_sentence",
            "target": feedback.sentence_id,
        })
    else:
        raise UnknownConcept(f"unsupported feedback type {type(feedback)!r}")
    session.current_summary = solve(session)
    return session


# ---------------------------------------------------------------------
# the budgeted selection objective
# ---------------------------------------------------------------------

def _greedy_with_swap(items, gains, lengths, budget):
    order = sorted(items, key=lambda i: (-(gains[i] / lengths[i]), i))
    chosen = []
    used = 0
    for sid in order:
        if gains[sid] <= 0:
            continue
        if used + lengths[sid] <= budget:
            chosen.append(sid)
            used += lengths[sid]
    chosen = set(chosen)

    improved = True
    while improved:
        improved = False
        current_val = sum(gains[i] for i in chosen)
        best_move, best_val = None, current_val
        free = [i for i in items if i not in chosen]
        for sid in free:
            if used + lengths[sid] <= budget and gains[sid] > 0:
                val = current_val + gains[sid]
                if val > best_val + 1e-12:
                    best_move, best_val = ("add", sid, None), val
        for out in sorted(chosen):
            for inn in free:
                if used - lengths[out] + lengths[inn] <= budget:
                    val = current_val - gains[out] + gains[inn]
                    if val > best_val + 1e-12:
                        best_move, best_val = ("swap", out, inn), val
        if best_move:
            kind, a, b = best_move
            if kind == "add":
                chosen.add(a)
                used += lengths[a]
            else:
                chosen.discard(a)
                chosen.add(b)
                used += lengths[b] - lengths[a]
            improved = True
    return chosen


def _branch_and_bound(items, gains, lengths, budget):
    """Exact 0/1 knapsack on per-sentence gains (items sorted by ratio)."""
    order = sorted(items, key=lambda i: (-(gains[i] / lengths[i]), i))
    best_val = 0.0
    best_set: set = set()

    def bound(idx, used, val):
        # fractional relaxation over the remaining positive-gain items
        b = val
        room = budget - used
        for sid in order[idx:]:
            if gains[sid] <= 0:
                continue
            if lengths[sid] <= room:
                b += gains[sid]
                room -= lengths[sid]
            else:
                b += gains[sid] * room / lengths[sid]
                break
        return b

    def rec(idx, used, val, chosen):
        nonlocal best_val, best_set
        if val > best_val + 1e-12:
            best_val, best_set = val, set(chosen)
        if idx == len(order) or bound(idx, used, val) <= best_val + 1e-12:
            return
        sid = order[idx]
        if used + lengths[sid] <= budget:
            chosen.add(sid)
            rec(idx + 1, used + lengths[sid], val + gains[sid], chosen)
            chosen.discard(sid)
        rec(idx + 1, used, val, chosen)

    rec(0, 0, 0.0, set())
    return best_set


def solve(session: SessionState, budget_override: int | None = None) -> Summary:
    """Re-solve the selection objective for the current concept state."""
    budget = budget_override if budget_override is not None else session.budget_words
    if not session.event_log:
        # initialisation contract: the round-0 summary is the generic one
        return session.initial_summary
    lengths = {s.id: s.length_words for s in session.corpus.sentences}
    items = [
        s.id for s in session.corpus.sentences
        if session.sentence_weights[s.id] > 0 and 0 < s.length_words <= budget
    ]
    if not items:
        raise InfeasibleBudget(f"no selectable sentence fits within {budget} words")
    gains = {sid: sentence_gain(session, sid) for sid in items}

    if len(items) <= EXACT_SOLVE_LIMIT:
        chosen = _branch_and_bound(items, gains, lengths, budget)
    else:
        chosen = _greedy_with_swap(items, gains, lengths, budget)

    ids = tuple(sorted(chosen))
    objective = sum(gains[i] for i in ids)
    return Summary(
        sentence_ids=ids,
        word_count=sum(lengths[i] for i in ids),
        budget=budget,
        score_breakdown={"objective": float(objective)},
    )


def objective_value(session: SessionState, sentence_ids) -> float:
    """Objective of an arbitrary selection under the session state."""
    return float(sum(sentence_gain(session, sid) for sid in sentence_ids))


# ---------------------------------------------------------------------
# persistence and replay
# ---------------------------------------------------------------------

def save_session(session: SessionState, dirpath) -> None:
    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    (d / "header.json").write_text(json.dumps(session.header(), sort_keys=True), encoding="utf-8")
    with open(d / "events.jsonl", "w", encoding="utf-8") as fh:
        for ev in session.event_log:
            fh.write(json.dumps(ev, sort_keys=True) + "\n")
    (d / "model.json").write_text(session.model.to_json(), encoding="utf-8")


def replay(corpus: Corpus, header: dict, events: list[dict],
           model: ExDosModel | None = None) -> SessionState:
    """Rebuild a session by folding the event log over a fresh start."""
    session = start_session(
        corpus,
        budget_words=header["budget_words"],
        unit=header["unit"],
        seed=header["seed"],
        model=model,
    )
    for ev in events:
        if ev["kind"] == "concept":
            fb = ConceptFeedback(
                concept_id=ev["target"],
                action=ev["action"],
                weight=ev["weight"],
                confidence=ev["confidence"],
                round=ev["round"],
            )
        elif ev["kind"] == "reject_sentence":
            fb = SentenceRejection(sentence_id=ev["target"], round=ev["round"])
        else:
            raise UnknownConcept(f"unknown event kind {ev['kind']!r}")
        apply_feedback(session, fb)
    return session


def load_session(dirpath, corpus: Corpus) -> SessionState:
    d = Path(dirpath)
    header = json.loads((d / "header.json").read_text(encoding="utf-8"))
    events = []
    events_path = d / "events.jsonl"
    if events_path.exists():
        for line in events_path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                events.append(json.loads(line))
    model = None
    model_path = d / "model.json"
    if model_path.exists():
        model = ExDosModel.from_json(model_path.read_text(encoding="utf-8"))
    return replay(corpus, header, events, model=model)


def snapshot(session: SessionState) -> SessionState:
    """Cheap read-only copy for concurrent readers between events."""
    return copy.copy(session)
