"""End-to-end simulation drivers: adaptive feedback loops and the full
preference -> ranker -> pool -> reward -> summary pipeline, plus the
interactive state machine the HTTP service exposes for preference mode.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import adaptive, exdos, prefs, summarizer
from .corpus import Corpus, extract_concepts
from .errors import BudgetExhausted, NotEnoughConcepts, SessionConverged
from .evaluation import SimUser, ground_truth_reward, rouge_n
from .exdos import Summary


def summary_tokens(corpus: Corpus, sentence_ids):
    return [t for sid in sentence_ids for t in corpus.sentences[sid].tokens]


def summary_sentences(corpus: Corpus, sentence_ids):
    return [corpus.sentences[sid].tokens for sid in sentence_ids]


# ---------------------------------------------------------------------
# adaptive loop
# ---------------------------------------------------------------------

def run_adaptive_simulation(corpus: Corpus, user: SimUser, rounds: int = 10,
                            budget: int = 50, seed: int = 0,
                            group_size: int = 3, unit: str = "unigram") -> list[dict]:
    """Drive an adaptive session with a simulated user; one record per round."""
    refs = corpus.reference_summaries or []
    session = adaptive.start_session(corpus, budget_words=budget, unit=unit, seed=seed)

    def record(round_no):
        ids = session.current_summary.sentence_ids
        toks = summary_tokens(corpus, ids)
        rec = {"round": round_no, "sentence_ids": list(ids)}
        if refs:
            rec["rouge1"] = rouge_n(toks, refs, n=1, mode="recall").value if toks else 0.0
            rec["rouge2"] = rouge_n(toks, refs, n=2, mode="recall").value if toks else 0.0
        return rec

    records = [record(0)]
    for r in range(1, rounds + 1):
        try:
            group = adaptive.next_query_group(session, group_size)
        except SessionConverged:
            records.append({**records[-1], "round": r})
            continue
        for item in group:
            ans = user.answer_concept(item["concept"])
            adaptive.apply_feedback(session, adaptive.ConceptFeedback(
                concept_id=ans["concept_id"],
                action=ans["action"],
                weight=ans["weight"],
                confidence=ans["confidence"],
            ))
        records.append(record(r))
    return records


def trajectory_csv(records) -> str:
    """Stable CSV of a per-round trajectory (deterministic bytes)."""
    cols = ["round", "rouge1", "rouge2", "sentence_ids"]
    lines = [",".join(cols)]
    for rec in records:
        lines.append(",".join([
            str(rec["round"]),
            f"{rec.get('rouge1', 0.0):.6f}",
            f"{rec.get('rouge2', 0.0):.6f}",
            '"' + " ".join(str(i) for i in rec["sentence_ids"]) + '"',
        ]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------
# full preference pipeline
# ---------------------------------------------------------------------

def collect_concept_preferences(concepts, corpus, user: SimUser, budget: int,
                                seed: int = 0):
    """Active loop: heuristic queries answered by the simulated user."""
    state = prefs.build_partition_state(concepts, corpus, budget=budget)
    prefs.partition_concepts(state, seed=seed)
    by_id = {c.concept_id: c for c in concepts}
    history = []
    for _ in range(budget):
        try:
            pair = prefs.next_query(state, history, corpus)
        except (BudgetExhausted, NotEnoughConcepts):
            break
        pair.winner = user.answer_concept_pair(by_id[pair.left], by_id[pair.right])
        history.append(pair)
    return history


def collect_summary_preferences(pool, corpus, user: SimUser, budget: int,
                                rank_map, word_budget, references, seed: int = 0):
    """Query the user on seeded distinct pool pairs; return pair_ce samples."""
    n = len(pool.summaries)
    rng = np.random.default_rng(seed)
    all_pairs = list(itertools.combinations(range(n), 2))
    if not all_pairs:
        return []
    take = min(budget, len(all_pairs))
    idx = rng.choice(len(all_pairs), size=take, replace=False)
    samples = []
    for i in sorted(idx):
        a, b = all_pairs[i]
        ya, yb = pool.summaries[a], pool.summaries[b]
        fa = summarizer.summary_features(ya.sentence_ids, corpus, rank_map, word_budget, references)
        fb = summarizer.summary_features(yb.sentence_ids, corpus, rank_map, word_budget, references)
        winner = user.answer_summary_pair(
            summary_sentences(corpus, ya.sentence_ids),
            summary_sentences(corpus, yb.sentence_ids),
            references,
        )
        samples.append((fa, fb, 1.0 if winner == "left" else 0.0))
    return samples


def run_sumrecom_pipeline(corpus: Corpus, user: SimUser, concept_budget: int = 15,
                          summary_budget: int = 8, word_budget: int = 50,
                          seed: int = 0, unit: str = "unigram",
                          pool_size: int = 10, use_policy: bool = False,
                          concept_lr: float = 0.001, reward_lr: float = 0.005,
                          episodes: int = 600) -> dict:
    """Concept prefs -> utility -> pool -> summary prefs -> reward -> summary."""
    refs = corpus.reference_summaries or []
    concepts = extract_concepts(corpus, unit)
    phi = prefs.phi_map(concepts, corpus)

    history = collect_concept_preferences(concepts, corpus, user, concept_budget, seed)
    if history:
        ranker = prefs.fit_utility(history, phi, lr=concept_lr)
    else:
        ranker = prefs.RankerModel(w=np.zeros(len(next(iter(phi.values())))), phi_schema=())
    rank_map = prefs.rank(ranker, concepts, phi)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pool = summarizer.generate_pool(
            corpus, ranker, word_budget, pool_size=pool_size, seed=seed, rank_map=rank_map)

    samples = collect_summary_preferences(
        pool, corpus, user, summary_budget, rank_map, word_budget, refs, seed)
    if len(samples) >= 2:
        reward = summarizer.fit_reward(samples, mode="pair_ce", lr=reward_lr)
    else:
        reward = summarizer.RewardModel(w=np.zeros(len(summarizer.LAMBDA_SCHEMA)), mode="pair_ce")

    env = summarizer.DraftEnv(corpus, word_budget, reward, rank_map, refs)
    if use_policy:
        policy = summarizer.learn_policy(env, episodes=episodes, epsilon0=0.3, seed=seed)
        final = summarizer.greedy_rollout(env, policy)
    else:
        policy = None
        final = summarizer.best_summary(
            pool, reward=reward, corpus=corpus, rank_map=rank_map,
            budget=word_budget, references=refs)

    out = {
        "summary": final,
        "pool_size": len(pool.summaries),
        "n_concept_prefs": len(history),
        "n_summary_prefs": len(samples),
        "rank_map": rank_map,
        "reward": reward,
        "policy": policy,
    }
    if refs:
        out["ground_truth_v"] = ground_truth_reward(
            user, summary_sentences(corpus, final.sentence_ids), refs)
    return out


def generic_baseline_summary(corpus: Corpus, word_budget: int, seed: int = 0) -> Summary:
    """The non-personalised model summary used as the comparison baseline."""
    data = exdos.labeled_set_from_corpus(corpus)
    model = exdos.train(data, K=2, seed=seed)
    return exdos.select_summary(model, corpus, word_budget, seed=seed)


# ---------------------------------------------------------------------
# interactive preference session (state machine behind the HTTP API)
# ---------------------------------------------------------------------

@dataclass
class SumRecomSession:
    """Replayable two-phase interactive session: concept preferences, then
    summary preferences, then a converged final summary."""

    corpus: Corpus
    word_budget: int
    unit: str = "unigram"
    seed: int = 0
    concept_budget: int = 10
    summary_budget: int = 5
    pool_size: int = 8
    event_log: list = field(default_factory=list)

    def __post_init__(self):
        self.concepts = extract_concepts(self.corpus, self.unit)
        self.by_id = {c.concept_id: c for c in self.concepts}
        self.phi = prefs.phi_map(self.concepts, self.corpus)
        self.state = prefs.build_partition_state(
            self.concepts, self.corpus, budget=self.concept_budget)
        prefs.partition_concepts(self.state, seed=self.seed)
        self.history: list[prefs.PreferencePair] = []
        self.pool = None
        self.rank_map = None
        self.ranker = None
        self.reward = None
        self._summary_pairs: list = []
        self._summary_samples: list = []
        self._pending = None
        self._final = None
        self._advance()

    # -- phases ----------------------------------------------------------
    @property
    def phase(self) -> str:
        if self._final is not None:
            return "converged"
        return "concept" if len(self.history) < self.concept_budget else "summary"

    @property
    def converged(self) -> bool:
        return self._final is not None

    def _advance(self):
        if self._final is not None:
            self._pending = None
            return
        if self.phase == "concept":
            try:
                pair = prefs.next_query(self.state, self.history, self.corpus)
                self._pending = ("concept", pair)
                return
            except (BudgetExhausted, NotEnoughConcepts):
                self._finish_concepts()
        if self.rank_map is None:
            self._finish_concepts()
        if self._summary_pairs:
            self._pending = ("summary", self._summary_pairs[0])
            return
        self._finalise()

    def _finish_concepts(self):
        if self.history:
            self.ranker = prefs.fit_utility(self.history, self.phi)
        else:
            dim = len(next(iter(self.phi.values())))
            self.ranker = prefs.RankerModel(w=np.zeros(dim), phi_schema=())
        self.rank_map = prefs.rank(self.ranker, self.concepts, self.phi)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            self.pool = summarizer.generate_pool(
                self.corpus, self.ranker, self.word_budget,
                pool_size=self.pool_size, seed=self.seed, rank_map=self.rank_map)
        n = len(self.pool.summaries)
        rng = np.random.default_rng(self.seed)
        all_pairs = list(itertools.combinations(range(n), 2))
        take = min(self.summary_budget, len(all_pairs))
        if take:
            idx = rng.choice(len(all_pairs), size=take, replace=False)
            self._summary_pairs = [all_pairs[i] for i in sorted(idx)]
        else:
            self._summary_pairs = []

    def _finalise(self):
        if len(self._summary_samples) >= 2:
            self.reward = summarizer.fit_reward(self._summary_samples, mode="pair_ce")
        else:
            self.reward = summarizer.RewardModel(
                w=np.zeros(len(summarizer.LAMBDA_SCHEMA)), mode="pair_ce")
        refs = self.corpus.reference_summaries
        if self.pool and self.pool.summaries:
            self._final = summarizer.best_summary(
                self.pool, reward=self.reward, corpus=self.corpus,
                rank_map=self.rank_map, budget=self.word_budget, references=refs)
        else:
            self._final = Summary(sentence_ids=(), word_count=0,
                                  budget=self.word_budget)
        self._pending = None

    # -- public surface ---------------------------------------------------
    def pending_query(self) -> dict | None:
        if self._pending is None:
            return None
        kind, payload = self._pending
        if kind == "concept":
            return {
                "kind": "concept_pair",
                "left": {"concept_id": payload.left, "label": self.by_id[payload.left].label},
                "right": {"concept_id": payload.right, "label": self.by_id[payload.right].label},
            }
        a, b = payload
        ya, yb = self.pool.summaries[a], self.pool.summaries[b]
        return {
            "kind": "summary_pair",
            "left": {"index": a, "sentence_ids": list(ya.sentence_ids),
                     "text": [self.corpus.sentences[i].text for i in ya.sentence_ids]},
            "right": {"index": b, "sentence_ids": list(yb.sentence_ids),
                      "text": [self.corpus.sentences[i].text for i in yb.sentence_ids]},
        }

    def apply_answer(self, winner: str):
        if winner not in ("left", "right"):
            raise ValueError("winner must be 'left' or 'right'")
        if self._pending is None:
            raise SessionConverged("session has no pending query")
        kind, payload = self._pending
        if kind == "concept":
            payload.winner = winner
            self.history.append(payload)
            self.event_log.append({
                "round": len(self.event_log), "kind": "concept_pair",
                "target": [payload.left, payload.right], "winner": winner,
            })
        else:
            a, b = payload
            ya, yb = self.pool.summaries[a], self.pool.summaries[b]
            refs = self.corpus.reference_summaries or []
            fa = summarizer.summary_features(
                ya.sentence_ids, self.corpus, self.rank_map, self.word_budget, refs)
            fb = summarizer.summary_features(
                yb.sentence_ids, self.corpus, self.rank_map, self.word_budget, refs)
            self._summary_samples.append((fa, fb, 1.0 if winner == "left" else 0.0))
            self._summary_pairs.pop(0)
            self.event_log.append({
                "round": len(self.event_log), "kind": "summary_pair",
                "target": [a, b], "winner": winner,
            })
        self._advance()

    def current_summary(self) -> Summary | None:
        return self._final

    def header(self) -> dict:
        return {
            "schema_version": 1,
            "word_budget": self.word_budget,
            "unit": self.unit,
            "seed": self.seed,
            "concept_budget": self.concept_budget,
            "summary_budget": self.summary_budget,
            "pool_size": self.pool_size,
        }

    def save(self, dirpath):
        d = Path(dirpath)
        d.mkdir(parents=True, exist_ok=True)
        (d / "header.json").write_text(json.dumps(self.header(), sort_keys=True), encoding="utf-8")
        with open(d / "events.jsonl", "w", encoding="utf-8") as fh:
            for ev in self.event_log:
                fh.write(json.dumps(ev, sort_keys=True) + "\n")

    @classmethod
    def load(cls, dirpath, corpus: Corpus) -> "SumRecomSession":
        d = Path(dirpath)
        header = json.loads((d / "header.json").read_text(encoding="utf-8"))
        session = cls(
            corpus=corpus,
            word_budget=header["word_budget"],
            unit=header["unit"],
            seed=header["seed"],
            concept_budget=header["concept_budget"],
            summary_budget=header["summary_budget"],
            pool_size=header["pool_size"],
        )
        events_path = d / "events.jsonl"
        if events_path.exists():
            for line in events_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    session.apply_answer(json.loads(line)["winner"])
        return session
