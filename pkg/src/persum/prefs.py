"""Pairwise concept preference extraction and utility fitting.

Queries are chosen by a diversity-first heuristic over a concept
partition; answered pairs feed a Bradley-Terry likelihood whose linear
utility gives the concept ranking used downstream.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import Concept, Corpus
from .errors import (
    BudgetExhausted,
    NonFinite,
    NotEnoughConcepts,
    UnknownStrategy,
)

EXACT_PARTITION_LIMIT = 8
DELTA_SCHEMA = ("levenshtein", "content_jaccard", "embedding_cosine")
_SUFFIXES = ("ing", "ed", "es", "s", "ly")


@dataclass
class PreferencePair:
    left: int
    right: int
    winner: str | None = None  # "left" | "right"
    round: int = 0

    def __post_init__(self):
        if self.left == self.right:
            raise ValueError("a preference pair needs two distinct concepts")

    @property
    def key(self):
        return (min(self.left, self.right), max(self.left, self.right))


@dataclass
class RankerModel:
    w: np.ndarray
    phi_schema: tuple
    fit_log: list = field(default_factory=list)

    def utility(self, phi_vec) -> float:
        return float(self.w @ np.asarray(phi_vec, dtype=float))

    def to_json(self) -> str:
        return json.dumps(
            {"w": np.asarray(self.w).tolist(), "phi_schema": list(self.phi_schema)},
            sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RankerModel":
        obj = json.loads(text)
        return cls(w=np.array(obj["w"], dtype=float), phi_schema=tuple(obj["phi_schema"]))


@dataclass
class PartitionState:
    concepts: list[Concept]
    pairwise_prob: dict
    clusters: list[set] = field(default_factory=list)
    queried_pairs: set = field(default_factory=set)
    budget: int = 10
    round: int = 0


# ---------------------------------------------------------------------
# concept features
# ---------------------------------------------------------------------

def concept_phi(concept: Concept, corpus: Corpus) -> np.ndarray:
    """Concept feature vector: mention sentences' features, averaged."""
    rows = [corpus.sentences[sid].features for sid in sorted(concept.mention_sentence_ids)]
    return np.mean(rows, axis=0)


def phi_map(concepts, corpus) -> dict[int, np.ndarray]:
    return {c.concept_id: concept_phi(c, corpus) for c in concepts}


def _levenshtein(a: str, b: str) -> int:
    if a == b:
        return 0
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def _stem_lite(token: str) -> str:
    for suf in _SUFFIXES:
        if token.endswith(suf) and len(token) > len(suf) + 2:
            return token[: -len(suf)]
    return token


def delta_features(c1: Concept, c2: Concept, corpus: Corpus | None = None) -> np.ndarray:
    """Symmetric (lexical, content-overlap, embedding) similarity features."""
    lev = 1.0 - _levenshtein(c1.label, c2.label) / max(len(c1.label), len(c2.label), 1)
    t1 = {_stem_lite(t) for t in c1.tokens}
    t2 = {_stem_lite(t) for t in c2.tokens}
    jacc = len(t1 & t2) / len(t1 | t2) if (t1 | t2) else 0.0
    cos = 0.0
    if corpus is not None and corpus.embeddings is not None:
        from .corpus import similarity
        try:
            cos = similarity(list(c1.tokens), list(c2.tokens), "embedding", corpus)
        except Exception:
            cos = 0.0
    return np.array([lev, jacc, cos])


def concept_similarity(c1: Concept, c2: Concept, theta=None,
                       corpus: Corpus | None = None) -> float:
    """Coreference probability sigmoid(theta . delta(c1, c2)); symmetric."""
    theta = np.ones(len(DELTA_SCHEMA)) if theta is None else np.asarray(theta, dtype=float)
    z = float(theta @ delta_features(c1, c2, corpus))
    z = min(30.0, max(-30.0, z))
    return 1.0 / (1.0 + np.exp(-z))


# ---------------------------------------------------------------------
# correlation-style partitioning
# ---------------------------------------------------------------------

def build_partition_state(concepts, corpus=None, theta=None, budget: int = 10) -> PartitionState:
    probs = {}
    for a, b in itertools.combinations(sorted(c.concept_id for c in concepts), 2):
        ca = next(c for c in concepts if c.concept_id == a)
        cb = next(c for c in concepts if c.concept_id == b)
        probs[(a, b)] = concept_similarity(ca, cb, theta, corpus)
    return PartitionState(concepts=list(concepts), pairwise_prob=probs, budget=budget)


def partition_objective(clusters, pairwise_prob) -> float:
    """Sum of p for within-cluster pairs and (1-p) for split pairs."""
    member = {}
    for ci, cluster in enumerate(clusters):
        for cid in cluster:
            member[cid] = ci
    total = 0.0
    for (a, b), p in pairwise_prob.items():
        same = member.get(a) == member.get(b)
        total += p if same else (1.0 - p)
    return total


def _all_partitions(items):
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for part in _all_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [part[i] | {head}] + part[i + 1:]
        yield part + [{head}]


def partition_concepts(state: PartitionState, seed: int = 0, restarts: int = 5) -> list[set]:
    """Partition maximising agreement with the pairwise probabilities.

    Transitivity holds structurally because clusters are equivalence
    classes. Small inputs are solved exactly; larger ones by seeded
    local search (move-one / merge) with restarts.
    """
    ids = sorted(c.concept_id for c in state.concepts)
    probs = state.pairwise_prob
    if len(ids) <= EXACT_PARTITION_LIMIT:
        best, best_obj = None, -np.inf
        for part in _all_partitions(ids):
            obj = partition_objective(part, probs)
            if obj > best_obj + 1e-12:
                best, best_obj = [set(s) for s in part], obj
        state.clusters = sorted(best, key=lambda s: min(s))
        return state.clusters

    rng = np.random.default_rng(seed)
    best, best_obj = None, -np.inf
    for restart in range(max(1, restarts)):
        if restart == 0:
            clusters = [{i} for i in ids]
        elif restart == 1:
            clusters = [set(ids)]
        else:
            k = int(rng.integers(2, max(3, len(ids) // 2)))
            clusters = [set() for _ in range(k)]
            for cid in ids:
                clusters[int(rng.integers(k))].add(cid)
            clusters = [c for c in clusters if c]
        improved = True
        while improved:
            improved = False
            obj = partition_objective(clusters, probs)
            for cid in ids:
                src = next(i for i, cl in enumerate(clusters) if cid in cl)
                best_move, best_val = None, obj
                targets = list(range(len(clusters))) + ([len(clusters)] if len(clusters[src]) > 1 else [])
                for tgt in targets:
                    if tgt == src:
                        continue
                    trial = [set(cl) for cl in clusters]
                    trial[src].discard(cid)
                    if tgt == len(clusters):
                        trial.append({cid})
                    else:
                        trial[tgt].add(cid)
                    trial = [cl for cl in trial if cl]
                    val = partition_objective(trial, probs)
                    if val > best_val + 1e-12:
                        best_move, best_val = trial, val
                if best_move is not None:
                    clusters = best_move
                    obj = best_val
                    improved = True
            # merge pass
            for i, j in itertools.combinations(range(len(clusters)), 2):
                trial = [set(cl) for k, cl in enumerate(clusters) if k not in (i, j)]
                trial.append(clusters[i] | clusters[j])
                val = partition_objective(trial, probs)
                if val > obj + 1e-12:
                    clusters = trial
                    obj = val
                    improved = True
                    break
        obj = partition_objective(clusters, probs)
        if obj > best_obj + 1e-12:
            best, best_obj = clusters, obj
    state.clusters = sorted((set(c) for c in best), key=lambda s: min(s))
    return state.clusters


# ---------------------------------------------------------------------
# active pair selection
# ---------------------------------------------------------------------

def _pair_similarity(pair_a, pair_b, sim_lookup) -> float:
    """Mean of the four cross concept similarities between two pairs."""
    (a1, a2), (b1, b2) = pair_a, pair_b
    return (sim_lookup(a1, b1) + sim_lookup(a1, b2)
            + sim_lookup(a2, b1) + sim_lookup(a2, b2)) / 4.0


def _sim_lookup(state: PartitionState, corpus=None, theta=None):
    cache = dict(state.pairwise_prob)
    by_id = {c.concept_id: c for c in state.concepts}

    def look(a, b):
        if a == b:
            return 1.0
        key = (min(a, b), max(a, b))
        if key not in cache:
            cache[key] = concept_similarity(by_id[a], by_id[b], theta, corpus)
        return cache[key]

    return look


def _candidate_pairs(state: PartitionState, cross: bool):
    member = {}
    for ci, cluster in enumerate(state.clusters):
        for cid in cluster:
            member[cid] = ci
    ids = sorted(member)
    out = []
    for a, b in itertools.combinations(ids, 2):
        if (a, b) in state.queried_pairs:
            continue
        if cross == (member[a] != member[b]):
            out.append((a, b))
    return out


def next_query(state: PartitionState, history=None, corpus=None, theta=None) -> PreferencePair:
    """Pick the next pair: across clusters early, within clusters late,
    always the pair least similar to anything already queried."""
    if len(state.concepts) < 2:
        raise NotEnoughConcepts("need at least two concepts to build a pair")
    if state.round >= state.budget:
        raise BudgetExhausted(f"query budget of {state.budget} reached")
    if not state.clusters:
        partition_concepts(state)
    history = history if history is not None else []
    look = _sim_lookup(state, corpus, theta)

    early = state.round < state.budget / 2
    candidates = _candidate_pairs(state, cross=early)
    if not candidates:
        candidates = _candidate_pairs(state, cross=not early)
    if not candidates:
        raise BudgetExhausted("all concept pairs already queried")

    # novelty(pair) = max similarity to anything queried; maintained
    # incrementally because it only grows as pairs are added
    queried = {p.key if isinstance(p, PreferencePair) else tuple(p) for p in history}
    queried |= {tuple(q) for q in state.queried_pairs}
    cache = getattr(state, "_novelty_cache", None)
    if cache is None or cache["seen"] != queried:
        ids = sorted(c.concept_id for c in state.concepts)
        novelty = {}
        for pr in itertools.combinations(ids, 2):
            novelty[pr] = max(
                (_pair_similarity(pr, q, look) for q in queried), default=0.0)
        cache = {"seen": set(queried), "novelty": novelty}
        state._novelty_cache = cache

    novelty = cache["novelty"]
    best = min(candidates, key=lambda pr: (novelty.get(pr, 0.0), pr))
    state.queried_pairs.add(best)
    state.round += 1
    for pr in novelty:
        novelty[pr] = max(novelty[pr], _pair_similarity(pr, best, look))
    cache["seen"].add(best)
    return PreferencePair(left=best[0], right=best[1], round=state.round)


# ---------------------------------------------------------------------
# Bradley-Terry fitting and ranking
# ---------------------------------------------------------------------

def _win_prob(u_winner: float, u_loser: float) -> float:
    z = min(500.0, max(-500.0, u_loser - u_winner))
    return 1.0 / (1.0 + np.exp(z))


def _log_likelihood(w, prefs, phi):
    ll = 0.0
    for p in prefs:
        a, b = (p.left, p.right) if p.winner == "left" else (p.right, p.left)
        h = _win_prob(float(w @ phi[a]), float(w @ phi[b]))
        ll += np.log(max(h, 1e-300))
    return ll


def fit_utility(prefs, phi: dict, lr: float = 0.001, epochs: int = 300,
                mode: str = "batch", seed: int = 0) -> RankerModel:
    """Maximum-likelihood utility weights by gradient ascent.

    Full-batch mode guards each step with halving so the recorded
    likelihood never decreases; stochastic mode takes raw per-sample
    steps with a seeded shuffle.
    """
    if not prefs:
        raise NotEnoughConcepts("need at least one answered preference")
    dim = len(next(iter(phi.values())))
    w = np.zeros(dim)
    log = [_log_likelihood(w, prefs, phi)]

    if mode == "stochastic":
        rng = np.random.default_rng(seed)
        for _ in range(epochs):
            order = rng.permutation(len(prefs))
            for idx in order:
                p = prefs[idx]
                a, b = (p.left, p.right) if p.winner == "left" else (p.right, p.left)
                h = _win_prob(float(w @ phi[a]), float(w @ phi[b]))
                w = w + lr * (1.0 - h) * (phi[a] - phi[b])
            if not np.all(np.isfinite(w)):
                raise NonFinite(f"utility weights diverged at lr={lr}")
            log.append(_log_likelihood(w, prefs, phi))
        return RankerModel(w=w, phi_schema=tuple(f"phi{i}" for i in range(dim)), fit_log=log)

    step = lr
    for _ in range(epochs):
        grad = np.zeros(dim)
        for p in prefs:
            a, b = (p.left, p.right) if p.winner == "left" else (p.right, p.left)
            h = _win_prob(float(w @ phi[a]), float(w @ phi[b]))
            grad += (1.0 - h) * (phi[a] - phi[b])
        if not np.all(np.isfinite(grad)):
            raise NonFinite(f"gradient diverged at lr={lr}")
        trial_step = step
        cur = log[-1]
        for _ in range(30):
            w_new = w + trial_step * grad
            ll = _log_likelihood(w_new, prefs, phi)
            if ll >= cur:
                break
            trial_step /= 2.0
        else:
            w_new, ll = w, cur
        w = w_new
        step = min(trial_step * 1.5, 1e3 * lr)
        log.append(ll)
        if abs(log[-1] - log[-2]) < 1e-12:
            break
    return RankerModel(w=w, phi_schema=tuple(f"phi{i}" for i in range(dim)), fit_log=log)


def rank(model: RankerModel, concepts, phi: dict) -> dict[int, int]:
    """R(c) = number of concepts with strictly lower utility; ties share R."""
    utils = {c.concept_id: model.utility(phi[c.concept_id]) for c in concepts}
    out = {}
    for cid, u in utils.items():
        out[cid] = sum(1 for v in utils.values() if u > v + 1e-12)
    return out


# ---------------------------------------------------------------------
# baseline query strategies
# ---------------------------------------------------------------------

STRATEGIES = ("random", "uncertainty", "change", "committee", "conformal", "bandit")


def _unqueried(concept_ids, queried):
    return [p for p in itertools.combinations(sorted(concept_ids), 2) if p not in queried]


def baseline_strategies(name: str):
    """Return select(concept_ids, queried, history, phi, model, rng, sim=None) -> pair.

    `sim` is an optional (id, id) -> similarity callable; the conformal
    strategy uses it when given (falling back to phi cosine) so it shares
    the heuristic's similarity source without its cluster schedule.
    """
    if name not in STRATEGIES:
        raise UnknownStrategy(f"unknown strategy '{name}' (want one of {STRATEGIES})")

    def fit_current(history, phi):
        answered = [p for p in history if p.winner]
        if not answered:
            return None
        return fit_utility(answered, phi, epochs=60)

    def random_select(concept_ids, queried, history, phi, model, rng, sim=None):
        pairs = _unqueried(concept_ids, queried)
        if not pairs:
            raise BudgetExhausted("all pairs queried")
        return pairs[int(rng.integers(len(pairs)))]

    def uncertainty_select(concept_ids, queried, history, phi, model, rng, sim=None):
        pairs = _unqueried(concept_ids, queried)
        if not pairs:
            raise BudgetExhausted("all pairs queried")
        m = model or fit_current(history, phi)
        if m is None:
            return pairs[0]
        return min(pairs, key=lambda pr: (abs(m.utility(phi[pr[0]]) - m.utility(phi[pr[1]])), pr))

    def change_select(concept_ids, queried, history, phi, model, rng, sim=None):
        pairs = _unqueried(concept_ids, queried)
        if not pairs:
            raise BudgetExhausted("all pairs queried")
        m = model or fit_current(history, phi)
        w = m.w if m is not None else np.zeros(len(next(iter(phi.values()))))

        def step_norm(pr):
            a, b = pr
            norms = []
            for win, lose in ((a, b), (b, a)):
                h = _win_prob(float(w @ phi[win]), float(w @ phi[lose]))
                norms.append(np.linalg.norm((1.0 - h) * (phi[win] - phi[lose])))
            return float(np.mean(norms))

        return max(pairs, key=lambda pr: (step_norm(pr), [-x for x in pr]))

    def committee_select(concept_ids, queried, history, phi, model, rng, sim=None):
        pairs = _unqueried(concept_ids, queried)
        if not pairs:
            raise BudgetExhausted("all pairs queried")
        answered = [p for p in history if p.winner]
        if len(answered) < 2:
            return pairs[int(rng.integers(len(pairs)))]
        members = []
        for _ in range(3):
            idx = rng.integers(0, len(answered), size=len(answered))
            boot = [answered[i] for i in idx]
            members.append(fit_utility(boot, phi, epochs=60))

        def disagreement(pr):
            a, b = pr
            probs = [_win_prob(m.utility(phi[a]), m.utility(phi[b])) for m in members]
            return float(np.var(probs))

        return max(pairs, key=lambda pr: (disagreement(pr), [-x for x in pr]))

    def conformal_select(concept_ids, queried, history, phi, model, rng, sim=None):
        pairs = _unqueried(concept_ids, queried)
        if not pairs:
            raise BudgetExhausted("all pairs queried")
        if not queried:
            return pairs[0]

        def phi_cos(a, b):
            pa, pb = phi[a], phi[b]
            na, nb = np.linalg.norm(pa), np.linalg.norm(pb)
            return float(pa @ pb / (na * nb)) if na > 0 and nb > 0 else 0.0

        look = sim or phi_cos

        def pair_sim(pr, q):
            return float(np.mean([look(a, b) for a in pr for b in q]))

        return min(pairs, key=lambda pr: (max(pair_sim(pr, q) for q in queried), pr))

    def bandit_select(concept_ids, queried, history, phi, model, rng, sim=None):
        if rng.random() < 0.2:
            return random_select(concept_ids, queried, history, phi, model, rng, sim)
        return uncertainty_select(concept_ids, queried, history, phi, model, rng, sim)

    return {
        "random": random_select,
        "uncertainty": uncertainty_select,
        "change": change_select,
        "committee": committee_select,
        "conformal": conformal_select,
        "bandit": bandit_select,
    }[name]


# ---------------------------------------------------------------------
# preference-log persistence
# ---------------------------------------------------------------------

def save_preference_log(prefs_list, concepts_by_id, path) -> None:
    """One answered pair per line: {round, left_label, right_label, winner}."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in prefs_list:
            fh.write(json.dumps({
                "round": p.round,
                "left_label": concepts_by_id[p.left].label,
                "right_label": concepts_by_id[p.right].label,
                "winner": p.winner,
            }, sort_keys=True) + "\n")


def load_preference_log(path, concepts_by_label) -> list[PreferencePair]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            out.append(PreferencePair(
                left=concepts_by_label[obj["left_label"]].concept_id,
                right=concepts_by_label[obj["right_label"]].concept_id,
                winner=obj["winner"],
                round=obj["round"],
            ))
    return out
