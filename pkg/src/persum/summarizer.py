"""Ranked-concept summary pool, reward learning, and TD policy search.

The pool restricts the exponential summary space to tractable candidates;
rewards are fitted from point scores or summary preferences; the policy
is a linear state-value function over draft-summary features, learnt by
episodic TD(0) where only termination pays out.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus
from .errors import EmptyPool, NonFinite, PoolTooSmallWarning
from .evaluation import rouge_n
from .exdos import Summary

EXACT_POOL_LIMIT = 12

LAMBDA_SCHEMA = (
    "mean_concept_rank",
    "top_decile_coverage",
    "length_ratio",
    "redundancy",
    "rouge1",
    "rouge2",
)


@dataclass
class RewardModel:
    w: np.ndarray
    mode: str  # point_mse | pair_ce
    schema: tuple = LAMBDA_SCHEMA
    fit_log: list = field(default_factory=list)

    def value(self, features) -> float:
        return float(self.w @ np.asarray(features, dtype=float))

    def to_json(self) -> str:
        return json.dumps({
            "mode": self.mode,
            "w": np.asarray(self.w).tolist(),
            "schema": list(self.schema),
            "training_meta": {"epochs": max(0, len(self.fit_log) - 1),
                              "final_loss": self.fit_log[-1] if self.fit_log else None},
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RewardModel":
        obj = json.loads(text)
        return cls(w=np.array(obj["w"], dtype=float), mode=obj["mode"],
                   schema=tuple(obj["schema"]))


@dataclass
class Policy:
    theta: np.ndarray
    epsilon0: float
    episodes: int
    eta: float = 0.01

    def value(self, features) -> float:
        return float(self.theta @ np.asarray(features, dtype=float))

    def to_json(self) -> str:
        return json.dumps({
            "mode": "td0_policy",
            "theta": np.asarray(self.theta).tolist(),
            "schema": list(LAMBDA_SCHEMA),
            "training_meta": {"episodes": self.episodes, "epsilon0": self.epsilon0,
                              "eta": self.eta},
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Policy":
        obj = json.loads(text)
        meta = obj["training_meta"]
        return cls(theta=np.array(obj["theta"], dtype=float),
                   epsilon0=meta["epsilon0"], episodes=meta["episodes"],
                   eta=meta["eta"])


@dataclass
class SummaryPool:
    summaries: list[Summary]
    flagged: bool = False  # true when fewer than requested distinct summaries exist


# ---------------------------------------------------------------------
# draft features
# ---------------------------------------------------------------------

def internal_redundancy(sentence_ids, corpus: Corpus) -> float:
    """Pairwise embedding similarity inside a summary over sentence count."""
    ids = list(sentence_ids)
    if len(ids) < 2:
        return 0.0
    total = 0.0
    for i in range(len(ids)):
        for j in range(i):
            total += corpus.sentence_cosine(ids[i], ids[j])
    return total / len(ids)


def summary_features(sentence_ids, corpus: Corpus, rank_map: dict,
                     budget: int, references=None) -> np.ndarray:
    """lambda(y): rank coverage, top-decile coverage, length, redundancy,
    and the two ROUGE terms (zero-filled when no references exist)."""
    ids = sorted(sentence_ids)
    covered = set()
    for sid in ids:
        covered |= corpus.sentences[sid].concept_ids & rank_map.keys()
    n_concepts = len(rank_map)
    if covered and n_concepts > 1:
        mean_rank = float(np.mean([rank_map[c] for c in covered])) / (n_concepts - 1)
    else:
        mean_rank = 0.0
    n_top = max(1, n_concepts // 10)
    top = {c for c, _ in sorted(rank_map.items(), key=lambda kv: (-kv[1], kv[0]))[:n_top]}
    top_cov = len(covered & top) / len(top) if top else 0.0
    words = sum(corpus.sentences[i].length_words for i in ids)
    length_ratio = min(1.0, words / budget) if budget > 0 else 0.0
    red = internal_redundancy(ids, corpus)
    r1 = r2 = 0.0
    if references:
        cand = [t for i in ids for t in corpus.sentences[i].tokens]
        if cand:
            r1 = rouge_n(cand, references, n=1, mode="recall").value
            r2 = rouge_n(cand, references, n=2, mode="recall").value
    return np.array([mean_rank, top_cov, length_ratio, red, r1, r2])


# ---------------------------------------------------------------------
# pool generation
# ---------------------------------------------------------------------

def coverage_value(sentence_ids, corpus: Corpus, weights: dict) -> float:
    """Concept-coverage objective: each covered concept counts once."""
    covered = set()
    for sid in sentence_ids:
        covered |= corpus.sentences[sid].concept_ids & weights.keys()
    return float(sum(weights[c] for c in covered))


def _greedy_cover(items, corpus, weights, lengths, budget, order_noise=None):
    chosen: list[int] = []
    used = 0
    covered: set = set()
    remaining = set(items)
    while True:
        best_sid, best_gain = None, 0.0
        for sid in sorted(remaining):
            if used + lengths[sid] > budget:
                continue
            fresh = (corpus.sentences[sid].concept_ids & weights.keys()) - covered
            gain = sum(weights[c] for c in fresh) / lengths[sid]
            if order_noise is not None:
                gain *= order_noise.get(sid, 1.0)
            if gain > best_gain + 1e-12:
                best_sid, best_gain = sid, gain
        if best_sid is None:
            break
        chosen.append(best_sid)
        used += lengths[best_sid]
        covered |= corpus.sentences[best_sid].concept_ids & weights.keys()
        remaining.discard(best_sid)
    return chosen


def _swap_improve(chosen, items, corpus, weights, lengths, budget):
    chosen = set(chosen)
    improved = True
    while improved:
        improved = False
        cur = coverage_value(chosen, corpus, weights)
        used = sum(lengths[i] for i in chosen)
        for out in sorted(chosen):
            for inn in sorted(set(items) - chosen):
                if used - lengths[out] + lengths[inn] > budget:
                    continue
                trial = (chosen - {out}) | {inn}
                val = coverage_value(trial, corpus, weights)
                if val > cur + 1e-12:
                    chosen, cur = trial, val
                    used = sum(lengths[i] for i in chosen)
                    improved = True
                    break
            if improved:
                break
    return chosen


def generate_pool(corpus: Corpus, ranker, budget: int, pool_size: int = 10,
                  seed: int = 0, concepts=None, phi=None,
                  rank_map: dict | None = None) -> SummaryPool:
    """Distinct high-coverage summaries under the word budget.

    Weights are the ranking values of the fitted utility model. Small
    sentence sets are solved exactly for the leading member; diversity
    comes from seeded perturbations of the greedy order. Members with
    above-median internal redundancy are dropped (the argmax member is
    always retained).
    """
    from .prefs import rank as rank_fn

    if rank_map is None:
        if concepts is None or phi is None:
            raise ValueError("generate_pool needs concepts+phi or an explicit rank_map")
        rank_map = rank_fn(ranker, concepts, phi)
    weights = {cid: float(r) for cid, r in rank_map.items()}
    items = [s.id for s in corpus.sentences if 0 < s.length_words <= budget]
    lengths = {s.id: s.length_words for s in corpus.sentences}
    if not items:
        return SummaryPool(summaries=[], flagged=True)

    candidates: dict[tuple, float] = {}

    def consider(ids):
        ids = tuple(sorted(ids))
        if ids and ids not in candidates:
            candidates[ids] = coverage_value(ids, corpus, weights)

    if len(items) <= EXACT_POOL_LIMIT:
        best_ids, best_val = (), -np.inf
        for r in range(1, len(items) + 1):
            for combo in itertools.combinations(items, r):
                if sum(lengths[i] for i in combo) > budget:
                    continue
                val = coverage_value(combo, corpus, weights)
                consider(combo)
                if val > best_val + 1e-12:
                    best_ids, best_val = combo, val
        consider(best_ids)
    else:
        base = _swap_improve(
            _greedy_cover(items, corpus, weights, lengths, budget),
            items, corpus, weights, lengths, budget)
        consider(base)

    rng = np.random.default_rng(seed)
    tries = 0
    while len(candidates) < pool_size * 3 and tries < pool_size * 10:
        noise = {sid: float(rng.uniform(0.5, 1.5)) for sid in items}
        perturbed = _greedy_cover(items, corpus, weights, lengths, budget, order_noise=noise)
        if perturbed:
            consider(perturbed)
        tries += 1

    ranked = sorted(candidates.items(), key=lambda kv: (-kv[1], kv[0]))
    reds = {ids: internal_redundancy(ids, corpus) for ids, _ in ranked}
    med = float(np.median(list(reds.values()))) if reds else 0.0
    kept = [ids for ids, _ in ranked if reds[ids] <= med + 1e-12 or ids == ranked[0][0]]
    kept = kept[:pool_size]

    summaries = [
        Summary(
            sentence_ids=ids,
            word_count=sum(lengths[i] for i in ids),
            budget=budget,
            score_breakdown={"coverage_objective": candidates[ids],
                             "redundancy": reds[ids]},
        )
        for ids in kept
    ]
    flagged = len(summaries) < pool_size
    if flagged:
        warnings.warn(
            f"only {len(summaries)} distinct feasible summaries exist "
            f"(requested {pool_size})", PoolTooSmallWarning)
    return SummaryPool(summaries=summaries, flagged=flagged)


# ---------------------------------------------------------------------
# reward learning
# ---------------------------------------------------------------------

def _descend(loss_fn, grad_fn, w0, lr, epochs):
    """Full-batch descent with step halving; loss log never increases."""
    w = w0
    log = [loss_fn(w)]
    step = lr
    for _ in range(epochs):
        g = grad_fn(w)
        if not np.all(np.isfinite(g)):
            raise NonFinite(f"gradient diverged at lr={lr}")
        trial = step
        cur = log[-1]
        for _ in range(40):
            w_new = w - trial * g
            val = loss_fn(w_new)
            if val <= cur:
                break
            trial /= 2.0
        else:
            w_new, val = w, cur
        w = w_new
        step = min(trial * 1.5, 1e4 * lr)
        log.append(val)
        if abs(log[-2] - log[-1]) < 1e-14:
            break
    return w, log


def fit_reward(samples, mode: str = "point_mse", lr: float = 0.005,
               epochs: int = 500, seed: int = 0) -> RewardModel:
    """Fit the summary reward from scored drafts or preference pairs.

    point_mse: samples are (features, score); minimises mean squared
    error. pair_ce: samples are (features_a, features_b, p) with p = 1
    when a is preferred; minimises the logistic cross-entropy.
    """
    if len(samples) < 2:
        raise ValueError("need at least two reward samples")
    if mode == "point_mse":
        X = np.vstack([np.asarray(f, dtype=float) for f, _ in samples])
        y = np.array([float(v) for _, v in samples])

        def loss(w):
            r = X @ w - y
            return float(np.mean(r ** 2))

        def grad(w):
            r = X @ w - y
            return 2.0 * X.T @ r / len(y)

        w, log = _descend(loss, grad, np.zeros(X.shape[1]), lr, epochs)
        return RewardModel(w=w, mode=mode, fit_log=log)

    if mode == "pair_ce":
        A = np.vstack([np.asarray(a, dtype=float) for a, _, _ in samples])
        B = np.vstack([np.asarray(b, dtype=float) for _, b, _ in samples])
        p = np.array([float(x) for _, _, x in samples])

        def h(w):
            z = np.clip((B - A) @ w, -500, 500)
            return 1.0 / (1.0 + np.exp(z))  # P(a preferred)

        def loss(w):
            ha = np.clip(h(w), 1e-12, 1 - 1e-12)
            return float(-np.mean(p * np.log(ha) + (1 - p) * np.log(1 - ha)))

        def grad(w):
            ha = h(w)
            return -((p - ha) @ (A - B)) / len(p)

        w, log = _descend(loss, grad, np.zeros(A.shape[1]), lr, epochs)
        return RewardModel(w=w, mode=mode, fit_log=log)

    raise ValueError(f"unknown reward mode '{mode}'")


# ---------------------------------------------------------------------
# episodic MDP and TD(0) policy learning
# ---------------------------------------------------------------------

class DraftEnv:
    """Draft-summary MDP: add a feasible sentence or terminate.

    States are frozensets of sentence ids, featurised via lambda(y);
    reward is the fitted V* at termination and zero elsewhere.
    """

    TERMINATE = -1

    def __init__(self, corpus: Corpus, budget: int, reward: RewardModel,
                 rank_map: dict, references=None):
        self.corpus = corpus
        self.budget = budget
        self.reward = reward
        self.rank_map = rank_map
        self.references = references
        self._lengths = {s.id: s.length_words for s in corpus.sentences}
        self._feat_cache: dict[frozenset, np.ndarray] = {}

    def reset(self):
        return frozenset()

    def features(self, state) -> np.ndarray:
        if state not in self._feat_cache:
            self._feat_cache[state] = summary_features(
                state, self.corpus, self.rank_map, self.budget, self.references)
        return self._feat_cache[state]

    def actions(self, state):
        used = sum(self._lengths[i] for i in state)
        acts = [
            s.id for s in self.corpus.sentences
            if s.id not in state and 0 < s.length_words <= self.budget - used
        ]
        acts.append(self.TERMINATE)
        return acts

    def step(self, state, action):
        """Return (next_state, reward, done)."""
        if action == self.TERMINATE:
            return state, self.reward.value(self.features(state)), True
        return state | {action}, 0.0, False

    def final_summary(self, state) -> Summary:
        ids = tuple(sorted(state))
        return Summary(
            sentence_ids=ids,
            word_count=sum(self._lengths[i] for i in ids),
            budget=self.budget,
            score_breakdown={"predicted_reward": self.reward.value(self.features(state))},
        )


def learn_policy(env, episodes: int = 2000, epsilon0: float = 0.3,
                 seed: int = 0, eta: float = 0.01) -> Policy:
    """Episodic TD(0) with a linear value over draft features.

    Behaviour is epsilon-greedy with linearly decaying epsilon; only the
    terminate action pays the fitted reward.
    """
    rng = np.random.default_rng(seed)
    dim = len(env.features(env.reset()))
    theta = np.zeros(dim)

    def value(state):
        return float(theta @ env.features(state))

    for ep in range(episodes):
        eps = epsilon0 * (1.0 - ep / max(1, episodes))
        state = env.reset()
        done = False
        while not done:
            acts = env.actions(state)
            if rng.random() < eps:
                action = acts[int(rng.integers(len(acts)))]
            else:
                def q(a):
                    nxt, r, terminal = env.step(state, a)
                    return r if terminal else value(nxt)
                action = max(acts, key=lambda a: (q(a), -a))
            nxt, r, done = env.step(state, action)
            target = r if done else value(nxt)
            delta = target - value(state)
            theta = theta + eta * delta * env.features(state)
            state = nxt
    return Policy(theta=theta, epsilon0=epsilon0, episodes=episodes, eta=eta)


def greedy_rollout(env, policy: Policy) -> Summary:
    """Deterministic rollout following the learnt value function."""
    state = env.reset()
    while True:
        acts = env.actions(state)

        def q(a):
            nxt, r, terminal = env.step(state, a)
            return r if terminal else policy.value(env.features(nxt))

        action = max(acts, key=lambda a: (q(a), -a))
        state, _, done = env.step(state, action)
        if done:
            return env.final_summary(state)


def best_summary(pool: SummaryPool, reward: RewardModel | None = None,
                 policy: Policy | None = None, env: DraftEnv | None = None,
                 corpus: Corpus | None = None, rank_map: dict | None = None,
                 budget: int | None = None, references=None) -> Summary:
    """Argmax of the fitted reward over the pool, or the policy rollout."""
    if policy is not None:
        if env is None:
            raise ValueError("policy mode needs the environment")
        return greedy_rollout(env, policy)
    if not pool.summaries:
        raise EmptyPool("no summaries to choose from")
    if reward is None:
        raise ValueError("reward mode needs a fitted RewardModel")
    if corpus is None or rank_map is None:
        raise ValueError("reward mode needs corpus and rank_map to featurise")

    def key(summary: Summary):
        feats = summary_features(summary.sentence_ids, corpus, rank_map,
                                 budget or summary.budget, references)
        return (-reward.value(feats), sum(summary.sentence_ids), summary.sentence_ids)

    return min(pool.summaries, key=key)
