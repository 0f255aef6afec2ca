"""Joint clustering + 1NN-error model with per-cluster feature weighting,
plus coverage/coherence/redundancy scoring and summary selection.

The weighted distance is d_w(x, c) = sqrt(sum_j w_j^2 (x_j - c_j)^2); the
squared-weight form is what makes the two gradient families (2*W*delta^2
w.r.t. W and -2*W^2*delta w.r.t. C) exact simultaneously.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .corpus import FEATURE_GROUPS, FEATURE_SCHEMA, Corpus
from .errors import (
    DimensionMismatch,
    InfeasibleBudget,
    LonelyLabelWarning,
    NonFiniteObjective,
    UntrainedModel,
)
from .evaluation import rouge_n
from .stopwords import CONNECTIVES, is_noun_like

EXACT_SELECTION_LIMIT = 12
WEIGHT_FLOOR = 1e-6


@dataclass
class ExDosHyper:
    alpha_lr: float = 1e-3
    gamma_lr: float = 1e-3
    beta_sigmoid: float = 5.0
    lambda_coh: float = 0.5
    phi_red: float = 0.5
    max_iter: int = 60
    tol: float = 1e-6

    def __post_init__(self):
        if self.beta_sigmoid <= 0:
            raise ValueError("beta_sigmoid must be positive")
        if self.alpha_lr < 0 or self.gamma_lr < 0:
            raise ValueError("learning rates must be non-negative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class LabeledSet:
    X: np.ndarray          # (N, d)
    labels: np.ndarray     # (N,) in {0, 1}
    sentence_ids: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if set(np.unique(self.labels)) - {0, 1}:
            raise ValueError("labels must be 0/1")


@dataclass
class Summary:
    sentence_ids: tuple
    word_count: int
    budget: int
    score_breakdown: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "sentence_ids": list(self.sentence_ids),
            "word_count": self.word_count,
            "budget": self.budget,
            "score_breakdown": self.score_breakdown,
        }


@dataclass
class ExDosModel:
    W: np.ndarray                  # (d, K)
    C: np.ndarray                  # (K, d)
    assignment: np.ndarray         # (N,)
    polarity: np.ndarray           # (K,) bool, True = in-summary majority
    hyper: ExDosHyper
    feature_names: tuple = FEATURE_SCHEMA
    objective_log: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    trained: bool = False

    @property
    def n_clusters(self) -> int:
        return self.C.shape[0]

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": 1,
                "W": self.W.tolist(),
                "C": self.C.tolist(),
                "polarity": self.polarity.astype(int).tolist(),
                "hyper": self.hyper.__dict__,
                "feature_names": list(self.feature_names),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "ExDosModel":
        obj = json.loads(text)
        model = cls(
            W=np.array(obj["W"], dtype=float),
            C=np.array(obj["C"], dtype=float),
            assignment=np.zeros(0, dtype=int),
            polarity=np.array(obj["polarity"], dtype=bool),
            hyper=ExDosHyper(**obj["hyper"]),
            feature_names=tuple(obj["feature_names"]),
        )
        model.trained = True
        return model


# ---------------------------------------------------------------------
# distance, sigmoid, objective, gradients
# ---------------------------------------------------------------------

def weighted_distance(x, c, w) -> float:
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)
    w = np.asarray(w, dtype=float)
    if not (x.shape == c.shape == w.shape):
        raise DimensionMismatch(f"shapes differ: {x.shape}, {c.shape}, {w.shape}")
    d = x - c
    return float(np.sqrt(np.sum((w * d) ** 2)))


def sigmoid_beta(z, beta: float):
    """S_beta(z) = 1 / (1 + e^(beta (1 - z))); S_beta(1) = 0.5 exactly."""
    e = np.clip(beta * (1.0 - np.asarray(z, dtype=float)), -500.0, 500.0)
    return 1.0 / (1.0 + np.exp(e))


def sigmoid_beta_grad(z, beta: float):
    s = sigmoid_beta(z, beta)
    return beta * s * (1.0 - s)


def _neighbour_ratios(data: LabeledSet, W, assignment):
    """Per-sample (R, d_same, d_diff, idx_same, idx_diff); NaN R when a
    cluster lacks one of the labels for that sample."""
    n = len(data.labels)
    out = np.full((n, 3), np.nan)
    idxs = np.full((n, 2), -1, dtype=int)
    for k in range(W.shape[1]):
        members = np.flatnonzero(assignment == k)
        if len(members) == 0:
            continue
        Xk = data.X[members]
        yk = data.labels[members]
        diffs = Xk[:, None, :] - Xk[None, :, :]
        dists = np.sqrt(np.sum((diffs * W[:, k]) ** 2, axis=2))
        np.fill_diagonal(dists, np.inf)
        for local_i, i in enumerate(members):
            same = np.flatnonzero(yk == yk[local_i])
            same = same[same != local_i]
            other = np.flatnonzero(yk != yk[local_i])
            if len(same) == 0 or len(other) == 0:
                continue
            js = same[np.argmin(dists[local_i, same])]
            jo = other[np.argmin(dists[local_i, other])]
            d_same = dists[local_i, js]
            d_diff = dists[local_i, jo]
            r = np.inf if d_diff == 0 else d_same / d_diff
            out[i] = (r, d_same, d_diff)
            idxs[i] = (members[js], members[jo])
    return out, idxs


def nn_error_surrogate(data: LabeledSet, W, assignment, beta: float = 5.0) -> float:
    """(1/N) sum S_beta(d_same / d_diff) over samples with both neighbours."""
    ratios, _ = _neighbour_ratios(data, np.asarray(W, dtype=float), np.asarray(assignment))
    valid = ~np.isnan(ratios[:, 0])
    skipped = int((~valid).sum())
    if skipped:
        warnings.warn(f"{skipped} sample(s) lack a same/different-label neighbour in their cluster",
                      LonelyLabelWarning)
    if not valid.any():
        return 0.0
    vals = sigmoid_beta(ratios[valid, 0], beta)
    return float(vals.sum() / len(data.labels))


def objective(data: LabeledSet, W, C, assignment, beta: float = 5.0):
    """J = J1 (clustering) + J2 (1NN surrogate) for a fixed assignment."""
    W = np.asarray(W, dtype=float)
    C = np.asarray(C, dtype=float)
    assignment = np.asarray(assignment)
    j1 = 0.0
    for k in range(C.shape[0]):
        members = assignment == k
        if not members.any():
            continue
        delta = data.X[members] - C[k]
        j1 += float(np.sum((delta * W[:, k]) ** 2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LonelyLabelWarning)
        j2 = nn_error_surrogate(data, W, assignment, beta)
    return j1 + j2, j1, j2


def gradients(data: LabeledSet, W, C, assignment, beta: float = 5.0):
    """Analytic (dJ/dW, dJ/dC) for a fixed assignment and neighbour choice."""
    W = np.asarray(W, dtype=float)
    C = np.asarray(C, dtype=float)
    assignment = np.asarray(assignment)
    n, d = data.X.shape
    dW = np.zeros_like(W)
    dC = np.zeros_like(C)

    for k in range(C.shape[0]):
        members = assignment == k
        if not members.any():
            continue
        delta = data.X[members] - C[k]
        dW[:, k] += 2.0 * W[:, k] * np.sum(delta ** 2, axis=0)
        dC[k] = -2.0 * (W[:, k] ** 2) * np.sum(delta, axis=0)

    ratios, idxs = _neighbour_ratios(data, W, assignment)
    for i in range(n):
        r, d_same, d_diff = ratios[i]
        if np.isnan(r) or not np.isfinite(r) or d_diff == 0:
            continue
        k = assignment[i]
        wk = W[:, k]
        ds2 = (data.X[i] - data.X[idxs[i, 0]]) ** 2
        dd2 = (data.X[i] - data.X[idxs[i, 1]]) ** 2
        term_same = wk * ds2 / (d_same * d_diff) if d_same > 0 else np.zeros(d)
        term_diff = wk * dd2 * d_same / d_diff ** 3
        dW[:, k] += sigmoid_beta_grad(r, beta) * (term_same - term_diff) / n
    return dW, dC


# ---------------------------------------------------------------------
# training
# ---------------------------------------------------------------------

def _kmeans_pp_init(X, k, rng):
    n = len(X)
    centers = [int(rng.integers(n))]
    d2 = np.sum((X - X[centers[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            probs = np.full(n, 1.0 / n)
        else:
            probs = d2 / total
        centers.append(int(rng.choice(n, p=probs)))
        d2 = np.minimum(d2, np.sum((X - X[centers[-1]]) ** 2, axis=1))
    return X[centers].copy()


def _assign_weighted(X, W, C):
    K = C.shape[0]
    dists = np.zeros((len(X), K))
    for k in range(K):
        dists[:, k] = np.sqrt(np.sum(((X - C[k]) * W[:, k]) ** 2, axis=1))
    return np.argmin(dists, axis=1)


def _fix_empty_clusters(X, W, C, assignment):
    """Reseed an empty cluster from the farthest sample, deterministically."""
    K = C.shape[0]
    for k in range(K):
        if (assignment == k).any():
            continue
        per_sample = np.array([
            weighted_distance(X[i], C[assignment[i]], W[:, assignment[i]])
            for i in range(len(X))
        ])
        far = int(np.argmax(per_sample))
        C[k] = X[far]
        assignment = _assign_weighted(X, W, C)
    return C, assignment


def _silhouette(X, assignment, K):
    n = len(X)
    if n < 2:
        return 0.0
    dists = np.sqrt(np.maximum(
        np.sum(X ** 2, axis=1)[:, None] + np.sum(X ** 2, axis=1)[None, :] - 2 * X @ X.T, 0.0))
    scores = np.zeros(n)
    for i in range(n):
        own = np.flatnonzero(assignment == assignment[i])
        own = own[own != i]
        if len(own) == 0:
            scores[i] = 0.0
            continue
        a = dists[i, own].mean()
        b = np.inf
        for k in range(K):
            if k == assignment[i]:
                continue
            others = np.flatnonzero(assignment == k)
            if len(others):
                b = min(b, dists[i, others].mean())
        if not np.isfinite(b):
            scores[i] = 0.0
        else:
            scores[i] = (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return float(scores.mean())


def _plain_kmeans(X, k, rng, iters=20):
    C = _kmeans_pp_init(X, k, rng)
    assignment = np.argmin(
        np.sum((X[:, None, :] - C[None, :, :]) ** 2, axis=2), axis=1)
    for _ in range(iters):
        for kk in range(k):
            members = assignment == kk
            if members.any():
                C[kk] = X[members].mean(axis=0)
        new = np.argmin(np.sum((X[:, None, :] - C[None, :, :]) ** 2, axis=2), axis=1)
        if np.array_equal(new, assignment):
            break
        assignment = new
    return C, assignment


def pick_k_by_silhouette(X, seed: int, k_max: int = 10) -> int:
    rng = np.random.default_rng(seed)
    best_k, best_s = 2, -np.inf
    for k in range(2, min(k_max, len(X) // 2) + 1):
        _, assignment = _plain_kmeans(X, k, rng)
        s = _silhouette(X, assignment, k)
        if s > best_s + 1e-12:
            best_k, best_s = k, s
    return best_k


def train(data: LabeledSet, K="auto", hyper: ExDosHyper | None = None, seed: int = 0) -> ExDosModel:
    """Gradient-descent training of weights and centroids on a labelled set."""
    hyper = hyper or ExDosHyper()
    X = data.X
    n, d = X.shape
    if K == "auto":
        K = pick_k_by_silhouette(X, seed)
    K = int(K)
    if K < 2:
        raise ValueError("K must be at least 2")
    if n < 2 * K:
        raise ValueError(f"need at least {2 * K} samples for K={K}")

    rng = np.random.default_rng(seed)
    C = _kmeans_pp_init(X, K, rng)
    W = np.ones((d, K))
    assignment = _assign_weighted(X, W, C)
    C, assignment = _fix_empty_clusters(X, W, C, assignment)

    log = []
    j_prev, _, _ = objective(data, W, C, assignment, hyper.beta_sigmoid)
    log.append(j_prev)
    for _ in range(hyper.max_iter):
        dW, dC = gradients(data, W, C, assignment, hyper.beta_sigmoid)
        W = np.maximum(W - hyper.alpha_lr * dW, WEIGHT_FLOOR)
        C = C - hyper.gamma_lr * dC
        assignment = _assign_weighted(X, W, C)
        C, assignment = _fix_empty_clusters(X, W, C, assignment)
        j, _, _ = objective(data, W, C, assignment, hyper.beta_sigmoid)
        if not np.isfinite(j):
            raise NonFiniteObjective(
                f"objective diverged (J={j}); last finite J={log[-1]:.6g}")
        log.append(j)
        if abs(j_prev - j) <= hyper.tol * max(1.0, abs(j_prev)):
            break
        j_prev = j

    polarity = np.zeros(K, dtype=bool)
    for k in range(K):
        members = assignment == k
        if members.any():
            ones = int(data.labels[members].sum())
            polarity[k] = ones >= (members.sum() - ones)  # ties are positive
        else:
            polarity[k] = True
    model = ExDosModel(W=W, C=C, assignment=assignment, polarity=polarity,
                       hyper=hyper, objective_log=log)
    if d == len(FEATURE_SCHEMA):
        model.feature_names = FEATURE_SCHEMA
    else:
        model.feature_names = tuple(f"f{i}" for i in range(d))
    model.diagnostics = {"iterations": len(log) - 1, "final_objective": log[-1]}
    model.trained = True
    return model


# ---------------------------------------------------------------------
# labelling helpers
# ---------------------------------------------------------------------

def labeled_set_from_corpus(corpus: Corpus) -> LabeledSet:
    """Label sentences for training: reference-derived when references
    exist (ROUGE-1 recall >= half the per-corpus maximum), otherwise a
    feature-salience split at the median."""
    X = corpus.feature_matrix()
    ids = [s.id for s in corpus.sentences]
    if corpus.reference_summaries:
        scores = np.array([
            max(
                rouge_n(s.tokens, [ref], n=1, mode="recall").value if s.tokens else 0.0
                for ref in corpus.reference_summaries
            )
            for s in corpus.sentences
        ])
        thr = 0.5 * scores.max()
        labels = (scores >= thr).astype(int) if scores.max() > 0 else np.zeros(len(ids), dtype=int)
    else:
        scores = X.mean(axis=1)
        labels = (scores >= np.median(scores)).astype(int)
    # both classes must be present: flip the weakest/strongest if uniform
    if labels.min() == labels.max():
        order = np.argsort(scores, kind="stable")
        if labels[0] == 1:
            labels[order[0]] = 0
        else:
            labels[order[-1]] = 1
    return LabeledSet(X=X, labels=labels, sentence_ids=ids)


# ---------------------------------------------------------------------
# scoring and selection
# ---------------------------------------------------------------------

def _noun_set(tokens):
    return {t for t in tokens if is_noun_like(t)}


def coherence_edge(prev_tokens, next_tokens) -> float:
    """Proxy discourse edge: noun overlap plus a connective cue; a pair
    with neither is a negative edge (-1)."""
    a, b = _noun_set(prev_tokens), _noun_set(next_tokens)
    inter = a & b
    jacc = len(inter) / len(a | b) if (a or b) else 0.0
    cue = 1.0 if next_tokens and next_tokens[0] in CONNECTIVES else 0.0
    if jacc == 0.0 and cue == 0.0:
        return -1.0
    return 0.5 * jacc + 0.5 * cue


def score_components(candidate, model: ExDosModel, corpus: Corpus) -> dict:
    """Coverage / coherence / redundancy of an ordered sentence-id list."""
    if not model.trained:
        raise UntrainedModel("score_components needs a trained model")
    cov = 0.0
    pos = np.flatnonzero(model.polarity)
    neg = np.flatnonzero(~model.polarity)
    for sid in candidate:
        x = corpus.sentences[sid].features
        dists = np.array([
            weighted_distance(x, model.C[k], model.W[:, k]) for k in range(model.n_clusters)
        ])
        # fall back to the extreme centroid when one polarity is absent
        d_pos = dists[pos].min() if len(pos) else dists.max()
        d_neg = dists[neg].min() if len(neg) else dists.max()
        cov += abs(d_pos - d_neg)

    coh = 0.0
    for a, b in zip(candidate, candidate[1:]):
        coh += coherence_edge(corpus.sentences[a].tokens, corpus.sentences[b].tokens)

    red = 0.0
    for i in range(len(candidate)):
        for j in range(i):
            red += corpus.sentence_cosine(candidate[i], candidate[j])
    return {"coverage": float(cov), "coherence": float(coh), "redundancy": float(red)}


def summary_score(candidate, model, corpus, hyper: ExDosHyper) -> float:
    c = score_components(candidate, model, corpus)
    return c["coverage"] + hyper.lambda_coh * c["coherence"] - hyper.phi_red * c["redundancy"]


def _make_summary(ids, model, corpus, hyper, budget) -> Summary:
    ids = tuple(sorted(ids))
    comps = score_components(list(ids), model, corpus)
    total = comps["coverage"] + hyper.lambda_coh * comps["coherence"] - hyper.phi_red * comps["redundancy"]
    comps["total"] = total
    return Summary(
        sentence_ids=ids,
        word_count=sum(corpus.sentences[i].length_words for i in ids),
        budget=budget,
        score_breakdown=comps,
    )


def select_summary(model: ExDosModel, corpus: Corpus, budget_words: int,
                   hyper: ExDosHyper | None = None, seed: int = 0,
                   restarts: int = 4) -> Summary:
    """Budget-constrained Score maximisation.

    Small instances (<= 12 candidates) are solved exactly; larger ones by
    hill climbing (add/remove/swap) from a coverage-greedy start plus
    seeded random restarts.
    """
    hyper = hyper or model.hyper
    cands = [s.id for s in corpus.sentences if 0 < s.length_words <= budget_words]
    if not cands:
        raise InfeasibleBudget(f"no sentence fits within {budget_words} words")
    lengths = {s.id: s.length_words for s in corpus.sentences}

    def total_len(ids):
        return sum(lengths[i] for i in ids)

    def score(ids):
        return summary_score(sorted(ids), model, corpus, hyper)

    if len(cands) <= EXACT_SELECTION_LIMIT:
        best, best_score = (), -np.inf
        for r in range(1, len(cands) + 1):
            for combo in itertools.combinations(cands, r):
                if total_len(combo) > budget_words:
                    continue
                sc = score(combo)
                if sc > best_score + 1e-12 or (
                        abs(sc - best_score) <= 1e-12 and combo < best):
                    best, best_score = combo, sc
        return _make_summary(best, model, corpus, hyper, budget_words)

    cov = {
        sid: score_components([sid], model, corpus)["coverage"] for sid in cands
    }
    rng = np.random.default_rng(seed)
    best_ids, best_sc = None, -np.inf
    for restart in range(max(1, restarts)):
        if restart == 0:
            order = sorted(cands, key=lambda i: (-cov[i] / lengths[i], i))
        else:
            order = list(cands)
            rng.shuffle(order)
        current = []
        used = 0
        for sid in order:
            if used + lengths[sid] <= budget_words:
                current.append(sid)
                used += lengths[sid]
        current = set(current)
        cur_sc = score(current) if current else -np.inf

        improved = True
        while improved:
            improved = False
            move_best, move_sc = None, cur_sc
            free = [i for i in sorted(cands) if i not in current]
            for sid in free:
                if total_len(current) + lengths[sid] <= budget_words:
                    trial = current | {sid}
                    sc = score(trial)
                    if sc > move_sc + 1e-12:
                        move_best, move_sc = trial, sc
            for sid in sorted(current):
                trial = current - {sid}
                if trial:
                    sc = score(trial)
                    if sc > move_sc + 1e-12:
                        move_best, move_sc = trial, sc
            for out in sorted(current):
                for inn in free:
                    trial = (current - {out}) | {inn}
                    if total_len(trial) <= budget_words:
                        sc = score(trial)
                        if sc > move_sc + 1e-12:
                            move_best, move_sc = trial, sc
            if move_best is not None:
                current, cur_sc = move_best, move_sc
                improved = True

        key = tuple(sorted(current))
        if cur_sc > best_sc + 1e-12 or (abs(cur_sc - best_sc) <= 1e-12 and best_ids is not None and key < best_ids):
            best_ids, best_sc = key, cur_sc
    return _make_summary(best_ids, model, corpus, hyper, budget_words)


def feature_importance(model: ExDosModel) -> dict:
    """Mean weight per feature group and cluster polarity."""
    names = list(model.feature_names)
    if tuple(names) == FEATURE_SCHEMA:
        groups = {g: list(fs) for g, fs in FEATURE_GROUPS.items()}
    else:
        groups = {n: [n] for n in names}
    idx = {n: i for i, n in enumerate(names)}
    report = {"group_sizes": {g: len(fs) for g, fs in groups.items()}}
    for label, mask in (("positive", model.polarity), ("negative", ~model.polarity)):
        cols = np.flatnonzero(mask)
        means = {}
        for g, fs in groups.items():
            rows = [idx[f] for f in fs]
            means[g] = float(model.W[np.ix_(rows, cols)].mean()) if len(cols) else float("nan")
        report[label] = means
    return report
