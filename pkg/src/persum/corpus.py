"""Corpus ingestion, preprocessing, surface features, concepts, similarity.

Everything here is a pure function of (input bytes, config, seed): the
same files always produce the same Corpus, feature matrix and embeddings.
"""

from __future__ import annotations

import json
import math
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateFeatureWarning,
    DimTooLarge,
    DuplicateDocId,
    EmptyConceptSet,
    EmptyInput,
    MalformedInput,
)
from .stopwords import STOPWORDS, is_noun_like

FEATURE_SCHEMA = (
    "mean_tf",
    "mean_tfidf",
    "residual_idf",
    "title_overlap",
    "uppercase_count",
    "centroid_similarity",
    "doc_jaccard",
    "position_score",
    "length_words",
    "length_cutoff",
    "signature_count",
)

FEATURE_GROUPS = {
    "frequency": ("mean_tf", "mean_tfidf", "residual_idf"),
    "word": ("uppercase_count", "signature_count"),
    "similarity": ("centroid_similarity", "doc_jaccard", "title_overlap"),
    "position": ("position_score", "length_words", "length_cutoff"),
}

CONCEPT_UNITS = ("unigram", "bigram", "phrase")
PHRASE_MAX_TOKENS = 5
CONCEPT_MIN_FREQ = 2

_TERMINAL = re.compile(r"([.!?])(\s+)(?=[A-Z])")
_PUNCT_EDGE = re.compile(r"^\W+|\W+$", re.UNICODE)


@dataclass
class Document:
    doc_id: str
    raw_text: str
    title: str | None = None


@dataclass
class SentenceRecord:
    id: int
    doc_id: str
    position: int
    text: str
    tokens: list[str]
    length_words: int
    features: np.ndarray | None = None
    concept_ids: set[int] = field(default_factory=set)


@dataclass
class Concept:
    concept_id: int
    label: str
    unit: str
    mention_sentence_ids: set[int]
    base_score: float
    user_weight: float = 0.0
    status: str = "unqueried"  # unqueried | accepted | rejected
    confidence: float = 1.0

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(self.label.split())


class Corpus:
    """Immutable-after-construction document collection with shared stats."""

    def __init__(self, documents, sentences, reference_summaries=None):
        self.documents: list[Document] = documents
        self.sentences: list[SentenceRecord] = sentences
        self.reference_summaries: list[list[str]] | None = reference_summaries
        self.vocabulary: dict[str, int] = {}
        self.df: dict[str, int] = {}
        self.embeddings: dict[str, np.ndarray] | None = None
        self.feature_names = FEATURE_SCHEMA
        self._build_stats()

    def _build_stats(self):
        vocab = {}
        for sent in self.sentences:
            for tok in sent.tokens:
                if tok not in vocab:
                    vocab[tok] = len(vocab)
        self.vocabulary = vocab
        doc_terms = {}
        for sent in self.sentences:
            doc_terms.setdefault(sent.doc_id, set()).update(sent.tokens)
        df = Counter()
        for terms in doc_terms.values():
            for t in terms:
                df[t] += 1
        self.df = dict(df)

    # -- views ---------------------------------------------------------
    def doc_sentences(self, doc_id: str) -> list[SentenceRecord]:
        return [s for s in self.sentences if s.doc_id == doc_id]

    def sentence_unit_vector(self, sentence_id: int) -> np.ndarray:
        """Unit-normalised embedding centroid of a sentence, cached."""
        if self.embeddings is None:
            raise EmptyInput("embeddings not built yet")
        cache = getattr(self, "_sent_unit_cache", None)
        if cache is None:
            cache = {}
            self._sent_unit_cache = cache
        if sentence_id not in cache:
            c = _centroid(self.sentences[sentence_id].tokens, self.embeddings)
            n = np.linalg.norm(c)
            cache[sentence_id] = c / n if n > 0 else c
        return cache[sentence_id]

    def sentence_cosine(self, a: int, b: int) -> float:
        """Embedding similarity between two sentences; identical token
        sequences score exactly 1."""
        ta = self.sentences[a].tokens
        tb = self.sentences[b].tokens
        if not ta or not tb:
            return 0.0
        if ta == tb:
            return 1.0
        va, vb = self.sentence_unit_vector(a), self.sentence_unit_vector(b)
        if not va.any() or not vb.any():
            return 0.0
        return float(min(1.0, max(0.0, va @ vb)))

    def feature_matrix(self) -> np.ndarray:
        if any(s.features is None for s in self.sentences):
            raise MalformedInput("corpus is not featurised yet")
        return np.vstack([s.features for s in self.sentences])

    @property
    def featurized(self) -> bool:
        return all(s.features is not None for s in self.sentences)

    def to_json(self) -> str:
        """Canonical serialisation; identical input bytes give identical output."""
        payload = {
            "schema_version": 1,
            "documents": [
                {"doc_id": d.doc_id, "title": d.title, "text": d.raw_text}
                for d in self.documents
            ],
            "sentences": [
                {
                    "id": s.id,
                    "doc_id": s.doc_id,
                    "position": s.position,
                    "text": s.text,
                    "tokens": s.tokens,
                    "length_words": s.length_words,
                }
                for s in self.sentences
            ],
            "vocabulary": self.vocabulary,
            "df": {t: self.df[t] for t in sorted(self.df)},
            "reference_summaries": self.reference_summaries,
        }
        return json.dumps(payload, sort_keys=True, ensure_ascii=False)


# ---------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------

def tokenize(text: str) -> list[str]:
    """Lowercased, punctuation-stripped, whitespace-delimited terms."""
    out = []
    for chunk in text.split():
        tok = _PUNCT_EDGE.sub("", chunk).lower()
        if tok:
            out.append(tok)
    return out


def split_sentences(text: str) -> list[str]:
    """Split on terminal punctuation followed by whitespace + uppercase.

    The rule is applied literally ("Dr. Smith" splits); determinism is
    preferred over abbreviation recall.
    """
    text = text.strip()
    if not text:
        return []
    pieces = []
    start = 0
    for m in _TERMINAL.finditer(text):
        pieces.append(text[start:m.end(1)].strip())
        start = m.end()
    tail = text[start:].strip()
    if tail:
        pieces.append(tail)
    return [p for p in pieces if p]


def preprocess(text: str) -> tuple[list[str], list[list[str]]]:
    """Return (sentences, tokens per sentence) for a unicode string."""
    sentences = split_sentences(text)
    return sentences, [tokenize(s) for s in sentences]


# ---------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------

def _build_corpus(docs: list[Document], refs) -> Corpus:
    sentences = []
    for doc in docs:
        sents = split_sentences(doc.raw_text)
        for pos, text in enumerate(sents):
            toks = tokenize(text)
            sentences.append(
                SentenceRecord(
                    id=len(sentences),
                    doc_id=doc.doc_id,
                    position=pos,
                    text=text,
                    tokens=toks,
                    length_words=len(toks),
                )
            )
    return Corpus(docs, sentences, refs)


def _load_refs(refs_dir: Path) -> list[list[str]] | None:
    if not refs_dir.is_dir():
        return None
    refs = []
    for path in sorted(refs_dir.glob("*.txt")):
        toks = tokenize(path.read_text(encoding="utf-8"))
        if toks:
            refs.append(toks)
    return refs or None


def load_corpus(path, format: str = "jsonl") -> Corpus:
    """Load a corpus from a JSONL file or a directory of .txt documents."""
    path = Path(path)
    if not path.exists():
        raise MalformedInput(f"no such path: {path}")
    if format == "jsonl":
        docs, seen = [], set()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise MalformedInput(f"{path}:{lineno}: invalid JSON ({exc})") from exc
                for fieldname in ("doc_id", "text"):
                    if fieldname not in obj:
                        raise MalformedInput(f"{path}:{lineno}: missing field '{fieldname}'")
                if obj["doc_id"] in seen:
                    raise DuplicateDocId(f"{path}:{lineno}: doc_id '{obj['doc_id']}' repeated")
                seen.add(obj["doc_id"])
                docs.append(Document(obj["doc_id"], obj["text"], obj.get("title")))
        refs = _load_refs(path.parent / "refs")
    elif format == "txt_dir":
        if not path.is_dir():
            raise MalformedInput(f"not a directory: {path}")
        docs = []
        for f in sorted(path.glob("*.txt")):
            docs.append(Document(f.stem, f.read_text(encoding="utf-8")))
        refs = _load_refs(path / "refs")
    else:
        raise MalformedInput(f"unknown corpus format: {format}")
    if not docs:
        raise MalformedInput(f"{path}: empty document set")
    return _build_corpus(docs, refs)


# ---------------------------------------------------------------------
# features
# ---------------------------------------------------------------------

def _raw_words(text: str) -> list[str]:
    return [w for w in (_PUNCT_EDGE.sub("", c) for c in text.split()) if w]


def _uppercase_count(text: str) -> int:
    words = _raw_words(text)
    n = 0
    for i, w in enumerate(words):
        if w[:1].isupper() and (i > 0 or w.isupper()):
            n += 1
    return n


def featurize(corpus: Corpus, embed_dim: int | None = None, embed_seed: int = 13) -> Corpus:
    """Fill per-sentence surface features, min-max scaled to [0,1].

    Embeddings for the centroid-similarity feature are built on demand
    with the given dim/seed so the whole pass stays deterministic.
    """
    n_docs = len(corpus.documents)
    doc_counts = {}
    doc_len = {}
    for s in corpus.sentences:
        c = doc_counts.setdefault(s.doc_id, Counter())
        c.update(s.tokens)
    for doc_id, c in doc_counts.items():
        doc_len[doc_id] = max(1, sum(c.values()))

    ctf = Counter()
    for s in corpus.sentences:
        ctf.update(s.tokens)

    def idf(term):
        return math.log(n_docs / corpus.df[term])

    def ridf(term):
        # observed IDF minus the Poisson-expected IDF
        lam = ctf[term] / n_docs
        expected_df = 1.0 - math.exp(-lam)
        return idf(term) + math.log(max(expected_df, 1e-12))

    # corpus-level term salience for signature words (top decile)
    term_scores = {t: ctf[t] * idf(t) for t in corpus.vocabulary}
    ranked = sorted(term_scores, key=lambda t: (-term_scores[t], t))
    n_sig = max(1, len(ranked) // 10)
    signature = set(ranked[:n_sig])

    titles = {d.doc_id: set(tokenize(d.title)) if d.title else set() for d in corpus.documents}
    doc_tokens = {doc_id: set(c) for doc_id, c in doc_counts.items()}

    if corpus.embeddings is None:
        dim = embed_dim or min(32, len(corpus.vocabulary))
        corpus.embeddings = build_embeddings(corpus, dim, embed_seed)

    centroids = np.zeros((len(corpus.sentences), _embed_dim(corpus.embeddings)))
    for i, s in enumerate(corpus.sentences):
        centroids[i] = _centroid(s.tokens, corpus.embeddings)

    raw = np.zeros((len(corpus.sentences), len(FEATURE_SCHEMA)))
    # pairwise centroid cosine, mean over the other sentences
    norms = np.linalg.norm(centroids, axis=1)
    unit = np.divide(centroids, norms[:, None], out=np.zeros_like(centroids), where=norms[:, None] > 0)
    cos = unit @ unit.T
    n_sent = len(corpus.sentences)

    for i, s in enumerate(corpus.sentences):
        toks = s.tokens
        dl = doc_len[s.doc_id]
        counts = doc_counts[s.doc_id]
        if toks:
            mean_tf = float(np.mean([counts[t] / dl for t in toks]))
            mean_tfidf = float(np.mean([(counts[t] / dl) * idf(t) for t in toks]))
            mean_ridf = float(np.mean([ridf(t) for t in toks]))
            title_overlap = len(set(toks) & titles[s.doc_id]) / len(set(toks))
            jacc_doc = len(set(toks) & doc_tokens[s.doc_id]) / max(1, len(set(toks) | doc_tokens[s.doc_id]))
            sig = sum(1 for t in toks if t in signature)
        else:
            mean_tf = mean_tfidf = mean_ridf = title_overlap = jacc_doc = 0.0
            sig = 0
        cent_sim = float((cos[i].sum() - cos[i, i]) / (n_sent - 1)) if n_sent > 1 else 0.0
        raw[i] = [
            mean_tf,
            mean_tfidf,
            mean_ridf,
            title_overlap,
            _uppercase_count(s.text),
            cent_sim,
            jacc_doc,
            1.0 / (1.0 + s.position),
            s.length_words,
            1.0 if 8 <= s.length_words <= 40 else 0.0,
            sig,
        ]

    lo = raw.min(axis=0)
    hi = raw.max(axis=0)
    span = hi - lo
    scaled = np.zeros_like(raw)
    for j, name in enumerate(FEATURE_SCHEMA):
        if span[j] <= 0:
            warnings.warn(f"feature '{name}' is constant corpus-wide", DegenerateFeatureWarning)
        else:
            scaled[:, j] = (raw[:, j] - lo[j]) / span[j]
    for i, s in enumerate(corpus.sentences):
        s.features = scaled[i]
    return corpus


# ---------------------------------------------------------------------
# concepts
# ---------------------------------------------------------------------

def _contains_run(tokens: list[str], run: tuple[str, ...]) -> bool:
    k = len(run)
    return any(tuple(tokens[i:i + k]) == run for i in range(len(tokens) - k + 1))


def extract_concepts(corpus: Corpus, unit: str = "unigram") -> list[Concept]:
    """Extract unigram/bigram/phrase concepts with corpus-level counts."""
    if unit not in CONCEPT_UNITS:
        raise MalformedInput(f"unknown concept unit: {unit}")
    mentions: dict[tuple[str, ...], set[int]] = {}
    freq: Counter = Counter()

    for s in corpus.sentences:
        toks = s.tokens
        if unit == "unigram":
            grams = [(t,) for t in toks if t not in STOPWORDS]
        elif unit == "bigram":
            grams = [
                (toks[i], toks[i + 1])
                for i in range(len(toks) - 1)
                if toks[i] not in STOPWORDS and toks[i + 1] not in STOPWORDS
            ]
        else:  # phrase: maximal non-stopword runs of 2..5 tokens with a noun
            grams = []
            run: list[str] = []
            for t in toks + ["."]:
                if t not in STOPWORDS and t != ".":
                    run.append(t)
                    continue
                if 2 <= len(run) <= PHRASE_MAX_TOKENS and any(is_noun_like(x) for x in run):
                    grams.append(tuple(run))
                run = []
        for g in grams:
            freq[g] += 1
            mentions.setdefault(g, set()).add(s.id)

    min_freq = CONCEPT_MIN_FREQ if unit in ("unigram", "bigram") else 1
    kept = {g: c for g, c in freq.items() if c >= min_freq}
    if not kept:
        raise EmptyConceptSet(f"no {unit} concept passed the frequency threshold")
    max_freq = max(kept.values())
    concepts = [
        Concept(
            concept_id=0,
            label=" ".join(g),
            unit=unit,
            mention_sentence_ids=mentions[g],
            base_score=c / max_freq,
        )
        for g, c in kept.items()
    ]
    concepts.sort(key=lambda c: (-c.base_score, c.label))
    for i, c in enumerate(concepts):
        c.concept_id = i
        c.user_weight = c.base_score
    for c in concepts:
        for sid in c.mention_sentence_ids:
            corpus.sentences[sid].concept_ids.add(c.concept_id)
    return concepts


# ---------------------------------------------------------------------
# similarity and embeddings
# ---------------------------------------------------------------------

def _embed_dim(emb: dict[str, np.ndarray]) -> int:
    return len(next(iter(emb.values()))) if emb else 0


def _centroid(tokens, emb) -> np.ndarray:
    dim = _embed_dim(emb)
    vecs = [emb[t] for t in tokens if t in emb]
    if not vecs:
        return np.zeros(dim)
    return np.mean(vecs, axis=0)


def similarity(a: list[str], b: list[str], kind: str = "jaccard", corpus: Corpus | None = None) -> float:
    """Symmetric token-list similarity in [0, 1]."""
    if not a or not b:
        raise EmptyInput("similarity of an empty token list is undefined")
    if list(a) == list(b):
        return 1.0
    if kind == "jaccard":
        sa, sb = set(a), set(b)
        inter = len(sa & sb)
        return inter / len(sa | sb) if inter else 0.0
    if kind == "cosine_tfidf":
        if corpus is None:
            raise EmptyInput("cosine_tfidf needs corpus statistics")
        n_docs = len(corpus.documents)

        def vec(tokens):
            counts = Counter(t for t in tokens if t in corpus.df)
            return {
                t: c * math.log(n_docs / corpus.df[t])
                for t, c in counts.items()
            }

        va, vb = vec(a), vec(b)
        dot = sum(va[t] * vb.get(t, 0.0) for t in va)
        na = math.sqrt(sum(x * x for x in va.values()))
        nb = math.sqrt(sum(x * x for x in vb.values()))
        if na == 0 or nb == 0:
            return 0.0
        return min(1.0, max(0.0, dot / (na * nb)))
    if kind == "embedding":
        if corpus is None or corpus.embeddings is None:
            raise EmptyInput("embedding similarity needs corpus embeddings")
        ca, cb = _centroid(a, corpus.embeddings), _centroid(b, corpus.embeddings)
        na, nb = np.linalg.norm(ca), np.linalg.norm(cb)
        if na == 0 or nb == 0:
            return 0.0
        return float(min(1.0, max(0.0, ca @ cb / (na * nb))))
    raise MalformedInput(f"unknown similarity kind: {kind}")


def build_embeddings(corpus: Corpus, dim: int, seed: int) -> dict[str, np.ndarray]:
    """PPMI co-occurrence vectors reduced by seeded randomized power iteration.

    Replaces external word-vector tooling; deterministic for a fixed
    (corpus, dim, seed) triple. Rows are unit-normalised.
    """
    vocab = corpus.vocabulary
    n = len(vocab)
    if dim > n:
        raise DimTooLarge(f"dim {dim} exceeds vocabulary size {n}")
    if n == 0:
        return {}
    window = 5
    cooc = np.zeros((n, n))
    for s in corpus.sentences:
        ids = [vocab[t] for t in s.tokens]
        for i, ti in enumerate(ids):
            cooc[ti, ti] += 2.0  # distance-0 count keeps blocks PSD
            for j in range(i + 1, min(i + 1 + window, len(ids))):
                tj = ids[j]
                cooc[ti, tj] += 1.0
                cooc[tj, ti] += 1.0
    total = cooc.sum()
    if total == 0:
        return {t: np.zeros(dim) for t in vocab}
    p_row = cooc.sum(axis=1) / total
    with np.errstate(divide="ignore", invalid="ignore"):
        pmi = np.log((cooc / total) / np.outer(p_row, p_row))
    ppmi = np.where(np.isfinite(pmi), np.maximum(pmi, 0.0), 0.0)

    rng = np.random.default_rng(seed)
    omega = rng.standard_normal((n, dim))
    y = ppmi @ omega
    for _ in range(4):
        y = ppmi @ (ppmi.T @ y)
    q, _ = np.linalg.qr(y)
    b = q.T @ ppmi
    u_b, sing, _ = np.linalg.svd(b, full_matrices=False)
    vectors = (q @ u_b[:, :dim]) * np.sqrt(sing[:dim])

    norms = np.linalg.norm(vectors, axis=1)
    vectors = np.divide(vectors, norms[:, None], out=np.zeros_like(vectors), where=norms[:, None] > 0)
    return {t: vectors[i].copy() for t, i in vocab.items()}


def load_embedding_file(path) -> dict[str, np.ndarray]:
    """Load external vectors: whitespace-separated, first token is the term."""
    emb = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) < 2:
                continue
            emb[parts[0]] = np.array([float(x) for x in parts[1:]])
    return emb
