import json
import string
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from persum.corpus import (
    FEATURE_SCHEMA,
    build_embeddings,
    extract_concepts,
    featurize,
    load_corpus,
    preprocess,
    similarity,
    tokenize,
)
from persum.errors import (
    DegenerateFeatureWarning,
    DimTooLarge,
    DuplicateDocId,
    EmptyConceptSet,
    EmptyInput,
    MalformedInput,
)
from persum.stopwords import STOPWORDS


def _jsonl(tmp_path, rows, name="c.jsonl"):
    p = tmp_path / name
    p.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return p


# -- loading ------------------------------------------------------------

def test_load_two_single_sentence_docs_orders_ids(tmp_path):
    p = _jsonl(tmp_path, [
        {"doc_id": "a", "text": "Cats sleep all day."},
        {"doc_id": "b", "text": "Dogs bark at night."},
    ])
    corp = load_corpus(p)
    assert [s.id for s in corp.sentences] == [0, 1]
    assert [s.doc_id for s in corp.sentences] == ["a", "b"]


def test_load_empty_directory_is_malformed(tmp_path):
    d = tmp_path / "docs"
    d.mkdir()
    with pytest.raises(MalformedInput):
        load_corpus(d, "txt_dir")


def test_load_missing_field_names_line(tmp_path):
    p = _jsonl(tmp_path, [{"doc_id": "a", "text": "Fine."}, {"doc_id": "b"}])
    with pytest.raises(MalformedInput, match=":2"):
        load_corpus(p)


def test_load_duplicate_doc_id(tmp_path):
    p = _jsonl(tmp_path, [
        {"doc_id": "a", "text": "One."},
        {"doc_id": "a", "text": "Two."},
    ])
    with pytest.raises(DuplicateDocId):
        load_corpus(p)


def test_reload_is_byte_identical(tmp_path):
    p = _jsonl(tmp_path, [
        {"doc_id": "a", "text": "The cat sat on the mat. It slept."},
        {"doc_id": "b", "text": "Dogs bark. Dogs run far."},
    ])
    assert load_corpus(p).to_json() == load_corpus(p).to_json()


def test_txt_dir_with_refs(tmp_path):
    d = tmp_path / "docs"
    d.mkdir()
    (d / "x.txt").write_text("The cat sat. The dog ran.")
    (d / "refs").mkdir()
    (d / "refs" / "0.1.txt").write_text("The cat sat.")
    corp = load_corpus(d, "txt_dir")
    assert corp.documents[0].doc_id == "x"
    assert corp.reference_summaries == [["the", "cat", "sat"]]


def test_sentence_invariants(news_corpus):
    for s in news_corpus.sentences:
        assert s.length_words == len(s.tokens)
        assert s.position < len(news_corpus.doc_sentences(s.doc_id))
    for term, df in news_corpus.df.items():
        assert df <= len(news_corpus.documents)
    ids = sorted(news_corpus.vocabulary.values())
    assert ids == list(range(len(ids)))


# -- preprocessing -------------------------------------------------------

def test_preprocess_two_sentences():
    sents, toks = preprocess("A b. C d.")
    assert len(sents) == 2
    assert toks == [["a", "b"], ["c", "d"]]


def test_preprocess_splits_on_abbreviation():
    # documented limitation: the uppercase-follow rule fires after "Dr."
    sents, _ = preprocess("Dr. Smith left.")
    assert sents == ["Dr.", "Smith left."]


def test_preprocess_empty():
    assert preprocess("") == ([], [])
    assert preprocess("   \n ") == ([], [])


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet=string.ascii_letters + " .!?", min_size=0, max_size=120))
def test_preprocess_second_pass_stable(text):
    first, _ = preprocess(text)
    second, _ = preprocess(" ".join(first))
    third, _ = preprocess(" ".join(second))
    assert second == third


# -- features ------------------------------------------------------------

def test_position_score_max_for_first_sentence(news_corpus):
    j = FEATURE_SCHEMA.index("position_score")
    first = news_corpus.doc_sentences("parks")[0]
    assert first.features[j] == 1.0


def test_feature_scaling_bounds(news_corpus):
    M = news_corpus.feature_matrix()
    lo, hi = M.min(axis=0), M.max(axis=0)
    for j in range(M.shape[1]):
        if hi[j] > 0:  # non-degenerate
            assert lo[j] == 0.0 and hi[j] == 1.0
        else:
            assert np.all(M[:, j] == 0.0)


def test_identical_sentences_degenerate(tmp_path):
    p = _jsonl(tmp_path, [
        {"doc_id": "a", "text": "Same words here."},
        {"doc_id": "b", "text": "Same words here."},
    ])
    corp = load_corpus(p)
    with pytest.warns(DegenerateFeatureWarning):
        featurize(corp)
    assert np.all(corp.feature_matrix() == 0.0)


def test_tfidf_zero_for_ubiquitous_term(tmp_path):
    # the shared term appears in every document: idf = ln(1) = 0
    p = _jsonl(tmp_path, [
        {"doc_id": "a", "text": "Shared alpha."},
        {"doc_id": "b", "text": "Shared beta."},
    ])
    corp = load_corpus(p)
    import math
    assert math.log(len(corp.documents) / corp.df["shared"]) == 0.0


# -- concepts ------------------------------------------------------------

def test_unigram_concepts_frequency_threshold(tmp_path):
    p = _jsonl(tmp_path, [{"doc_id": "a", "text": "The cat sat. The cat ran."}])
    corp = load_corpus(p)
    concepts = extract_concepts(corp, "unigram")
    assert [c.label for c in concepts] == ["cat"]
    assert concepts[0].base_score == 1.0
    assert concepts[0].mention_sentence_ids == {0, 1}


def test_one_word_corpus_empty_concepts(tmp_path):
    p = _jsonl(tmp_path, [{"doc_id": "a", "text": "hello."}])
    corp = load_corpus(p)
    with pytest.raises(EmptyConceptSet):
        extract_concepts(corp, "unigram")


def test_phrase_unit_caps_length(tmp_path):
    text = ("Alpha beta gamma delta epsilon zeta eta. "
            "Harbor cranes failed. Harbor cranes failed again.")
    p = _jsonl(tmp_path, [{"doc_id": "a", "text": text}])
    corp = load_corpus(p)
    concepts = extract_concepts(corp, "phrase")
    assert all(len(c.tokens) <= 5 for c in concepts)
    assert all(len(c.tokens) >= 2 for c in concepts)


def test_bigram_concepts_adjacent_pairs(tmp_path):
    p = _jsonl(tmp_path, [{"doc_id": "a", "text": "Harbor cranes failed. Harbor cranes held."}])
    corp = load_corpus(p)
    concepts = extract_concepts(corp, "bigram")
    assert [c.label for c in concepts] == ["harbor cranes"]


def test_concept_mentions_contain_tokens(news_corpus):
    for unit in ("unigram", "bigram"):
        for c in extract_concepts(news_corpus, unit):
            k = len(c.tokens)
            for sid in c.mention_sentence_ids:
                toks = news_corpus.sentences[sid].tokens
                assert any(tuple(toks[i:i + k]) == c.tokens for i in range(len(toks) - k + 1))
    for c in extract_concepts(news_corpus, "unigram"):
        assert not all(t in STOPWORDS for t in c.tokens)


# -- similarity ----------------------------------------------------------

def test_similarity_hand_cases(news_corpus):
    assert similarity(["a", "b", "c"], ["a", "b", "c"], "jaccard") == 1.0
    assert similarity(["a", "b", "c"], ["a", "b", "d"], "jaccard") == 0.5
    assert similarity(["x"], ["y"], "jaccard") == 0.0
    assert similarity(["x"], ["y"], "cosine_tfidf", news_corpus) == 0.0
    with pytest.raises(EmptyInput):
        similarity([], ["a"], "jaccard")


tokens_strategy = st.lists(
    st.sampled_from(["cat", "dog", "sun", "rain", "tree", "car"]),
    min_size=1, max_size=6)


@settings(max_examples=100, deadline=None)
@given(tokens_strategy, tokens_strategy)
def test_similarity_properties(a, b):
    for kind in ("jaccard",):
        ab = similarity(a, b, kind)
        assert 0.0 <= ab <= 1.0
        assert ab == similarity(b, a, kind)
        assert similarity(a, a, kind) == 1.0


def test_similarity_embedding_properties(news_corpus):
    rng = np.random.default_rng(0)
    vocab = list(news_corpus.vocabulary)
    for _ in range(50):
        a = [vocab[i] for i in rng.integers(0, len(vocab), 4)]
        b = [vocab[i] for i in rng.integers(0, len(vocab), 4)]
        ab = similarity(a, b, "embedding", news_corpus)
        assert 0.0 <= ab <= 1.0
        assert ab == similarity(b, a, "embedding", news_corpus)
        assert similarity(a, a, "embedding", news_corpus) == 1.0


# -- embeddings ----------------------------------------------------------

def test_embeddings_cooccurrence_structure(tmp_path):
    # aa/bb always co-occur; cc/dd likewise; no cross mentions
    rows = [{"doc_id": f"d{i}", "text": "Aa bb. Cc dd."} for i in range(3)]
    p = _jsonl(tmp_path, rows)
    corp = load_corpus(p)
    emb = build_embeddings(corp, dim=3, seed=1)

    def cos(x, y):
        return float(emb[x] @ emb[y])

    assert cos("aa", "bb") >= cos("aa", "cc") - 1e-9
    assert cos("aa", "bb") >= cos("aa", "dd") - 1e-9
    assert cos("cc", "dd") >= cos("bb", "cc") - 1e-9


def test_embeddings_deterministic(news_corpus):
    e1 = build_embeddings(news_corpus, dim=8, seed=42)
    e2 = build_embeddings(news_corpus, dim=8, seed=42)
    for t in e1:
        assert np.array_equal(e1[t], e2[t])
    norms = [np.linalg.norm(v) for v in e1.values() if v.any()]
    assert np.allclose(norms, 1.0)


def test_embeddings_dim_too_large(news_corpus):
    with pytest.raises(DimTooLarge):
        build_embeddings(news_corpus, dim=len(news_corpus.vocabulary) + 1, seed=0)


def test_tokenize_strips_punctuation():
    assert tokenize("Hello, World! (really)") == ["hello", "world", "really"]


def test_stopword_list_is_fixed_127():
    assert len(STOPWORDS) == 127
