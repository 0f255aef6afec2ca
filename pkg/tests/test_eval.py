import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from persum.corpus import Concept
from persum.errors import EmptyReference, UnknownTarget
from persum.evaluation import (
    RewardCoeffs,
    SimUser,
    answer,
    ground_truth_reward,
    lcs_length,
    redundancy,
    rouge_l,
    rouge_n,
)

WORDS = ["the", "cat", "sat", "ran", "dog", "sun", "mat", "hill"]


# -- independent oracles (kept deliberately dumb) -------------------------

def oracle_ngrams(tokens, n):
    out = {}
    for i in range(len(tokens) - n + 1):
        g = tuple(tokens[i:i + n])
        out[g] = out.get(g, 0) + 1
    return out


def oracle_rouge_n(cand, refs, n, mode):
    cg = oracle_ngrams(cand, n)
    match = 0
    total = 0
    union = {}
    for ref in refs:
        rg = oracle_ngrams(ref, n)
        total += sum(rg.values())
        for g, c in cg.items():
            match += min(c, rg.get(g, 0))
        for g, c in rg.items():
            union[g] = max(union.get(g, 0), c)
    recall = match / total if total else 0.0
    if mode == "recall":
        return recall
    cand_total = sum(cg.values())
    pmatch = sum(min(c, union.get(g, 0)) for g, c in cg.items())
    precision = pmatch / cand_total if cand_total else 0.0
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def oracle_lcs(a, b):
    # plain quadratic DP, written independently of the implementation
    m, n = len(a), len(b)
    table = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[m][n]


# -- rouge_n -------------------------------------------------------------

def test_identical_candidate_and_reference():
    toks = "the cat sat on the mat".split()
    assert rouge_n(toks, [toks], n=1, mode="recall").value == 1.0
    assert rouge_n(toks, [toks], n=1, mode="f1").value == 1.0
    assert rouge_n(toks, [toks], n=2, mode="recall").value == 1.0


def test_hand_counted_recall():
    got = rouge_n("the cat sat".split(), ["the cat ran".split()], n=1, mode="recall")
    assert got.value == pytest.approx(2 / 3)


def test_disjoint_vocabulary_zero():
    assert rouge_n(["aa", "bb"], [["cc", "dd"]], n=1, mode="recall").value == 0.0
    assert rouge_n(["aa", "bb"], [["cc", "dd"]], n=1, mode="f1").value == 0.0


def test_empty_reference_raises():
    with pytest.raises(EmptyReference):
        rouge_n(["a"], [], n=1)
    with pytest.raises(EmptyReference):
        rouge_l(["a"], [[]])


def test_truncation_cuts_candidate():
    cand = "aa bb cc dd".split()
    ref = ["cc dd".split()]
    full = rouge_n(cand, ref, n=1, mode="recall").value
    cut = rouge_n(cand, ref, n=1, mode="recall", truncation=2).value
    assert full == 1.0 and cut == 0.0


def test_rouge_n_matches_oracle_randomized():
    rng = np.random.default_rng(123)
    for _ in range(60):
        cand = [WORDS[i] for i in rng.integers(0, len(WORDS), rng.integers(1, 10))]
        refs = [
            [WORDS[i] for i in rng.integers(0, len(WORDS), rng.integers(1, 10))]
            for _ in range(rng.integers(1, 3))
        ]
        for n in (1, 2):
            for mode in ("recall", "f1"):
                assert rouge_n(cand, refs, n=n, mode=mode).value == \
                    oracle_rouge_n(cand, refs, n, mode)


# -- rouge_l -------------------------------------------------------------

def test_rouge_l_hand_cases():
    assert rouge_l("a b c".split(), ["a b c".split()]).value == 1.0
    assert rouge_l("a x b y c".split(), ["a b c".split()]).value == 1.0
    assert rouge_l("a b c".split(), ["c b a".split()]).value == pytest.approx(1 / 3)


def test_rouge_l_subsequence_property():
    rng = np.random.default_rng(5)
    for _ in range(30):
        ref = [WORDS[i] for i in rng.integers(0, len(WORDS), 4)]
        cand = list(ref)
        for pos in sorted(rng.integers(0, len(cand) + 1, 3))[::-1]:
            cand.insert(pos, "filler")
        assert rouge_l(cand, [ref]).value == 1.0


def test_lcs_matches_oracle():
    rng = np.random.default_rng(9)
    for _ in range(50):
        a = [WORDS[i] for i in rng.integers(0, 4, rng.integers(0, 8))]
        b = [WORDS[i] for i in rng.integers(0, 4, rng.integers(0, 8))]
        assert lcs_length(a, b) == oracle_lcs(a, b)


# -- reward --------------------------------------------------------------

def test_reward_of_perfect_summary_is_1_3():
    s1 = "harbor cranes failed".split()
    s2 = "mayor praised parks".split()
    refs = [s1 + s2]
    user = SimUser(kind="reference", references=refs)
    assert redundancy([s1, s2]) == 0.0
    assert ground_truth_reward(user, [s1, s2], refs) == pytest.approx(1.3)


def test_reward_combines_components_linearly():
    s1 = "aa bb cc".split()
    s2 = "aa dd ee".split()
    refs = ["aa bb ff gg".split()]
    user = SimUser(kind="reference", references=refs)
    cand = s1 + s2
    r1 = rouge_n(cand, refs, n=1, mode="recall").value
    r2 = rouge_n(cand, refs, n=2, mode="recall").value
    red = redundancy([s1, s2])
    expected = 0.8 * r1 + 0.5 * r2 - 0.25 * red
    assert ground_truth_reward(user, [s1, s2], refs) == pytest.approx(expected)
    # the Table-6.6 coefficients themselves
    c = RewardCoeffs()
    assert (c.rouge1, c.rouge2, c.redundancy) == (0.8, 0.5, 0.25)
    assert 0.8 * 0.5 + 0.5 * 0.2 - 0.25 * 0.1 == pytest.approx(0.475)


def test_reward_zero_overlap():
    refs = ["xx yy zz".split()]
    user = SimUser(kind="reference", references=refs)
    assert ground_truth_reward(user, ["aa bb".split()], refs) == 0.0


def test_reward_monotone_in_reference_sentences():
    rng = np.random.default_rng(3)
    refs = [["harbor", "cranes", "failed", "storm", "wind", "rain"]]
    user = SimUser(kind="reference", references=refs)
    partial = [["storm", "wind"]]
    extended = partial + [["harbor", "cranes", "failed"]]
    cand_p = [t for s in partial for t in s]
    cand_e = [t for s in extended for t in s]
    assert rouge_n(cand_e, refs, 1).value >= rouge_n(cand_p, refs, 1).value
    assert rouge_n(cand_e, refs, 2).value >= rouge_n(cand_p, refs, 2).value


# -- simulated user ------------------------------------------------------

def _concept(cid, label):
    return Concept(cid, label, "unigram", {0}, 1.0)


def test_reference_user_accepts_reference_concepts():
    refs = ["harbor cranes failed".split()]
    user = SimUser(kind="reference", references=refs)
    fb = user.answer_concept(_concept(0, "harbor"))
    assert fb["action"] == 1 and fb["weight"] == 1.0 and fb["confidence"] == 1.0
    fb = user.answer_concept(_concept(1, "parks"))
    assert fb["action"] == -1 and fb["weight"] == 0.0


def test_reference_user_multiword_membership():
    refs = ["harbor cranes failed".split()]
    user = SimUser(kind="reference", references=refs)
    assert user.utility("harbor cranes") == 1.0
    assert user.utility("cranes harbor") == 0.0  # not contiguous in the reference


def test_dictionary_user_planted_order():
    truth = {f"c{i}": float(i) for i in range(6)}
    user = SimUser(kind="dictionary", concept_truth=truth, seed=1)
    for i in range(5):
        w = user.answer_concept_pair(_concept(i, f"c{i}"), _concept(i + 1, f"c{i+1}"))
        assert w == "right"
    with pytest.raises(UnknownTarget):
        user.utility("missing")


def test_noise_flip_rate_monte_carlo():
    truth = {"low": 0.0, "high": 1.0}
    noise = 0.3
    user = SimUser(kind="dictionary", concept_truth=truth, seed=11, noise=noise)
    flips = 0
    n = 10_000
    for _ in range(n):
        if user.answer_concept_pair(_concept(0, "low"), _concept(1, "high")) == "left":
            flips += 1
    assert abs(flips / n - noise) < 0.02


def test_answers_deterministic_at_zero_noise():
    refs = ["harbor cranes".split()]
    u1 = SimUser(kind="reference", references=refs, seed=4)
    u2 = SimUser(kind="reference", references=refs, seed=99)
    pair = (_concept(0, "harbor"), _concept(1, "parks"))
    assert u1.answer_concept_pair(*pair) == u2.answer_concept_pair(*pair) == "left"


def test_answer_dispatch():
    refs = ["harbor cranes".split()]
    user = SimUser(kind="reference", references=refs)
    assert answer(user, _concept(0, "harbor"))["action"] == 1
    assert answer(user, (_concept(0, "harbor"), _concept(1, "parks"))) == "left"
    win = answer(user, ([refs[0]], [["other", "words"]], refs))
    assert win == "left"
    with pytest.raises(UnknownTarget):
        answer(user, 42)


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.sampled_from(WORDS), min_size=1, max_size=8),
    st.lists(st.sampled_from(WORDS), min_size=1, max_size=8),
)
def test_rouge_range_property(cand, ref):
    for metric in (rouge_n, rouge_l):
        for mode in ("recall", "f1"):
            kwargs = {"mode": mode} if metric is rouge_l else {"n": 1, "mode": mode}
            v = metric(cand, [ref], **kwargs).value
            assert 0.0 <= v <= 1.0
