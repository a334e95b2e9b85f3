"""Metrics against independent brute-force reference implementations."""

import math
import random

import numpy as np
import pytest

from storykit.metrics import (MatchTable, SMOOTH_EPS, bleu2, corpus_self_bleu,
                              max_and_avg, rouge, score_lists, score_single,
                              self_bleu)

# ---------------------------------------------------------------------------
# brute-force oracles (written independently of storykit.metrics: naive
# n-gram counting dicts and a recursive memoized LCS)
# ---------------------------------------------------------------------------


def _oracle_ngram_counts(toks, n):
    counts = {}
    for i in range(len(toks) - n + 1):
        g = tuple(toks[i:i + n])
        counts[g] = counts.get(g, 0) + 1
    return counts


def oracle_bleu2(cand, ref):
    if not cand:
        return 0.0
    precisions = []
    for n in (1, 2):
        c_counts = _oracle_ngram_counts(cand, n)
        total = sum(c_counts.values())
        if total == 0:
            precisions.append(1.0)
            continue
        r_counts = _oracle_ngram_counts(ref, n)
        match = 0
        for g, c in c_counts.items():
            match += min(c, r_counts.get(g, 0))
        p = match / total
        precisions.append(p if p > 0 else SMOOTH_EPS)
    bp = min(1.0, math.exp(1.0 - len(ref) / len(cand)))
    return bp * math.sqrt(precisions[0] * precisions[1])


def _oracle_lcs(a, b):
    import functools

    @functools.lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + go(i + 1, j + 1)
        return max(go(i + 1, j), go(i, j + 1))

    return go(0, 0)


def oracle_rouge(cand, ref, variant):
    if variant == "1":
        c = _oracle_ngram_counts(cand, 1)
        r = _oracle_ngram_counts(ref, 1)
        match = sum(min(v, r.get(g, 0)) for g, v in c.items())
    else:
        match = _oracle_lcs(tuple(cand), tuple(ref))
    p = match / len(cand)
    r_ = match / len(ref)
    return 0.0 if p + r_ == 0 else 2 * p * r_ / (p + r_)


def _random_pairs(n=50, seed=13):
    rnd = random.Random(seed)
    alphabet = ["a", "b", "c", "d", "e", "the", "cat", "sat", ".", "ran"]
    pairs = []
    for _ in range(n):
        c = [rnd.choice(alphabet) for _ in range(rnd.randint(1, 12))]
        r = [rnd.choice(alphabet) for _ in range(rnd.randint(1, 12))]
        pairs.append((c, r))
    return pairs


# --- BLEU-2 --------------------------------------------------------------------

def test_bleu2_identity_and_disjoint():
    assert bleu2(["a", "b", "c"], ["a", "b", "c"]) == 1.0
    assert bleu2(["x", "y"], ["a", "b"]) < 1e-8


def test_bleu2_worked_example():
    # cand "a b c", ref "a b d": p1 = 2/3, p2 = 1/2, BP = 1 -> sqrt(1/3)
    assert abs(bleu2(list("abc"), list("abd")) - math.sqrt(1 / 3)) < 1e-12


def test_bleu2_empty_candidate_warns_and_scores_zero():
    with pytest.warns(UserWarning):
        assert bleu2([], ["a"]) == 0.0


def test_bleu2_brevity_penalty():
    # shorter candidate than reference: BP = exp(1 - r/c) < 1
    val = bleu2(["a", "b"], ["a", "b", "c", "d"])
    assert abs(val - math.exp(1 - 4 / 2) * math.sqrt(1.0 * 1.0)) < 1e-12
    # candidate longer than reference: BP capped at 1
    assert bleu2(["a", "b", "c", "d"], ["a", "b"]) <= 1.0


def test_bleu2_matches_oracle_on_random_pairs():
    for c, r in _random_pairs():
        assert abs(bleu2(c, r) - oracle_bleu2(c, r)) < 1e-12


# --- ROUGE ----------------------------------------------------------------------

def test_rouge_identity_and_disjoint():
    for variant in ("1", "L"):
        assert rouge(["a", "b"], ["a", "b"], variant) == 1.0
        assert rouge(["x"], ["a"], variant) == 0.0


def test_rouge_l_worked_example():
    # cand "a c d", ref "a b c d": LCS 3 -> P=1, R=3/4, F1 = 6/7
    assert abs(rouge(list("acd"), list("abcd"), "L") - 6 / 7) < 1e-12


def test_rouge_empty_errors():
    with pytest.raises(ValueError):
        rouge([], ["a"], "1")
    with pytest.raises(ValueError):
        rouge(["a"], ["b"], "nope")


def test_rouge_matches_oracle_on_random_pairs():
    for c, r in _random_pairs(seed=29):
        for variant in ("1", "L"):
            assert abs(rouge(c, r, variant) - oracle_rouge(c, r, variant)) < 1e-12


def test_rouge1_is_bag_level():
    # permutation leaves ROUGE-1 at 1 but lowers ROUGE-L
    assert rouge(["b", "a"], ["a", "b"], "1") == 1.0
    assert rouge(["b", "a"], ["a", "b"], "L") < 1.0


# --- max/avg and Self-BLEU -------------------------------------------------------

def test_max_and_avg_contains_reference():
    ref = ["a", "b", "c"]
    mx, _av = max_and_avg([["x"], ref, ["a", "b"]], ref, bleu2)
    assert mx == 1.0


def test_max_and_avg_identical_items():
    mx, av = max_and_avg([["a", "b"]] * 3, ["a", "c"], bleu2)
    assert mx == av


def test_max_and_avg_arithmetic():
    vals = iter([0.2, 0.5, 0.3])
    mx, av = max_and_avg([["x"], ["y"], ["z"]], ["r"], lambda c, r: next(vals))
    assert mx == 0.5 and abs(av - 1 / 3) < 1e-12


def test_max_ge_avg_on_random_lists():
    rnd = random.Random(3)
    alphabet = ["a", "b", "c", "d"]
    for _ in range(20):
        lst = [[rnd.choice(alphabet) for _ in range(rnd.randint(1, 6))] for _ in range(4)]
        ref = [rnd.choice(alphabet) for _ in range(rnd.randint(1, 6))]
        mx, av = max_and_avg(lst, ref, bleu2)
        assert mx >= av - 1e-15


def test_self_bleu_identical_triple_is_exactly_one():
    assert self_bleu([["a", "b"], ["a", "b"], ["a", "b"]]) == 1.0


def test_self_bleu_disjoint_items_near_zero():
    # smoothing floors each pair at sqrt(SMOOTH_EPS)
    assert self_bleu([["a"], ["b"], ["c"]]) <= math.sqrt(SMOOTH_EPS) + 1e-15


def test_self_bleu_is_order_invariant_and_matches_pair_enumeration():
    items = [["a", "b"], ["a", "c"], ["a", "b"]]
    expect = np.mean([oracle_bleu2(items[i], items[j])
                      for i in range(3) for j in range(3) if i != j])
    assert abs(self_bleu(items) - expect) < 1e-12
    assert abs(self_bleu(list(reversed(items))) - self_bleu(items)) < 1e-12


def test_self_bleu_singleton_errors():
    with pytest.raises(ValueError):
        self_bleu([["a"]])


def test_corpus_self_bleu_averages_contexts():
    a = [["a"], ["a"]]
    b = [["a"], ["b"]]
    expect = (self_bleu(a) + self_bleu(b)) / 2
    assert abs(corpus_self_bleu([a, b]) - expect) < 1e-12


def test_self_bleu_multi_reference_variant():
    val = self_bleu([["a", "b"], ["a", "c"], ["b", "c"]], multi_reference=True)
    assert 0.0 <= val <= 1.0


# --- tables and reports -----------------------------------------------------------

def test_match_table_percentages_and_diagonal():
    counts = np.array([[8.0, 2.0], [1.0, 9.0]])
    t = MatchTable("demo", ["x", "y"], ["x", "y"], counts)
    np.testing.assert_allclose(t.percentages()[0], [80.0, 20.0])
    np.testing.assert_allclose(t.diagonal_match(), [80.0, 90.0])
    text = t.to_text()
    assert "demo" in text and "80.0" in text


def test_score_single_and_lists_shapes():
    outs = [["a", "b"], ["c"]]
    refs = [["a", "b"], ["c", "d"]]
    rep = score_single(outs, refs, "sys", ppl=3.0)
    assert rep.ppl == 3.0 and 0 <= rep.bleu <= 1
    assert "n/a" in rep.story_scorer

    lists = [[["a", "b"], ["a"]], [["c"], ["c", "d"]]]
    rep2 = score_lists(lists, refs, "sys2")
    assert rep2.max_bleu >= rep2.avg_bleu
    assert rep2.self_bleu is not None
    assert "PPL" in rep2.header()
    assert len(rep2.row()) > 0
