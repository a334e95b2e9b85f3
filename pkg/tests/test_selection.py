"""Candidate reranking and the feed-forward frame predictor."""

import numpy as np
import pytest

from storykit.corpus import (EOS, PAD, SENT_BOUNDARY, UNK, Annotation,
                             FrameInventory, Story, Vocabulary)
from storykit.model import ModelConfig, Resources, Seq2SeqModel
from storykit.selection import (Candidate, FramePredictor, frame_vector,
                                make_frame_examples, predict_topk_frames,
                                rerank, train_frame_predictor)


def _vocab():
    return Vocabulary(["a", "b", "c", "d", "e", SENT_BOUNDARY, UNK, EOS, PAD])


def _reverse_model(seed=0):
    vocab = _vocab()
    res = Resources(vocab=vocab)
    cfg = ModelConfig(vocab_size=len(vocab), embed_dim=4, hidden_dim=6,
                      attribute="none", seed=seed)
    model = Seq2SeqModel(cfg, vocab, res)
    rng = np.random.default_rng(seed + 1)
    for p in model.params.values():
        p.value = rng.normal(0, 0.3, p.value.shape)
    return model


# --- reranking -------------------------------------------------------------------

def test_rerank_lambda_zero_orders_by_normalized_forward():
    cands = [Candidate(tokens=["a", "b"], forward_logp=-4.0),    # -2.0 / token
             Candidate(tokens=["a"], forward_logp=-1.0),         # -1.0
             Candidate(tokens=["a", "b", "c"], forward_logp=-4.5)]  # -1.5
    out = rerank(["a"], cands, None, lam=0.0, k=3)
    assert [c.tokens for c in out] == [["a"], ["a", "b", "c"], ["a", "b"]]
    assert out[0].combined == -1.0


def test_rerank_tie_stable_for_identical_candidates():
    cands = [Candidate(tokens=["a"], forward_logp=-1.0, attribute=i)
             for i in range(4)]
    out = rerank(["a"], cands, None, lam=0.0, k=4)
    assert [c.attribute for c in out] == [0, 1, 2, 3]


def test_rerank_worked_example_with_reverse_scores():
    model = _reverse_model()
    cands = [Candidate(tokens=["a", "b"], forward_logp=-2.0),
             Candidate(tokens=["c"], forward_logp=-0.5),
             Candidate(tokens=["d", "e", "a"], forward_logp=-9.0)]
    out = rerank(["a", "b"], cands, model, lam=0.5, k=3)
    for c in out:
        assert c.reverse_logp is not None
        expect = c.forward_logp / max(1, len(c.tokens)) + 0.5 * c.reverse_logp
        assert abs(c.combined - expect) < 1e-12
    combined = [c.combined for c in out]
    assert combined == sorted(combined, reverse=True)


def test_rerank_k_larger_than_pool_rejected():
    cands = [Candidate(tokens=["a"], forward_logp=-1.0)]
    with pytest.raises(ValueError):
        rerank(["a"], cands, None, lam=0.0, k=2)


def test_rerank_positive_lambda_requires_reverse_model():
    cands = [Candidate(tokens=["a"], forward_logp=-1.0)]
    with pytest.raises(ValueError):
        rerank(["a"], cands, None, lam=0.5, k=1)


def test_rerank_order_invariant_to_constant_forward_shift():
    model = _reverse_model(seed=2)
    base = [Candidate(tokens=["a", "b"], forward_logp=-2.0),
            Candidate(tokens=["c", "d"], forward_logp=-3.0),
            Candidate(tokens=["e"], forward_logp=-1.2)]
    shifted = [Candidate(tokens=c.tokens, forward_logp=c.forward_logp - 4.0)
               for c in base]
    # per-token normalization means only same-length shifts preserve order,
    # so compare equal-length candidates
    eq = [Candidate(tokens=["a", "b"], forward_logp=-2.0),
          Candidate(tokens=["c", "d"], forward_logp=-3.0),
          Candidate(tokens=["d", "e"], forward_logp=-2.5)]
    eq_shift = [Candidate(tokens=c.tokens, forward_logp=c.forward_logp - 4.0)
                for c in eq]
    o1 = [c.tokens for c in rerank(["a"], eq, model, lam=0.0, k=3)]
    o2 = [c.tokens for c in rerank(["a"], eq_shift, model, lam=0.0, k=3)]
    assert o1 == o2
    del base, shifted


# --- frame vectors and predictor ----------------------------------------------------

def test_frame_vector_basics():
    v = frame_vector([3])
    assert v.shape == (101,)
    assert v[3] == 1.0 and v.sum() == 1.0
    np.testing.assert_array_equal(frame_vector([]), np.zeros(101))
    both = frame_vector([0, 100])
    assert both[0] == 1.0 and both[100] == 1.0 and both.sum() == 2.0


def test_frame_vector_out_of_range():
    with pytest.raises(ValueError):
        frame_vector([101])
    with pytest.raises(ValueError):
        frame_vector([-1])


def test_predictor_output_shape_and_topk_ties():
    pred = FramePredictor(hidden_dim=8, seed=0)
    x = np.zeros((4, 101))
    out = pred.predict(x)
    assert out.shape == (101,)
    # zero the output layer: all scores tie, so top-k falls back to lowest ids
    pred.params["W_out"].value[:] = 0.0
    pred.params["b_out"].value[:] = 0.0
    assert predict_topk_frames(pred, x, k=4) == [0, 1, 2, 3]


def test_predictor_topk_full_is_permutation():
    pred = FramePredictor(hidden_dim=8, seed=1)
    x = np.random.default_rng(2).normal(size=(4, 101))
    top = predict_topk_frames(pred, x, k=101)
    assert sorted(top) == list(range(101))
    with pytest.raises(ValueError):
        predict_topk_frames(pred, x, k=0)


def test_predictor_overfits_constant_target():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(20, 4, 101))
    Y = np.tile(frame_vector([5]), (20, 1))
    pred = train_frame_predictor(X, Y, X, Y, hidden_dim=16, seed=0,
                                 max_epochs=200)
    assert all(predict_topk_frames(pred, x, k=1) == [5] for x in X)


def test_predictor_checkpoint_roundtrip(tmp_path):
    pred = FramePredictor(hidden_dim=8, seed=4)
    x = np.random.default_rng(5).normal(size=(4, 101))
    path = tmp_path / "pred.npz"
    pred.save(path)
    back = FramePredictor.load(path)
    np.testing.assert_array_equal(pred.predict(x), back.predict(x))


def test_make_frame_examples_shapes():
    inv = FrameInventory(["Weather", "Travel"])
    stories = [Story("s0", [["a", "b"]] * 4, ["c", "d"])]
    anns = {"s0": Annotation(story_id="s0", sentiment="neutral", length=2,
                             predicates=[], frames=["Travel"], cluster=0,
                             context_frames=[["Weather"], [], ["Travel"], []])}
    X, Y = make_frame_examples(stories, anns, inv)
    assert X.shape == (1, 4, 101) and Y.shape == (1, 101)
    assert X[0, 0, 0] == 1.0 and X[0, 2, 1] == 1.0
    assert Y[0, 1] == 1.0 and Y[0].sum() == 1.0
