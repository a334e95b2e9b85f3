"""Automatic attribute-value selection.

Two routes to a small set of good continuations: rerank frame-set-conditioned
candidates with a reverse scoring model, or predict the continuation's likely
frames from the context's frame vectors and condition on those.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .corpus import FRAME_VECTOR_SIZE

CHECKPOINT_VERSION = 1


@dataclass
class RerankConfig:
    lam: float = 1.0      # reverse-score weight
    k: int = 3            # outputs kept

    def __post_init__(self):
        if self.lam < 0 or self.k < 1:
            raise ValueError("rerank config requires lam >= 0 and k >= 1")


@dataclass
class Candidate:
    tokens: list[str]
    forward_logp: float          # log p(y|x), unnormalized
    attribute: object = None
    reverse_logp: float | None = None
    combined: float | None = None


def rerank(context_tokens: list[str], candidates: list[Candidate],
           reverse_model, lam: float, k: int) -> list[Candidate]:
    """score(y) = log p(y|x) / |y| + lam * log p(x|y); descending, stable.

    Only the forward score is length-normalized. `reverse_model` maps
    continuation tokens back to the context; it may be None when lam == 0.
    """
    if not candidates:
        raise ValueError("rerank: no candidates")
    if k > len(candidates):
        raise ValueError(f"rerank: k={k} exceeds {len(candidates)} candidates")
    scored = []
    for idx, c in enumerate(candidates):
        fwd = c.forward_logp / max(1, len(c.tokens))
        rev = 0.0
        if lam > 0:
            if reverse_model is None:
                raise ValueError("rerank: lam > 0 requires a reverse model")
            rev = reverse_model.log_likelihood(c.tokens if c.tokens else ["<unk>"],
                                               None, context_tokens)
        c.reverse_logp = rev
        c.combined = fwd + lam * rev
        scored.append((c.combined, idx, c))
    scored.sort(key=lambda t: (-t[0], t[1]))
    return [c for _s, _i, c in scored[:k]]


def frame_vector(frame_ids) -> np.ndarray:
    """Binary indicator over the 101 frame slots."""
    v = np.zeros(FRAME_VECTOR_SIZE)
    for j in frame_ids:
        if not 0 <= j < FRAME_VECTOR_SIZE:
            raise ValueError(f"frame id {j} out of range")
        v[j] = 1.0
    return v


class FramePredictor:
    """Regresses the continuation's binary frame vector from the context's.

    An LSTM reads the 4 context frame vectors, hidden states are averaged,
    and a linear layer produces 101 scores trained with mean squared error.
    """

    def __init__(self, hidden_dim: int = 32, seed: int = 0, params: dict | None = None):
        self.hidden_dim = hidden_dim
        self.seed = seed
        if params is not None:
            self.params = params
        else:
            rng = np.random.default_rng(seed)
            w = ad.init_lstm_weights(FRAME_VECTOR_SIZE, hidden_dim, rng)
            self.params = {f"lstm_{n}": t for n, t in w.tensors().items()}
            self.params["W_out"] = Tensor(rng.uniform(-0.08, 0.08, (hidden_dim, FRAME_VECTOR_SIZE)),
                                          requires_grad=True)
            self.params["b_out"] = Tensor(rng.uniform(-0.08, 0.08, FRAME_VECTOR_SIZE),
                                          requires_grad=True)

    def _weights(self):
        return ad.LstmWeights(*(self.params[f"lstm_{n}"]
                                for n in ("w_i", "w_f", "w_o", "w_g",
                                          "b_i", "b_f", "b_o", "b_g")))

    def forward(self, context_vectors: np.ndarray) -> Tensor:
        """context_vectors: (B, 4, 101) -> scores (B, 101)."""
        B = context_vectors.shape[0]
        d = self.hidden_dim
        ws, bs = self._weights().stacked()
        h = Tensor(np.zeros((B, d)))
        c = Tensor(np.zeros((B, d)))
        hs = []
        for t in range(context_vectors.shape[1]):
            h, c = ad.lstm_step(Tensor(context_vectors[:, t]), h, c, ws, bs, d)
            hs.append(h)
        avg = ad.scale(ad.add(ad.add(hs[0], hs[1]), ad.add(hs[2], hs[3])), 0.25) \
            if len(hs) == 4 else ad.scale(sum_tensors(hs), 1.0 / len(hs))
        return ad.add(ad.matmul(avg, self.params["W_out"]), self.params["b_out"])

    def predict(self, context_vectors: np.ndarray) -> np.ndarray:
        with ad.no_grad():
            return self.forward(np.asarray(context_vectors)[None, :]).value[0]

    def mse(self, context_vectors: np.ndarray, targets: np.ndarray) -> Tensor:
        pred = self.forward(context_vectors)
        diff = ad.sub(pred, Tensor(targets))
        return ad.scale(ad.tsum(ad.mul(diff, diff)), 1.0 / targets.size)

    def save(self, path) -> None:
        meta = {"version": CHECKPOINT_VERSION, "hidden_dim": self.hidden_dim,
                "seed": self.seed, "param_names": sorted(self.params)}
        np.savez(path, __meta__=json.dumps(meta),
                 **{n: t.value for n, t in self.params.items()})

    @classmethod
    def load(cls, path) -> "FramePredictor":
        data = np.load(path, allow_pickle=False)
        meta = json.loads(str(data["__meta__"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"frame predictor version mismatch: {meta.get('version')}")
        params = {n: Tensor(data[n], requires_grad=True) for n in meta["param_names"]}
        return cls(meta["hidden_dim"], meta["seed"], params=params)


def sum_tensors(ts):
    total = ts[0]
    for t in ts[1:]:
        total = ad.add(total, t)
    return total


def make_frame_examples(stories, annotations, inventory):
    """(context frame vectors (4, 101), continuation frame vector) pairs."""
    xs, ys = [], []
    missing = [s.story_id for s in stories
               if s.story_id not in annotations
               or annotations[s.story_id].context_frames is None]
    if missing:
        raise ValueError(f"missing frame annotations for stories: {missing[:10]}")
    for s in stories:
        a = annotations[s.story_id]
        ctx = np.stack([frame_vector(inventory.resolve(fr)) for fr in a.context_frames])
        xs.append(ctx)
        ys.append(frame_vector(inventory.resolve(a.frames)))
    return np.stack(xs), np.stack(ys)


def train_frame_predictor(train_x, train_y, dev_x, dev_y, hidden_dim: int = 32,
                          lr: float = 0.001, batch_size: int = 32,
                          max_epochs: int = 100, patience: int = 8,
                          seed: int = 0, log=None) -> FramePredictor:
    """MSE minimization with Adam; early stopping on development MSE."""
    predictor = FramePredictor(hidden_dim, seed)
    state = ad.AdamState(lr=lr)
    rng = np.random.default_rng(seed)
    best = math.inf
    best_values = None
    since = 0
    order = np.arange(len(train_x))
    for epoch in range(max_epochs):
        rng.shuffle(order)
        for i in range(0, len(order), batch_size):
            idx = order[i:i + batch_size]
            ad.zero_grads(predictor.params)
            loss = predictor.mse(train_x[idx], train_y[idx])
            ad.backward(loss)
            grads = {n: p.grad for n, p in predictor.params.items() if p.grad is not None}
            ad.adam_step(predictor.params, grads, state)
        with ad.no_grad():
            dev = float(predictor.mse(dev_x, dev_y).value)
        if log:
            log(f"frame predictor epoch {epoch + 1}: dev mse {dev:.5f}")
        if dev < best:
            best, since = dev, 0
            best_values = {n: p.value.copy() for n, p in predictor.params.items()}
        else:
            since += 1
            if since >= patience:
                break
    if best_values is not None:
        for n, p in predictor.params.items():
            p.value = best_values[n]
    return predictor


def predict_topk_frames(predictor: FramePredictor, context_vectors: np.ndarray,
                        k: int) -> list[int]:
    """ids of the k largest predicted scores; ties broken by lower frame id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > FRAME_VECTOR_SIZE:
        raise ValueError(f"k={k} exceeds the {FRAME_VECTOR_SIZE} frame slots")
    scores = predictor.predict(context_vectors)
    order = sorted(range(FRAME_VECTOR_SIZE), key=lambda j: (-scores[j], j))
    return order[:k]
