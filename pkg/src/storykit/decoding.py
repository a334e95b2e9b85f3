"""Continuation decoding: beam search and temperature sampling.

Beam scoring uses raw cumulative log probability (length normalization
happens only in reranking). Temperature sampling draws each step from
p_hat_i proportional to p_i**(1/tau).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .model import Seq2SeqModel, _lstm_weights_from

DEFAULT_MAX_LEN = 30


@dataclass
class Hypothesis:
    tokens: list[int]
    log_prob: float
    finished: bool = False


@dataclass
class GenerationItem:
    tokens: list[str]
    score: float
    attribute: object = None
    extra: dict = field(default_factory=dict)


@dataclass
class GenerationList:
    context_id: str
    generator: str            # BS | TS | attribute-controlled
    items: list[GenerationItem]

    def __post_init__(self):
        if not self.items:
            raise ValueError("GenerationList requires at least one item")

    def token_lists(self) -> list[list[str]]:
        return [it.tokens for it in self.items]

    def to_jsonl(self) -> str:
        lines = []
        for it in self.items:
            rec = {"context_id": self.context_id, "generator": self.generator,
                   "attribute": it.attribute, "tokens": it.tokens, "score": it.score}
            rec.update(it.extra)
            lines.append(json.dumps(rec))
        return "\n".join(lines)


class DecodeSession:
    """Encodes one context once and exposes incremental decoder steps."""

    def __init__(self, model: Seq2SeqModel, x_tokens: list[str], value):
        self.model = model
        self.vocab = model.vocab
        ids = np.array([model.vocab.encode(x_tokens)], dtype=np.int64)
        if ids.shape[1] < 1:
            raise ValueError("empty context")
        mask = np.ones_like(ids, dtype=np.float64)
        with ad.no_grad():
            self.z = model.embedder.embed_batch([value]) if model.config.attribute != "none" else None
            S, h0, c0 = model.encode_batch(ids, mask, self.z)
            self._dec_w = _lstm_weights_from(model.params, "dec").stacked()
        self.S = S
        self.src_mask = mask
        self.init_state = (h0, c0)

    def step(self, prev_id: int, state):
        """Next-token distribution (pad masked out) and the new state."""
        with ad.no_grad():
            logits, _, new_state = self.model.decoder_step(
                np.array([prev_id], dtype=np.int64), self.z, state,
                self.S, self.src_mask, self._dec_w)
        v = logits.value[0].copy()
        v[self.vocab.pad_id] = -np.inf
        probs = ad.softmax_np(v[None, :])[0]
        return probs, new_state


def apply_temperature(p: np.ndarray, tau: float) -> np.ndarray:
    """p_hat_i = p_i**(1/tau) / sum_j p_j**(1/tau), computed in log space."""
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    p = np.asarray(p, dtype=np.float64)
    if p.min() < 0 or abs(p.sum() - 1.0) > 1e-6:
        raise ValueError("apply_temperature expects a probability distribution")
    if tau == 1.0:
        return p.copy()
    with np.errstate(divide="ignore"):
        logp = np.log(p) / tau
    logp -= logp.max()
    e = np.exp(logp)
    return e / e.sum()


def temperature_sample(model: Seq2SeqModel, x_tokens: list[str], value, tau: float,
                       n: int, seed: int, max_len: int = DEFAULT_MAX_LEN,
                       context_id: str = "", attribute_label=None) -> GenerationList:
    """n independent ancestral samples with temperature-transformed steps."""
    session = DecodeSession(model, x_tokens, value)
    rng = np.random.default_rng(seed)
    eos = model.vocab.eos_id
    items = []
    for _ in range(n):
        state = session.init_state
        prev = eos
        ids: list[int] = []
        score = 0.0
        for _t in range(max_len):
            probs, state = session.step(prev, state)
            p_hat = apply_temperature(probs, tau)
            tok = int(rng.choice(len(p_hat), p=p_hat))
            score += float(np.log(probs[tok]))
            if tok == eos:
                break
            ids.append(tok)
            prev = tok
        items.append(GenerationItem(model.vocab.decode(ids), score, attribute_label))
    return GenerationList(context_id, "TS", items)


def beam_search(model: Seq2SeqModel, x_tokens: list[str], value, beam: int = 3,
                max_len: int = DEFAULT_MAX_LEN, context_id: str = "",
                attribute_label=None) -> GenerationList:
    """Standard beam search over cumulative log probability.

    Hypotheses emitting <eos> retire into the result pool; search ends when
    the active beam is empty or max_len is reached. Returns the top `beam`
    finished hypotheses, padded with the best unfinished ones if needed.
    """
    if beam < 1:
        raise ValueError("beam size must be >= 1")
    session = DecodeSession(model, x_tokens, value)
    eos = model.vocab.eos_id

    active = [(Hypothesis([], 0.0), session.init_state, eos)]
    finished: list[Hypothesis] = []
    for _t in range(max_len):
        if not active:
            break
        step_out = []
        rows = []
        for i, (hyp, state, prev) in enumerate(active):
            probs, new_state = session.step(prev, state)
            step_out.append(new_state)
            with np.errstate(divide="ignore"):
                rows.append(hyp.log_prob + np.log(probs))
        totals = np.stack(rows)                       # (n_active, V)
        flat = totals.reshape(-1)
        # stable ascending sort on -score: ties resolve to the earlier
        # hypothesis and lower token id, so beam=1 matches greedy argmax
        order = np.argsort(-flat, kind="stable")
        V = totals.shape[1]
        next_active = []
        taken = 0
        for idx in order:
            total = flat[idx]
            if not np.isfinite(total):
                break
            i, tok = divmod(int(idx), V)
            hyp = active[i][0]
            if tok == eos:
                finished.append(Hypothesis(list(hyp.tokens), float(total), True))
            else:
                next_active.append((Hypothesis(hyp.tokens + [tok], float(total)), step_out[i], tok))
            taken += 1
            if taken >= beam:
                break
        active = next_active

    pool = sorted(finished, key=lambda h: -h.log_prob)
    leftovers = sorted((h for h, _s, _p in active), key=lambda h: -h.log_prob)
    pool.extend(leftovers)
    items = [GenerationItem(model.vocab.decode(h.tokens), h.log_prob, attribute_label)
             for h in pool[:beam]]
    return GenerationList(context_id, "BS", items)


def greedy(model: Seq2SeqModel, x_tokens: list[str], value,
           max_len: int = DEFAULT_MAX_LEN, context_id: str = "",
           attribute_label=None) -> GenerationItem:
    return beam_search(model, x_tokens, value, beam=1, max_len=max_len,
                       context_id=context_id, attribute_label=attribute_label).items[0]


def generate_per_attribute(model: Seq2SeqModel, x_tokens: list[str],
                           values: list, labels: list | None = None,
                           beam: int = 1, max_len: int = DEFAULT_MAX_LEN,
                           context_id: str = "") -> GenerationList:
    """One continuation per attribute value (greedy unless beam > 1)."""
    if not values:
        raise ValueError("no attribute values given")
    labels = labels if labels is not None else values
    items = []
    for value, label in zip(values, labels):
        best = beam_search(model, x_tokens, value, beam=beam, max_len=max_len,
                           attribute_label=label).items[0]
        items.append(best)
    return GenerationList(context_id, "attribute-controlled", items)
