"""Attribute-conditioned encoder-decoder.

A 2-layer bidirectional LSTM encoder reads the 4 context sentences joined by
boundary tokens; a 1-layer LSTM decoder with Luong-style general global
attention emits the continuation. The attribute value is embedded into
z = [z_enc; z_dec]; z_enc is appended to every encoder input and z_dec to
every decoder input. Training minimizes the summed negative log-likelihood
with Adam and early stopping on development perplexity.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, asdict, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .corpus import (Annotation, FrameInventory, Lexicons, Story, Vocabulary,
                     CATCH_ALL_FRAME_ID, FRAME_VECTOR_SIZE, bin_length, num_bins)
from .numerics import ClusterModel, EmbeddingTable, PcaProjection, bow_embed, predicate_vector

ATTRIBUTES = ("sentiment", "length3", "length30", "predicates", "frames",
              "clusters", "bow", "none")

CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    vocab_size: int
    embed_dim: int = 32
    hidden_dim: int = 64          # decoder state; encoder runs hidden_dim//2 per direction
    attribute: str = "none"
    z_dim: int = 0                # per-half width of the attribute vector
    num_clusters: int = 5
    frame_embed_dim: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.attribute not in ATTRIBUTES:
            raise ValueError(f"unknown attribute type: {self.attribute}")
        if self.hidden_dim % 2:
            raise ValueError("hidden_dim must be even (split across encoder directions)")


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 32
    max_epochs: int = 40
    patience: int = 5
    seed: int = 0
    grad_clip: float = 5.0
    float32: bool = False

    def __post_init__(self):
        if self.patience < 1 or self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("train config values must be positive")


@dataclass
class Resources:
    """Shared artifacts the attribute embedders and evaluators rely on."""
    vocab: Vocabulary
    lexicons: Lexicons | None = None
    inventory: FrameInventory | None = None
    embeddings: EmbeddingTable | None = None
    pca: PcaProjection | None = None
    clusters: ClusterModel | None = None
    predicate_inventory: list[str] = field(default_factory=list)
    frame_set_inventory: list[tuple[int, ...]] = field(default_factory=list)


def attribute_z_dim(attribute: str, config: ModelConfig) -> int:
    return {"sentiment": 3, "length3": 3, "length30": 30,
            "predicates": 64, "frames": config.frame_embed_dim,
            "clusters": config.num_clusters, "bow": 100, "none": 0}[attribute]


class AttributeEmbedder:
    """Maps an attribute value l to z_enc = z_dec (both halves identical).

    Fixed one-hot modes (sentiment, length bins, clusters) are constants and
    never updated by training. The frame mode owns a learned table of
    FRAME_VECTOR_SIZE rows; a frame-set value embeds as the sum of its member
    rows. Predicate and BOW modes compute their vectors from external
    embedding/PCA artifacts.
    """

    def __init__(self, attribute: str, config: ModelConfig, resources: Resources,
                 rng: np.random.Generator | None = None,
                 frame_table: Tensor | None = None):
        self.attribute = attribute
        self.dim = attribute_z_dim(attribute, config)
        self.resources = resources
        self.mode = "learned" if attribute == "frames" else "fixed"
        self.frame_table = None
        if attribute == "frames":
            if frame_table is not None:
                self.frame_table = frame_table
            else:
                rng = rng or np.random.default_rng(config.seed)
                self.frame_table = Tensor(
                    rng.uniform(-0.08, 0.08, (FRAME_VECTOR_SIZE, config.frame_embed_dim)),
                    requires_grad=True)

    def params(self) -> dict:
        return {"attr_R": self.frame_table} if self.frame_table is not None else {}

    def _onehot(self, idx: int, n: int) -> np.ndarray:
        if not 0 <= idx < n:
            raise ValueError(f"attribute value {idx} out of range [0, {n})")
        v = np.zeros(n)
        v[idx] = 1.0
        return v

    def embed_value_np(self, value) -> np.ndarray:
        """Fixed-mode z half as a plain array (frames handled separately)."""
        a = self.attribute
        if a == "none":
            return np.zeros(0)
        if a == "sentiment":
            idx = value if isinstance(value, int) else ("negative", "neutral", "positive").index(value)
            return self._onehot(idx, 3)
        if a == "length3":
            return self._onehot(int(value), 3)
        if a == "length30":
            return self._onehot(int(value), 30)
        if a == "clusters":
            return self._onehot(int(value), self.dim)
        if a == "predicates":
            if self.resources.embeddings is None or self.resources.pca is None:
                raise ValueError("predicate attribute requires embeddings and a fitted PCA")
            return predicate_vector(value, self.resources.embeddings, self.resources.pca)
        if a == "bow":
            if isinstance(value, np.ndarray):
                return value
            if self.resources.embeddings is None:
                raise ValueError("bow attribute requires an embedding table")
            return bow_embed(list(value), self.resources.embeddings)
        raise ValueError(f"no fixed embedding for attribute {a}")

    def embed_batch(self, values: list) -> Tensor | None:
        """z half for a batch, as one graph node (differentiable for frames)."""
        if self.attribute == "none":
            return None
        if self.attribute == "frames":
            ind = np.zeros((len(values), FRAME_VECTOR_SIZE))
            for i, fs in enumerate(values):
                for j in fs:
                    if not 0 <= j < FRAME_VECTOR_SIZE:
                        raise ValueError(f"frame id {j} out of range")
                    ind[i, j] = 1.0
            return ad.matmul(Tensor(ind), self.frame_table)
        return Tensor(np.stack([self.embed_value_np(v) for v in values]))

    def embed(self, value) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(z, z_enc, z_dec) for a single value; z = [z_enc; z_dec]."""
        if self.attribute == "frames":
            with ad.no_grad():
                half = self.embed_batch([value]).value[0]
        elif self.attribute == "none":
            half = np.zeros(0)
        else:
            half = self.embed_value_np(value)
        return np.concatenate([half, half]), half, half


def attribute_value_of(story: Story, ann: Annotation | None, attribute: str,
                       resources: Resources):
    """Training/oracle attribute value for one story."""
    if attribute == "none":
        return None
    if ann is None:
        raise ValueError(f"story {story.story_id}: missing annotation for attribute {attribute}")
    if attribute == "sentiment":
        return ("negative", "neutral", "positive").index(ann.sentiment)
    if attribute == "length3":
        return bin_length(ann.length, "3-bin")
    if attribute == "length30":
        return bin_length(min(ann.length, 30), "30-bin")
    if attribute == "predicates":
        return list(ann.predicates)
    if attribute == "frames":
        if resources.inventory is None:
            raise ValueError("frames attribute requires a frame inventory")
        return resources.inventory.resolve(ann.frames)
    if attribute == "clusters":
        if ann.cluster is None:
            raise ValueError(f"story {story.story_id}: no cluster annotation")
        return int(ann.cluster)
    if attribute == "bow":
        return list(story.continuation)
    raise ValueError(f"unknown attribute: {attribute}")


def _init_params(config: ModelConfig) -> dict:
    """Uniform [-0.08, 0.08] init from the config seed."""
    rng = np.random.default_rng(config.seed)

    def u(*shape):
        return Tensor(rng.uniform(-0.08, 0.08, shape), requires_grad=True)

    E, D, V = config.embed_dim, config.hidden_dim, config.vocab_size
    dd = D // 2                       # per-direction encoder state
    z = config.z_dim
    params = {"emb": u(V, E)}
    in0 = E + z
    for layer, in_dim in ((0, in0), (1, 2 * dd)):
        for direction in ("f", "b"):
            w = ad.init_lstm_weights(in_dim, dd, rng)
            for name, t in w.tensors().items():
                params[f"enc{layer}{direction}_{name}"] = t
    dec = ad.init_lstm_weights(E + z, D, rng)
    for name, t in dec.tensors().items():
        params[f"dec_{name}"] = t
    params["W_att"] = u(D, 2 * dd)
    params["W_c"] = u(2 * dd + D, D)
    params["b_c"] = u(D)
    params["W_out"] = u(D, V)
    params["b_out"] = u(V)
    params["bridge_h"] = u(2 * dd, D)
    params["bridge_hb"] = u(D)
    params["bridge_c"] = u(2 * dd, D)
    params["bridge_cb"] = u(D)
    return params


def _lstm_weights_from(params: dict, prefix: str) -> ad.LstmWeights:
    return ad.LstmWeights(*(params[f"{prefix}_{n}"]
                            for n in ("w_i", "w_f", "w_o", "w_g", "b_i", "b_f", "b_o", "b_g")))


class Seq2SeqModel:
    """Trained (or trainable) conditioned seq2seq bundle."""

    def __init__(self, config: ModelConfig, vocab: Vocabulary, resources: Resources,
                 params: dict | None = None, embedder: AttributeEmbedder | None = None):
        config.z_dim = attribute_z_dim(config.attribute, config)
        self.config = config
        self.vocab = vocab
        self.resources = resources
        self.params = params if params is not None else _init_params(config)
        self.embedder = embedder or AttributeEmbedder(config.attribute, config, resources)
        self.best_dev_ppl: float | None = None

    # -- parameter access ---------------------------------------------------

    def all_params(self) -> dict:
        return {**self.params, **self.embedder.params()}

    def trainable_params(self) -> dict:
        # fixed one-hot attribute tables are constants; only the frame table
        # is a learnable attribute embedding
        return self.all_params()

    # -- forward ------------------------------------------------------------

    def encode_batch(self, ids: np.ndarray, mask: np.ndarray, z_enc: Tensor | None):
        """Run the 2-layer biLSTM over padded (B, T) token ids.

        Returns (S, h0, c0): source states (B, T, 2*dd) and the bridged
        decoder initial state. Padded positions carry state unchanged.
        """
        B, T = ids.shape
        if T < 1:
            raise ValueError("encode: empty input")
        dd = self.config.hidden_dim // 2
        p = self.params
        emb_t = [ad.rows(p["emb"], ids[:, t]) for t in range(T)]
        layer_in = emb_t
        final_fh = final_fc = final_bh = final_bc = None
        s_seq = None
        for layer in (0, 1):
            wf = _lstm_weights_from(p, f"enc{layer}f").stacked()
            wb = _lstm_weights_from(p, f"enc{layer}b").stacked()
            zero = Tensor(np.zeros((B, dd)))
            h, c = zero, zero
            fwd = []
            for t in range(T):
                x = ad.concat([layer_in[t], z_enc], axis=-1) if (layer == 0 and z_enc is not None) else layer_in[t]
                hn, cn = ad.lstm_step(x, h, c, wf[0], wf[1], dd)
                m = mask[:, t:t + 1]
                h = ad.lerp_mask(hn, h, m)
                c = ad.lerp_mask(cn, c, m)
                fwd.append(h)
            final_fh, final_fc = h, c
            h, c = zero, zero
            bwd = [None] * T
            for t in reversed(range(T)):
                x = ad.concat([layer_in[t], z_enc], axis=-1) if (layer == 0 and z_enc is not None) else layer_in[t]
                hn, cn = ad.lstm_step(x, h, c, wb[0], wb[1], dd)
                m = mask[:, t:t + 1]
                h = ad.lerp_mask(hn, h, m)
                c = ad.lerp_mask(cn, c, m)
                bwd[t] = h
            final_bh, final_bc = h, c
            layer_in = [ad.concat([fwd[t], bwd[t]], axis=-1) for t in range(T)]
        s_seq = layer_in
        S = ad.stack(s_seq, axis=1)
        hcat = ad.concat([final_fh, final_bh], axis=-1)
        ccat = ad.concat([final_fc, final_bc], axis=-1)
        h0 = ad.tanh(ad.add(ad.matmul(hcat, p["bridge_h"]), p["bridge_hb"]))
        c0 = ad.tanh(ad.add(ad.matmul(ccat, p["bridge_c"]), p["bridge_cb"]))
        return S, h0, c0

    def attend(self, h: Tensor, S: Tensor, src_mask: np.ndarray | None):
        """Luong general attention: e = h W s_i, softmax, weighted context."""
        scores = ad.bdot(ad.matmul(h, self.params["W_att"]), S)
        weights = ad.masked_softmax(scores, src_mask)
        ctx = ad.wsum(weights, S)
        return ctx, weights

    def decoder_step(self, prev_ids: np.ndarray, z_dec: Tensor | None,
                     state, S: Tensor, src_mask: np.ndarray | None,
                     dec_w=None):
        """One conditioned decoder step; returns (logits, h_tilde, new state)."""
        p = self.params
        if dec_w is None:
            dec_w = _lstm_weights_from(p, "dec").stacked()
        h_prev, c_prev = state
        x = ad.rows(p["emb"], prev_ids)
        if z_dec is not None:
            x = ad.concat([x, z_dec], axis=-1)
        h, c = ad.lstm_step(x, h_prev, c_prev, dec_w[0], dec_w[1], self.config.hidden_dim)
        ctx, weights = self.attend(h, S, src_mask)
        h_tilde = ad.tanh(ad.add(ad.matmul(ad.concat([ctx, h], axis=-1), p["W_c"]), p["b_c"]))
        logits = ad.add(ad.matmul(h_tilde, p["W_out"]), p["b_out"])
        return logits, weights, (h, c)

    # -- losses -------------------------------------------------------------

    def batch_nll(self, batch: list[tuple[list[int], object, list[int]]]):
        """Summed teacher-forced NLL over a batch of (x_ids, value, y_ids).

        y_ids exclude <eos>; the <eos> target is appended here. Returns
        (loss Tensor, token count including <eos>).
        """
        if not batch:
            raise ValueError("empty batch")
        eos, pad = self.vocab.eos_id, self.vocab.pad_id
        B = len(batch)
        T = max(len(b[0]) for b in batch)
        U = max(len(b[2]) for b in batch) + 1
        ids = np.full((B, T), pad, dtype=np.int64)
        mask = np.zeros((B, T))
        y_in = np.full((B, U), pad, dtype=np.int64)
        y_tgt = np.full((B, U), pad, dtype=np.int64)
        y_mask = np.zeros((B, U))
        for i, (x, _val, y) in enumerate(batch):
            ids[i, :len(x)] = x
            mask[i, :len(x)] = 1.0
            seq = list(y) + [eos]
            y_in[i, 0] = eos
            y_in[i, 1:len(seq)] = seq[:-1]
            y_tgt[i, :len(seq)] = seq
            y_mask[i, :len(seq)] = 1.0

        z = self.embedder.embed_batch([b[1] for b in batch])
        S, h, c = self.encode_batch(ids, mask, z)
        dec_w = _lstm_weights_from(self.params, "dec").stacked()
        state = (h, c)
        losses = []
        for t in range(U):
            if not y_mask[:, t].any():
                break
            logits, _, state = self.decoder_step(y_in[:, t], z, state, S, mask, dec_w)
            losses.append(ad.cross_entropy_logits(logits, y_tgt[:, t], y_mask[:, t]))
        total = losses[0]
        for extra in losses[1:]:
            total = ad.add(total, extra)
        return total, int(y_mask.sum())

    def log_likelihood(self, x_tokens: list[str], value, y_tokens: list[str]) -> float:
        """Teacher-forced sum of per-step log p(y_j | y_<j, s, l), <eos> included."""
        if not y_tokens:
            raise ValueError("log_likelihood: empty continuation")
        x = self.vocab.encode(x_tokens)
        y = self.vocab.encode(y_tokens)
        with ad.no_grad():
            loss, _ = self.batch_nll([(x, value, y)])
        return -float(loss.value)

    def perplexity(self, examples: list[tuple[list[int], object, list[int]]],
                   batch_size: int = 64) -> float:
        """exp(mean per-token NLL), <eos> counted."""
        if not examples:
            raise ValueError("perplexity: empty dataset")
        total, count = 0.0, 0
        with ad.no_grad():
            for i in range(0, len(examples), batch_size):
                loss, n = self.batch_nll(examples[i:i + batch_size])
                total += float(loss.value)
                count += n
        return math.exp(total / count)

    # -- checkpointing ------------------------------------------------------

    def save(self, path) -> None:
        meta = {"version": CHECKPOINT_VERSION,
                "config": asdict(self.config),
                "vocab": self.vocab.tokens,
                "vocab_hash": self.vocab.content_hash(),
                "best_dev_ppl": self.best_dev_ppl,
                "param_names": sorted(self.all_params().keys())}
        arrays = {name: t.value for name, t in self.all_params().items()}
        np.savez(path, __meta__=json.dumps(meta), **arrays)

    @classmethod
    def load(cls, path, resources: Resources | None = None) -> "Seq2SeqModel":
        try:
            data = np.load(path, allow_pickle=False)
            meta = json.loads(str(data["__meta__"]))
        except Exception as exc:
            raise ValueError(f"cannot load checkpoint {path}: {exc}") from exc
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"checkpoint version {meta.get('version')} != "
                             f"supported version {CHECKPOINT_VERSION}")
        config = ModelConfig(**meta["config"])
        vocab = Vocabulary(meta["vocab"])
        if vocab.content_hash() != meta["vocab_hash"]:
            raise ValueError("checkpoint vocabulary hash mismatch")
        resources = resources or Resources(vocab=vocab)
        resources.vocab = vocab
        params = {}
        frame_table = None
        for name in meta["param_names"]:
            t = Tensor(data[name], requires_grad=True)
            if name == "attr_R":
                frame_table = t
            else:
                params[name] = t
        embedder = AttributeEmbedder(config.attribute, config, resources,
                                     frame_table=frame_table)
        model = cls(config, vocab, resources, params=params, embedder=embedder)
        model.best_dev_ppl = meta.get("best_dev_ppl")
        return model


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def make_examples(stories: list[Story], annotations: dict[str, Annotation] | None,
                  attribute: str, resources: Resources,
                  reverse: bool = False) -> list[tuple[list[int], object, list[int]]]:
    """Encode stories into (x_ids, attribute value, y_ids) training triples.

    `reverse=True` swaps source and target (continuation -> context) for the
    reverse scoring model.
    """
    vocab = resources.vocab
    missing = [s.story_id for s in stories
               if attribute != "none" and attribute != "bow"
               and (annotations is None or s.story_id not in annotations)]
    if missing:
        raise ValueError(f"missing annotations for stories: {missing[:10]}"
                         + ("..." if len(missing) > 10 else ""))
    out = []
    for s in stories:
        ann = annotations.get(s.story_id) if annotations else None
        value = attribute_value_of(s, ann, attribute, resources)
        x = vocab.encode(s.context_tokens())
        y = vocab.encode(s.continuation)
        if reverse:
            x, y = y, x
        out.append((x, value, y))
    return out


def train_model(train_examples, dev_examples, config: ModelConfig,
                train_config: TrainConfig, resources: Resources,
                log=None) -> Seq2SeqModel:
    """Adam training with gradient clipping and dev-perplexity early stopping.

    Returns the checkpoint with the best development perplexity.
    """
    model = Seq2SeqModel(config, resources.vocab, resources)
    params = model.trainable_params()
    state = ad.AdamState(lr=train_config.learning_rate)
    rng = np.random.default_rng(train_config.seed)

    best_ppl = math.inf
    best_values = None
    since_best = 0
    order = np.arange(len(train_examples))
    for epoch in range(train_config.max_epochs):
        rng.shuffle(order)
        for i in range(0, len(order), train_config.batch_size):
            batch = [train_examples[j] for j in order[i:i + train_config.batch_size]]
            ad.zero_grads(params)
            loss, n_tok = model.batch_nll(batch)
            loss = ad.scale(loss, 1.0 / n_tok)
            ad.backward(loss)
            grads = {name: p.grad for name, p in params.items() if p.grad is not None}
            grads = ad.clip_global_norm(grads, train_config.grad_clip)
            ad.adam_step(params, grads, state)
        dev_ppl = model.perplexity(dev_examples)
        if log:
            log(f"epoch {epoch + 1}: dev ppl {dev_ppl:.3f}")
        if dev_ppl < best_ppl:
            best_ppl = dev_ppl
            best_values = {name: p.value.copy() for name, p in params.items()}
            since_best = 0
        else:
            since_best += 1
            if since_best >= train_config.patience:
                break
    if best_values is not None:
        for name, p in params.items():
            p.value = best_values[name]
    model.best_dev_ppl = best_ppl
    return model
