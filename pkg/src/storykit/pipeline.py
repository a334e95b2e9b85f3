"""Directory-backed pipeline: conventional artifact names plus the
annotate -> cluster -> train -> generate -> evaluate steps shared by the CLI,
the HTTP service, and the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import (Annotation, FrameInventory, Lexicons, Story, Vocabulary,
                     annotate_story, build_frame_set_inventory,
                     build_predicate_inventory, build_vocab, load_corpus,
                     read_sidecar, write_sidecar)
from .model import (ModelConfig, Resources, Seq2SeqModel, TrainConfig,
                    attribute_value_of, make_examples, train_model)
from .numerics import (ClusterModel, EmbeddingTable, PcaProjection, bow_embed,
                       fit_pca, kmeans, predicate_vector)
from .selection import FramePredictor, make_frame_examples, train_frame_predictor


@dataclass
class Workspace:
    """Conventional artifact layout inside one working directory."""
    root: Path

    def __post_init__(self):
        self.root = Path(self.root)

    # inputs
    @property
    def train_corpus(self): return self.root / "train.tsv"
    @property
    def dev_corpus(self): return self.root / "dev.tsv"
    @property
    def test_corpus(self): return self.root / "test.tsv"
    @property
    def lexicons(self): return self.root / "lexicons.json"
    @property
    def embeddings(self): return self.root / "embeddings.txt"

    # derived artifacts
    def sidecar(self, split: str): return self.root / f"{split}.annotations.jsonl"
    @property
    def pca(self): return self.root / "pca.json"
    @property
    def clusters(self): return self.root / "clusters.json"
    @property
    def inventory(self): return self.root / "frame_inventory.json"
    @property
    def vocab_file(self): return self.root / "vocab.txt"

    def model(self, attribute: str): return self.root / f"model_{attribute}.npz"
    @property
    def reverse_model(self): return self.root / "model_reverse.npz"
    @property
    def frame_predictor(self): return self.root / "frame_predictor.npz"
    @property
    def reports(self):
        d = self.root / "reports"
        d.mkdir(exist_ok=True)
        return d


def annotate_split(ws: Workspace, split: str) -> dict[str, Annotation]:
    """Heuristic-annotate one corpus split and write its sidecar."""
    stories = load_corpus(getattr(ws, f"{split}_corpus"))
    lex = Lexicons.load(ws.lexicons)
    annotations = [annotate_story(s, lex) for s in stories]
    write_sidecar(annotations, ws.sidecar(split))
    return {a.story_id: a for a in annotations}


def fit_clusters(ws: Workspace, k: int = 5, seed: int = 0) -> ClusterModel:
    """k-means on the BOW embeddings of training continuations; cluster ids
    are written back into every existing sidecar."""
    table = EmbeddingTable.load(ws.embeddings)
    train = load_corpus(ws.train_corpus)
    X = np.stack([bow_embed(s.continuation, table) for s in train])
    model = kmeans(X, k=k, seed=seed)
    model.save(ws.clusters)
    for split in ("train", "dev", "test"):
        path = ws.sidecar(split)
        if not path.exists():
            continue
        anns = read_sidecar(path)
        stories = load_corpus(getattr(ws, f"{split}_corpus"))
        for s in stories:
            if s.story_id in anns:
                anns[s.story_id].cluster = model.assign(bow_embed(s.continuation, table))
        write_sidecar(list(anns.values()), path)
    return model


def fit_predicate_pca(ws: Workspace, k: int = 64) -> PcaProjection:
    """PCA over the summed predicate embeddings of training continuations."""
    table = EmbeddingTable.load(ws.embeddings)
    anns = read_sidecar(ws.sidecar("train"))
    X = np.stack([sum((table.get(p) for p in a.predicates), np.zeros(table.dim))
                  for a in anns.values()])
    proj = fit_pca(X, k=min(k, len(X)))
    proj.save(ws.pca)
    return proj


def build_inventory(ws: Workspace, top: int = 100) -> FrameInventory:
    anns = read_sidecar(ws.sidecar("train"))
    inv = FrameInventory.build(anns.values(), top=top)
    inv.save(ws.inventory)
    return inv


def load_resources(ws: Workspace, vocab_size: int = 10000,
                   vocab: Vocabulary | None = None) -> Resources:
    """Assemble whatever artifacts exist into a Resources bundle."""
    train = load_corpus(ws.train_corpus)
    res = Resources(vocab=vocab or build_vocab(train, vocab_size))
    if ws.lexicons.exists():
        res.lexicons = Lexicons.load(ws.lexicons)
    if ws.inventory.exists():
        res.inventory = FrameInventory.load(ws.inventory)
    if ws.embeddings.exists():
        res.embeddings = EmbeddingTable.load(ws.embeddings)
    if ws.pca.exists():
        res.pca = PcaProjection.load(ws.pca)
    if ws.clusters.exists():
        res.clusters = ClusterModel.load(ws.clusters)
    if ws.sidecar("train").exists():
        anns = read_sidecar(ws.sidecar("train"))
        res.predicate_inventory = build_predicate_inventory(anns.values())
        if res.inventory is not None:
            res.frame_set_inventory = build_frame_set_inventory(anns.values(), res.inventory)
    return res


def train_split_model(ws: Workspace, attribute: str, model_cfg: ModelConfig | None = None,
                      train_cfg: TrainConfig | None = None,
                      resources: Resources | None = None,
                      reverse: bool = False, log=None) -> Seq2SeqModel:
    """Train one conditioned model (or the reverse model) on the workspace."""
    resources = resources or load_resources(ws)
    train_cfg = train_cfg or TrainConfig()
    train_stories = load_corpus(ws.train_corpus)
    dev_stories = load_corpus(ws.dev_corpus)
    train_anns = read_sidecar(ws.sidecar("train")) if ws.sidecar("train").exists() else None
    dev_anns = read_sidecar(ws.sidecar("dev")) if ws.sidecar("dev").exists() else None
    if model_cfg is None:
        model_cfg = ModelConfig(vocab_size=len(resources.vocab), attribute=attribute)
    model_cfg.vocab_size = len(resources.vocab)
    model_cfg.attribute = attribute
    train_ex = make_examples(train_stories, train_anns, attribute, resources, reverse=reverse)
    dev_ex = make_examples(dev_stories, dev_anns, attribute, resources, reverse=reverse)
    model = train_model(train_ex, dev_ex, model_cfg, train_cfg, resources, log=log)
    out = ws.reverse_model if reverse else ws.model(attribute)
    model.save(out)
    return model


def train_predictor(ws: Workspace, hidden_dim: int = 32, seed: int = 0,
                    max_epochs: int = 100, log=None) -> FramePredictor:
    resources = load_resources(ws)
    if resources.inventory is None:
        raise ValueError("train-frame-predictor requires a frame inventory (run annotate first)")
    train_stories = load_corpus(ws.train_corpus)
    dev_stories = load_corpus(ws.dev_corpus)
    tx, ty = make_frame_examples(train_stories, read_sidecar(ws.sidecar("train")),
                                 resources.inventory)
    dx, dy = make_frame_examples(dev_stories, read_sidecar(ws.sidecar("dev")),
                                 resources.inventory)
    predictor = train_frame_predictor(tx, ty, dx, dy, hidden_dim=hidden_dim,
                                      seed=seed, max_epochs=max_epochs, log=log)
    predictor.save(ws.frame_predictor)
    return predictor


def attribute_values_for_generation(attribute: str, resources: Resources,
                                    top: int = 100):
    """The value list 'generate one continuation per value' iterates over.

    Returns (values, labels).
    """
    if attribute == "sentiment":
        return [0, 1, 2], ["negative", "neutral", "positive"]
    if attribute == "length3":
        return [0, 1, 2], ["bin0", "bin1", "bin2"]
    if attribute == "length30":
        return list(range(30)), [f"len{n + 1}" for n in range(30)]
    if attribute == "clusters":
        k = resources.clusters.k if resources.clusters else 5
        return list(range(k)), [f"cluster{i}" for i in range(k)]
    if attribute == "predicates":
        preds = resources.predicate_inventory[:top]
        return [[p] for p in preds], preds
    if attribute == "frames":
        if resources.inventory is None:
            raise ValueError("frames generation requires an inventory")
        ids = list(range(min(top, len(resources.inventory.frames))))
        return [{i} for i in ids], [resources.inventory.name_of(i) for i in ids]
    raise ValueError(f"cannot enumerate values for attribute: {attribute}")


def oracle_examples(ws: Workspace, split: str, attribute: str,
                    resources: Resources):
    """(x_ids, oracle value, y_ids) triples plus the stories, for evaluation."""
    stories = load_corpus(getattr(ws, f"{split}_corpus"))
    anns = read_sidecar(ws.sidecar(split)) if ws.sidecar(split).exists() else None
    return make_examples(stories, anns, attribute, resources), stories


def oracle_value(story: Story, ann: Annotation | None, attribute: str,
                 resources: Resources):
    return attribute_value_of(story, ann, attribute, resources)
