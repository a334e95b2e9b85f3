"""Deterministic synthetic five-sentence story corpus.

Continuations are templated so that their sentiment, length, predicate, and
frame are exact functions of the sampled attribute tuple; context sentences
are drawn independently. This makes attribute conditioning learnable at toy
scale and the heuristic annotations exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .corpus import Lexicons, Story
from .numerics import EmbeddingTable

NAMES = ["sandra", "tom", "mia", "john", "anna", "peter"]
PLACES = ["store", "park", "school", "market", "beach"]
THINGS = ["phone", "book", "bike", "cake", "lamp"]

POSITIVE = ["happy", "glad", "wonderful", "proud", "pleased"]
NEGATIVE = ["sad", "upset", "disappointed", "angry", "miserable"]
VERBS = ["went", "got", "decided", "found", "took",
         "made", "bought", "loved", "said", "felt"]
FRAME_TRIGGERS = {
    "morning": "Time_of_day",
    "money": "Commerce",
    "home": "Buildings",
    "friend": "Social_connection",
    "food": "Food",
    "car": "Vehicle",
    "letter": "Communication",
    "game": "Competition",
    "rain": "Weather",
    "music": "Performing_arts",
}
FILLERS = ["again", "then", "later", "quietly", "really",
           "just", "once", "more", "there", "soon"]

CONTEXT_TEMPLATES = [
    "{name} was at the {place} .",
    "{name} wanted a new {thing} .",
    "it was a long day at the {place} .",
    "{name} looked at the {thing} .",
    "the {place} was very busy .",
    "{name} talked about the {thing} .",
    "everyone at the {place} was waiting .",
    "{name} thought about the {place} .",
]


def default_lexicons() -> Lexicons:
    return Lexicons(positive=set(POSITIVE), negative=set(NEGATIVE),
                    verbs=set(VERBS), frame_triggers=dict(FRAME_TRIGGERS))


def _context_sentence(rng: np.random.Generator) -> list[str]:
    tpl = CONTEXT_TEMPLATES[rng.integers(len(CONTEXT_TEMPLATES))]
    return tpl.format(name=NAMES[rng.integers(len(NAMES))],
                      place=PLACES[rng.integers(len(PLACES))],
                      thing=THINGS[rng.integers(len(THINGS))]).split()


def _continuation(rng: np.random.Generator) -> list[str]:
    """One templated continuation carrying exactly one predicate, one frame
    trigger, and zero or one sentiment word, padded with fillers to a target
    length spanning all three length bins."""
    name = NAMES[rng.integers(len(NAMES))]
    verb = VERBS[rng.integers(len(VERBS))]
    trigger = list(FRAME_TRIGGERS)[rng.integers(len(FRAME_TRIGGERS))]
    sentiment = ["negative", "neutral", "positive"][rng.integers(3)]
    target_len = int(rng.integers(6, 17))

    toks = [name, verb, "the", trigger]
    if sentiment == "positive":
        toks.append(POSITIVE[rng.integers(len(POSITIVE))])
    elif sentiment == "negative":
        toks.append(NEGATIVE[rng.integers(len(NEGATIVE))])
    i = int(rng.integers(len(FILLERS)))
    while len(toks) < target_len - 1:
        toks.append(FILLERS[i % len(FILLERS)])
        i += 1
    toks.append(".")
    return toks


def generate_corpus(n: int = 500, seed: int = 7) -> list[Story]:
    rng = np.random.default_rng(seed)
    stories = []
    for i in range(n):
        ctx = [_context_sentence(rng) for _ in range(4)]
        cont = _continuation(rng)
        stories.append(Story(f"s{i:04d}", ctx, cont))
    return stories


def vocabulary_tokens() -> list[str]:
    toks = set(NAMES + PLACES + THINGS + POSITIVE + NEGATIVE + VERBS + FILLERS)
    toks.update(FRAME_TRIGGERS)
    for tpl in CONTEXT_TEMPLATES:
        toks.update(t for t in tpl.split() if not t.startswith("{"))
    return sorted(toks)


def make_embeddings(dim: int = 100, seed: int = 11) -> EmbeddingTable:
    """Deterministic random unit-ish vectors in GloVe-text spirit."""
    rng = np.random.default_rng(seed)
    vectors = {t: rng.normal(0, 0.5, dim) for t in vocabulary_tokens()}
    return EmbeddingTable(vectors, dim)


def write_story_file(stories: list[Story], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for st in stories:
            sents = [" ".join(s) for s in st.context] + [" ".join(st.continuation)]
            fh.write(st.story_id + "\t" + "\t".join(sents) + "\n")


def write_bundle(outdir, n: int = 500, seed: int = 7,
                 splits: tuple[int, int] = (50, 50)) -> dict:
    """Emit corpus splits, lexicons, and embeddings into `outdir`."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    stories = generate_corpus(n, seed)
    n_dev, n_test = splits
    train = stories[: n - n_dev - n_test]
    dev = stories[n - n_dev - n_test: n - n_test]
    test = stories[n - n_test:]
    paths = {"train": outdir / "train.tsv", "dev": outdir / "dev.tsv",
             "test": outdir / "test.tsv", "lexicons": outdir / "lexicons.json",
             "embeddings": outdir / "embeddings.txt"}
    write_story_file(train, paths["train"])
    write_story_file(dev, paths["dev"])
    write_story_file(test, paths["test"])
    default_lexicons().save(paths["lexicons"])
    make_embeddings().save(paths["embeddings"])
    return paths
