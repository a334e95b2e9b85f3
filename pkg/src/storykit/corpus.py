"""Five-sentence story ingestion, vocabulary, and attribute annotation.

Corpus format: UTF-8 text, one story per line, 5 tab-separated sentences
(optionally preceded by an id column), tokens space-separated and lowercase.
Annotations either arrive from a sidecar JSONL file (one object per story)
or are produced by the built-in heuristic annotators, which stand in for
external sentiment/SRL/frame analyzers on synthetic corpora.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, asdict
from pathlib import Path

UNK = "<unk>"
EOS = "<eos>"
PAD = "<pad>"
SENT_BOUNDARY = "<sb>"

SENTIMENT_LABELS = ("negative", "neutral", "positive")

CATCH_ALL_FRAME_ID = 100
FRAME_VECTOR_SIZE = 101  # top-100 frames + catch-all


class CorpusError(ValueError):
    pass


@dataclass
class Story:
    story_id: str
    context: list[list[str]]      # 4 tokenized sentences
    continuation: list[str]       # tokenized, no <eos>

    def __post_init__(self):
        if len(self.context) != 4:
            raise CorpusError(f"story {self.story_id}: expected 4 context sentences")
        if not self.continuation or any(not s for s in self.context):
            raise CorpusError(f"story {self.story_id}: empty sentence")

    @property
    def continuation_length(self) -> int:
        return len(self.continuation)

    def context_tokens(self) -> list[str]:
        """Context sentences joined into one encoder sequence with boundaries."""
        out: list[str] = []
        for i, sent in enumerate(self.context):
            if i > 0:
                out.append(SENT_BOUNDARY)
            out.extend(sent)
        return out


def load_corpus(path) -> list[Story]:
    """Parse a story file; one malformed line aborts with its line number."""
    path = Path(path)
    stories: list[Story] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) == 6:
                sid, sents = fields[0], fields[1:]
            elif len(fields) == 5:
                sid, sents = str(lineno), fields
            else:
                raise CorpusError(f"{path}:{lineno}: expected 5 sentences "
                                  f"(with optional id), got {len(fields)} fields")
            toks = [s.split() for s in sents]
            if any(not t for t in toks):
                raise CorpusError(f"{path}:{lineno}: empty sentence")
            stories.append(Story(sid, toks[:4], toks[4]))
    if not stories:
        raise CorpusError(f"{path}: empty corpus")
    return stories


class Vocabulary:
    """Token <-> id map over the most frequent training tokens plus specials.

    Ids are dense from 0; lookups of absent tokens yield the <unk> id.
    """

    def __init__(self, tokens: list[str]):
        self.tokens = list(tokens)
        self._ids = {t: i for i, t in enumerate(self.tokens)}
        self.unk_id = self._ids[UNK]
        self.eos_id = self._ids[EOS]
        self.pad_id = self._ids[PAD]

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        return self._ids.get(token, self.unk_id)

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.id_of(t) for t in tokens]

    def decode(self, ids) -> list[str]:
        return [self.tokens[i] for i in ids]

    def content_hash(self) -> str:
        import hashlib
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()


def build_vocab(stories: list[Story], size: int = 10000) -> Vocabulary:
    """Top-`size` tokens by frequency (lexicographic tie-break) + specials."""
    if size < 1:
        raise ValueError("vocabulary size must be >= 1")
    counts: Counter = Counter()
    for st in stories:
        for sent in st.context:
            counts.update(sent)
        counts.update(st.continuation)
    counts[SENT_BOUNDARY] += 0  # boundary token always present
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [t for t, _ in ranked[:size]]
    if SENT_BOUNDARY not in kept:
        kept.append(SENT_BOUNDARY)
    return Vocabulary(kept + [UNK, EOS, PAD])


def bin_length(n: int, scheme: str = "3-bin") -> int:
    """Length bin id. 3-bin: [1,7]->0, [8,13]->1, [14,inf)->2; 30-bin: n-1."""
    if n < 1:
        raise ValueError(f"length must be >= 1, got {n}")
    if scheme == "3-bin":
        if n <= 7:
            return 0
        if n <= 13:
            return 1
        return 2
    if scheme == "30-bin":
        if n > 30:
            raise ValueError(f"length {n} exceeds 30 under the 30-bin scheme")
        return n - 1
    raise ValueError(f"unknown binning scheme: {scheme}")


def num_bins(scheme: str) -> int:
    return 3 if scheme == "3-bin" else 30


@dataclass
class Lexicons:
    """Word lists driving the heuristic annotators."""
    positive: set = field(default_factory=set)
    negative: set = field(default_factory=set)
    verbs: set = field(default_factory=set)
    frame_triggers: dict = field(default_factory=dict)  # token -> frame name

    @classmethod
    def load(cls, path) -> "Lexicons":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        return cls(set(d.get("positive", [])), set(d.get("negative", [])),
                   set(d.get("verbs", [])), dict(d.get("frame_triggers", {})))

    def save(self, path) -> None:
        d = {"positive": sorted(self.positive), "negative": sorted(self.negative),
             "verbs": sorted(self.verbs), "frame_triggers": dict(sorted(self.frame_triggers.items()))}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(d, fh, indent=1)


@dataclass
class Annotation:
    """Per-story attribute record (one sidecar line)."""
    story_id: str
    sentiment: str
    length: int
    predicates: list[str]
    frames: list[str]
    cluster: int | None = None
    source: str = "heuristic"   # ingested | heuristic
    context_frames: list[list[str]] | None = None  # per context sentence, for frame prediction

    def to_json(self) -> str:
        d = asdict(self)
        d["id"] = d.pop("story_id")
        if d["context_frames"] is None:
            d.pop("context_frames")
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "Annotation":
        d = json.loads(line)
        return cls(story_id=str(d["id"]), sentiment=d["sentiment"], length=int(d["length"]),
                   predicates=list(d["predicates"]), frames=list(d["frames"]),
                   cluster=d.get("cluster"), source=d.get("source", "ingested"),
                   context_frames=d.get("context_frames"))


def annotate_sentence(sentence: list[str], lex: Lexicons) -> dict:
    """Heuristic annotation of one tokenized sentence.

    Sentiment is the sign of (#positive hits - #negative hits); predicates are
    the tokens found in the verb list; frames are the triggered frame names.
    """
    pos = sum(1 for t in sentence if t in lex.positive)
    neg = sum(1 for t in sentence if t in lex.negative)
    if pos > neg:
        sentiment = "positive"
    elif neg > pos:
        sentiment = "negative"
    else:
        sentiment = "neutral"
    predicates = sorted({t for t in sentence if t in lex.verbs})
    frames = sorted({lex.frame_triggers[t] for t in sentence if t in lex.frame_triggers})
    return {"sentiment": sentiment, "predicates": predicates, "frames": frames}


def annotate_story(story: Story, lex: Lexicons, with_context_frames: bool = True) -> Annotation:
    a = annotate_sentence(story.continuation, lex)
    ctx_frames = None
    if with_context_frames:
        ctx_frames = [annotate_sentence(s, lex)["frames"] for s in story.context]
    return Annotation(story_id=story.story_id, sentiment=a["sentiment"],
                      length=story.continuation_length, predicates=a["predicates"],
                      frames=a["frames"], source="heuristic", context_frames=ctx_frames)


def write_sidecar(annotations: list[Annotation], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in annotations:
            fh.write(a.to_json() + "\n")


def read_sidecar(path) -> dict[str, Annotation]:
    out: dict[str, Annotation] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            a = Annotation.from_json(line)
            out[a.story_id] = a
    return out


class FrameInventory:
    """Ranked top-100 training frames plus the fixed catch-all id 100."""

    SCHEMA_VERSION = 1

    def __init__(self, frames: list[str]):
        if len(frames) > 100:
            raise ValueError("inventory holds at most 100 named frames")
        self.frames = list(frames)
        self._rank = {f: i for i, f in enumerate(self.frames)}

    @classmethod
    def build(cls, annotations, top: int = 100) -> "FrameInventory":
        counts: Counter = Counter()
        for a in annotations:
            counts.update(a.frames)
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls([f for f, _ in ranked[:top]])

    def resolve(self, frame_names) -> set[int]:
        """Known frames -> ranks 0..99; anything else -> catch-all 100."""
        return {self._rank.get(f, CATCH_ALL_FRAME_ID) for f in frame_names}

    def name_of(self, frame_id: int) -> str:
        if frame_id == CATCH_ALL_FRAME_ID:
            return "<catch-all>"
        return self.frames[frame_id]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"schema_version": self.SCHEMA_VERSION, "frames": self.frames}, fh, indent=1)

    @classmethod
    def load(cls, path) -> "FrameInventory":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        if d.get("schema_version") != cls.SCHEMA_VERSION:
            raise ValueError(f"frame inventory schema version mismatch: {d.get('schema_version')}")
        return cls(d["frames"])


def build_predicate_inventory(annotations, top: int = 100) -> list[str]:
    """Most frequent predicates in training, frequency then lexicographic."""
    counts: Counter = Counter()
    for a in annotations:
        counts.update(a.predicates)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [p for p, _ in ranked[:top]]


def build_frame_set_inventory(annotations, inventory: FrameInventory, top: int = 100) -> list[tuple[int, ...]]:
    """Most frequent resolved frame *sets* (deduplicated, frequency-ranked)."""
    counts: Counter = Counter()
    for a in annotations:
        ids = tuple(sorted(inventory.resolve(a.frames)))
        if ids:
            counts[ids] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [fs for fs, _ in ranked[:top]]
