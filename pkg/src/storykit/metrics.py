"""Evaluation metrics and the controllability harness.

BLEU here is always BLEU-2 (clipped unigram and bigram precisions, geometric
mean, brevity penalty). ROUGE-1 is unigram F1; ROUGE-L is LCS-based F1.
All values live in [0, 1]; reports scale by 100.
"""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .corpus import Lexicons, FrameInventory, Story, annotate_sentence, bin_length, num_bins
from .numerics import ClusterModel, EmbeddingTable, bow_embed

SMOOTH_EPS = 1e-9   # substituted for zero n-gram precisions before the geometric mean


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _clipped_precision(candidate: list[str], references: list[list[str]], n: int) -> float | None:
    """Clipped n-gram precision; None when the candidate has no n-grams."""
    cand = _ngrams(candidate, n)
    total = sum(cand.values())
    if total == 0:
        return None
    ref_max: Counter = Counter()
    for ref in references:
        for g, c in _ngrams(ref, n).items():
            ref_max[g] = max(ref_max[g], c)
    match = sum(min(c, ref_max[g]) for g, c in cand.items())
    return match / total


def bleu2(candidate: list[str], reference: list[str] | list[list[str]]) -> float:
    """Sentence-level BLEU-2 with brevity penalty.

    A multi-reference call passes a list of references (used by the optional
    Self-BLEU variant); the default is single-reference. Zero precisions are
    smoothed to SMOOTH_EPS; a vacuous precision (candidate too short to have
    n-grams of that order) counts as 1.
    """
    if not candidate:
        warnings.warn("bleu2: empty candidate scores 0")
        return 0.0
    refs = reference if reference and isinstance(reference[0], list) else [reference]
    ps = []
    for n in (1, 2):
        p = _clipped_precision(candidate, refs, n)
        if p is None:
            p = 1.0
        elif p == 0.0:
            p = SMOOTH_EPS
        ps.append(p)
    c = len(candidate)
    r = min((len(ref) for ref in refs), key=lambda L: (abs(L - c), L))
    bp = min(1.0, float(np.exp(1.0 - r / c)))
    return bp * float(np.sqrt(ps[0] * ps[1]))


def rouge(candidate: list[str], reference: list[str], variant: str = "1") -> float:
    """ROUGE-1 (unigram F1) or ROUGE-L (LCS F1 with beta = 1)."""
    if not candidate or not reference:
        raise ValueError("rouge requires non-empty candidate and reference")
    if variant == "1":
        cand, ref = Counter(candidate), Counter(reference)
        match = sum(min(c, ref[g]) for g, c in cand.items())
        p = match / len(candidate)
        r = match / len(reference)
    elif variant.upper() == "L":
        lcs = _lcs_length(candidate, reference)
        p = lcs / len(candidate)
        r = lcs / len(reference)
    else:
        raise ValueError(f"unknown ROUGE variant: {variant}")
    if p + r == 0:
        return 0.0
    return 2 * p * r / (p + r)


def _lcs_length(a: list[str], b: list[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def max_and_avg(candidates: list[list[str]], reference: list[str], metric) -> tuple[float, float]:
    """(max, mean) of `metric(candidate, reference)` over a generation list."""
    if not candidates:
        raise ValueError("max_and_avg: empty list")
    vals = [metric(c, reference) for c in candidates]
    return max(vals), float(np.mean(vals))


def self_bleu(candidates: list[list[str]], multi_reference: bool = False) -> float:
    """Mean pairwise BLEU-2 within one generation list (lower = more diverse).

    Default: mean over ordered pairs (i, j), i != j, of bleu2(item_i, item_j).
    `multi_reference=True` instead scores each item against all others jointly.
    """
    if len(candidates) < 2:
        raise ValueError("self_bleu requires at least 2 items")
    if multi_reference:
        vals = [bleu2(c, [r for j, r in enumerate(candidates) if j != i])
                for i, c in enumerate(candidates)]
        return float(np.mean(vals))
    vals = [bleu2(ci, cj)
            for i, ci in enumerate(candidates)
            for j, cj in enumerate(candidates) if i != j]
    return float(np.mean(vals))


def corpus_self_bleu(lists: list[list[list[str]]], **kw) -> float:
    """Self-BLEU averaged over contexts."""
    return float(np.mean([self_bleu(lst, **kw) for lst in lists]))


# ---------------------------------------------------------------------------
# controllability harness
# ---------------------------------------------------------------------------

@dataclass
class MatchTable:
    """Confusion counts (target x observed) or per-value containment counts."""
    attribute: str
    row_labels: list[str]
    col_labels: list[str]
    counts: np.ndarray
    kind: str = "confusion"      # confusion | containment

    def percentages(self) -> np.ndarray:
        totals = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            pct = 100.0 * self.counts / totals
        return np.nan_to_num(pct)

    def diagonal_match(self) -> np.ndarray:
        """Per-target match rate: diagonal for confusion, match col otherwise."""
        pct = self.percentages()
        if self.kind == "confusion":
            return np.array([pct[i, i] for i in range(len(self.row_labels))])
        return pct[:, self.col_labels.index("match")]

    def to_json(self) -> str:
        return json.dumps({"attribute": self.attribute, "kind": self.kind,
                           "rows": self.row_labels, "cols": self.col_labels,
                           "counts": self.counts.tolist(),
                           "percent": self.percentages().tolist()})

    def to_text(self) -> str:
        pct = self.percentages()
        width = max(12, max(len(r) for r in self.row_labels) + 2)
        head = " " * width + "".join(f"{c:>12}" for c in self.col_labels)
        lines = [f"[{self.attribute}] match table ({self.kind}, % by row)", head]
        for i, r in enumerate(self.row_labels):
            lines.append(f"{r:<{width}}" + "".join(f"{pct[i, j]:>12.1f}"
                                                   for j in range(len(self.col_labels))))
        return "\n".join(lines)


@dataclass
class ControllabilityResult:
    table: MatchTable
    generations: list = field(default_factory=list)   # (story_id, target label, tokens)


def _generate(model, story: Story, value, label, beam: int):
    from .decoding import beam_search
    return beam_search(model, story.context_tokens(), value, beam=beam,
                       attribute_label=label).items[0].tokens


def sentiment_report(model, stories: list[Story], lex: Lexicons, beam: int = 1) -> ControllabilityResult:
    """3x3 target-vs-observed sentiment confusion over generated continuations."""
    labels = ["negative", "neutral", "positive"]
    counts = np.zeros((3, 3))
    gens = []
    for st in stories:
        for t, lab in enumerate(labels):
            toks = _generate(model, st, t, lab, beam)
            obs = annotate_sentence(toks, lex)["sentiment"]
            counts[t, labels.index(obs)] += 1
            gens.append((st.story_id, lab, toks))
    return ControllabilityResult(MatchTable("sentiment", labels, labels, counts), gens)


def length_report(model, stories: list[Story], scheme: str = "3-bin",
                  beam: int = 1, max_dif: int = 3) -> ControllabilityResult:
    """Distribution of dif = |target bin - observed bin| per target bin."""
    nb = num_bins(scheme)
    cols = [f"dif={d}" for d in range(max_dif)] + [f"dif>={max_dif}"]
    counts = np.zeros((nb, max_dif + 1))
    gens = []
    for st in stories:
        for t in range(nb):
            toks = _generate(model, st, t, f"bin{t}", beam)
            L = max(1, len(toks))
            if scheme == "30-bin":
                L = min(L, 30)
            obs = bin_length(L, scheme)
            dif = abs(t - obs)
            counts[t, min(dif, max_dif)] += 1
            gens.append((st.story_id, f"bin{t}", toks))
    rows = [f"bin{t}" for t in range(nb)]
    return ControllabilityResult(MatchTable(f"length ({scheme})", rows, cols, counts), gens)


def predicate_report(model, stories: list[Story], predicates: list[str],
                     beam: int = 1) -> ControllabilityResult:
    """Fraction of stories whose generation contains the desired predicate."""
    counts = np.zeros((len(predicates), 2))
    gens = []
    for st in stories:
        for i, pred in enumerate(predicates):
            toks = _generate(model, st, [pred], pred, beam)
            counts[i, 0 if pred in toks else 1] += 1
            gens.append((st.story_id, pred, toks))
    return ControllabilityResult(
        MatchTable("predicates", list(predicates), ["match", "miss"], counts, kind="containment"),
        gens)


def frame_report(model, stories: list[Story], frame_ids: list[int],
                 inventory: FrameInventory, lex: Lexicons, beam: int = 1) -> ControllabilityResult:
    """Fraction of stories whose generation evokes the desired frame."""
    counts = np.zeros((len(frame_ids), 2))
    gens = []
    for st in stories:
        for i, fid in enumerate(frame_ids):
            toks = _generate(model, st, {fid}, inventory.name_of(fid), beam)
            observed = inventory.resolve(annotate_sentence(toks, lex)["frames"])
            counts[i, 0 if fid in observed else 1] += 1
            gens.append((st.story_id, inventory.name_of(fid), toks))
    labels = [inventory.name_of(f) for f in frame_ids]
    return ControllabilityResult(
        MatchTable("frames", labels, ["match", "miss"], counts, kind="containment"), gens)


def cluster_report(model, stories: list[Story], clusters: ClusterModel,
                   table: EmbeddingTable, beam: int = 1) -> ControllabilityResult:
    """Nearest-centroid confusion of generated continuations per target cluster."""
    k = clusters.k
    counts = np.zeros((k, k))
    gens = []
    for st in stories:
        for t in range(k):
            toks = _generate(model, st, t, f"cluster{t}", beam)
            if toks:
                obs = clusters.assign(bow_embed(toks, table))
            else:
                obs = -1
            if obs >= 0:
                counts[t, obs] += 1
            gens.append((st.story_id, f"cluster{t}", toks))
    labels = [f"cluster{t}" for t in range(k)]
    return ControllabilityResult(MatchTable("clusters", labels, labels, counts), gens)


# ---------------------------------------------------------------------------
# set-level and oracle reports
# ---------------------------------------------------------------------------

@dataclass
class MetricReport:
    """Corpus means of the sentence-level metrics (values in [0,1], x100 shown)."""
    name: str
    ppl: float | None = None
    bleu: float | None = None
    rouge1: float | None = None
    rougeL: float | None = None
    max_bleu: float | None = None
    avg_bleu: float | None = None
    max_rouge1: float | None = None
    avg_rouge1: float | None = None
    max_rougeL: float | None = None
    avg_rougeL: float | None = None
    self_bleu: float | None = None
    # pretrained story-scorer columns (O/R/I) require an external model and
    # are deliberately absent; reports print a placeholder
    story_scorer: str = "n/a (external model not bundled)"

    def to_json(self) -> str:
        d = {k: v for k, v in self.__dict__.items()}
        return json.dumps(d)

    def row(self) -> str:
        def f(x):
            return f"{100 * x:8.2f}" if isinstance(x, float) else f"{'-':>8}"

        ppl = f"{self.ppl:8.2f}" if self.ppl is not None else f"{'-':>8}"
        return (f"{self.name:<24}{ppl}{f(self.rouge1)}{f(self.rougeL)}{f(self.bleu)}"
                f"{f(self.max_bleu)}{f(self.avg_bleu)}{f(self.self_bleu)}")

    @staticmethod
    def header() -> str:
        return (f"{'system':<24}{'PPL':>8}{'ROUGE-1':>8}{'ROUGE-L':>8}{'BLEU':>8}"
                f"{'MaxBLEU':>8}{'AvgBLEU':>8}{'SelfBLEU':>8}   (story scorer O/R/I: n/a)")


def score_single(outputs: list[list[str]], references: list[list[str]], name: str,
                 ppl: float | None = None) -> MetricReport:
    """Mean sentence-level metrics for one output per context."""
    b = [bleu2(o, r) if o else 0.0 for o, r in zip(outputs, references)]
    r1 = [rouge(o, r, "1") if o else 0.0 for o, r in zip(outputs, references)]
    rl = [rouge(o, r, "L") if o else 0.0 for o, r in zip(outputs, references)]
    return MetricReport(name, ppl=ppl, bleu=float(np.mean(b)),
                        rouge1=float(np.mean(r1)), rougeL=float(np.mean(rl)))


def score_lists(lists: list[list[list[str]]], references: list[list[str]], name: str,
                ppl: float | None = None) -> MetricReport:
    """Max/avg metrics plus Self-BLEU for n-continuation lists."""
    rep = MetricReport(name, ppl=ppl)
    mb, ab, m1, a1, ml, al = [], [], [], [], [], []
    for lst, ref in zip(lists, references):
        safe = [c if c else ["<empty>"] for c in lst]
        x, a = max_and_avg(safe, ref, bleu2)
        mb.append(x); ab.append(a)
        x, a = max_and_avg(safe, ref, lambda c, r: rouge(c, r, "1"))
        m1.append(x); a1.append(a)
        x, a = max_and_avg(safe, ref, lambda c, r: rouge(c, r, "L"))
        ml.append(x); al.append(a)
    rep.max_bleu, rep.avg_bleu = float(np.mean(mb)), float(np.mean(ab))
    rep.max_rouge1, rep.avg_rouge1 = float(np.mean(m1)), float(np.mean(a1))
    rep.max_rougeL, rep.avg_rougeL = float(np.mean(ml)), float(np.mean(al))
    rep.self_bleu = corpus_self_bleu([[c if c else ["<empty>"] for c in lst] for lst in lists])
    rep.bleu, rep.rouge1, rep.rougeL = rep.avg_bleu, rep.avg_rouge1, rep.avg_rougeL
    return rep


def length_match_csv(result: ControllabilityResult, scheme: str) -> str:
    """Plot data: per target bin, match-rate rows (dif=0 / <=1 / <=2 / <=3)."""
    tbl = result.table
    pct = tbl.percentages()
    lines = ["target_bin,dif_eq_0,dif_le_1,dif_le_2,dif_le_3"]
    for i, row in enumerate(pct):
        cum = np.cumsum(row)
        cum = np.minimum(cum, 100.0)
        lines.append(f"{i},{cum[0]:.2f},{cum[1]:.2f},{cum[2]:.2f},{cum[3]:.2f}")
    return "\n".join(lines)


def length_distribution_csv(stories: list[Story]) -> str:
    """Training continuation length histogram (appendix-style plot data)."""
    counts = Counter(st.continuation_length for st in stories)
    total = sum(counts.values())
    lines = ["length,frequency_percent"]
    for n in sorted(counts):
        lines.append(f"{n},{100.0 * counts[n] / total:.3f}")
    return "\n".join(lines)
