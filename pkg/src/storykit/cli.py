"""Command-line pipeline: annotate -> cluster -> train -> generate -> evaluate,
plus reranking and the HTTP service."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from .corpus import load_corpus, read_sidecar
from .decoding import beam_search, generate_per_attribute, temperature_sample
from .metrics import (MetricReport, cluster_report, frame_report, length_report,
                      length_distribution_csv, length_match_csv, predicate_report,
                      score_lists, score_single, sentiment_report)
from .model import ATTRIBUTES, ModelConfig, Seq2SeqModel, TrainConfig
from .pipeline import (Workspace, annotate_split, attribute_values_for_generation,
                       build_inventory, fit_clusters, fit_predicate_pca,
                       load_resources, oracle_examples, train_predictor,
                       train_split_model)
from .selection import Candidate, FramePredictor, rerank as rerank_candidates
from .synthetic import write_bundle

ATTR_CHOICES = [a for a in ATTRIBUTES]


def _load_train_config(path) -> tuple[TrainConfig, dict]:
    """YAML key-value config mirroring TrainConfig plus model dims."""
    if path is None:
        return TrainConfig(), {}
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    tc_fields = {k: raw[k] for k in
                 ("learning_rate", "batch_size", "max_epochs", "patience",
                  "seed", "grad_clip", "float32") if k in raw}
    model_fields = {k: raw[k] for k in
                    ("embed_dim", "hidden_dim", "num_clusters", "frame_embed_dim",
                     "seed") if k in raw}
    return TrainConfig(**tc_fields), model_fields


@click.group()
def main():
    """Controllable story-continuation toolkit."""


@main.command("make-synthetic")
@click.option("--workdir", type=click.Path(), required=True)
@click.option("--n", default=500, show_default=True)
@click.option("--seed", default=7, show_default=True)
def make_synthetic(workdir, n, seed):
    """Emit the bundled synthetic corpus, lexicons, and embeddings."""
    paths = write_bundle(workdir, n=n, seed=seed)
    for name, p in paths.items():
        click.echo(f"{name}: {p}")


@main.command()
@click.option("--workdir", type=click.Path(exists=True), required=True)
@click.option("--split", multiple=True, default=("train", "dev", "test"))
def annotate(workdir, split):
    """Heuristic-annotate corpus splits and build the frame inventory."""
    ws = Workspace(Path(workdir))
    for s in split:
        anns = annotate_split(ws, s)
        click.echo(f"annotated {len(anns)} stories -> {ws.sidecar(s)}")
    inv = build_inventory(ws)
    click.echo(f"frame inventory: {len(inv.frames)} frames -> {ws.inventory}")


@main.command()
@click.option("--workdir", type=click.Path(exists=True), required=True)
@click.option("--k", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
def cluster(workdir, k, seed):
    """Fit k-means on training continuations; write cluster ids into sidecars."""
    ws = Workspace(Path(workdir))
    model = fit_clusters(ws, k=k, seed=seed)
    click.echo(f"k-means: k={model.k} inertia={model.inertia:.4f} -> {ws.clusters}")


@main.command("fit-pca")
@click.option("--workdir", type=click.Path(exists=True), required=True)
@click.option("--k", default=64, show_default=True)
def fit_pca_cmd(workdir, k):
    """Fit the predicate-sum PCA projection."""
    ws = Workspace(Path(workdir))
    proj = fit_predicate_pca(ws, k=k)
    click.echo(f"pca: {proj.components.shape} -> {ws.pca}")


@main.command()
@click.option("--workdir", type=click.Path(exists=True), required=True)
@click.option("--attribute", type=click.Choice(ATTR_CHOICES), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--vocab-size", default=10000, show_default=True)
def train(workdir, attribute, config_path, vocab_size):
    """Train one attribute-conditioned model (or the unconditioned baseline)."""
    ws = Workspace(Path(workdir))
    train_cfg, model_fields = _load_train_config(config_path)
    resources = load_resources(ws, vocab_size=vocab_size)
    model_cfg = ModelConfig(vocab_size=len(resources.vocab), attribute=attribute,
                            **model_fields)
    model = train_split_model(ws, attribute, model_cfg, train_cfg, resources,
                              log=click.echo)
    click.echo(f"best dev ppl {model.best_dev_ppl:.3f} -> {ws.model(attribute)}")


@main.command("train-reverse")
@click.option("--workdir", type=click.Path(exists=True), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--vocab-size", default=10000, show_default=True)
def train_reverse(workdir, config_path, vocab_size):
    """Train the reverse (continuation -> context) scoring model."""
    ws = Workspace(Path(workdir))
    train_cfg, model_fields = _load_train_config(config_path)
    resources = load_resources(ws, vocab_size=vocab_size)
    model_cfg = ModelConfig(vocab_size=len(resources.vocab), attribute="none",
                            **model_fields)
    model = train_split_model(ws, "none", model_cfg, train_cfg, resources,
                              reverse=True, log=click.echo)
    click.echo(f"best dev ppl {model.best_dev_ppl:.3f} -> {ws.reverse_model}")


@main.command("train-frame-predictor")
@click.option("--workdir", type=click.Path(exists=True), required=True)
@click.option("--hidden", default=32, show_default=True)
@click.option("--seed", default=0, show_default=True)
def train_frame_predictor_cmd(workdir, hidden, seed):
    """Train the continuation frame-vector predictor (MSE)."""
    ws = Workspace(Path(workdir))
    train_predictor(ws, hidden_dim=hidden, seed=seed, log=click.echo)
    click.echo(f"-> {ws.frame_predictor}")


@main.command()
@click.option("--workdir", type=click.Path(exists=True), required=True)
@click.option("--attribute", type=click.Choice(ATTR_CHOICES), required=True)
@click.option("--split", default="dev", show_default=True)
@click.option("--beam", default=1, show_default=True)
@click.option("--temperature", default=None, type=float,
              help="sample with this temperature instead of beam search")
@click.option("--n", default=3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--limit", default=10, show_default=True, help="contexts to decode")
@click.option("--out", type=click.Path(), default=None)
def generate(workdir, attribute, split, beam, temperature, n, seed, limit, out):
    """Generate continuations; one per attribute value, or BS/TS lists."""
    ws = Workspace(Path(workdir))
    model = Seq2SeqModel.load(ws.model(attribute), load_resources(ws))
    resources = model.resources
    stories = load_corpus(getattr(ws, f"{split}_corpus"))[:limit]
    lines = []
    for st in stories:
        ctx = st.context_tokens()
        if temperature is not None:
            gl = temperature_sample(model, ctx, None if attribute == "none" else 0,
                                    temperature, n, seed, context_id=st.story_id)
        elif attribute == "none":
            gl = beam_search(model, ctx, None, beam=max(beam, n), context_id=st.story_id)
        else:
            values, labels = attribute_values_for_generation(attribute, resources)
            gl = generate_per_attribute(model, ctx, values, labels, beam=beam,
                                        context_id=st.story_id)
        lines.append(gl.to_jsonl())
    text = "\n".join(lines)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
        click.echo(f"-> {out}")
    else:
        click.echo(text)


@main.command()
@click.option("--workdir", type=click.Path(exists=True), required=True)
@click.option("--what", type=click.Choice(["controllability", "oracle", "diversity", "all"]),
              default="all", show_default=True)
@click.option("--split", default="dev", show_default=True)
@click.option("--limit", default=30, show_default=True)
@click.option("--seed", default=0, show_default=True)
def evaluate(workdir, what, split, limit, seed):
    """Emit controllability, oracle-attribute, and set-diversity reports."""
    ws = Workspace(Path(workdir))
    resources = load_resources(ws)
    stories = load_corpus(getattr(ws, f"{split}_corpus"))[:limit]
    reports_dir = ws.reports

    def emit(name, text):
        path = reports_dir / name
        path.write_text(text + "\n", encoding="utf-8")
        click.echo(text)
        click.echo(f"-> {path}\n")

    if what in ("controllability", "all"):
        for attribute in ("sentiment", "length3", "predicates", "frames", "clusters"):
            path = ws.model(attribute)
            if not path.exists():
                continue
            model = Seq2SeqModel.load(path, resources)
            if attribute == "sentiment":
                result = sentiment_report(model, stories, resources.lexicons)
            elif attribute == "length3":
                result = length_report(model, stories, "3-bin")
                emit("length_match.csv", length_match_csv(result, "3-bin"))
            elif attribute == "predicates":
                result = predicate_report(model, stories, resources.predicate_inventory[:10])
            elif attribute == "frames":
                ids = list(range(min(10, len(resources.inventory.frames))))
                result = frame_report(model, stories, ids, resources.inventory,
                                      resources.lexicons)
            else:
                result = cluster_report(model, stories, resources.clusters,
                                        resources.embeddings)
            emit(f"controllability_{attribute}.txt", result.table.to_text())
            (reports_dir / f"controllability_{attribute}.json").write_text(
                result.table.to_json(), encoding="utf-8")
        emit("length_distribution.csv",
             length_distribution_csv(load_corpus(ws.train_corpus)))

    if what in ("oracle", "all"):
        rows = [MetricReport.header()]
        refs = [st.continuation for st in stories]
        for attribute in ("none", "sentiment", "length3", "predicates", "frames",
                          "clusters", "bow"):
            path = ws.model(attribute)
            if not path.exists():
                continue
            model = Seq2SeqModel.load(path, resources)
            examples, _ = oracle_examples(ws, split, attribute, resources)
            ppl = model.perplexity(examples[:limit])
            outs = [beam_search(model, st.context_tokens(), ex[1], beam=1).items[0].tokens
                    for st, ex in zip(stories, examples)]
            rep = score_single(outs, refs, "seq2seq" if attribute == "none" else attribute,
                               ppl=ppl)
            rows.append(rep.row())
        emit("oracle_metrics.txt", "\n".join(rows))

    if what in ("diversity", "all"):
        path = ws.model("sentiment")
        base = ws.model("none")
        rows = [MetricReport.header()]
        refs = [st.continuation for st in stories]
        if base.exists():
            model = Seq2SeqModel.load(base, resources)
            bs = [beam_search(model, st.context_tokens(), None, beam=3).token_lists()
                  for st in stories]
            rows.append(score_lists(bs, refs, "BS, beam=3").row())
            for tau in (0.5, 0.6):
                ts = [temperature_sample(model, st.context_tokens(), None, tau, 3,
                                         seed).token_lists() for st in stories]
                rows.append(score_lists(ts, refs, f"TS, tau={tau}").row())
        if path.exists():
            model = Seq2SeqModel.load(path, resources)
            values, labels = attribute_values_for_generation("sentiment", resources)
            sl = [generate_per_attribute(model, st.context_tokens(), values, labels).token_lists()
                  for st in stories]
            rows.append(score_lists(sl, refs, "sentiment (3 values)").row())
        emit("diversity_metrics.txt", "\n".join(rows))


@main.command("rerank")
@click.option("--workdir", type=click.Path(exists=True), required=True)
@click.option("--split", default="dev", show_default=True)
@click.option("--limit", default=5, show_default=True)
@click.option("--lam", default=1.0, show_default=True, help="reverse-score weight")
@click.option("--k", default=3, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def rerank_cmd(workdir, split, limit, lam, k, out):
    """Rerank frame-set-conditioned candidates with the reverse model."""
    ws = Workspace(Path(workdir))
    resources = load_resources(ws)
    model = Seq2SeqModel.load(ws.model("frames"), resources)
    reverse = Seq2SeqModel.load(ws.reverse_model, resources) if lam > 0 else None
    stories = load_corpus(getattr(ws, f"{split}_corpus"))[:limit]
    lines = []
    for st in stories:
        ctx = st.context_tokens()
        candidates = []
        for fs in resources.frame_set_inventory:
            best = beam_search(model, ctx, set(fs), beam=1).items[0]
            label = "+".join(resources.inventory.name_of(f) for f in fs)
            candidates.append(Candidate(best.tokens, best.score, attribute=label))
        top = rerank_candidates(ctx, candidates, reverse, lam=lam, k=min(k, len(candidates)))
        for c in top:
            lines.append(json.dumps({"context_id": st.story_id, "generator": "rerank",
                                     "attribute": c.attribute, "tokens": c.tokens,
                                     "score": c.combined,
                                     "forward_logp": c.forward_logp,
                                     "reverse_logp": c.reverse_logp}))
    text = "\n".join(lines)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
        click.echo(f"-> {out}")
    else:
        click.echo(text)


@main.command()
@click.option("--workdir", type=click.Path(exists=True), required=True)
@click.option("--attribute", type=click.Choice(ATTR_CHOICES), default="sentiment",
              show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8765, show_default=True)
def serve(workdir, attribute, host, port):
    """Serve suggestions over HTTP from trained checkpoints."""
    import uvicorn

    from .service import ModelBundle, create_app
    ws = Workspace(Path(workdir))
    resources = load_resources(ws)
    try:
        model = Seq2SeqModel.load(ws.model(attribute), resources)
    except (OSError, ValueError) as exc:
        click.echo(f"cannot load model checkpoint: {exc}", err=True)
        sys.exit(1)
    reverse = (Seq2SeqModel.load(ws.reverse_model, resources)
               if ws.reverse_model.exists() else None)
    predictor = (FramePredictor.load(ws.frame_predictor)
                 if ws.frame_predictor.exists() else None)
    bundle = ModelBundle(model=model, resources=resources, reverse=reverse,
                         predictor=predictor, model_id=f"{attribute}@{ws.model(attribute).name}")
    uvicorn.run(create_app(bundle), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
