"""HTTP suggestion service for the interactive writing UI.

POST /v1/suggest   SuggestionRequest -> SuggestionResponse
GET  /v1/attributes loaded attribute type, legal values, frame names
GET  /v1/health

One generation model is mandatory; the reverse model and frame predictor are
optional and their auto modes answer 501 while absent. Loaded models are
never mutated by requests.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .corpus import SENT_BOUNDARY, annotate_sentence
from .decoding import beam_search, temperature_sample
from .model import Seq2SeqModel, Resources
from .pipeline import attribute_values_for_generation
from .selection import Candidate, FramePredictor, frame_vector, predict_topk_frames, rerank

_PUNCT = {".", ",", "!", "?", ";", ":"}


def tokenize(text: str) -> list[str]:
    """Lowercase tokenization compatible with the pre-tokenized corpus."""
    return re.findall(r"[a-z0-9']+|[.,!?;:]", text.lower())


def detokenize(tokens: list[str]) -> str:
    """Join with spaces, collapsing the space before sentence punctuation."""
    out = ""
    for t in tokens:
        if t in _PUNCT or not out:
            out += t
        else:
            out += " " + t
    return out


class SuggestionRequest(BaseModel):
    context: list[str] = Field(min_length=1, max_length=4)
    attribute: str | None = None           # informational; must match the model
    value: object = None                   # explicit value | "auto-rerank" | "auto-predict"
    n: int = 3
    method: str = "beam"                   # beam | sample
    temperature: float = 0.6
    seed: int = 0


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status, self.code, self.message = status, code, message


@dataclass
class ModelBundle:
    model: Seq2SeqModel
    resources: Resources
    reverse: Seq2SeqModel | None = None
    predictor: FramePredictor | None = None
    model_id: str = "default"


def _parse_value(bundle: ModelBundle, value):
    """Explicit attribute value from its JSON form."""
    attr = bundle.model.config.attribute
    res = bundle.resources
    try:
        if attr == "none":
            return None
        if attr == "sentiment":
            return value if isinstance(value, int) else ("negative", "neutral", "positive").index(value)
        if attr in ("length3", "length30", "clusters"):
            return int(value)
        if attr == "predicates":
            return list(value) if isinstance(value, (list, tuple)) else [str(value)]
        if attr == "frames":
            names = value if isinstance(value, (list, tuple)) else [value]
            ids = set()
            for v in names:
                if isinstance(v, int):
                    ids.add(v)
                else:
                    resolved = res.inventory.resolve([str(v)])
                    ids |= resolved
            return ids
        if attr == "bow":
            return tokenize(value) if isinstance(value, str) else list(value)
    except (ValueError, AttributeError, TypeError) as exc:
        raise ServiceError(400, "invalid_value", f"invalid {attr} value {value!r}: {exc}")
    raise ServiceError(400, "invalid_value", f"unsupported attribute {attr}")


def _context_tokens(bundle: ModelBundle, sentences: list[str]):
    vocab = bundle.resources.vocab
    toks: list[str] = []
    unknown = []
    for i, sent in enumerate(sentences):
        if i > 0:
            toks.append(SENT_BOUNDARY)
        st = tokenize(sent)
        if not st:
            raise ServiceError(400, "empty_context", "context sentence has no tokens")
        unknown.extend(t for t in st if vocab.id_of(t) == vocab.unk_id)
        toks.extend(st)
    warnings = []
    if unknown:
        warnings.append("unknown words mapped to <unk>: " + ", ".join(sorted(set(unknown))))
    return toks, warnings


def suggest(bundle: ModelBundle, req: SuggestionRequest) -> dict:
    if req.n < 1:
        raise ServiceError(400, "invalid_n", "n must be >= 1")
    attr = bundle.model.config.attribute
    if req.attribute is not None and req.attribute != attr:
        raise ServiceError(400, "attribute_mismatch",
                           f"loaded model controls '{attr}', not '{req.attribute}'")
    ctx, warnings = _context_tokens(bundle, req.context)
    res = bundle.resources

    items = []
    if req.value == "auto-predict":
        if bundle.predictor is None or res.inventory is None:
            raise ServiceError(501, "predictor_unavailable", "no frame predictor loaded")
        if attr != "frames":
            raise ServiceError(400, "attribute_mismatch", "auto-predict requires a frames model")
        ctx_frames = [annotate_sentence(tokenize(s), res.lexicons)["frames"]
                      for s in req.context]
        vecs = np.stack([frame_vector(res.inventory.resolve(f)) for f in ctx_frames])
        if vecs.shape[0] < 4:  # pad with zero vectors for short contexts
            vecs = np.vstack([np.zeros((4 - vecs.shape[0], vecs.shape[1])), vecs])
        for fid in predict_topk_frames(bundle.predictor, vecs, req.n):
            best = beam_search(bundle.model, ctx, {fid}, beam=1,
                               attribute_label=res.inventory.name_of(fid)).items[0]
            items.append((best.tokens, res.inventory.name_of(fid), best.score))
    elif req.value == "auto-rerank":
        if bundle.reverse is None or not res.frame_set_inventory:
            raise ServiceError(501, "reranker_unavailable", "no reverse model loaded")
        if attr != "frames":
            raise ServiceError(400, "attribute_mismatch", "auto-rerank requires a frames model")
        candidates = []
        for fs in res.frame_set_inventory:
            best = beam_search(bundle.model, ctx, set(fs), beam=1).items[0]
            label = "+".join(res.inventory.name_of(f) for f in fs)
            candidates.append(Candidate(best.tokens, best.score, attribute=label))
        if req.n > len(candidates):
            raise ServiceError(400, "invalid_n",
                               f"n={req.n} exceeds {len(candidates)} candidates")
        for c in rerank(ctx, candidates, bundle.reverse, lam=1.0, k=req.n):
            items.append((c.tokens, c.attribute, c.combined))
    else:
        value = _parse_value(bundle, req.value)
        _z, _enc, _dec = bundle.model.embedder.embed(value)
        if attr == "frames" and not value:
            warnings.append("empty frame set embeds as the zero vector")
        label = req.value if req.value is not None else attr
        if req.method == "sample":
            gl = temperature_sample(bundle.model, ctx, value, req.temperature,
                                    req.n, req.seed, attribute_label=label)
        else:
            gl = beam_search(bundle.model, ctx, value, beam=req.n, attribute_label=label)
        for it in gl.items[:req.n]:
            items.append((it.tokens, label, it.score))

    if len(items) < req.n:
        warnings.append(f"truncated to {len(items)} suggestions")
    return {"suggestions": [{"text": detokenize(toks), "attribute": lab,
                             "score": float(score)} for toks, lab, score in items],
            "model_id": bundle.model_id,
            "warnings": warnings}


def create_app(bundle: ModelBundle) -> FastAPI:
    app = FastAPI(title="storykit suggestion service")

    @app.exception_handler(ServiceError)
    async def service_error(_req, exc: ServiceError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": exc.message})

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "model_id": bundle.model_id}

    @app.get("/v1/attributes")
    def attributes():
        attr = bundle.model.config.attribute
        values: list = []
        if attr in ("sentiment", "length3", "length30", "clusters", "predicates", "frames"):
            _vals, labels = attribute_values_for_generation(attr, bundle.resources)
            values = labels
        return {"attribute": attr,
                "values": values,
                "frame_inventory": (bundle.resources.inventory.frames
                                    if bundle.resources.inventory else []),
                "auto_modes": {"auto-rerank": bundle.reverse is not None,
                               "auto-predict": bundle.predictor is not None}}

    @app.post("/v1/suggest")
    def post_suggest(req: SuggestionRequest):
        return suggest(bundle, req)

    return app
