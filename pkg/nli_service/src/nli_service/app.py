"""FastAPI application serving entailment triples.

Wire protocol: POST ``/v1/entail`` with ``{"pairs": [{"premise", "hypothesis"}]}``
returns ``{"triples": [...], "model", "latency_ms", "truncated"}`` with triples
in request order, each summing to 1 within 1e-6.

Two modes. ``stub`` computes a deterministic triple from a keyed hash of
(premise, hypothesis), so integration tests are reproducible without model
weights. ``live`` loads a sequence-classification NLI model; which logit
index means entailment differs per model, so the mapping is configured per
model id, never assumed.
"""

from __future__ import annotations

import hashlib
import os
import time
from dataclasses import dataclass, field
from typing import List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

# Logit order (entailment, neutral, contradiction) per model id. The two
# common NLI checkpoints disagree on label order; add entries as needed.
LABEL_ORDERS = {
    "stub": (0, 1, 2),
    "microsoft/deberta-v2-xlarge-mnli": (2, 1, 0),
    "roberta-large-mnli": (2, 1, 0),
    "MoritzLaurer/DeBERTa-v3-base-mnli-fever-anli": (0, 1, 2),
}
DEFAULT_LABEL_ORDER = (0, 1, 2)


@dataclass
class Settings:
    """Service configuration, read from the environment by default."""

    model_id: str = "stub"
    mode: str = "stub"  # or "live"
    port: int = 8100
    batch_cap: int = 64
    max_premise_chars: int = 8000
    stub_key: str = "nli-stub-v1"

    @classmethod
    def from_env(cls) -> "Settings":
        return cls(
            model_id=os.environ.get("NLI_MODEL_ID", "stub"),
            mode=os.environ.get("NLI_MODE", "stub"),
            port=int(os.environ.get("NLI_PORT", "8100")),
            batch_cap=int(os.environ.get("NLI_BATCH_CAP", "64")),
        )

    def __post_init__(self):
        if self.mode not in ("stub", "live"):
            raise ValueError(f"NLI_MODE must be stub or live, got {self.mode!r}")
        if self.batch_cap < 1:
            raise ValueError("batch cap must be >= 1")


class Pair(BaseModel):
    premise: str = Field(min_length=1)
    hypothesis: str = Field(min_length=1)


class EntailRequest(BaseModel):
    pairs: List[Pair] = Field(min_length=1)
    model: Optional[str] = None


class Triple(BaseModel):
    entailment: float
    neutral: float
    contradiction: float


class EntailResponse(BaseModel):
    triples: List[Triple]
    model: str
    latency_ms: float
    truncated: bool


def stub_triple(premise: str, hypothesis: str, key: str = "nli-stub-v1") -> Triple:
    """Deterministic triple from a keyed hash; a pure function of its inputs."""
    digest = hashlib.blake2b(
        f"{key}\x00{premise}\x00{hypothesis}".encode("utf-8"), digest_size=12
    ).digest()
    # Three positive weights from independent 4-byte words, then normalize.
    weights = [
        1 + int.from_bytes(digest[i : i + 4], "big") for i in (0, 4, 8)
    ]
    total = sum(weights)
    e, n = weights[0] / total, weights[1] / total
    return Triple(entailment=e, neutral=n, contradiction=1.0 - e - n)


class LiveBackend:
    """Lazy-loaded transformer backend; absence of weights is a health failure,
    not a crash."""

    def __init__(self, model_id: str):
        self.model_id = model_id
        self.load_error: Optional[str] = None
        self._model = None
        self._tokenizer = None
        try:
            import torch  # noqa: F401
            from transformers import (
                AutoModelForSequenceClassification,
                AutoTokenizer,
            )

            self._tokenizer = AutoTokenizer.from_pretrained(model_id)
            self._model = AutoModelForSequenceClassification.from_pretrained(model_id)
            self._model.eval()
        except Exception as exc:  # noqa: BLE001 - report any load failure via /health
            self.load_error = f"{type(exc).__name__}: {exc}"

    def ready(self) -> bool:
        return self._model is not None

    def infer(self, pairs) -> List[Triple]:
        import torch

        e_i, n_i, c_i = LABEL_ORDERS.get(self.model_id, DEFAULT_LABEL_ORDER)
        enc = self._tokenizer(
            [p.premise for p in pairs],
            [p.hypothesis for p in pairs],
            truncation=True,
            padding=True,
            return_tensors="pt",
        )
        with torch.no_grad():
            probs = self._model(**enc).logits.softmax(dim=-1)
        return [
            Triple(
                entailment=float(row[e_i]),
                neutral=float(row[n_i]),
                contradiction=float(row[c_i]),
            )
            for row in probs
        ]


def create_app(settings: Optional[Settings] = None) -> FastAPI:
    settings = settings or Settings.from_env()
    app = FastAPI(title="nli-service")
    backend = LiveBackend(settings.model_id) if settings.mode == "live" else None

    @app.get("/health")
    def health():
        if backend is not None and not backend.ready():
            raise HTTPException(
                status_code=503,
                detail={"status": "error", "reason": backend.load_error},
            )
        return {"status": "ok", "model": settings.model_id, "mode": settings.mode}

    @app.post("/v1/entail", response_model=EntailResponse)
    def entail(request: EntailRequest):
        if len(request.pairs) > settings.batch_cap:
            raise HTTPException(
                status_code=413,
                detail=f"batch of {len(request.pairs)} exceeds cap {settings.batch_cap}",
            )
        start = time.perf_counter()
        truncated = False
        pairs = []
        for p in request.pairs:
            if len(p.premise) > settings.max_premise_chars:
                truncated = True
                p = Pair(premise=p.premise[: settings.max_premise_chars], hypothesis=p.hypothesis)
            pairs.append(p)
        if backend is None:
            triples = [stub_triple(p.premise, p.hypothesis, settings.stub_key) for p in pairs]
        else:
            if not backend.ready():
                raise HTTPException(status_code=503, detail=backend.load_error)
            triples = backend.infer(pairs)
        return EntailResponse(
            triples=triples,
            model=settings.model_id,
            latency_ms=(time.perf_counter() - start) * 1000.0,
            truncated=truncated,
        )

    return app
