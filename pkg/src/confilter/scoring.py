"""Factuality scoring functions.

Four families behind one ``score(claim, record) -> float in [0, 1]`` surface:
document-level entailment, sentence-level entailment with conservative or
average aggregation, LLM model-confidence with five prompt dimensions, and a
synthetic scorer used for simulation and CI.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import ConfigError, DataError, MissingLabelError, TemplateError
from .jsonish import extract_json
from .nli import EntailmentTriple, NliClient
from .records import Claim, QueryRecord

_PROMPT_DIR = Path(__file__).parent / "prompts"

SCORER_KINDS = (
    "document_entailment",
    "conservative_entailment",
    "average_entailment",
    "model_confidence",
    "synthetic",
)


def load_prompt(name: str) -> str:
    return (_PROMPT_DIR / f"{name}.txt").read_text(encoding="utf-8")


def render_prompt(template: str, **values: str) -> str:
    """Substitute {placeholder} fields; unresolved placeholders are an error."""
    out = template
    for key, val in values.items():
        out = out.replace("{" + key + "}", str(val))
    leftover = re.findall(r"\{([a-z_]+)\}", out)
    if leftover:
        raise TemplateError(f"unresolved placeholders: {sorted(set(leftover))}")
    return out


# ---------------------------------------------------------------------------
# Sentence-level aggregation


_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")


def split_sentences(text: str) -> list:
    """Split on ., !, ? followed by whitespace; fragments under 3 chars drop."""
    parts = _SENTENCE_SPLIT_RE.split(text.strip())
    return [p.strip() for p in parts if len(p.strip()) >= 3]


def aggregate_conservative(per_sentence: Sequence[EntailmentTriple]) -> float:
    """Contradicted by any sentence -> 0; else max entailment over supporting
    sentences; no supporting sentence -> 0."""
    if any(t.argmax_label() == "contradiction" for t in per_sentence):
        return 0.0
    supporting = [t.entailment for t in per_sentence if t.argmax_label() == "entailment"]
    return max(supporting) if supporting else 0.0


def aggregate_average(per_sentence: Sequence[EntailmentTriple]) -> float:
    """Mean entailment over sentences whose argmax label is not neutral."""
    non_neutral = [t.entailment for t in per_sentence if t.argmax_label() != "neutral"]
    if not non_neutral:
        return 0.0
    return float(np.mean(non_neutral))


def score_document_entailment(claim: Claim, reference: str, nli: NliClient) -> float:
    if not reference:
        raise DataError("document entailment requires a non-empty reference")
    (triple,) = nli.entail([(reference, claim.text)])
    return triple.entailment


# ---------------------------------------------------------------------------
# Model-confidence prompting


@dataclass(frozen=True)
class PromptConfig:
    """The five prompt dimensions for model-confidence scoring."""

    include_reference: bool = True
    highlight_evidence: bool = True
    chain_of_thought: bool = True
    output_granularity: str = "scalar"  # or "boolean"
    consistency_samples: int = 1

    def __post_init__(self):
        if self.highlight_evidence and not self.include_reference:
            raise ConfigError("highlight_evidence requires include_reference")
        if self.output_granularity not in ("scalar", "boolean"):
            raise ConfigError(f"unknown granularity {self.output_granularity!r}")
        if self.consistency_samples < 1:
            raise ConfigError("consistency_samples must be >= 1")


@dataclass(frozen=True)
class ScorerSpec:
    """Which scoring function to run and where its backing service lives."""

    kind: str
    endpoint: Optional[str] = None
    model_id: Optional[str] = None
    prompt_config: Optional[PromptConfig] = None

    def __post_init__(self):
        if self.kind not in SCORER_KINDS:
            raise ConfigError(f"unknown scorer kind {self.kind!r}")
        entailment = self.kind.endswith("entailment")
        if entailment and not self.endpoint:
            raise ConfigError(f"{self.kind} requires an endpoint")
        if self.kind == "model_confidence" and not (
            self.endpoint and self.model_id and self.prompt_config
        ):
            raise ConfigError(
                "model_confidence requires endpoint, model_id and prompt_config"
            )

    @property
    def scorer_id(self) -> str:
        if self.kind == "model_confidence":
            return f"{self.kind}:{self.model_id}"
        return self.kind


def build_confidence_prompt(
    cfg: PromptConfig, query: str, reference: str, claim: Claim
) -> str:
    """Render the confidence-scoring prompt for one claim.

    The prompt is assembled from fixed blocks so every config renders
    deterministically: the reference block, the highlighted-evidence key, the
    reasoning key, and the score-vs-boolean answer schema each toggle with
    their dimension.
    """
    scalar = cfg.output_granularity == "scalar"
    noun = "confidence score" if scalar else "label"
    lines = [
        f"You are an AI assistant tasked with assigning a {noun} to a claim based on its factuality.",
        "",
        "Instructions:",
        "1. You are given:",
    ]
    if cfg.include_reference:
        lines.append("- A reference text for the query.")
    lines += ["- A query.", "- A claim made in response to the query."]
    if scalar:
        lines += [
            "2. Rate the factuality of the claim with a numeric score in [0.0, 1.0]:",
            "- 0.0 -> The claim is false, contradicts the reference, or is not well-supported.",
            "- 1.0 -> The claim is factual and well-supported by the reference, or can be logically deduced from the reference and query.",
        ]
    else:
        lines += [
            "2. Rate the factuality of the claim as a boolean:",
            "- true -> The claim is factual and well-supported by the reference, or can be logically deduced from the reference and query.",
            "- false -> The claim is false, contradicts the reference, or is not well-supported.",
        ]
    provide = ["3. Provide:", f"- A {'score' if scalar else 'boolean answer'}."]
    if cfg.highlight_evidence:
        provide.append(
            "- The parts of the reference text that directly support your scoring decision."
        )
    if cfg.chain_of_thought:
        provide.append("- A reasoning statement describing your rationale.")
    lines += provide
    if scalar:
        lines.append(
            "4. You must assign a numeric score. Never return null, None, or a non-numeric value."
        )
    else:
        lines.append(
            "4. You must assign either true or false. Never return null or None."
        )
    lines += [
        "",
        "Important: A claim should be considered true"
        + (" (score 1.0)" if scalar else "")
        + " if it is either:",
        "- Directly stated in the reference text, OR",
        "- Can be logically deduced or calculated from the information provided in the reference text and query.",
        "For mathematical claims, perform the necessary calculations based on the given data.",
        "Output Requirements:",
        "- Output ONLY a single VALID JSON5 object with EXACTLY these keys:",
        "{",
    ]
    schema = []
    if cfg.highlight_evidence:
        schema.append(
            '  "highlighted_text": "Part(s) of the reference text that support the decision.",'
        )
    if cfg.chain_of_thought:
        schema.append('  "reasoning": "A reasoning statement describing your rationale.",')
    schema.append('  "score": 0.0-1.0' if scalar else '  "answer": (true|false)')
    lines += schema
    lines += [
        "}",
        "",
        "JSON5 Rules:",
        '- Use DOUBLE QUOTES (") for all keys and all string values.',
        '- Escape double quotes inside string values as \\".',
        "- Escape backslashes as \\\\.",
        "- No trailing commas in objects or arrays.",
        "- Follow the schema exactly.",
        "",
        "Do NOT include:",
        "- Any text, explanations, comments, or formatting outside of the JSON5.",
        "",
        "Input:",
    ]
    if cfg.include_reference:
        lines.append("Reference Text: {reference}")
    lines += ["Query: {query}", "Claim: {claim}", "", "Reiteration of Instructions:"]
    keys = [k.split(":")[0].strip() for k in schema]
    answer_kind = "a numeric score" if scalar else "true or false"
    lines += [
        f"Return a single JSON5 object with {', '.join(keys)}. "
        f"Assign {answer_kind}—never null/None.",
        "",
        "Output:",
    ]
    template = "\n".join(lines) + "\n"
    values = {"query": query, "claim": claim.text}
    if cfg.include_reference:
        values["reference"] = reference
    return render_prompt(template, **values)


@dataclass
class ConfidenceParse:
    """Score plus whether the raw reply actually parsed (failures score 0)."""

    score: float
    parsed: bool


def parse_confidence_response(raw: str, granularity: str = "scalar") -> ConfidenceParse:
    """Extract the score from a model reply; fallback to 0.0 on any failure.

    Scalar scores clamp to [0, 1]; boolean replies map true -> 1.0,
    false -> 0.0. Unparseable replies never raise: the claim simply scores 0
    (and gets filtered), keeping long runs alive.
    """
    doc = extract_json(raw)
    if not isinstance(doc, dict):
        return ConfidenceParse(0.0, parsed=False)
    if granularity == "scalar":
        value = doc.get("score")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return ConfidenceParse(0.0, parsed=False)
        return ConfidenceParse(min(1.0, max(0.0, float(value))), parsed=True)
    value = doc.get("answer")
    if not isinstance(value, bool):
        return ConfidenceParse(0.0, parsed=False)
    return ConfidenceParse(1.0 if value else 0.0, parsed=True)


def consistency_average(scores: Sequence[float], cfg: PromptConfig) -> float:
    if len(scores) != cfg.consistency_samples:
        raise ConfigError(
            f"expected {cfg.consistency_samples} samples, got {len(scores)}"
        )
    return float(np.mean(scores))


# ---------------------------------------------------------------------------
# Synthetic scoring


@dataclass(frozen=True)
class SyntheticScoreParams:
    """Truncated-Gaussian score model: one mean per label, shared sigma."""

    mu_factual: float = 0.8
    mu_nonfactual: float = 0.3
    sigma: float = 0.15


def truncated_normal(rng: np.random.Generator, mu: float, sigma: float, size: int):
    """Draw from N(mu, sigma) truncated to [0, 1]; sigma = 0 degenerates to mu."""
    if sigma == 0.0:
        return np.full(size, float(mu))
    a, b = (0.0 - mu) / sigma, (1.0 - mu) / sigma
    return stats.truncnorm.rvs(a, b, loc=mu, scale=sigma, size=size, random_state=rng)


def synthetic_score(claim: Claim, params: SyntheticScoreParams, seed: int) -> float:
    """Label-conditioned truncated-Gaussian draw; deterministic under seed."""
    if claim.label is None:
        raise MissingLabelError(claim.id)
    mu = params.mu_factual if claim.label else params.mu_nonfactual
    rng = np.random.default_rng(seed)
    return float(truncated_normal(rng, mu, params.sigma, 1)[0])


# ---------------------------------------------------------------------------
# Scorer objects (stateless after construction; parallel-safe)


class DocumentEntailmentScorer:
    kind = "document_entailment"

    def __init__(self, nli: NliClient):
        self.nli = nli

    def score(self, claim: Claim, record: QueryRecord) -> float:
        return score_document_entailment(claim, record.reference, self.nli)


class SentenceEntailmentScorer:
    """Sentence-level entailment with a pluggable aggregation rule."""

    def __init__(self, nli: NliClient, conservative: bool):
        self.nli = nli
        self.conservative = conservative
        self.kind = "conservative_entailment" if conservative else "average_entailment"

    def score(self, claim: Claim, record: QueryRecord) -> float:
        sentences = split_sentences(record.reference)
        if not sentences:
            return 0.0
        triples = self.nli.entail([(s, claim.text) for s in sentences])
        agg = aggregate_conservative if self.conservative else aggregate_average
        return agg(triples)


class ConfidenceScorer:
    """LLM model-confidence scorer; chat client injected by the pipeline."""

    kind = "model_confidence"

    def __init__(self, chat, model_id: str, cfg: PromptConfig, temperature: Optional[float] = None):
        self.chat = chat
        self.model_id = model_id
        self.cfg = cfg
        # Multi-sample consistency needs sampling noise; single-shot runs greedy.
        self.temperature = (
            temperature
            if temperature is not None
            else (1.0 if cfg.consistency_samples > 1 else 0.0)
        )
        self.parse_failures = 0

    def score(self, claim: Claim, record: QueryRecord) -> float:
        prompt = build_confidence_prompt(self.cfg, record.query, record.reference, claim)
        replies = self.chat.complete(
            model=self.model_id,
            prompt=prompt,
            temperature=self.temperature,
            n=self.cfg.consistency_samples,
        )
        scores = []
        for reply in replies:
            result = parse_confidence_response(reply, self.cfg.output_granularity)
            if not result.parsed:
                self.parse_failures += 1
            scores.append(result.score)
        return consistency_average(scores, self.cfg)


class SyntheticScorer:
    """Deterministic per-claim scorer for simulation; seed mixes in claim id."""

    kind = "synthetic"

    def __init__(self, params: SyntheticScoreParams, seed: int = 0):
        self.params = params
        self.seed = seed

    def score(self, claim: Claim, record: QueryRecord) -> float:
        # Stable across processes (unlike hash()), so cached runs reproduce.
        digest = hashlib.blake2b(claim.id.encode("utf-8"), digest_size=4).digest()
        sub = np.random.default_rng([self.seed, int.from_bytes(digest, "big")])
        if claim.label is None:
            raise MissingLabelError(claim.id)
        mu = self.params.mu_factual if claim.label else self.params.mu_nonfactual
        return float(truncated_normal(sub, mu, self.params.sigma, 1)[0])
