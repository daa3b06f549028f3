"""End-to-end orchestration: corpus in, reports out.

Stages (generate, parse, label, score, split, calibrate, filter, merge,
evaluate) each persist their intermediates to the cache directory as JSONL,
so any stage can be re-run cheaply and a finished run is a no-op. Failures
are isolated per record; the run continues and the report carries failure
counts.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import metrics as metrics_mod
from .conformal import calibrate, candidate_threshold, filter_claims
from .costs import ModelCostSpec, estimate_flops
from .errors import ConfigError, ConfilterError
from .jsonish import extract_json
from .llm import ChatClient, PromptCache
from .records import (
    Claim,
    GeneratedOutput,
    QueryRecord,
    ScoredClaimSet,
    load_claimsets,
    load_records,
    output_to_doc,
    read_jsonl,
    save_claimsets,
    save_records,
    split_calibration_test,
    validate_corpus,
    write_jsonl,
)
from .nli import NliClient
from .robustness import DistractorConfig, draw_labeled_sets
from .scoring import (
    ConfidenceScorer,
    DocumentEntailmentScorer,
    PromptConfig,
    ScorerSpec,
    SentenceEntailmentScorer,
    SyntheticScoreParams,
    SyntheticScorer,
    load_prompt,
    render_prompt,
)

MERGER_PROMPTS = {
    "factscore": "merger_factscore",
    "synthetic": "merger_factscore",
    "nq": "merger_nq",
    "math": "merger_math",
}


@dataclass
class RunConfig:
    """Everything one experiment needs; loadable from a key = value file."""

    corpus_dir: str
    cache_dir: str
    scorer: ScorerSpec
    alphas: tuple = (0.1,)
    seed: int = 0
    calibration_size: int = 50
    concurrency: int = 8
    generator_endpoint: Optional[str] = None
    generator_model: Optional[str] = None
    judge_endpoint: Optional[str] = None
    judge_model: Optional[str] = None
    use_ground_truth: bool = False
    with_reference: bool = True
    merge: bool = False
    distractor: Optional[DistractorConfig] = None

    def __post_init__(self):
        for a in self.alphas:
            if not 0.0 < a < 1.0:
                raise ConfigError(f"alpha {a} outside (0, 1)")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")


def parse_config_text(text: str) -> dict:
    """Parse the documented ``key = value`` config format ('#' comments)."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    return values


def _as_bool(raw: str) -> bool:
    return raw.lower() in ("1", "true", "yes", "on")


def load_run_config(path, overrides: Optional[dict] = None) -> RunConfig:
    values = parse_config_text(Path(path).read_text(encoding="utf-8"))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    prompt_cfg = None
    if any(k.startswith("prompt.") for k in values):
        prompt_cfg = PromptConfig(
            include_reference=_as_bool(values.get("prompt.include_reference", "true")),
            highlight_evidence=_as_bool(values.get("prompt.highlight_evidence", "true")),
            chain_of_thought=_as_bool(values.get("prompt.chain_of_thought", "true")),
            output_granularity=values.get("prompt.output_granularity", "scalar"),
            consistency_samples=int(values.get("prompt.consistency_samples", "1")),
        )
    scorer = ScorerSpec(
        kind=values.get("scorer.kind", "synthetic"),
        endpoint=values.get("scorer.endpoint"),
        model_id=values.get("scorer.model"),
        prompt_config=prompt_cfg,
    )
    distractor = None
    if "distractor.test_rate" in values or "distractor.calibration_rate" in values:
        distractor = DistractorConfig(
            test_rate=float(values.get("distractor.test_rate", "0")),
            calibration_rate=float(values.get("distractor.calibration_rate", "0")),
            max_retries=int(values.get("distractor.max_retries", "3")),
            mode=values.get("distractor.mode", "synthetic"),
        )
    return RunConfig(
        corpus_dir=values["corpus"],
        cache_dir=values.get("cache_dir", "cache"),
        scorer=scorer,
        alphas=tuple(float(a) for a in values.get("alphas", "0.1").split(",")),
        seed=int(values.get("seed", "0")),
        calibration_size=int(values.get("calibration_size", "50")),
        concurrency=int(values.get("concurrency", "8")),
        generator_endpoint=values.get("generator.endpoint"),
        generator_model=values.get("generator.model"),
        judge_endpoint=values.get("judge.endpoint"),
        judge_model=values.get("judge.model"),
        use_ground_truth=_as_bool(values.get("use_ground_truth", "false")),
        with_reference=_as_bool(values.get("with_reference", "true")),
        merge=_as_bool(values.get("merge", "false")),
        distractor=distractor,
    )


# ---------------------------------------------------------------------------
# LLM-backed stages


def generate_responses(
    records: Sequence[QueryRecord],
    chat: ChatClient,
    model_id: str,
    with_reference: bool = True,
    concurrency: int = 8,
):
    """One GeneratedOutput per record; failed records land in the failure list."""
    name = "generator_with_reference" if with_reference else "generator_without_reference"
    template = load_prompt(name)

    def one(rec: QueryRecord):
        values = {"query": rec.query}
        if with_reference:
            values["reference"] = rec.reference
        prompt = render_prompt(template, **values)
        (reply,) = chat.complete(model=model_id, prompt=prompt, role="generator")
        doc = extract_json(reply)
        text = doc.get("response", "") if isinstance(doc, dict) else ""
        return GeneratedOutput(
            record_id=rec.id, text=text, generator_id=model_id, with_reference=with_reference
        )

    return _fan_out(records, one, key=lambda r: r.id, concurrency=concurrency)


def parse_claims(output: GeneratedOutput, chat: ChatClient, model_id: str) -> list:
    """Decompose one output into atomic claims, in document order."""
    if not output.text.strip():
        return []
    prompt = render_prompt(load_prompt("parser"), input=output.text)
    (reply,) = chat.complete(model=model_id, prompt=prompt, role="parser")
    doc = extract_json(reply, container="array")
    if not isinstance(doc, list):
        raise ConfilterError(f"unparseable parser reply for {output.record_id}")
    claims = []
    for i, item in enumerate(doc):
        text = item.get("subclaim") if isinstance(item, dict) else None
        if text:
            claims.append(Claim(id=f"{output.record_id}-c{i}", text=text))
    return claims


def label_claims(
    claims: Sequence[Claim],
    record: QueryRecord,
    chat: ChatClient,
    model_id: str,
    use_ground_truth: bool = False,
) -> list:
    """Judge each claim's factuality; unparseable replies label false (flagged
    via origin-preserving replacement, counted by the caller)."""
    with_gt = use_ground_truth and record.ground_truth is not None
    template = load_prompt("labeler_with_answer" if with_gt else "labeler")
    labeled = []
    for claim in claims:
        values = {"reference": record.reference, "query": record.query, "claim": claim.text}
        if with_gt:
            values["answer"] = record.ground_truth
        prompt = render_prompt(template, **values)
        (reply,) = chat.complete(model=model_id, prompt=prompt, role="labeler")
        doc = extract_json(reply)
        answer = doc.get("answer") if isinstance(doc, dict) else None
        # Ambiguous or unparseable verdicts default to non-factual.
        label = answer if isinstance(answer, bool) else False
        labeled.append(Claim(id=claim.id, text=claim.text, label=label, origin=claim.origin))
    return labeled


def merge_claims(
    retained: Sequence[Claim], record: QueryRecord, chat: ChatClient, model_id: str
) -> str:
    """Merge retained claims into prose; empty input short-circuits to ''."""
    if not retained:
        return ""
    template = load_prompt(MERGER_PROMPTS[record.dataset_tag])
    facts = json.dumps([c.text for c in retained], ensure_ascii=False)
    prompt = render_prompt(template, claims=facts, query=record.query)
    (reply,) = chat.complete(model=model_id, prompt=prompt, role="merger")
    return reply.strip()


def _fan_out(items, fn, key, concurrency):
    """Run fn over items in a bounded pool; returns (results, failures) with
    input order preserved and per-item failures isolated."""
    results = []
    failures = []
    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        futures = [(item, pool.submit(fn, item)) for item in items]
        for item, future in futures:
            try:
                results.append(future.result())
            except ConfilterError as exc:
                failures.append({"id": key(item), "error": str(exc)})
    return results, failures


# ---------------------------------------------------------------------------
# Scorer construction


def build_scorer(spec: ScorerSpec, cache_dir=None, seed: int = 0):
    if spec.kind == "synthetic":
        return SyntheticScorer(SyntheticScoreParams(), seed=seed)
    if spec.kind == "document_entailment":
        return DocumentEntailmentScorer(NliClient(spec.endpoint))
    if spec.kind == "conservative_entailment":
        return SentenceEntailmentScorer(NliClient(spec.endpoint), conservative=True)
    if spec.kind == "average_entailment":
        return SentenceEntailmentScorer(NliClient(spec.endpoint), conservative=False)
    cache = PromptCache(Path(cache_dir) / "llm") if cache_dir else None
    chat = ChatClient(spec.endpoint, cache=cache)
    return ConfidenceScorer(chat, spec.model_id, spec.prompt_config)


def score_claimsets(
    records: Sequence[QueryRecord],
    claims_by_record: dict,
    scorer,
    scorer_id: str,
    concurrency: int = 8,
):
    """Score every claim of every record with one scorer."""

    def one(rec: QueryRecord):
        claims = claims_by_record.get(rec.id, [])
        scored = [(c, scorer.score(c, rec)) for c in claims]
        return ScoredClaimSet(record_id=rec.id, claims=scored, scorer_id=scorer_id)

    return _fan_out(records, one, key=lambda r: r.id, concurrency=concurrency)


# ---------------------------------------------------------------------------
# Synthetic corpus (offline fixture generator)


def make_synthetic_corpus(
    out_dir,
    n_records: int = 100,
    seed: int = 0,
    claims_min: int = 3,
    claims_max: int = 10,
    p_nonfactual: float = 0.3,
) -> None:
    """Write a labeled synthetic corpus (records.jsonl + claims.jsonl)."""
    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    records = [
        QueryRecord(
            id=f"syn-{i}",
            query=f"synthetic query {i}",
            reference=f"synthetic reference {i}",
            dataset_tag="synthetic",
        )
        for i in range(n_records)
    ]
    save_records(out_dir / "records.jsonl", records)
    sets = draw_labeled_sets(
        rng,
        n_records,
        claims_min,
        claims_max,
        p_nonfactual,
        SyntheticScoreParams(),
        id_prefix="syn-",
    )
    docs = []
    for rec, cs in zip(records, sets):
        docs.append(
            {
                "record_id": rec.id,
                "claims": [
                    {"id": c.id, "text": c.text, "label": c.label, "origin": c.origin}
                    for c, _ in cs.claims
                ],
            }
        )
    write_jsonl(out_dir / "claims.jsonl", docs)


def load_claims_file(path) -> dict:
    """Load claims.jsonl into {record_id: [Claim, ...]}."""
    by_record = {}
    for doc in read_jsonl(path):
        claims = [
            Claim(
                id=c["id"],
                text=c["text"],
                label=c.get("label"),
                origin=c.get("origin", "generated"),
            )
            for c in doc["claims"]
        ]
        by_record[doc["record_id"]] = claims
    return by_record


# ---------------------------------------------------------------------------
# Experiment driver


def run_experiment(cfg: RunConfig, nli_transport=None) -> dict:
    """Execute the full pipeline and emit report.csv / report.json.

    Re-running with the same config and seed reuses every cached stage and
    reproduces identical reports. ``nli_transport`` lets tests mount an
    in-process entailment service.
    """
    corpus_dir = Path(cfg.corpus_dir)
    cache_dir = Path(cfg.cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)

    records = load_records(corpus_dir / "records.jsonl")
    violations = validate_corpus(records)
    if violations:
        raise ConfigError(f"corpus invalid: {violations[:5]}")
    failures = {}

    scores_path = cache_dir / "scores.jsonl"
    if scores_path.exists():
        scored_sets = load_claimsets(scores_path)
    else:
        scored_sets, failures = _produce_scores(cfg, records, cache_dir, nli_transport)
        save_claimsets(scores_path, scored_sets)

    by_id = {cs.record_id: cs for cs in scored_sets}
    usable = [r for r in records if r.id in by_id]
    calib_recs, test_recs = split_calibration_test(usable, cfg.calibration_size, cfg.seed)
    calib_sets = [by_id[r.id] for r in calib_recs]
    test_sets = [by_id[r.id] for r in test_recs]

    candidates = [candidate_threshold(cs) for cs in calib_sets]
    rows = []
    thresholds = {}
    for alpha in cfg.alphas:
        tau = calibrate(candidates, alpha)
        thresholds[alpha] = tau
        (cache_dir / f"threshold_alpha{alpha}.json").write_text(
            tau.to_json(scorer_id=cfg.scorer.scorer_id)
        )
        filtered = [filter_claims(cs, tau) for cs in test_sets]
        report = metrics_mod.compute_report(alpha, filtered, test_sets)
        row = report.row()
        row.update(
            scorer_id=cfg.scorer.scorer_id,
            experiment="main",
            threshold=tau.value,
        )
        rows.append(row)

    csv_text = metrics_mod.reports_to_csv(rows)
    (cache_dir / "report.csv").write_text(csv_text, encoding="utf-8")
    provenance = {
        "seed": cfg.seed,
        "calibration_size": cfg.calibration_size,
        "scorer_id": cfg.scorer.scorer_id,
        "alphas": list(cfg.alphas),
        "n_records": len(records),
        "failures": failures,
        "thresholds": {str(a): t.value for a, t in thresholds.items()},
    }
    (cache_dir / "report.json").write_text(
        metrics_mod.reports_to_json(rows, provenance), encoding="utf-8"
    )
    return {"rows": rows, "provenance": provenance, "cache_dir": str(cache_dir)}


def _produce_scores(cfg: RunConfig, records, cache_dir, nli_transport=None):
    """Obtain labeled, scored claim sets, running only the stages the corpus
    is missing (claims.jsonl with labels short-circuits generation)."""
    corpus_dir = Path(cfg.corpus_dir)
    all_failures = {}
    claims_path = corpus_dir / "claims.jsonl"
    if claims_path.exists():
        claims_by_record = load_claims_file(claims_path)
    else:
        if not (cfg.generator_endpoint and cfg.generator_model and cfg.judge_endpoint):
            raise ConfigError(
                "corpus has no claims.jsonl and no generator/judge endpoints configured"
            )
        cache = PromptCache(cache_dir / "llm")
        gen_chat = ChatClient(cfg.generator_endpoint, cache=cache)
        judge_chat = ChatClient(cfg.judge_endpoint, cache=cache)
        outputs, gen_fail = generate_responses(
            records, gen_chat, cfg.generator_model, cfg.with_reference, cfg.concurrency
        )
        all_failures["generate"] = gen_fail
        write_jsonl(cache_dir / "outputs.jsonl", (output_to_doc(o) for o in outputs))
        rec_by_id = {r.id: r for r in records}
        claims_by_record = {}
        parse_fail = []
        for out in outputs:
            try:
                claims = parse_claims(out, judge_chat, cfg.judge_model)
                claims_by_record[out.record_id] = label_claims(
                    claims, rec_by_id[out.record_id], judge_chat, cfg.judge_model,
                    cfg.use_ground_truth,
                )
            except ConfilterError as exc:
                parse_fail.append({"id": out.record_id, "error": str(exc)})
        all_failures["parse_label"] = parse_fail

    scorer = _build_run_scorer(cfg, cache_dir, nli_transport)
    scored_sets, score_fail = score_claimsets(
        records, claims_by_record, scorer, cfg.scorer.scorer_id, cfg.concurrency
    )
    all_failures["score"] = score_fail
    return scored_sets, all_failures


def _build_run_scorer(cfg: RunConfig, cache_dir, nli_transport=None):
    spec = cfg.scorer
    if spec.kind.endswith("entailment") and nli_transport is not None:
        nli = NliClient(spec.endpoint, transport=nli_transport)
        if spec.kind == "document_entailment":
            return DocumentEntailmentScorer(nli)
        return SentenceEntailmentScorer(
            nli, conservative=(spec.kind == "conservative_entailment")
        )
    return build_scorer(spec, cache_dir=cache_dir, seed=cfg.seed)


def run_flops_summary(chat_clients: dict, model_params: dict) -> dict:
    """Total FLOPs over logged token counts, per role."""
    out = {}
    for role, client in chat_clients.items():
        spec = ModelCostSpec(
            model_id=role,
            active_params=model_params.get(role, 0.0),
            prompt_tokens=client.prompt_tokens,
            generated_tokens=client.completion_tokens,
        )
        out[role] = estimate_flops(spec)
    return out
