"""Command-line interface.

One subcommand per pipeline stage plus experiment drivers. Stage commands
read and write JSONL artifacts so a run can be resumed or inspected at any
point; ``evaluate`` runs the whole pipeline from a config file.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import metrics as metrics_mod
from .conformal import calibrate as calibrate_fn
from .conformal import candidate_threshold, filter_claims
from .costs import ACTIVE_PARAMS, ModelCostSpec, estimate_flops, published_flops
from .errors import ConfilterError
from .llm import ChatClient, PromptCache
from .pipeline import (
    RunConfig,
    generate_responses,
    label_claims,
    load_claims_file,
    load_run_config,
    make_synthetic_corpus,
    merge_claims,
    parse_claims,
    run_experiment,
    score_claimsets,
)
from .pipeline import build_scorer
from .records import (
    Threshold,
    load_claimsets,
    load_records,
    output_from_doc,
    output_to_doc,
    read_jsonl,
    save_claimsets,
    validate_corpus,
    write_jsonl,
)
from .robustness import (
    SimulationConfig,
    simulate as simulate_fn,
    simulate_distraction,
    simulate_shift,
)
from .scoring import ScorerSpec

NLI_URL_ENV = "CONFILTER_NLI_URL"


@click.group()
def main():
    """Conformal factuality filtering for retrieval-augmented LLM outputs."""


def _fail(exc: Exception):
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


def _load_config(config, **overrides):
    try:
        return load_run_config(config, overrides)
    except (ConfilterError, OSError, KeyError, ValueError) as exc:
        _fail(exc)


@main.command()
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
def validate(corpus_dir):
    """Check corpus invariants; non-zero exit on any violation."""
    try:
        records = load_records(Path(corpus_dir) / "records.jsonl")
    except ConfilterError as exc:
        _fail(exc)
    violations = validate_corpus(records)
    for v in violations:
        click.echo(f"{v.record_id or '<missing id>'}: {v.rule}")
    if violations:
        sys.exit(1)
    click.echo(f"ok: {len(records)} records")


@main.command()
@click.option("--config", required=True, type=click.Path(exists=True))
def generate(config):
    """Generate responses for every record (writes outputs.jsonl)."""
    cfg = _load_config(config)
    records = load_records(Path(cfg.corpus_dir) / "records.jsonl")
    chat = ChatClient(cfg.generator_endpoint, cache=PromptCache(Path(cfg.cache_dir) / "llm"))
    outputs, failures = generate_responses(
        records, chat, cfg.generator_model, cfg.with_reference, cfg.concurrency
    )
    write_jsonl(Path(cfg.cache_dir) / "outputs.jsonl", (output_to_doc(o) for o in outputs))
    click.echo(f"generated {len(outputs)} outputs, {len(failures)} failures")


@main.command()
@click.option("--config", required=True, type=click.Path(exists=True))
def parse(config):
    """Decompose generated outputs into claims (writes claims.jsonl)."""
    cfg = _load_config(config)
    chat = ChatClient(cfg.judge_endpoint, cache=PromptCache(Path(cfg.cache_dir) / "llm"))
    outputs = [output_from_doc(d) for d in read_jsonl(Path(cfg.cache_dir) / "outputs.jsonl")]
    docs = []
    failures = 0
    for out in outputs:
        try:
            claims = parse_claims(out, chat, cfg.judge_model)
        except ConfilterError:
            failures += 1
            continue
        docs.append(
            {
                "record_id": out.record_id,
                "claims": [{"id": c.id, "text": c.text, "label": c.label} for c in claims],
            }
        )
    write_jsonl(Path(cfg.cache_dir) / "claims.jsonl", docs)
    click.echo(f"parsed {len(docs)} outputs, {failures} failures")


@main.command()
@click.option("--config", required=True, type=click.Path(exists=True))
def label(config):
    """Label parsed claims factual/non-factual (rewrites claims.jsonl)."""
    cfg = _load_config(config)
    chat = ChatClient(cfg.judge_endpoint, cache=PromptCache(Path(cfg.cache_dir) / "llm"))
    records = {r.id: r for r in load_records(Path(cfg.corpus_dir) / "records.jsonl")}
    claims_by_record = load_claims_file(Path(cfg.cache_dir) / "claims.jsonl")
    docs = []
    for record_id, claims in claims_by_record.items():
        labeled = label_claims(
            claims, records[record_id], chat, cfg.judge_model, cfg.use_ground_truth
        )
        docs.append(
            {
                "record_id": record_id,
                "claims": [
                    {"id": c.id, "text": c.text, "label": c.label, "origin": c.origin}
                    for c in labeled
                ],
            }
        )
    write_jsonl(Path(cfg.cache_dir) / "claims.jsonl", docs)
    click.echo(f"labeled {len(docs)} claim sets")


@main.command()
@click.option("--config", required=True, type=click.Path(exists=True))
@click.option("--scorer", default=None, help="Override scorer kind from the config.")
@click.option("--seed", default=None, type=int)
@click.option("--cache-dir", default=None, type=click.Path())
def score(config, scorer, seed, cache_dir):
    """Score all claims with the configured scorer (writes scores.jsonl)."""
    overrides = {}
    if scorer:
        overrides["scorer.kind"] = scorer
    if seed is not None:
        overrides["seed"] = str(seed)
    if cache_dir:
        overrides["cache_dir"] = cache_dir
    cfg = _load_config(config, **overrides)
    records = load_records(Path(cfg.corpus_dir) / "records.jsonl")
    claims_path = Path(cfg.corpus_dir) / "claims.jsonl"
    if not claims_path.exists():
        claims_path = Path(cfg.cache_dir) / "claims.jsonl"
    claims_by_record = load_claims_file(claims_path)
    spec = cfg.scorer
    if spec.kind.endswith("entailment") and not spec.endpoint:
        spec = ScorerSpec(
            kind=spec.kind,
            endpoint=os.environ.get(NLI_URL_ENV),
            model_id=spec.model_id,
            prompt_config=spec.prompt_config,
        )
    obj = build_scorer(spec, cache_dir=cfg.cache_dir, seed=cfg.seed)
    sets, failures = score_claimsets(
        records, claims_by_record, obj, spec.scorer_id, cfg.concurrency
    )
    save_claimsets(Path(cfg.cache_dir) / "scores.jsonl", sets)
    click.echo(f"scored {len(sets)} claim sets, {len(failures)} failures")


@main.command()
@click.option("--scores", required=True, type=click.Path(exists=True))
@click.option("--alpha", required=True, type=float)
@click.option("--calibration-size", "calibration_size", required=True, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--out", required=True, type=click.Path())
def calibrate(scores, alpha, calibration_size, seed, out):
    """Calibrate a threshold on a random calibration split of the scores."""
    from .records import split_calibration_test

    sets = load_claimsets(scores)
    try:
        calib, _ = split_calibration_test(sets, calibration_size, seed)
        candidates = [candidate_threshold(cs) for cs in calib]
        tau = calibrate_fn(candidates, alpha)
    except ConfilterError as exc:
        _fail(exc)
    scorer_ids = {cs.scorer_id for cs in sets}
    Path(out).write_text(tau.to_json(scorer_id=",".join(sorted(scorer_ids))))
    click.echo(f"threshold {tau.value:.6g} (alpha={alpha}, n={tau.calibration_size})")


@main.command("filter")
@click.option("--scores", required=True, type=click.Path(exists=True))
@click.option("--threshold", "threshold_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def filter_cmd(scores, threshold_path, out):
    """Apply a calibrated threshold to scored claim sets."""
    tau = Threshold.from_json(Path(threshold_path).read_text())
    sets = load_claimsets(scores)
    docs = []
    for cs in sets:
        filtered = filter_claims(cs, tau)
        docs.append(
            {
                "record_id": filtered.record_id,
                "retained": [
                    {"id": c.id, "text": c.text, "label": c.label}
                    for c in filtered.retained_claims
                ],
            }
        )
    write_jsonl(out, docs)
    kept = sum(len(d["retained"]) for d in docs)
    click.echo(f"filtered {len(docs)} outputs, retained {kept} claims")


@main.command()
@click.option("--config", required=True, type=click.Path(exists=True))
@click.option("--filtered", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def merge(config, filtered, out):
    """Merge retained claims into fluent prose per record."""
    from .records import record_from_doc  # local import keeps the group light

    cfg = _load_config(config)
    chat = ChatClient(cfg.judge_endpoint, cache=PromptCache(Path(cfg.cache_dir) / "llm"))
    records = {r.id: r for r in load_records(Path(cfg.corpus_dir) / "records.jsonl")}
    docs = []
    for doc in read_jsonl(filtered):
        from .records import Claim

        retained = [Claim(id=c["id"], text=c["text"], label=c.get("label")) for c in doc["retained"]]
        record = records[doc["record_id"]]
        text = merge_claims(retained, record, chat, cfg.judge_model)
        docs.append({"record_id": doc["record_id"], "merged_text": text})
    write_jsonl(out, docs)
    click.echo(f"merged {len(docs)} outputs")


@main.command()
@click.option("--config", required=True, type=click.Path(exists=True))
@click.option("--seed", default=None, type=int)
@click.option("--alpha", "alphas", multiple=True, type=float)
@click.option("--cache-dir", default=None, type=click.Path())
def evaluate(config, seed, alphas, cache_dir):
    """Run the full pipeline and write report.csv / report.json."""
    overrides = {}
    if seed is not None:
        overrides["seed"] = str(seed)
    if alphas:
        overrides["alphas"] = ",".join(str(a) for a in alphas)
    if cache_dir:
        overrides["cache_dir"] = cache_dir
    cfg = _load_config(config, **overrides)
    try:
        result = run_experiment(cfg)
    except ConfilterError as exc:
        _fail(exc)
    for row in result["rows"]:
        click.echo(
            f"alpha={row['alpha']}: ef={row['ef']:.4f} power={row['power']:.4f} "
            f"nr={row['nr']:.4f}"
        )
    click.echo(f"reports in {result['cache_dir']}")


@main.command()
@click.option("--mode", type=click.Choice(["shift", "distraction"]), required=True)
@click.option("--alpha", "alphas", multiple=True, type=float, default=(0.1,))
@click.option("--trials", default=100, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--shift", default=0.2, type=float, help="Non-factual score shift (shift mode).")
@click.option("--calib-rate", default=0.0, type=float)
@click.option("--test-rate", default=0.25, type=float)
def robustness(mode, alphas, trials, seed, shift, calib_rate, test_rate):
    """Stress the guarantee under calibration shift or distractor injection."""
    cfg = SimulationConfig(n_trials=trials, alphas=tuple(alphas), seed=seed)
    if mode == "shift":
        results = simulate_shift(cfg, shift)
        for alpha, pair in results.items():
            click.echo(
                f"alpha={alpha}: matched ef={pair['matched'].mean_ef:.4f} "
                f"external ef={pair['external'].mean_ef:.4f}"
            )
    else:
        results = simulate_distraction(cfg, calib_rate, test_rate)
        for alpha, stats in results.items():
            click.echo(
                f"alpha={alpha}: ef={stats.mean_ef:.4f} nr={stats.mean_nr:.4f} "
                f"power={stats.mean_power:.4f}"
            )


@main.command()
@click.option("--alpha", "alphas", multiple=True, type=float, default=(0.05, 0.1, 0.2))
@click.option("--trials", default=200, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--n-calibration", default=200, type=int)
@click.option("--n-test", default=500, type=int)
@click.option("--emit-corpus", default=None, type=click.Path(), help="Also write a synthetic corpus here.")
def simulate(alphas, trials, seed, n_calibration, n_test, emit_corpus):
    """Verify coverage on exchangeable synthetic data."""
    if emit_corpus:
        make_synthetic_corpus(emit_corpus, n_records=n_calibration + n_test, seed=seed)
        click.echo(f"wrote synthetic corpus to {emit_corpus}")
    cfg = SimulationConfig(
        n_calibration=n_calibration,
        n_test=n_test,
        n_trials=trials,
        alphas=tuple(alphas),
        seed=seed,
    )
    for alpha, stats in simulate_fn(cfg).items():
        click.echo(
            f"alpha={alpha}: mean ef={stats.mean_ef:.4f} (target >= {1 - alpha:.2f}), "
            f"nr={stats.mean_nr:.4f}, power={stats.mean_power:.4f}"
        )


@main.command()
@click.option("--model", required=True)
@click.option("--prompt-tokens", default=1000, type=int)
@click.option("--generated-tokens", default=1000, type=int)
@click.option("--arch", type=click.Choice(["decoder", "encoder"]), default="decoder")
@click.option("--active-params", default=None, type=float)
def flops(model, prompt_tokens, generated_tokens, arch, active_params):
    """Estimate inference FLOPs for one model call."""
    params = active_params if active_params is not None else ACTIVE_PARAMS.get(model, 0.0)
    spec = ModelCostSpec(
        model_id=model,
        active_params=params,
        prompt_tokens=prompt_tokens,
        generated_tokens=generated_tokens,
    )
    try:
        value = estimate_flops(spec, arch)
    except ConfilterError as exc:
        _fail(exc)
    click.echo(f"{model}: {value:.3e} FLOPs ({arch}, {prompt_tokens}+{generated_tokens} tokens)")
    try:
        click.echo(f"published 2000-token figure: {published_flops(model):.3e}")
    except ConfilterError:
        pass


@main.command()
@click.option("--cache-dir", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
def report(cache_dir, fmt):
    """Print the run report from a cache directory."""
    path = Path(cache_dir) / f"report.{fmt}"
    if not path.exists():
        _fail(FileNotFoundError(f"no {path.name} in {cache_dir}; run evaluate first"))
    click.echo(path.read_text(encoding="utf-8"), nl=False)


if __name__ == "__main__":
    main()
