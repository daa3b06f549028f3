"""Scoring functions: aggregation rules, confidence prompts, synthetic scorer."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confilter.errors import ConfigError, MissingLabelError, TemplateError
from confilter.nli import EntailmentTriple
from confilter.records import Claim, QueryRecord
from confilter.scoring import (
    ConfidenceScorer,
    PromptConfig,
    ScorerSpec,
    SyntheticScoreParams,
    SyntheticScorer,
    aggregate_average,
    aggregate_conservative,
    build_confidence_prompt,
    consistency_average,
    load_prompt,
    parse_confidence_response,
    render_prompt,
    split_sentences,
    synthetic_score,
    truncated_normal,
)


def triple(e, n, c):
    return EntailmentTriple(entailment=e, neutral=n, contradiction=c)


CLAIM = Claim(id="c0", text="The tower is 300 meters tall.", label=True)
RECORD = QueryRecord(id="r0", query="How tall is the tower?", reference="The tower is 300 meters tall. It was built in 1889.")


class TestTemplates:
    def test_render_and_unresolved(self):
        assert render_prompt("Q: {query}", query="x") == "Q: x"
        with pytest.raises(TemplateError):
            render_prompt("Q: {query} {missing}", query="x")

    def test_all_prompt_files_load(self):
        names = [
            "generator_with_reference",
            "generator_without_reference",
            "parser",
            "labeler",
            "labeler_with_answer",
            "attacker",
            "confusee",
            "merger_factscore",
            "merger_nq",
            "merger_math",
            "correctness",
            "sufficient_correctness",
            "math_reference",
        ]
        for name in names:
            assert load_prompt(name).strip()


class TestSentenceAggregation:
    def test_split_sentences(self):
        parts = split_sentences("First one. Second one! Third? a")
        assert parts == ["First one.", "Second one!", "Third?"]

    def test_conservative_hand_rule(self):
        # One supporting, one neutral sentence: max entailment of supporters.
        assert aggregate_conservative([triple(0.8, 0.15, 0.05), triple(0.1, 0.85, 0.05)]) == 0.8

    def test_conservative_no_support(self):
        assert aggregate_conservative([triple(0.2, 0.7, 0.1), triple(0.3, 0.6, 0.1)]) == 0.0

    def test_conservative_contradiction_wins(self):
        assert aggregate_conservative([triple(0.9, 0.05, 0.05), triple(0.1, 0.2, 0.7)]) == 0.0

    def test_average_hand_rule(self):
        triples = [triple(0.8, 0.1, 0.1), triple(0.2, 0.7, 0.1), triple(0.6, 0.3, 0.1)]
        assert aggregate_average(triples) == pytest.approx(0.7)

    def test_average_contradiction_counts(self):
        # A contradiction-argmax sentence is non-neutral; its entailment mass averages in.
        assert aggregate_average([triple(0.1, 0.2, 0.7)]) == pytest.approx(0.1)

    def test_average_all_neutral(self):
        assert aggregate_average([triple(0.1, 0.8, 0.1)]) == 0.0


class TestPromptConfig:
    def test_highlight_requires_reference(self):
        with pytest.raises(ConfigError):
            PromptConfig(include_reference=False, highlight_evidence=True)

    def test_granularity_validated(self):
        with pytest.raises(ConfigError):
            PromptConfig(output_granularity="prose")

    def test_scorer_spec_validation(self):
        with pytest.raises(ConfigError):
            ScorerSpec(kind="document_entailment")
        with pytest.raises(ConfigError):
            ScorerSpec(kind="model_confidence", endpoint="http://x")
        spec = ScorerSpec(kind="synthetic")
        assert spec.scorer_id == "synthetic"

    def test_all_on_scalar_prompt(self):
        cfg = PromptConfig()
        text = build_confidence_prompt(cfg, RECORD.query, RECORD.reference, CLAIM)
        assert '"score": 0.0-1.0' in text
        assert "Reference Text:" in text
        assert RECORD.reference in text
        assert CLAIM.text in text
        assert "{reference}" not in text and "{query}" not in text

    def test_no_reference_prompt_omits_block(self):
        cfg = PromptConfig(include_reference=False, highlight_evidence=False)
        text = build_confidence_prompt(cfg, RECORD.query, RECORD.reference, CLAIM)
        assert "Reference Text:" not in text

    def test_boolean_prompt_schema(self):
        cfg = PromptConfig(output_granularity="boolean")
        text = build_confidence_prompt(cfg, RECORD.query, RECORD.reference, CLAIM)
        assert '"answer": (true|false)' in text
        assert '"score"' not in text


class TestConfidenceParsing:
    def test_scalar_happy_path(self):
        out = parse_confidence_response('{"score": 0.85, "reasoning": "ok"}')
        assert out.parsed and out.score == 0.85

    def test_scalar_clamps(self):
        assert parse_confidence_response('{"score": 1.7}').score == 1.0
        assert parse_confidence_response('{"score": -0.2}').score == 0.0

    def test_scalar_garbage_is_zero_unparsed(self):
        out = parse_confidence_response("no json here")
        assert not out.parsed and out.score == 0.0
        out = parse_confidence_response('{"score": null}')
        assert not out.parsed and out.score == 0.0

    def test_boolean(self):
        assert parse_confidence_response('{"answer": true}', "boolean").score == 1.0
        assert parse_confidence_response('{"answer": false}', "boolean").score == 0.0
        assert not parse_confidence_response('{"answer": "yes"}', "boolean").parsed

    def test_fenced_json5(self):
        raw = "```json5\n{score: 0.6, reasoning: 'fine',}\n```"
        out = parse_confidence_response(raw)
        assert out.parsed and out.score == 0.6

    def test_consistency_average(self):
        cfg = PromptConfig(consistency_samples=5)
        assert consistency_average([1, 0, 1, 1, 1], cfg) == pytest.approx(0.8)
        with pytest.raises(ConfigError):
            consistency_average([1.0], cfg)


class FakeChat:
    def __init__(self, replies):
        self.replies = replies
        self.calls = []

    def complete(self, model, prompt, temperature=0.0, n=1, role="generic"):
        self.calls.append({"temperature": temperature, "n": n})
        return self.replies[:n]


class TestConfidenceScorer:
    def test_single_sample_greedy(self):
        chat = FakeChat(['{"score": 0.9}'])
        scorer = ConfidenceScorer(chat, "m", PromptConfig())
        assert scorer.score(CLAIM, RECORD) == 0.9
        assert chat.calls[0]["temperature"] == 0.0

    def test_multi_sample_averages_and_samples(self):
        chat = FakeChat(['{"score": 1.0}'] * 5)
        scorer = ConfidenceScorer(chat, "m", PromptConfig(consistency_samples=5))
        assert scorer.score(CLAIM, RECORD) == 1.0
        assert chat.calls[0] == {"temperature": 1.0, "n": 5}

    def test_parse_failures_counted(self):
        chat = FakeChat(["garbage"])
        scorer = ConfidenceScorer(chat, "m", PromptConfig())
        assert scorer.score(CLAIM, RECORD) == 0.0
        assert scorer.parse_failures == 1


class TestSynthetic:
    def test_truncated_normal_in_range(self):
        from scipy import stats

        rng = np.random.default_rng(0)
        draws = truncated_normal(rng, 0.8, 0.15, 10_000)
        assert draws.min() >= 0.0 and draws.max() <= 1.0
        # Truncation at 1.0 pulls the mean below mu; compare to the analytic mean.
        a, b = (0.0 - 0.8) / 0.15, (1.0 - 0.8) / 0.15
        expected = stats.truncnorm.mean(a, b, loc=0.8, scale=0.15)
        assert abs(draws.mean() - expected) < 0.01

    def test_sigma_zero_degenerates(self):
        rng = np.random.default_rng(0)
        assert (truncated_normal(rng, 0.3, 0.0, 5) == 0.3).all()

    def test_synthetic_score_deterministic(self):
        claim = Claim(id="c", text="x", label=True)
        p = SyntheticScoreParams()
        assert synthetic_score(claim, p, 7) == synthetic_score(claim, p, 7)
        assert synthetic_score(claim, p, 7) != synthetic_score(claim, p, 8)

    def test_synthetic_score_requires_label(self):
        with pytest.raises(MissingLabelError):
            synthetic_score(Claim(id="c", text="x"), SyntheticScoreParams(), 0)

    def test_scorer_label_separation(self):
        scorer = SyntheticScorer(SyntheticScoreParams(), seed=0)
        rec = QueryRecord(id="r", query="q")
        factual = [
            scorer.score(Claim(id=f"f{i}", text="x", label=True), rec) for i in range(300)
        ]
        nonfactual = [
            scorer.score(Claim(id=f"n{i}", text="x", label=False), rec) for i in range(300)
        ]
        assert np.mean(factual) > np.mean(nonfactual) + 0.3

    def test_scorer_claim_id_keyed(self):
        scorer = SyntheticScorer(SyntheticScoreParams(), seed=0)
        rec = QueryRecord(id="r", query="q")
        a = scorer.score(Claim(id="a", text="x", label=True), rec)
        again = scorer.score(Claim(id="a", text="x", label=True), rec)
        b = scorer.score(Claim(id="b", text="x", label=True), rec)
        assert a == again and a != b


@given(
    e=st.floats(min_value=0.0, max_value=1.0),
    n=st.floats(min_value=0.0, max_value=1.0),
)
@settings(max_examples=100, deadline=None)
def test_aggregations_bounded(e, n):
    total = e + n
    if total > 1.0:
        e, n = e / total, n / total
    c = max(0.0, 1.0 - e - n)
    t = triple(e, n, c)
    assert 0.0 <= aggregate_conservative([t]) <= 1.0
    assert 0.0 <= aggregate_average([t]) <= 1.0
