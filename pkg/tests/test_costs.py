"""FLOPs estimation against published reference figures."""

import pytest

from confilter.costs import (
    ACTIVE_PARAMS,
    ModelCostSpec,
    estimate_flops,
    published_flops,
)
from confilter.errors import ConfigError


def _spec(model, prompt=1000, generated=1000):
    return ModelCostSpec(
        model_id=model,
        active_params=ACTIVE_PARAMS[model],
        prompt_tokens=prompt,
        generated_tokens=generated,
    )


def _round2sf(x):
    from math import floor, log10

    digits = 1 - floor(log10(abs(x)))
    return round(x, digits)


class TestDecoderFormula:
    @pytest.mark.parametrize(
        "model,expected",
        [("gpt-oss-20b", 1.44e13), ("Qwen3-8B", 3.28e13), ("DeepSeek-R1", 1.5e14)],
    )
    def test_published_rows_to_two_sf(self, model, expected):
        got = estimate_flops(_spec(model), arch="decoder")
        assert _round2sf(got) == pytest.approx(_round2sf(expected))

    def test_scales_linearly_in_tokens(self):
        half = estimate_flops(_spec("Qwen3-8B", prompt=500, generated=500))
        full = estimate_flops(_spec("Qwen3-8B"))
        assert full == pytest.approx(2 * half)

    def test_zero_tokens_zero_flops(self):
        assert estimate_flops(_spec("Qwen3-8B", prompt=0, generated=0)) == 0.0


class TestEncoderLookup:
    @pytest.mark.parametrize("model,expected", [("DeBERTa", 4.9e11), ("RoBERTa", 1.6e12)])
    def test_published_rows_exact(self, model, expected):
        assert published_flops(model) == expected
        assert estimate_flops(_spec(model), arch="encoder") == expected

    def test_lookup_scales_with_tokens(self):
        got = estimate_flops(_spec("DeBERTa", prompt=500, generated=500), arch="encoder")
        assert got == pytest.approx(4.9e11 / 2)

    def test_unknown_encoder_falls_back_to_formula(self):
        spec = ModelCostSpec(
            model_id="custom-encoder", active_params=1e8, prompt_tokens=100, generated_tokens=0
        )
        assert estimate_flops(spec, arch="encoder") == 2.0 * 1e8 * 100

    def test_unknown_published_raises(self):
        with pytest.raises(ConfigError):
            published_flops("unknown-model")


class TestValidation:
    def test_negative_counts(self):
        with pytest.raises(ConfigError):
            ModelCostSpec(model_id="m", active_params=-1, prompt_tokens=0, generated_tokens=0)

    def test_unknown_arch(self):
        with pytest.raises(ConfigError):
            estimate_flops(_spec("Qwen3-8B"), arch="mamba")
