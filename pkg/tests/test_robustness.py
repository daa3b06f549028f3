"""Synthetic simulators, distractor injection, shift experiments."""

import numpy as np
import pytest

from confilter.errors import ConfigError, ProvenanceError
from confilter.robustness import (
    DistractorConfig,
    SimulationConfig,
    distraction_aware,
    draw_labeled_sets,
    inject_distractors,
    shift_experiment,
    simulate,
)
from confilter.scoring import SyntheticScoreParams

from conftest import make_set


class TestConfigs:
    def test_distractor_rates_validated(self):
        with pytest.raises(ConfigError):
            DistractorConfig(test_rate=1.5)
        with pytest.raises(ConfigError):
            DistractorConfig(mode="adversarial")

    def test_simulation_validated(self):
        with pytest.raises(ConfigError):
            SimulationConfig(claims_min=5, claims_max=3)
        with pytest.raises(ConfigError):
            SimulationConfig(alphas=(1.5,))


class TestDrawLabeledSets:
    def test_shapes_and_determinism(self):
        a = draw_labeled_sets(np.random.default_rng(0), 20, 3, 10, 0.3, SyntheticScoreParams())
        b = draw_labeled_sets(np.random.default_rng(0), 20, 3, 10, 0.3, SyntheticScoreParams())
        assert len(a) == 20
        assert all(3 <= len(cs.claims) <= 10 for cs in a)
        assert a == b

    def test_label_score_separation(self):
        sets = draw_labeled_sets(
            np.random.default_rng(1), 200, 3, 10, 0.3, SyntheticScoreParams()
        )
        factual = [s for cs in sets for c, s in cs.claims if c.label]
        nonfactual = [s for cs in sets for c, s in cs.claims if not c.label]
        assert np.mean(factual) > np.mean(nonfactual) + 0.3

    def test_sigma_zero_disjoint(self):
        params = SyntheticScoreParams(mu_factual=0.9, mu_nonfactual=0.1, sigma=0.0)
        sets = draw_labeled_sets(np.random.default_rng(2), 50, 3, 10, 0.3, params)
        for cs in sets:
            for c, s in cs.claims:
                assert s == (0.9 if c.label else 0.1)


class TestInjectDistractors:
    def _base(self):
        return make_set(
            "q0",
            [(True, 0.9)] * 8 + [(False, 0.2), (False, 0.3)],
        )

    def test_exact_count_and_targets(self):
        # rate 0.25 with 8 factual claims replaces exactly round(2.0) = 2.
        out = inject_distractors([self._base()], rate=0.25, seed=0)[0]
        distractors = [c for c, _ in out.claims if c.origin == "distractor"]
        assert len(distractors) == 2
        assert all(c.label is False for c in distractors)
        # Non-factual source claims are never replaced.
        survivors = [c for c, _ in out.claims if c.origin == "generated"]
        assert sum(1 for c in survivors if c.label is False) == 2

    def test_same_seed_same_selection(self):
        a = inject_distractors([self._base()], rate=0.25, seed=5)[0]
        b = inject_distractors([self._base()], rate=0.25, seed=5)[0]
        assert [c.id for c, _ in a.claims] == [c.id for c, _ in b.claims]
        c = inject_distractors([self._base()], rate=0.25, seed=6)[0]
        assert a != c

    def test_rate_zero_noop(self):
        base = self._base()
        assert inject_distractors([base], rate=0.0, seed=0)[0] == base

    def test_distractor_scores_between_means(self):
        sets = [make_set(f"q{i}", [(True, 0.9)] * 10) for i in range(50)]
        out = inject_distractors(sets, rate=1.0, seed=0)
        scores = [s for cs in out for c, s in cs.claims if c.origin == "distractor"]
        assert 0.45 < np.mean(scores) < 0.65

    def test_llm_mode_requires_collaborators(self):
        with pytest.raises(ConfigError):
            inject_distractors([self._base()], rate=0.25, mode="llm")

    def test_llm_mode_retry_loop(self):
        calls = {"attack": 0, "confuse": 0}

        def attacker(record, claim, rejected, accepted):
            calls["attack"] += 1
            return f"rewrite {len(rejected)}"

        def confusee(record, text):
            calls["confuse"] += 1
            return text.endswith("1")  # accept the second attempt only

        class StubScorer:
            def score(self, claim, record):
                return 0.5

        from confilter.records import QueryRecord

        records = {"q0": QueryRecord(id="q0", query="q", reference="ref", dataset_tag="nq")}
        out = inject_distractors(
            [make_set("q0", [(True, 0.9), (True, 0.8), (True, 0.7), (True, 0.6)])],
            rate=0.25,
            mode="llm",
            attacker=attacker,
            confusee=confusee,
            scorer=StubScorer(),
            records=records,
        )[0]
        distractors = [c for c, _ in out.claims if c.origin == "distractor"]
        assert len(distractors) == 1
        assert distractors[0].text == "rewrite 1"
        assert calls["attack"] == 2  # first rejected, second accepted


class TestShiftExperiment:
    def _sets(self, seed, params, n=50):
        return draw_labeled_sets(np.random.default_rng(seed), n, 3, 10, 0.3, params)

    def test_mixed_scorer_ids_rejected(self):
        a = [make_set("q0", [(True, 0.9)], scorer_id="synthetic")]
        b = [make_set("q1", [(True, 0.9)], scorer_id="other")]
        with pytest.raises(ProvenanceError):
            shift_experiment(a, b, a, [0.1])

    def test_returns_both_arms(self):
        params = SyntheticScoreParams()
        result = shift_experiment(
            self._sets(0, params), self._sets(1, params), self._sets(2, params), [0.1, 0.2]
        )
        assert set(result) == {0.1, 0.2}
        assert set(result[0.1]) == {"matched", "external"}


class TestDistractionAware:
    def test_matched_rates_hold_coverage(self):
        params = SyntheticScoreParams()
        calib = draw_labeled_sets(np.random.default_rng(10), 200, 3, 10, 0.3, params, "cal")
        test = draw_labeled_sets(np.random.default_rng(11), 200, 3, 10, 0.3, params, "tst")
        reports = distraction_aware(0.25, 0.25, calib, test, [0.1], seed=0)
        assert reports[0.1].ef > 0.8  # single run, loose bound


class TestSimulate:
    def test_coverage_small(self):
        cfg = SimulationConfig(
            n_calibration=100, n_test=100, n_trials=20, alphas=(0.1,), seed=0
        )
        stats = simulate(cfg)[0.1]
        assert stats.n_trials == 20
        assert stats.mean_ef > 0.85
        assert 0.0 <= stats.mean_power <= 1.0

    def test_deterministic_under_seed(self):
        cfg = SimulationConfig(n_calibration=50, n_test=50, n_trials=5, alphas=(0.1,), seed=3)
        assert simulate(cfg) == simulate(cfg)

    def test_perfect_separation(self):
        # Disjoint supports with sigma 0: threshold is exact, EF and Power are 1.
        params = SyntheticScoreParams(mu_factual=0.9, mu_nonfactual=0.1, sigma=0.0)
        cfg = SimulationConfig(
            n_calibration=50, n_test=50, n_trials=5, alphas=(0.1,), seed=0, score_params=params
        )
        stats = simulate(cfg)[0.1]
        assert stats.mean_ef == 1.0
        assert stats.mean_power == 1.0
