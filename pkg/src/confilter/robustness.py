"""Stress tests for the conformal guarantee.

Holds the synthetic exchangeable-data simulator (the desk-scale oracle for
the coverage guarantee), distractor injection with attacker/confusee
verification, calibration distribution-shift experiments, and
distraction-aware calibration. Trials derive their RNG stream from
(seed, trial index), so results never depend on execution order.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .conformal import calibrate, candidate_threshold, filter_claims
from .errors import ConfigError, ProvenanceError, TransportError
from .metrics import MetricsReport, compute_report
from .records import Claim, QueryRecord, ScoredClaimSet
from .scoring import SyntheticScoreParams, truncated_normal


@dataclass(frozen=True)
class DistractorConfig:
    """Injection proportions and the verification budget."""

    test_rate: float = 0.25
    calibration_rate: float = 0.0
    max_retries: int = 3
    mode: str = "synthetic"  # or "llm"

    def __post_init__(self):
        for rate in (self.test_rate, self.calibration_rate):
            if not 0.0 <= rate <= 1.0:
                raise ConfigError(f"distractor rate {rate} outside [0, 1]")
        if self.max_retries < 1:
            raise ConfigError("max_retries must be >= 1")
        if self.mode not in ("synthetic", "llm"):
            raise ConfigError(f"unknown distractor mode {self.mode!r}")


@dataclass(frozen=True)
class SimulationConfig:
    """Knobs for the synthetic coverage simulator."""

    n_calibration: int = 200
    n_test: int = 500
    n_trials: int = 200
    claims_min: int = 3
    claims_max: int = 10
    p_nonfactual: float = 0.3
    score_params: SyntheticScoreParams = field(default_factory=SyntheticScoreParams)
    alphas: tuple = (0.05, 0.1, 0.2)
    seed: int = 0

    def __post_init__(self):
        if min(self.n_calibration, self.n_test, self.n_trials, self.claims_min) < 1:
            raise ConfigError("all counts must be >= 1")
        if self.claims_max < self.claims_min:
            raise ConfigError("claims_max < claims_min")
        if not 0.0 <= self.p_nonfactual <= 1.0:
            raise ConfigError("p_nonfactual outside [0, 1]")
        for a in self.alphas:
            if not 0.0 < a < 1.0:
                raise ConfigError(f"alpha {a} outside (0, 1)")


def draw_labeled_sets(
    rng: np.random.Generator,
    n_queries: int,
    claims_min: int,
    claims_max: int,
    p_nonfactual: float,
    params: SyntheticScoreParams,
    id_prefix: str = "q",
    scorer_id: str = "synthetic",
) -> list:
    """Draw i.i.d. labeled, synthetically scored claim sets (exchangeable data)."""
    counts = rng.integers(claims_min, claims_max + 1, size=n_queries)
    total = int(counts.sum())
    labels = rng.random(total) >= p_nonfactual
    scores = np.empty(total)
    factual_idx = np.flatnonzero(labels)
    nonfactual_idx = np.flatnonzero(~labels)
    scores[factual_idx] = truncated_normal(
        rng, params.mu_factual, params.sigma, factual_idx.size
    )
    scores[nonfactual_idx] = truncated_normal(
        rng, params.mu_nonfactual, params.sigma, nonfactual_idx.size
    )
    sets = []
    pos = 0
    for qi, count in enumerate(counts):
        claims = []
        for ci in range(count):
            cid = f"{id_prefix}{qi}-c{ci}"
            claims.append(
                (
                    Claim(id=cid, text=f"synthetic claim {cid}", label=bool(labels[pos])),
                    float(scores[pos]),
                )
            )
            pos += 1
        sets.append(
            ScoredClaimSet(record_id=f"{id_prefix}{qi}", claims=claims, scorer_id=scorer_id)
        )
    return sets


# ---------------------------------------------------------------------------
# Distractor injection


def _distractor_count(rate: float, n_factual: int) -> int:
    return round(rate * n_factual)


def inject_distractors(
    sets: Sequence[ScoredClaimSet],
    rate: float,
    seed: int = 0,
    mode: str = "synthetic",
    score_params: Optional[SyntheticScoreParams] = None,
    attacker: Optional[Callable] = None,
    confusee: Optional[Callable] = None,
    max_retries: int = 3,
    records: Optional[dict] = None,
    scorer=None,
) -> list:
    """Replace round(rate * #factual) factual claims per query with distractors.

    Selection is uniform and seeded per query; non-factual source claims are
    never touched. Synthetic mode perturbs the text and draws the distractor
    score from a distribution centered between the factual and non-factual
    means (plausible but incorrect). LLM mode calls ``attacker`` to rewrite
    the claim and ``confusee`` to verify it reads like a plausible
    hallucination, retrying up to ``max_retries`` before keeping the last
    candidate; distractor scores come from the configured ``scorer``.
    """
    if mode == "synthetic":
        score_params = score_params or SyntheticScoreParams()
        mu_distractor = 0.5 * (score_params.mu_factual + score_params.mu_nonfactual)
    elif mode == "llm":
        if attacker is None or confusee is None or scorer is None or records is None:
            raise ConfigError("llm mode needs attacker, confusee, scorer and records")
    else:
        raise ConfigError(f"unknown distractor mode {mode!r}")

    out = []
    for qi, cs in enumerate(sets):
        rng = np.random.default_rng([seed, qi])
        factual_positions = [i for i, (c, _) in enumerate(cs.claims) if c.label]
        k = _distractor_count(rate, len(factual_positions))
        chosen = set(
            rng.choice(factual_positions, size=k, replace=False).tolist() if k else []
        )
        new_claims = []
        for i, (claim, score) in enumerate(cs.claims):
            if i not in chosen:
                new_claims.append((claim, score))
                continue
            if mode == "synthetic":
                distractor = Claim(
                    id=f"{claim.id}-dx",
                    text=f"[distractor] {claim.text}",
                    label=False,
                    origin="distractor",
                )
                new_score = float(
                    truncated_normal(rng, mu_distractor, score_params.sigma, 1)[0]
                )
            else:
                record = records[cs.record_id]
                distractor, new_score = _llm_distractor(
                    claim, record, attacker, confusee, scorer, max_retries
                )
            new_claims.append((distractor, new_score))
        out.append(
            ScoredClaimSet(record_id=cs.record_id, claims=new_claims, scorer_id=cs.scorer_id)
        )
    return out


def _llm_distractor(claim, record, attacker, confusee, scorer, max_retries):
    rejected = []
    text = claim.text
    for _ in range(max_retries):
        try:
            text = attacker(record, claim, rejected, [])
        except TransportError:
            raise
        if confusee(record, text):
            break
        rejected.append(text)
    distractor = Claim(
        id=f"{claim.id}-dx", text=text, label=False, origin="distractor"
    )
    return distractor, scorer.score(distractor, record)


# ---------------------------------------------------------------------------
# Experiment protocols (single run, typed)


def _check_provenance(*groups):
    ids = {cs.scorer_id for group in groups for cs in group}
    if len(ids) > 1:
        raise ProvenanceError(f"mixed scorer ids across corpora: {sorted(ids)}")


def _run_alphas(calib_sets, test_sets, alphas):
    candidates = [candidate_threshold(cs) for cs in calib_sets]
    reports = {}
    for alpha in alphas:
        tau = calibrate(candidates, alpha)
        filtered = [filter_claims(cs, tau) for cs in test_sets]
        reports[alpha] = compute_report(alpha, filtered, test_sets)
    return reports


def shift_experiment(
    matched_calib: Sequence[ScoredClaimSet],
    external_calib: Sequence[ScoredClaimSet],
    test_sets: Sequence[ScoredClaimSet],
    alphas: Sequence[float],
) -> dict:
    """Calibrate on matched and external data and evaluate both on the same
    test sets; returns {alpha: {"matched": report, "external": report}}."""
    _check_provenance(matched_calib, external_calib, test_sets)
    matched = _run_alphas(matched_calib, test_sets, alphas)
    external = _run_alphas(external_calib, test_sets, alphas)
    return {a: {"matched": matched[a], "external": external[a]} for a in alphas}


def distraction_aware(
    calib_rate: float,
    test_rate: float,
    calib_sets: Sequence[ScoredClaimSet],
    test_sets: Sequence[ScoredClaimSet],
    alphas: Sequence[float],
    score_params: Optional[SyntheticScoreParams] = None,
    seed: int = 0,
) -> dict:
    """Inject distractors into both halves at their own rates, then
    calibrate/filter/evaluate; returns {alpha: MetricsReport}."""
    _check_provenance(calib_sets, test_sets)
    calib = inject_distractors(
        calib_sets, calib_rate, seed=seed, score_params=score_params
    )
    test = inject_distractors(
        test_sets, test_rate, seed=seed + 1, score_params=score_params
    )
    return _run_alphas(calib, test, alphas)


# ---------------------------------------------------------------------------
# Multi-trial synthetic harnesses


@dataclass(frozen=True)
class CoverageStats:
    """Across-trial aggregates for one alpha."""

    alpha: float
    mean_ef: float
    std_ef: float
    mean_nr: float
    mean_power: float
    n_trials: int


def _aggregate(alpha: float, reports: Sequence[MetricsReport]) -> CoverageStats:
    efs = [r.ef for r in reports]
    return CoverageStats(
        alpha=alpha,
        mean_ef=statistics.fmean(efs),
        std_ef=statistics.pstdev(efs) if len(efs) > 1 else 0.0,
        mean_nr=statistics.fmean(r.nr for r in reports),
        mean_power=statistics.fmean(r.power for r in reports),
        n_trials=len(reports),
    )


def _trial_sets(cfg: SimulationConfig, trial: int, params: SyntheticScoreParams):
    rng = np.random.default_rng([cfg.seed, trial])
    calib = draw_labeled_sets(
        rng,
        cfg.n_calibration,
        cfg.claims_min,
        cfg.claims_max,
        cfg.p_nonfactual,
        params,
        id_prefix=f"t{trial}-cal-q",
    )
    test = draw_labeled_sets(
        rng,
        cfg.n_test,
        cfg.claims_min,
        cfg.claims_max,
        cfg.p_nonfactual,
        params,
        id_prefix=f"t{trial}-tst-q",
    )
    return calib, test


def simulate(cfg: SimulationConfig) -> dict:
    """Coverage table for exchangeable synthetic data: {alpha: CoverageStats}.

    Each trial draws fresh calibration and test corpora, calibrates, filters,
    and measures; trials are independent and seeded by (seed, trial index).
    """
    per_alpha = {a: [] for a in cfg.alphas}
    for trial in range(cfg.n_trials):
        calib, test = _trial_sets(cfg, trial, cfg.score_params)
        for alpha, report in _run_alphas(calib, test, cfg.alphas).items():
            per_alpha[alpha].append(report)
    return {a: _aggregate(a, reports) for a, reports in per_alpha.items()}


def simulate_shift(cfg: SimulationConfig, test_nonfactual_shift: float) -> dict:
    """Matched vs. external calibration under a deployment-time score shift.

    The deployed (test) distribution's non-factual scores sit
    ``test_nonfactual_shift`` above the external calibration corpus's, so
    external calibration thresholds are too lenient for deployment. Matched
    calibration is drawn from the deployment distribution itself. Returns
    {alpha: {"matched": CoverageStats, "external": CoverageStats}}.
    """
    base = cfg.score_params
    shifted = replace(base, mu_nonfactual=base.mu_nonfactual + test_nonfactual_shift)
    matched_acc = {a: [] for a in cfg.alphas}
    external_acc = {a: [] for a in cfg.alphas}
    for trial in range(cfg.n_trials):
        rng = np.random.default_rng([cfg.seed, trial, 7])
        external_calib = draw_labeled_sets(
            rng,
            cfg.n_calibration,
            cfg.claims_min,
            cfg.claims_max,
            cfg.p_nonfactual,
            base,
            id_prefix=f"t{trial}-ext-q",
        )
        shifted_cfg = replace(cfg, score_params=shifted)
        matched_calib, test = _trial_sets(shifted_cfg, trial, shifted)
        pair = shift_experiment(matched_calib, external_calib, test, cfg.alphas)
        for alpha in cfg.alphas:
            matched_acc[alpha].append(pair[alpha]["matched"])
            external_acc[alpha].append(pair[alpha]["external"])
    return {
        a: {
            "matched": _aggregate(a, matched_acc[a]),
            "external": _aggregate(a, external_acc[a]),
        }
        for a in cfg.alphas
    }


def simulate_distraction(
    cfg: SimulationConfig, calib_rate: float, test_rate: float
) -> dict:
    """Distraction-aware calibration across trials: {alpha: CoverageStats}."""
    per_alpha = {a: [] for a in cfg.alphas}
    for trial in range(cfg.n_trials):
        calib, test = _trial_sets(cfg, trial, cfg.score_params)
        reports = distraction_aware(
            calib_rate,
            test_rate,
            calib,
            test,
            cfg.alphas,
            score_params=cfg.score_params,
            seed=cfg.seed + 104729 + trial,
        )
        for alpha, report in reports.items():
            per_alpha[alpha].append(report)
    return {a: _aggregate(a, reports) for a, reports in per_alpha.items()}
