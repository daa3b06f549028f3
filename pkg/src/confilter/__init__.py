"""Conformal factuality filtering for retrieval-augmented LLM outputs.

Calibrates a per-claim score threshold on labeled data so that, with
probability at least 1 - alpha over exchangeable draws, every claim retained
from a new output is factual. Ships entailment-, confidence-, and
synthetic-score backends, robustness experiments, metrics, and a CLI.
"""

from .conformal import CandidateThreshold, calibrate, candidate_threshold, filter_claims
from .errors import (
    CalibrationError,
    ConfigError,
    ConfilterError,
    CorpusIOError,
    DataError,
    MissingLabelError,
    ProtocolError,
    ProvenanceError,
    SplitSizeError,
    TemplateError,
    TransportError,
    UndefinedMetric,
)
from .metrics import (
    MetricsReport,
    compute_report,
    conditional_sc,
    correctness,
    empirical_factuality,
    false_positive_rate,
    non_empty_rate,
    non_vacuous_ef,
    power,
    sufficient_correctness,
)
from .nli import EntailmentTriple, NliClient
from .records import (
    SENTINEL_HIGH,
    SENTINEL_LOW,
    Claim,
    FilteredOutput,
    GeneratedOutput,
    QueryRecord,
    ScoredClaimSet,
    Threshold,
    Violation,
    split_calibration_test,
    validate_corpus,
)
from .robustness import (
    CoverageStats,
    DistractorConfig,
    SimulationConfig,
    distraction_aware,
    inject_distractors,
    shift_experiment,
    simulate,
    simulate_distraction,
    simulate_shift,
)
from .scoring import (
    ConfidenceScorer,
    DocumentEntailmentScorer,
    PromptConfig,
    ScorerSpec,
    SentenceEntailmentScorer,
    SyntheticScoreParams,
    SyntheticScorer,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationError",
    "CandidateThreshold",
    "Claim",
    "ConfidenceScorer",
    "ConfigError",
    "ConfilterError",
    "CorpusIOError",
    "CoverageStats",
    "DataError",
    "DistractorConfig",
    "DocumentEntailmentScorer",
    "EntailmentTriple",
    "FilteredOutput",
    "GeneratedOutput",
    "MetricsReport",
    "MissingLabelError",
    "NliClient",
    "PromptConfig",
    "ProtocolError",
    "ProvenanceError",
    "QueryRecord",
    "SENTINEL_HIGH",
    "SENTINEL_LOW",
    "ScoredClaimSet",
    "ScorerSpec",
    "SentenceEntailmentScorer",
    "SimulationConfig",
    "SplitSizeError",
    "SyntheticScoreParams",
    "SyntheticScorer",
    "TemplateError",
    "Threshold",
    "TransportError",
    "UndefinedMetric",
    "Violation",
    "calibrate",
    "candidate_threshold",
    "compute_report",
    "conditional_sc",
    "correctness",
    "distraction_aware",
    "empirical_factuality",
    "false_positive_rate",
    "filter_claims",
    "inject_distractors",
    "non_empty_rate",
    "non_vacuous_ef",
    "power",
    "shift_experiment",
    "simulate",
    "simulate_distraction",
    "simulate_shift",
    "split_calibration_test",
    "sufficient_correctness",
    "validate_corpus",
]
