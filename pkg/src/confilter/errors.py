"""Exception hierarchy shared across the package."""


class ConfilterError(Exception):
    """Base class for all package-specific errors."""


class DataError(ConfilterError):
    """A value object violates one of its invariants."""


class CorpusIOError(ConfilterError):
    """Corpus file unreadable or not valid JSONL; distinct from validation failures."""


class SplitSizeError(ConfilterError):
    """Requested calibration size exceeds the number of records."""


class MissingLabelError(ConfilterError):
    """A claim entering calibration or metric computation has no label."""

    def __init__(self, claim_id: str):
        super().__init__(f"claim {claim_id!r} has no factuality label")
        self.claim_id = claim_id


class CalibrationError(ConfilterError):
    """Calibration requested over an empty candidate list."""


class UndefinedMetric(ConfilterError):
    """A metric's denominator is empty; the value is undefined, not 0 or 1."""


class ConfigError(ConfilterError):
    """Invalid run or scorer configuration."""


class TemplateError(ConfilterError):
    """A prompt template placeholder could not be resolved."""


class TransportError(ConfilterError):
    """A remote service could not be reached; retryable."""


class ProtocolError(ConfilterError):
    """A remote service replied with a malformed payload."""


class ProvenanceError(ConfilterError):
    """Calibration and test artifacts disagree on scorer identity."""
