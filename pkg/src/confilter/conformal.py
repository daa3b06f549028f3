"""Split-conformal calibration and strict-threshold claim filtering.

The filter keeps claims with ``score > tau`` (strict). A per-query candidate
threshold is the smallest tau whose filtrate contains only factual claims,
which for finite sets is exactly the maximum score among non-factual claims,
or ``SENTINEL_LOW`` when none exist. Calibration takes the k-th smallest
candidate with k = ceil((n+1)(1-alpha)); k > n yields ``SENTINEL_HIGH``
(filter everything), the conservative choice consistent with the guarantee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import CalibrationError, MissingLabelError
from .records import (
    SENTINEL_HIGH,
    SENTINEL_LOW,
    FilteredOutput,
    ScoredClaimSet,
    Threshold,
)


@dataclass(frozen=True)
class CandidateThreshold:
    """Per-query candidate: max non-factual score, or SENTINEL_LOW if all factual."""

    record_id: str
    value: float


def candidate_threshold(claims: ScoredClaimSet) -> CandidateThreshold:
    """Smallest tau such that every claim scoring strictly above tau is factual.

    Raises MissingLabelError if any claim is unlabeled. An empty claim set is
    vacuously all-factual and contributes SENTINEL_LOW.
    """
    worst = SENTINEL_LOW
    for claim, score in claims.claims:
        if claim.label is None:
            raise MissingLabelError(claim.id)
        if claim.label is False and score > worst:
            worst = score
    return CandidateThreshold(record_id=claims.record_id, value=worst)


def calibrate(candidates: Sequence[CandidateThreshold], alpha: float) -> Threshold:
    """Conformal quantile of candidate thresholds at miscoverage level alpha.

    Returns the k-th smallest candidate with k = ceil((n+1)(1-alpha)), an
    order statistic with no interpolation; SENTINEL_LOW sorts below all reals.
    When k > n no finite quantile exists and the threshold is SENTINEL_HIGH.
    """
    n = len(candidates)
    if n == 0:
        raise CalibrationError("cannot calibrate on an empty candidate list")
    k = math.ceil((n + 1) * (1.0 - alpha))
    if k > n:
        value = SENTINEL_HIGH
    else:
        value = sorted(c.value for c in candidates)[k - 1]
    return Threshold(value=value, alpha=alpha, calibration_size=n)


def filter_claims(claims: ScoredClaimSet, tau: Threshold) -> FilteredOutput:
    """Retain claims scoring strictly above the threshold, preserving order.

    Labels are not required at inference time; ties at the threshold drop.
    """
    retained = tuple(c for c, s in claims.claims if s > tau.value)
    return FilteredOutput(
        record_id=claims.record_id, retained_claims=retained, threshold_used=tau
    )
