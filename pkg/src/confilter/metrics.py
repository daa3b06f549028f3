"""Factuality and informativeness metrics over filtered outputs.

Conventions: an empty retained set counts as factual for EF; undefined
metrics raise UndefinedMetric (they are a distinct signal, never silently 0
or 1, so report tables can show gaps).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, asdict
from typing import Optional, Sequence

from .errors import MissingLabelError, UndefinedMetric
from .records import FilteredOutput, ScoredClaimSet

CORRECTNESS_JUDGMENTS = ("perfect", "acceptable", "incorrect", "missing")


@dataclass(frozen=True)
class MetricsReport:
    """Per-alpha aggregate of every metric; None marks undefined values."""

    alpha: float
    ef: float
    power: float
    fpr: float
    nr: float
    nvef: Optional[float]
    n_test: int
    n_empty: int
    correctness: Optional[float] = None
    sc: Optional[float] = None
    csc: Optional[float] = None
    fpr_degenerate: bool = False

    def row(self) -> dict:
        return asdict(self)


def _check_labels(filtered: FilteredOutput):
    for claim in filtered.retained_claims:
        if claim.label is None:
            raise MissingLabelError(claim.id)


def _all_factual(filtered: FilteredOutput) -> bool:
    _check_labels(filtered)
    return all(c.label for c in filtered.retained_claims)


def empirical_factuality(filtered: Sequence[FilteredOutput]) -> float:
    """Fraction of outputs whose retained claims are all factual (empty counts)."""
    if not filtered:
        raise UndefinedMetric("EF over zero outputs")
    return sum(_all_factual(f) for f in filtered) / len(filtered)


def power(filtered: Sequence[FilteredOutput], sources: Sequence[ScoredClaimSet]) -> float:
    """Mean per-output fraction of factual claims retained.

    Outputs with no factual source claims have an undefined 0/0 ratio and are
    excluded from the mean.
    """
    ratios = []
    for f, src in zip(filtered, sources):
        factual_ids = set()
        for claim, _ in src.claims:
            if claim.label is None:
                raise MissingLabelError(claim.id)
            if claim.label:
                factual_ids.add(claim.id)
        if not factual_ids:
            continue
        kept = sum(1 for c in f.retained_claims if c.id in factual_ids)
        ratios.append(kept / len(factual_ids))
    if not ratios:
        raise UndefinedMetric("power: no output has a factual source claim")
    return sum(ratios) / len(ratios)


def false_positive_rate(
    filtered: Sequence[FilteredOutput], sources: Sequence[ScoredClaimSet]
) -> tuple:
    """Pooled fraction of non-factual claims that survive filtering.

    Returns (rate, degenerate): a zero denominator reports 0.0 with the
    degenerate flag set rather than raising, since "no hallucinations to
    suppress" is a benign condition.
    """
    survived = 0
    total = 0
    for f, src in zip(filtered, sources):
        nonfactual_ids = set()
        for claim, _ in src.claims:
            if claim.label is None:
                raise MissingLabelError(claim.id)
            if not claim.label:
                nonfactual_ids.add(claim.id)
        total += len(nonfactual_ids)
        survived += sum(1 for c in f.retained_claims if c.id in nonfactual_ids)
    if total == 0:
        return 0.0, True
    return survived / total, False


def non_empty_rate(filtered: Sequence[FilteredOutput]) -> float:
    if not filtered:
        raise UndefinedMetric("NR over zero outputs")
    return sum(1 for f in filtered if f.retained_claims) / len(filtered)


def non_vacuous_ef(filtered: Sequence[FilteredOutput]) -> float:
    """EF restricted to non-empty outputs; undefined when all are empty."""
    non_empty = [f for f in filtered if f.retained_claims]
    if not non_empty:
        raise UndefinedMetric("NvEF: every output is empty")
    return sum(_all_factual(f) for f in non_empty) / len(non_empty)


def correctness(judgments: Sequence[str], strict: bool = False) -> float:
    """Fraction of outputs judged equivalent to ground truth.

    Default counts {perfect, acceptable}; strict mode counts perfect only.
    """
    if not judgments:
        raise UndefinedMetric("correctness over zero judgments")
    for j in judgments:
        if j not in CORRECTNESS_JUDGMENTS:
            raise ValueError(f"unknown judgment {j!r}")
    accepted = ("perfect",) if strict else ("perfect", "acceptable")
    return sum(1 for j in judgments if j in accepted) / len(judgments)


def sufficient_correctness(sc_flags: Sequence[bool]) -> float:
    if not sc_flags:
        raise UndefinedMetric("SC over zero judgments")
    return sum(bool(f) for f in sc_flags) / len(sc_flags)


def conditional_sc(
    sc_unfiltered: Sequence[bool], sc_filtered: Sequence[bool]
) -> float:
    """SC of filtered outputs among cases where the unfiltered output had SC."""
    if len(sc_unfiltered) != len(sc_filtered):
        raise ValueError("unfiltered/filtered SC lists differ in length")
    denominator = sum(bool(u) for u in sc_unfiltered)
    if denominator == 0:
        raise UndefinedMetric("CSC: no unfiltered output is sufficiently correct")
    numerator = sum(1 for u, f in zip(sc_unfiltered, sc_filtered) if u and f)
    return numerator / denominator


def compute_report(
    alpha: float,
    filtered: Sequence[FilteredOutput],
    sources: Sequence[ScoredClaimSet],
    judgments: Optional[Sequence[str]] = None,
    sc_unfiltered: Optional[Sequence[bool]] = None,
    sc_filtered: Optional[Sequence[bool]] = None,
) -> MetricsReport:
    """Aggregate every metric for one (alpha, filtered corpus) pair."""
    ef = empirical_factuality(filtered)
    nr = non_empty_rate(filtered)
    try:
        nvef = non_vacuous_ef(filtered)
    except UndefinedMetric:
        nvef = None
    try:
        pw = power(filtered, sources)
    except UndefinedMetric:
        pw = 0.0
    fpr, degenerate = false_positive_rate(filtered, sources)
    corr = correctness(judgments) if judgments else None
    sc = sufficient_correctness(sc_filtered) if sc_filtered else None
    csc = None
    if sc_unfiltered and sc_filtered:
        try:
            csc = conditional_sc(sc_unfiltered, sc_filtered)
        except UndefinedMetric:
            csc = None
    return MetricsReport(
        alpha=alpha,
        ef=ef,
        power=pw,
        fpr=fpr,
        nr=nr,
        nvef=nvef,
        n_test=len(filtered),
        n_empty=sum(1 for f in filtered if not f.retained_claims),
        correctness=corr,
        sc=sc,
        csc=csc,
        fpr_degenerate=degenerate,
    )


REPORT_COLUMNS = [
    "scorer_id",
    "experiment",
    "alpha",
    "threshold",
    "ef",
    "power",
    "fpr",
    "nr",
    "nvef",
    "correctness",
    "sc",
    "csc",
    "n_test",
    "n_empty",
]


def reports_to_csv(rows: Sequence[dict]) -> str:
    """Render report rows as CSV with a stable column order and float format."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        formatted = {}
        for col in REPORT_COLUMNS:
            val = row.get(col)
            if isinstance(val, float):
                formatted[col] = format(val, ".10g")
            elif val is None:
                formatted[col] = ""
            else:
                formatted[col] = val
        writer.writerow(formatted)
    return buf.getvalue()


def reports_to_json(rows: Sequence[dict], provenance: dict) -> str:
    return json.dumps({"provenance": provenance, "rows": list(rows)}, indent=2, sort_keys=True)
