"""Core value objects and their JSONL on-disk formats.

All types are frozen dataclasses: safe to share between threads and to use
as dictionary keys. On disk, a corpus is a set of JSONL files
(``records.jsonl``, ``outputs.jsonl``, ``claims.jsonl``, ``scores.jsonl``),
one UTF-8 encoded JSON object per line, keyed by ``record_id``.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import CorpusIOError, DataError, SplitSizeError

# Score-domain sentinels. Scores live in [0, 1]; the sentinels sit strictly
# outside so that "retain all" and "retain none" survive the strict-> filter.
SENTINEL_LOW = -1.0
SENTINEL_HIGH = 2.0

DATASET_TAGS = ("factscore", "math", "nq", "synthetic")
CLAIM_ORIGINS = ("generated", "distractor")


@dataclass(frozen=True)
class QueryRecord:
    """One benchmark item: a query, its reference text, optional ground truth."""

    id: str
    query: str
    reference: str = ""
    ground_truth: Optional[str] = None
    dataset_tag: str = "synthetic"

    def __post_init__(self):
        if self.dataset_tag not in DATASET_TAGS:
            raise DataError(f"unknown dataset_tag {self.dataset_tag!r}")


@dataclass(frozen=True)
class GeneratedOutput:
    """Raw generator response for one record."""

    record_id: str
    text: str
    generator_id: str
    with_reference: bool = True


@dataclass(frozen=True)
class Claim:
    """An atomic statement, optionally labeled factual/non-factual."""

    id: str
    text: str
    label: Optional[bool] = None
    origin: str = "generated"

    def __post_init__(self):
        if not self.text:
            raise DataError(f"claim {self.id!r} has empty text")
        if self.origin not in CLAIM_ORIGINS:
            raise DataError(f"claim {self.id!r} has unknown origin {self.origin!r}")


@dataclass(frozen=True)
class ScoredClaimSet:
    """The claims of one output with scores from one scorer.

    This is the unit of calibration and filtering. Ordering follows claim
    parse order and is preserved everywhere downstream.
    """

    record_id: str
    claims: tuple  # tuple of (Claim, float) pairs
    scorer_id: str

    def __post_init__(self):
        object.__setattr__(self, "claims", tuple((c, float(s)) for c, s in self.claims))
        seen = set()
        for claim, score in self.claims:
            if not 0.0 <= score <= 1.0:
                raise DataError(
                    f"score {score} for claim {claim.id!r} outside [0, 1]"
                )
            if claim.id in seen:
                raise DataError(f"duplicate claim id {claim.id!r} in set")
            seen.add(claim.id)

    def scores(self) -> list:
        return [s for _, s in self.claims]

    def labeled(self) -> bool:
        return all(c.label is not None for c, _ in self.claims)


@dataclass(frozen=True)
class Threshold:
    """A calibrated score cutoff, applied with strict inequality.

    ``SENTINEL_LOW`` retains every claim; ``SENTINEL_HIGH`` retains none.
    """

    value: float
    alpha: float
    calibration_size: int

    def __post_init__(self):
        v = self.value
        if v not in (SENTINEL_LOW, SENTINEL_HIGH) and not 0.0 <= v <= 1.0:
            raise DataError(f"threshold value {v} outside [0, 1] and not a sentinel")
        if not 0.0 < self.alpha < 1.0:
            raise DataError(f"alpha {self.alpha} outside (0, 1)")
        if self.calibration_size < 1:
            raise DataError("calibration_size must be >= 1")

    def to_json(self, scorer_id: str = "", created_at: str = "") -> str:
        return json.dumps(
            {
                "value": self.value,
                "alpha": self.alpha,
                "n": self.calibration_size,
                "scorer_id": scorer_id,
                "created_at": created_at,
            }
        )

    @classmethod
    def from_json(cls, raw: str) -> "Threshold":
        doc = json.loads(raw)
        return cls(value=doc["value"], alpha=doc["alpha"], calibration_size=doc["n"])


@dataclass(frozen=True)
class FilteredOutput:
    """Claims surviving the threshold, plus the merged text once produced."""

    record_id: str
    retained_claims: tuple
    threshold_used: Threshold
    merged_text: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "retained_claims", tuple(self.retained_claims))
        if self.merged_text is not None:
            empty_text = self.merged_text == ""
            empty_claims = len(self.retained_claims) == 0
            if empty_text != empty_claims:
                raise DataError(
                    "merged_text must be empty iff retained_claims is empty"
                )


@dataclass(frozen=True)
class Violation:
    """One validation failure: which record, which rule."""

    record_id: str
    rule: str


def validate_corpus(records: Sequence[QueryRecord]) -> list:
    """Check corpus-level invariants; returns a list of Violation (empty = valid)."""
    report = []
    seen = set()
    for rec in records:
        if not rec.id:
            report.append(Violation(rec.id, "empty-id"))
        elif rec.id in seen:
            report.append(Violation(rec.id, "duplicate-id"))
        seen.add(rec.id)
        if rec.dataset_tag != "synthetic" and not rec.reference:
            report.append(Violation(rec.id, "empty-reference"))
    return report


def split_calibration_test(records: Sequence, n: int, seed: int):
    """Seeded random partition into (calibration, test); calibration gets n items."""
    if n > len(records):
        raise SplitSizeError(f"calibration size {n} exceeds corpus size {len(records)}")
    order = list(records)
    random.Random(seed).shuffle(order)
    return order[:n], order[n:]


# ---------------------------------------------------------------------------
# JSONL serialization


def _claim_to_doc(claim: Claim) -> dict:
    return {"id": claim.id, "text": claim.text, "label": claim.label, "origin": claim.origin}


def _claim_from_doc(doc: dict) -> Claim:
    return Claim(
        id=doc["id"], text=doc["text"], label=doc.get("label"), origin=doc.get("origin", "generated")
    )


def record_to_doc(rec: QueryRecord) -> dict:
    return asdict(rec)


def record_from_doc(doc: dict) -> QueryRecord:
    return QueryRecord(
        id=doc["id"],
        query=doc["query"],
        reference=doc.get("reference", ""),
        ground_truth=doc.get("ground_truth"),
        dataset_tag=doc.get("dataset_tag", "synthetic"),
    )


def output_to_doc(out: GeneratedOutput) -> dict:
    return asdict(out)


def output_from_doc(doc: dict) -> GeneratedOutput:
    return GeneratedOutput(
        record_id=doc["record_id"],
        text=doc["text"],
        generator_id=doc.get("generator_id", ""),
        with_reference=doc.get("with_reference", True),
    )


def claimset_to_doc(cs: ScoredClaimSet) -> dict:
    return {
        "record_id": cs.record_id,
        "scorer_id": cs.scorer_id,
        "claims": [dict(_claim_to_doc(c), score=s) for c, s in cs.claims],
    }


def claimset_from_doc(doc: dict) -> ScoredClaimSet:
    return ScoredClaimSet(
        record_id=doc["record_id"],
        scorer_id=doc.get("scorer_id", ""),
        claims=[(_claim_from_doc(c), c["score"]) for c in doc["claims"]],
    )


def write_jsonl(path, docs: Iterable[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc, ensure_ascii=False) + "\n")


def read_jsonl(path) -> list:
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusIOError(f"cannot read {path}: {exc}") from exc
    docs = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            docs.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise CorpusIOError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
    return docs


def load_records(path) -> list:
    return [record_from_doc(d) for d in read_jsonl(path)]


def save_records(path, records: Sequence[QueryRecord]) -> None:
    write_jsonl(path, (record_to_doc(r) for r in records))


def load_claimsets(path) -> list:
    return [claimset_from_doc(d) for d in read_jsonl(path)]


def save_claimsets(path, sets: Sequence[ScoredClaimSet]) -> None:
    write_jsonl(path, (claimset_to_doc(cs) for cs in sets))
