"""Entailment triples and the HTTP client for the entailment microservice.

Wire protocol: POST ``/v1/entail`` with ``{"pairs": [{"premise", "hypothesis"}]}``
returns ``{"triples": [{"entailment", "neutral", "contradiction"}]}`` in
request order. Premise is the reference (or one of its sentences); hypothesis
is the claim.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Sequence

import httpx

from .errors import DataError, ProtocolError, TransportError

_SUM_TOL = 1e-6


@dataclass(frozen=True)
class EntailmentTriple:
    """Probability distribution over {entailment, neutral, contradiction}."""

    entailment: float
    neutral: float
    contradiction: float

    def __post_init__(self):
        for name, v in (
            ("entailment", self.entailment),
            ("neutral", self.neutral),
            ("contradiction", self.contradiction),
        ):
            if not 0.0 <= v <= 1.0:
                raise DataError(f"{name} component {v} outside [0, 1]")
        total = self.entailment + self.neutral + self.contradiction
        if abs(total - 1.0) > _SUM_TOL:
            raise DataError(f"triple components sum to {total}, expected 1")

    def argmax_label(self) -> str:
        pairs = [
            ("entailment", self.entailment),
            ("neutral", self.neutral),
            ("contradiction", self.contradiction),
        ]
        return max(pairs, key=lambda p: p[1])[0]


class NliClient:
    """Small retrying client for the entailment service.

    ``transport`` lets tests mount an in-process ASGI app instead of opening
    a socket. All requests are idempotent, so retries are safe.
    """

    def __init__(
        self,
        base_url: str,
        timeout: float = 30.0,
        retries: int = 3,
        backoff: float = 0.5,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.retries = retries
        self.backoff = backoff
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def entail(self, pairs: Sequence[tuple]) -> list:
        """Score (premise, hypothesis) pairs; returns EntailmentTriples in order."""
        body = {"pairs": [{"premise": p, "hypothesis": h} for p, h in pairs]}
        last_exc = None
        for attempt in range(self.retries):
            try:
                resp = self._client.post(f"{self.base_url}/v1/entail", json=body)
                resp.raise_for_status()
                return self._parse(resp.json(), expected=len(pairs))
            except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                last_exc = exc
                if attempt + 1 < self.retries:
                    time.sleep(self.backoff * 2**attempt)
        raise TransportError(f"entailment service unreachable: {last_exc}") from last_exc

    @staticmethod
    def _parse(doc, expected: int) -> list:
        try:
            raw = doc["triples"]
            triples = [
                EntailmentTriple(
                    entailment=t["entailment"],
                    neutral=t["neutral"],
                    contradiction=t["contradiction"],
                )
                for t in raw
            ]
        except (KeyError, TypeError, DataError) as exc:
            raise ProtocolError(f"malformed entailment response: {exc}") from exc
        if len(triples) != expected:
            raise ProtocolError(
                f"expected {expected} triples, got {len(triples)}"
            )
        return triples

    def close(self) -> None:
        self._client.close()
