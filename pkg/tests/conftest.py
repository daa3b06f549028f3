"""Shared fixture builders for the test suite."""

import random

from confilter.records import Claim, ScoredClaimSet


def make_set(record_id, pairs, scorer_id="synthetic"):
    """Build a ScoredClaimSet from (label, score) pairs."""
    claims = [
        (Claim(id=f"{record_id}-c{i}", text=f"claim {i}", label=label), score)
        for i, (label, score) in enumerate(pairs)
    ]
    return ScoredClaimSet(record_id=record_id, claims=claims, scorer_id=scorer_id)


def random_set(rng: random.Random, record_id, max_claims=10, allow_empty=True):
    """Random labeled claim set with scores in [0, 1]."""
    low = 0 if allow_empty else 1
    n = rng.randint(low, max_claims)
    pairs = [(rng.random() < 0.6, rng.random()) for _ in range(n)]
    return make_set(record_id, pairs)
