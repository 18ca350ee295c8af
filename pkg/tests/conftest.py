import random

import pytest

from pboxcdf.pbox import (
    ObservationSet,
    PboxInterval,
    convex_interval,
    empirical_cdf,
    envelope,
    point_mass,
)


def random_observations(rng: random.Random, min_entries: int = 2, max_entries: int = 8) -> ObservationSet:
    n = rng.randint(min_entries, max_entries)
    start = rng.uniform(-50.0, 50.0)
    qs = []
    q = start
    for _ in range(n):
        q += rng.uniform(0.1, 20.0)
        qs.append(q)
    return ObservationSet(tuple((q, rng.randint(1, 9)) for q in qs))


def random_envelope(rng: random.Random) -> PboxInterval:
    return envelope(empirical_cdf(random_observations(rng)))


def random_domain(rng: random.Random) -> PboxInterval:
    """Mixed population: envelopes, convex embeddings and point masses."""
    roll = rng.random()
    if roll < 0.6:
        return random_envelope(rng)
    if roll < 0.85:
        lo = rng.uniform(-100.0, 100.0)
        return convex_interval(lo, lo + rng.uniform(0.0, 80.0))
    return point_mass(rng.uniform(-100.0, 100.0))


@pytest.fixture
def rng():
    return random.Random(20260810)
