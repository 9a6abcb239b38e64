"""Shared builders for states and count tables."""

from __future__ import annotations

import random
from pathlib import Path

from blindspot import CountTable, StateKey

DATA_DIR = Path(__file__).parent / "data"


def key(**factors) -> StateKey:
    """StateKey from keyword arguments, factor order as written."""
    return StateKey(tuple(factors.items()))


def table_of(counts, factor: str = "activity") -> CountTable:
    """Single-factor count table from a {value: count} mapping."""
    mapped = {key(**{factor: value}): c for value, c in counts.items()}
    return CountTable(counts=mapped, n=sum(counts.values()), schema=(factor,))


def random_single_table(rng: random.Random, max_states: int = 40, max_count: int = 20) -> CountTable:
    k = rng.randint(1, max_states)
    values = rng.sample(range(max_states * 10), k)
    counts = {f"v{v}": rng.randint(1, max_count) for v in values}
    return table_of(counts, factor="s")


def random_multi_table(rng: random.Random, max_count: int = 12) -> CountTable:
    """Random 3-factor table with small per-factor alphabets (collisions are
    the point: coarsening must merge them)."""
    sizes = (rng.randint(2, 4), rng.randint(2, 4), rng.randint(2, 4))
    counts: dict[StateKey, int] = {}
    for _ in range(rng.randint(2, 25)):
        state = key(
            a=f"a{rng.randrange(sizes[0])}",
            b=f"b{rng.randrange(sizes[1])}",
            c=f"c{rng.randrange(sizes[2])}",
        )
        counts[state] = counts.get(state, 0) + rng.randint(1, max_count)
    return CountTable(counts=counts, n=sum(counts.values()), schema=("a", "b", "c"))


# replayed activity-count table used across estimator and CLI tests
ACTIVITY_COUNTS = {
    "Walking": 307,
    "Stairs up": 134,
    "Stairs down": 144,
    "Front fall": 122,
    "Backward fall": 122,
    "Sitting": 121,
    "Standing": 121,
    "Lying": 121,
    "Running": 121,
    "Cycling": 121,
    "Bending": 120,
    "Jumping": 120,
}
