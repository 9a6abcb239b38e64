"""Count structures over an operational state space.

A state is an ordered tuple of named categorical factors.  Tables keep exact
integer counts and store only observed states, so the frequency-of-frequencies
identities hold without floating-point slack; probabilities appear only in
derived empirical distributions.
"""

from __future__ import annotations

import math
import operator
from collections import Counter
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from .errors import InputError

__all__ = [
    "StateKey",
    "CountTable",
    "FreqOfFreqs",
    "EmpiricalDistribution",
    "PLUG_IN",
    "KNOWN_TRUTH",
    "build_count_table",
    "freq_of_freqs",
    "plug_in_distribution",
    "coarsen",
]

PLUG_IN = "plug-in"
KNOWN_TRUTH = "known-truth"

# probability vectors must sum to 1 within this slack
PROB_SUM_TOL = 1e-9

# reserved by the name=value|name=value serialization
_FORBIDDEN_CHARS = ("=", "|", "\t", "\n", "\r")


def _clean_token(text, what: str) -> str:
    if not isinstance(text, str):
        raise InputError(f"{what} must be a string, got {type(text).__name__}")
    if not text or text != text.strip():
        raise InputError(
            f"{what} must be non-empty without leading/trailing whitespace: {text!r}"
        )
    for ch in _FORBIDDEN_CHARS:
        if ch in text:
            raise InputError(f"{what} may not contain {ch!r}: {text!r}")
    return text


def _coerce_value(value) -> str:
    """Factor values are stored as strings; integers are accepted and coerced
    so keys serialize, order, and round-trip deterministically."""
    if isinstance(value, str):
        return _clean_token(value, "factor value")
    if isinstance(value, bool):
        raise InputError("factor value may not be a bool")
    try:
        return str(operator.index(value))
    except TypeError:
        raise InputError(
            f"factor value must be a string or integer, got {type(value).__name__}"
        ) from None


@dataclass(frozen=True)
class StateKey:
    """One operational state: an ordered tuple of (factor name, value) pairs.

    Factor names and values may not contain ``=``, ``|``, tabs, or newlines,
    which keeps the ``name=value|name=value`` serialization reversible.
    """

    factors: tuple[tuple[str, str], ...]

    def __post_init__(self):
        pairs = []
        for pair in self.factors:
            try:
                name, value = pair
            except (TypeError, ValueError):
                raise InputError(f"factor entry must be a (name, value) pair: {pair!r}") from None
            pairs.append((_clean_token(name, "factor name"), _coerce_value(value)))
        if not pairs:
            raise InputError("a state key needs at least one factor")
        names = [n for n, _ in pairs]
        if len(set(names)) != len(names):
            raise InputError(f"duplicate factor names in state key: {names}")
        object.__setattr__(self, "factors", tuple(pairs))

    @classmethod
    def from_values(cls, schema: Sequence[str], values: Sequence) -> "StateKey":
        if len(schema) != len(values):
            raise InputError(
                f"expected {len(schema)} factor values for schema {tuple(schema)}, got {len(values)}"
            )
        return cls(tuple(zip(schema, values)))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.factors)

    @property
    def values(self) -> tuple[str, ...]:
        return tuple(v for _, v in self.factors)

    @property
    def sort_key(self) -> tuple[str, ...]:
        """Deterministic ordering: lexicographic on factor values."""
        return self.values

    def value_of(self, name: str) -> str:
        for n, v in self.factors:
            if n == name:
                return v
        raise InputError(f"state key has no factor named {name!r}")

    def project(self, names: Sequence[str]) -> "StateKey":
        return StateKey(tuple((n, self.value_of(n)) for n in names))

    def serialize(self) -> str:
        return "|".join(f"{n}={v}" for n, v in self.factors)

    @classmethod
    def parse(cls, text: str) -> "StateKey":
        pairs = []
        for part in text.split("|"):
            name, sep, value = part.partition("=")
            if not sep:
                raise InputError(f"bad state key field {part!r} in {text!r} (expected name=value)")
            pairs.append((name, value))
        return cls(tuple(pairs))

    def __str__(self) -> str:
        return self.serialize()


def _check_schema(schema) -> tuple[str, ...]:
    if isinstance(schema, str):
        raise InputError("schema must be a sequence of factor names, not a single string")
    out = tuple(_clean_token(s, "factor name") for s in schema)
    if not out:
        raise InputError("schema must name at least one factor")
    if len(set(out)) != len(out):
        raise InputError(f"schema has duplicate factor names: {list(out)}")
    return out


@dataclass(frozen=True)
class CountTable:
    """Exact observation counts over states sharing one factor schema.

    Only observed states are stored (every stored count is >= 1); the count of
    any other state is 0 by definition.  ``n`` is the total number of
    observations and always equals the sum of stored counts.
    """

    counts: Mapping["StateKey", int]
    n: int
    schema: tuple[str, ...]

    def __post_init__(self):
        schema = _check_schema(self.schema)
        snapshot: dict[StateKey, int] = {}
        total = 0
        for key, raw in self.counts.items():
            if not isinstance(key, StateKey):
                raise InputError(f"count table keys must be StateKey, got {type(key).__name__}")
            if key.names != schema:
                raise InputError(
                    f"state {key.serialize()!r} does not match schema {list(schema)}"
                )
            try:
                c = operator.index(raw)
            except TypeError:
                raise InputError(f"count for {key.serialize()!r} must be an integer") from None
            if c < 1:
                raise InputError(f"stored counts must be >= 1, got {c} for {key.serialize()!r}")
            snapshot[key] = c
            total += c
        try:
            n = operator.index(self.n)
        except TypeError:
            raise InputError("n must be an integer") from None
        if n < 1:
            raise InputError("a count table needs at least one observation (n >= 1)")
        if total != n:
            raise InputError(f"counts sum to {total} but n={n}")
        object.__setattr__(self, "counts", MappingProxyType(snapshot))
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "schema", schema)

    @property
    def k_observed(self) -> int:
        return len(self.counts)

    def count(self, key: "StateKey") -> int:
        return self.counts.get(key, 0)

    def sorted_items(self) -> list[tuple["StateKey", int]]:
        return sorted(self.counts.items(), key=lambda kv: kv[0].sort_key)


@dataclass(frozen=True)
class FreqOfFreqs:
    """How many states were seen exactly r times, for each observed r."""

    f: Mapping[int, int]
    n: int
    k_observed: int

    def __post_init__(self):
        snapshot: dict[int, int] = {}
        mass = 0
        states = 0
        for r, fr in self.f.items():
            r = operator.index(r)
            fr = operator.index(fr)
            if r < 1 or fr < 1:
                raise InputError(f"frequency-of-frequencies entries must be >= 1, got f[{r}]={fr}")
            snapshot[r] = fr
            mass += r * fr
            states += fr
        if mass != self.n:
            raise InputError(f"sum of r*f_r is {mass} but n={self.n}")
        if states != self.k_observed:
            raise InputError(f"sum of f_r is {states} but k_observed={self.k_observed}")
        object.__setattr__(self, "f", MappingProxyType(snapshot))

    @property
    def singletons(self) -> int:
        return self.f.get(1, 0)


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Probability per state.

    ``source`` records how the distribution arose: "plug-in" (relative counts
    from a table) or "known-truth" (synthetic ground truth).  States outside
    ``probs`` have probability 0.
    """

    probs: Mapping["StateKey", float]
    source: str

    def __post_init__(self):
        if self.source not in (PLUG_IN, KNOWN_TRUTH):
            raise InputError(f"source must be {PLUG_IN!r} or {KNOWN_TRUTH!r}, got {self.source!r}")
        snapshot: dict[StateKey, float] = {}
        for key, p in self.probs.items():
            if not isinstance(key, StateKey):
                raise InputError("distribution keys must be StateKey")
            p = float(p)
            if not (0.0 <= p <= 1.0):
                raise InputError(f"probability out of [0,1] for {key.serialize()!r}: {p}")
            snapshot[key] = p
        if abs(math.fsum(snapshot.values()) - 1.0) > PROB_SUM_TOL:
            raise InputError(
                f"probabilities sum to {math.fsum(snapshot.values())!r}, expected 1 within {PROB_SUM_TOL}"
            )
        object.__setattr__(self, "probs", MappingProxyType(snapshot))

    def prob(self, key: "StateKey") -> float:
        return self.probs.get(key, 0.0)


def build_count_table(samples: Iterable["StateKey"], schema: Sequence[str]) -> CountTable:
    """Count a sequence of state observations.

    Every sample must carry exactly the factors named by ``schema``, in order;
    the first offending sample is reported by index.  An empty sequence is
    rejected: with n=0 every downstream estimate is undefined.
    """
    schema = _check_schema(schema)
    counts: dict[StateKey, int] = {}
    n = 0
    for i, key in enumerate(samples):
        if not isinstance(key, StateKey):
            raise InputError(f"sample {i} is not a StateKey (got {type(key).__name__})")
        if key.names != schema:
            _raise_sample_mismatch(i, key, schema)
        counts[key] = counts.get(key, 0) + 1
        n += 1
    if n == 0:
        raise InputError("no samples given: a count table needs at least one observation")
    return CountTable(counts=counts, n=n, schema=schema)


def _raise_sample_mismatch(i: int, key: StateKey, schema: tuple[str, ...]):
    names = key.names
    for pos in range(min(len(names), len(schema))):
        if names[pos] != schema[pos]:
            raise InputError(
                f"sample {i}: factor {names[pos]!r} at position {pos} does not match "
                f"schema factor {schema[pos]!r}"
            )
    raise InputError(f"sample {i}: expected factors {list(schema)}, got {list(names)}")


def freq_of_freqs(table: CountTable) -> FreqOfFreqs:
    """Tabulate f_r = number of states observed exactly r times."""
    f = Counter(table.counts.values())
    return FreqOfFreqs(f=dict(f), n=table.n, k_observed=table.k_observed)


def plug_in_distribution(table: CountTable) -> EmpiricalDistribution:
    """Relative frequencies count/n over the observed states."""
    n = table.n
    return EmpiricalDistribution(
        probs={key: c / n for key, c in table.counts.items()}, source=PLUG_IN
    )


def coarsen(table: CountTable, projection: Sequence[str]) -> CountTable:
    """Project the state space onto a subset of factors, summing counts of
    states that collide.

    The retained factors keep their schema order no matter how ``projection``
    is ordered.  Total observations are preserved; merging can only increase
    per-state support.
    """
    if isinstance(projection, str):
        raise InputError("projection must be a sequence of factor names, not a single string")
    proj = tuple(projection)
    if not proj:
        raise InputError("projection must retain at least one factor")
    if len(set(proj)) != len(proj):
        raise InputError(f"projection has duplicate factor names: {list(proj)}")
    missing = [p for p in proj if p not in table.schema]
    if missing:
        raise InputError(f"projection names factors absent from schema {list(table.schema)}: {missing}")
    retained = tuple(name for name in table.schema if name in proj)
    merged: dict[StateKey, int] = {}
    for key, c in table.counts.items():
        coarse = key.project(retained)
        merged[coarse] = merged.get(coarse, 0) + c
    return CountTable(counts=merged, n=table.n, schema=retained)
