"""Synthetic distributions with exact coverage oracles.

Sampling is inverse-CDF over a materialized probability vector, driven by
NumPy's PCG64 generator.  Per-trial generators derive from the entropy tuple
(master seed, cell index, trial index), so sweep results are reproducible and
trials could be farmed out in parallel without changing a single draw.
"""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .counts import KNOWN_TRUTH, CountTable, EmpiricalDistribution, FreqOfFreqs, StateKey
from .errors import InputError, InvariantViolation
from .estimators import ESTIMATOR_MODES, mass_estimate

__all__ = [
    "GENERATOR_NAME",
    "STATE_FACTOR",
    "SyntheticDistribution",
    "zipf_distribution",
    "geometric_distribution",
    "uniform_distribution",
    "custom_distribution",
    "family_distribution",
    "state_key",
    "state_index",
    "known_truth",
    "sample",
    "true_blind_mass",
    "SweepCell",
    "ModeStats",
    "CellStats",
    "SweepResult",
    "run_sweep",
]

GENERATOR_NAME = "PCG64"
STATE_FACTOR = "state"

_DIST_SUM_TOL = 1e-12


@dataclass(frozen=True)
class SyntheticDistribution:
    """A fully known distribution over states s0..s(K-1)."""

    family: str
    size: int
    params: tuple[tuple[str, float], ...]
    probs: np.ndarray

    def __post_init__(self):
        size = operator.index(self.size)
        if size < 1:
            raise InputError(f"distribution size must be >= 1, got {size}")
        probs = np.array(self.probs, dtype=float)
        if probs.shape != (size,):
            raise InputError(f"probs must have shape ({size},), got {probs.shape}")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise InputError("probabilities must be finite and >= 0")
        if abs(math.fsum(probs.tolist()) - 1.0) > _DIST_SUM_TOL:
            raise InputError(f"probabilities must sum to 1 within {_DIST_SUM_TOL}")
        probs.setflags(write=False)
        cum = np.cumsum(probs)
        cum[-1] = 1.0
        cum.setflags(write=False)
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "params", tuple((str(k), float(v)) for k, v in self.params))
        object.__setattr__(self, "_cum", cum)


def _normalized(weights: np.ndarray) -> np.ndarray:
    total = math.fsum(weights.tolist())
    if not (total > 0 and math.isfinite(total)):
        raise InputError("weights must have a positive finite sum")
    return weights / total


def zipf_distribution(size, exponent) -> SyntheticDistribution:
    """Entry i gets weight 1/(i+1)**exponent (ranks start at 1)."""
    size = operator.index(size)
    if size < 1:
        raise InputError(f"size must be >= 1, got {size}")
    exponent = float(exponent)
    if not exponent >= 0:
        raise InputError(f"zipf exponent must be >= 0, got {exponent}")
    w = 1.0 / np.arange(1, size + 1, dtype=float) ** exponent
    return SyntheticDistribution("zipf", size, (("s", exponent),), _normalized(w))


def geometric_distribution(size, ratio) -> SyntheticDistribution:
    size = operator.index(size)
    if size < 1:
        raise InputError(f"size must be >= 1, got {size}")
    ratio = float(ratio)
    if not 0.0 < ratio < 1.0:
        raise InputError(f"geometric ratio must lie in (0, 1), got {ratio}")
    w = ratio ** np.arange(size, dtype=float)
    return SyntheticDistribution("geometric", size, (("ratio", ratio),), _normalized(w))


def uniform_distribution(size) -> SyntheticDistribution:
    size = operator.index(size)
    if size < 1:
        raise InputError(f"size must be >= 1, got {size}")
    w = np.ones(size, dtype=float)
    return SyntheticDistribution("uniform", size, (), _normalized(w))


def custom_distribution(probs) -> SyntheticDistribution:
    w = np.asarray(probs, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise InputError("custom probabilities must be a non-empty 1-D vector")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InputError("custom probabilities must be finite and >= 0")
    return SyntheticDistribution("custom", int(w.size), (), _normalized(w))


_FAMILY_PARAMS = {"zipf": ("s",), "geometric": ("ratio",), "uniform": ()}


def family_distribution(family: str, size, params: Mapping[str, float]) -> SyntheticDistribution:
    if family not in _FAMILY_PARAMS:
        raise InputError(f"unknown family {family!r}; choose from {sorted(_FAMILY_PARAMS)}")
    expected = _FAMILY_PARAMS[family]
    if tuple(sorted(params)) != tuple(sorted(expected)):
        raise InputError(
            f"family {family!r} takes parameters {list(expected)}, got {sorted(params)}"
        )
    if family == "zipf":
        return zipf_distribution(size, params["s"])
    if family == "geometric":
        return geometric_distribution(size, params["ratio"])
    return uniform_distribution(size)


def state_key(index) -> StateKey:
    index = operator.index(index)
    if index < 0:
        raise InputError(f"state index must be >= 0, got {index}")
    return StateKey(((STATE_FACTOR, f"s{index}"),))


def state_index(dist: SyntheticDistribution, key: StateKey) -> int:
    """Parse a synthetic state key back to its index, rejecting anything
    outside the distribution's state set."""
    if key.names != (STATE_FACTOR,):
        raise InputError(f"key {key.serialize()!r} is not a synthetic state (factor {STATE_FACTOR!r})")
    value = key.values[0]
    if not (value.startswith("s") and value[1:].isdigit()):
        raise InputError(f"malformed synthetic state value {value!r}")
    i = int(value[1:])
    if not 0 <= i < dist.size:
        raise InputError(f"state index {i} outside 0..{dist.size - 1}")
    return i


def known_truth(dist: SyntheticDistribution) -> EmpiricalDistribution:
    """The same distribution keyed by StateKey, for the estimator-facing API."""
    return EmpiricalDistribution(
        probs={state_key(i): float(p) for i, p in enumerate(dist.probs)},
        source=KNOWN_TRUTH,
    )


def _sample_indices(dist: SyntheticDistribution, n: int, seed) -> np.ndarray:
    n = operator.index(n)
    if n < 1:
        raise InputError(f"sample size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    idx = np.searchsorted(dist._cum, u, side="right")
    return np.minimum(idx, dist.size - 1)


def sample(dist: SyntheticDistribution, n, seed) -> list[StateKey]:
    """Draw n i.i.d. states; identical (dist, n, seed) gives identical draws."""
    idx = _sample_indices(dist, n, seed)
    lut = {int(i): state_key(int(i)) for i in np.unique(idx)}
    return [lut[int(i)] for i in idx]


def _counts_vector(dist: SyntheticDistribution, table: CountTable) -> np.ndarray:
    counts = np.zeros(dist.size, dtype=np.int64)
    for key, c in table.counts.items():
        counts[state_index(dist, key)] = c
    return counts


def _true_mass_from_counts(dist: SyntheticDistribution, counts: np.ndarray, tau: int) -> float:
    blind = counts < tau
    return math.fsum(dist.probs[blind].tolist())


def true_blind_mass(dist: SyntheticDistribution, table: CountTable, tau) -> float:
    """Exact blind mass: sum of true probabilities of every state (seen or
    not) whose table count is below tau."""
    tau = operator.index(tau)
    if tau < 1:
        raise InputError(f"tau must be >= 1, got {tau}")
    return _true_mass_from_counts(dist, _counts_vector(dist, table), tau)


def _freqs_from_counts(counts: np.ndarray, n: int) -> FreqOfFreqs:
    observed = counts[counts > 0]
    rs, fs = np.unique(observed, return_counts=True)
    return FreqOfFreqs(
        f={int(r): int(c) for r, c in zip(rs, fs)}, n=n, k_observed=int(observed.size)
    )


@dataclass(frozen=True)
class SweepCell:
    family: str
    params: tuple[tuple[str, float], ...]
    size: int
    n: int
    tau: int

    def __post_init__(self):
        if self.family not in _FAMILY_PARAMS:
            raise InputError(f"unknown family {self.family!r}")
        object.__setattr__(self, "params", tuple((str(k), float(v)) for k, v in self.params))
        for name in ("size", "n", "tau"):
            v = operator.index(getattr(self, name))
            if v < 1:
                raise InputError(f"{name} must be >= 1, got {v}")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class ModeStats:
    mode: str
    mean: float
    std: float
    mean_abs_error: float


@dataclass(frozen=True)
class CellStats:
    cell: SweepCell
    trials: int
    true_mean: float
    true_std: float
    estimates: tuple[ModeStats, ...]

    def __post_init__(self):
        for m in (self.true_mean,) + tuple(e.mean for e in self.estimates):
            if not 0.0 <= m <= 1.0:
                raise InvariantViolation(f"sweep mean out of [0,1]: {m}")


@dataclass(frozen=True)
class SweepResult:
    cells: tuple[CellStats, ...]
    trials: int
    master_seed: int
    generator: str = GENERATOR_NAME


def _mean(values) -> float:
    return math.fsum(values) / len(values)


def _std(values, center) -> float:
    if len(values) < 2:
        return 0.0
    return math.sqrt(math.fsum((v - center) ** 2 for v in values) / (len(values) - 1))


def run_sweep(cells: Sequence[SweepCell], trials, master_seed) -> SweepResult:
    """Monte-Carlo comparison of every estimator mode against the exact blind
    mass, cell by cell.

    Per trial: draw n samples, tabulate counts, record the true blind mass and
    each mode's estimate at the cell's tau.  Reported per cell: mean and
    sample standard deviation of the truth and of each mode, plus each mode's
    mean absolute error against the paired truth.
    """
    trials = operator.index(trials)
    if trials < 1:
        raise InputError(f"trials must be >= 1, got {trials}")
    master_seed = operator.index(master_seed)
    cells = list(cells)
    if not cells:
        raise InputError("sweep needs at least one cell")
    out = []
    for ci, cell in enumerate(cells):
        dist = family_distribution(cell.family, cell.size, dict(cell.params))
        true_vals = []
        est_vals = {mode: [] for mode in ESTIMATOR_MODES}
        for t in range(trials):
            seed = np.random.SeedSequence((master_seed, ci, t))
            idx = _sample_indices(dist, cell.n, seed)
            counts = np.bincount(idx, minlength=cell.size)
            true_vals.append(_true_mass_from_counts(dist, counts, cell.tau))
            fof = _freqs_from_counts(counts, cell.n)
            for mode in ESTIMATOR_MODES:
                est_vals[mode].append(mass_estimate(fof, cell.tau, mode))
        true_mean = _mean(true_vals)
        estimates = []
        for mode in ESTIMATOR_MODES:
            vals = est_vals[mode]
            mean = _mean(vals)
            estimates.append(
                ModeStats(
                    mode=mode,
                    mean=mean,
                    std=_std(vals, mean),
                    mean_abs_error=_mean([abs(e - t) for e, t in zip(vals, true_vals)]),
                )
            )
        out.append(
            CellStats(
                cell=cell,
                trials=trials,
                true_mean=true_mean,
                true_std=_std(true_vals, true_mean),
                estimates=tuple(estimates),
            )
        )
    return SweepResult(cells=tuple(out), trials=trials, master_seed=master_seed)
