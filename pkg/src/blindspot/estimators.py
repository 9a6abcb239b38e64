"""Coverage-risk estimators over count tables.

A state is *supported* at threshold tau when its observed count is at least
tau and *blind* otherwise; unseen states are blind at every threshold.  The
blind mass of a distribution P is

    B(tau) = sum_x P(x) * 1{count(x) < tau}

Three estimator modes evaluate B(tau) from a table alone:

``plugin``
    sum of count/n over observed states with 1 <= count < tau.  Assigns zero
    to unseen states; the default and reference mode.
``plugin+unseen``
    plugin plus the missing-mass estimate f1/n (f1 = number of singletons),
    clamped to 1.  Corrects the plug-in's blindness to never-seen states.
``generalized-gt``
    sum over r in [0, tau) of (r+1) * f_{r+1} / n, a frequency-smoothed
    estimate of the mass at counts below tau.  At tau=1 it reduces to f1/n.
    This mode extrapolates beyond the plug-in definition and is flagged as an
    extension wherever it appears in output metadata.
"""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass
from statistics import NormalDist
from typing import Iterable, Mapping, Optional, Sequence

from .counts import (
    KNOWN_TRUTH,
    CountTable,
    EmpiricalDistribution,
    FreqOfFreqs,
    StateKey,
    freq_of_freqs,
)
from .errors import InputError

__all__ = [
    "MODE_PLUGIN",
    "MODE_PLUGIN_UNSEEN",
    "MODE_GENERALIZED_GT",
    "ESTIMATOR_MODES",
    "EXTENSION_MODE_NOTES",
    "BlindSpotCurve",
    "RiskWeights",
    "DecompositionEntry",
    "BlindnessDecomposition",
    "CeilingCurve",
    "MixtureDecomposition",
    "blind_spot_mass",
    "blind_spot_curve",
    "curve_from_freqs",
    "mass_estimate",
    "good_turing_unseen_mass",
    "risk_weighted_blindness",
    "blindness_decomposition",
    "accuracy_ceiling",
    "ceiling_curve",
    "chance_accuracy",
    "mixture_decomposition",
    "wilson_interval",
]

MODE_PLUGIN = "plugin"
MODE_PLUGIN_UNSEEN = "plugin+unseen"
MODE_GENERALIZED_GT = "generalized-gt"
ESTIMATOR_MODES = (MODE_PLUGIN, MODE_PLUGIN_UNSEEN, MODE_GENERALIZED_GT)

# modes that go beyond the plug-in definition; reports must surface the note
EXTENSION_MODE_NOTES = {
    MODE_GENERALIZED_GT: (
        "extension: frequency-smoothed low-count mass from the counts-(r+1) "
        "spectrum, not a plug-in evaluation"
    ),
}


def _check_tau(tau) -> int:
    try:
        tau = operator.index(tau)
    except TypeError:
        raise InputError(f"tau must be an integer, got {type(tau).__name__}") from None
    if tau < 1:
        raise InputError(
            f"tau must be >= 1 (a support threshold requires at least one observation), got {tau}"
        )
    return tau


def _check_mode(mode: str) -> str:
    if mode not in ESTIMATOR_MODES:
        raise InputError(f"unknown estimator mode {mode!r}; choose from {list(ESTIMATOR_MODES)}")
    return mode


def _check_unit(x, what: str) -> float:
    try:
        x = float(x)
    except (TypeError, ValueError):
        raise InputError(f"{what} must be a number, got {x!r}") from None
    if not (0.0 <= x <= 1.0):
        raise InputError(f"{what} must lie in [0, 1], got {x}")
    return x


def _check_support_superset(table: CountTable, dist: EmpiricalDistribution):
    # a known-truth distribution must assign probability to every observed state
    if dist.source == KNOWN_TRUTH:
        for key in table.counts:
            if key not in dist.probs:
                raise InputError(
                    f"known-truth distribution lacks observed state {key.serialize()!r}"
                )


@dataclass(frozen=True)
class BlindSpotCurve:
    """Estimated blind mass per threshold, tau = 1..tau_max."""

    points: tuple[tuple[int, float], ...]
    estimator_mode: str
    n: int
    k_observed: int

    def __post_init__(self):
        _check_mode(self.estimator_mode)
        prev_tau = 0
        prev_mass = -0.0
        for tau, mass in self.points:
            if tau <= prev_tau:
                raise InputError("curve thresholds must be strictly increasing")
            if not (0.0 <= mass <= 1.0):
                raise InputError(f"curve mass out of [0,1] at tau={tau}: {mass}")
            if mass < prev_mass:
                raise InputError(f"curve mass decreased at tau={tau}")
            prev_tau, prev_mass = tau, mass

    @property
    def taus(self) -> tuple[int, ...]:
        return tuple(t for t, _ in self.points)

    @property
    def masses(self) -> tuple[float, ...]:
        return tuple(m for _, m in self.points)

    def mass_at(self, tau: int) -> float:
        for t, m in self.points:
            if t == tau:
                return m
        raise InputError(f"curve has no point at tau={tau}")


def blind_spot_mass(table: CountTable, dist: EmpiricalDistribution, tau) -> float:
    """Mass of ``dist`` sitting on states whose table count is below tau.

    With a plug-in distribution this is the plugin estimate; with a
    known-truth distribution it is the exact blind mass (the distribution's
    support must cover every observed state).
    """
    tau = _check_tau(tau)
    _check_support_superset(table, dist)
    return math.fsum(p for key, p in dist.probs.items() if table.count(key) < tau)


def _cumulative_numerators(f: Mapping[int, int], tau_max: int) -> list[int]:
    # nums[i] = sum_{r<=i} r*f_r, exact integers; plugin numerator at tau is
    # nums[tau-1], generalized-gt numerator at tau is nums[tau]
    nums = [0] * (tau_max + 1)
    acc = 0
    for i in range(1, tau_max + 1):
        acc += i * f.get(i, 0)
        nums[i] = acc
    return nums


def mass_estimate(fof: FreqOfFreqs, tau, mode: str = MODE_PLUGIN) -> float:
    """Single-threshold blind-mass estimate from a frequency-of-frequencies."""
    tau = _check_tau(tau)
    _check_mode(mode)
    n = fof.n
    if mode == MODE_PLUGIN:
        num = sum(r * fr for r, fr in fof.f.items() if r < tau)
        return num / n
    if mode == MODE_PLUGIN_UNSEEN:
        num = sum(r * fr for r, fr in fof.f.items() if r < tau)
        return min(1.0, (num + fof.singletons) / n)
    num = sum(r * fr for r, fr in fof.f.items() if r <= tau)
    return num / n


def blind_spot_curve(table: CountTable, tau_max, mode: str = MODE_PLUGIN) -> BlindSpotCurve:
    """Evaluate one estimator mode at every threshold 1..tau_max."""
    return curve_from_freqs(freq_of_freqs(table), tau_max, mode)


def curve_from_freqs(fof: FreqOfFreqs, tau_max, mode: str = MODE_PLUGIN) -> BlindSpotCurve:
    tau_max = _check_tau(tau_max)
    _check_mode(mode)
    n = fof.n
    nums = _cumulative_numerators(fof.f, tau_max)
    f1 = fof.singletons
    points = []
    for tau in range(1, tau_max + 1):
        if mode == MODE_PLUGIN:
            mass = nums[tau - 1] / n
        elif mode == MODE_PLUGIN_UNSEEN:
            mass = min(1.0, (nums[tau - 1] + f1) / n)
        else:
            mass = nums[tau] / n
        points.append((tau, mass))
    return BlindSpotCurve(
        points=tuple(points), estimator_mode=mode, n=n, k_observed=fof.k_observed
    )


def good_turing_unseen_mass(fof: FreqOfFreqs) -> float:
    """Missing-mass estimate f1/n: the share of observations that were
    singletons.  Zero when no state was seen exactly once."""
    return fof.singletons / fof.n


@dataclass(frozen=True)
class RiskWeights:
    """Per-state cost weights in [0, inf); unlisted states get the default."""

    weights: Mapping[StateKey, float]
    default_weight: float = 1.0

    def __post_init__(self):
        snapshot: dict[StateKey, float] = {}
        for key, w in self.weights.items():
            if not isinstance(key, StateKey):
                raise InputError("risk weight keys must be StateKey")
            w = float(w)
            if not (w >= 0.0 and math.isfinite(w)):
                raise InputError(f"risk weight for {key.serialize()!r} must be finite and >= 0, got {w}")
            snapshot[key] = w
        default = float(self.default_weight)
        if not (default >= 0.0 and math.isfinite(default)):
            raise InputError(f"default risk weight must be finite and >= 0, got {default}")
        object.__setattr__(self, "weights", snapshot)
        object.__setattr__(self, "default_weight", default)

    def weight(self, key: StateKey) -> float:
        return self.weights.get(key, self.default_weight)


@dataclass(frozen=True)
class DecompositionEntry:
    state: StateKey
    count: int
    prob: float
    weight: float
    contribution: float


@dataclass(frozen=True)
class BlindnessDecomposition:
    """Per-state contributions to a blindness estimate at one threshold.

    Entries are sorted by contribution (descending), ties broken
    lexicographically by state values.  ``total`` always reflects the full,
    untruncated sum even when the entry list was cut to a top-k prefix.
    """

    entries: tuple[DecompositionEntry, ...]
    tau: int
    total: float

    def __post_init__(self):
        prev = None
        for e in self.entries:
            if e.count >= self.tau:
                raise InputError(
                    f"decomposition entry {e.state.serialize()!r} has count {e.count} >= tau={self.tau}"
                )
            rank = (-e.contribution, e.state.sort_key)
            if prev is not None and rank < prev:
                raise InputError("decomposition entries are not sorted")
            prev = rank
        if not (math.isfinite(self.total) and self.total >= 0.0):
            raise InputError(f"decomposition total must be finite and >= 0, got {self.total}")


def _sort_entries(entries: Iterable[DecompositionEntry]) -> tuple[DecompositionEntry, ...]:
    return tuple(sorted(entries, key=lambda e: (-e.contribution, e.state.sort_key)))


def risk_weighted_blindness(
    table: CountTable,
    dist: EmpiricalDistribution,
    weights: RiskWeights,
    tau,
) -> tuple[float, BlindnessDecomposition]:
    """Weighted blind mass sum_x dist(x) * w(x) * 1{count(x) < tau}.

    Returns the total over the whole distribution support plus a decomposition
    listing each *observed* blind state's contribution dist(x) * w(x).  With a
    plug-in distribution the two totals coincide; with a known-truth
    distribution the returned total additionally includes unseen states.
    """
    tau = _check_tau(tau)
    _check_support_superset(table, dist)
    terms = []
    entries = []
    for key, p in dist.probs.items():
        c = table.count(key)
        if c >= tau:
            continue
        w = weights.weight(key)
        terms.append(p * w)
        if c >= 1:
            entries.append(DecompositionEntry(state=key, count=c, prob=p, weight=w, contribution=p * w))
    total = math.fsum(terms)
    entries = _sort_entries(entries)
    decomposition = BlindnessDecomposition(
        entries=entries, tau=tau, total=math.fsum(e.contribution for e in entries)
    )
    return total, decomposition


def blindness_decomposition(
    table: CountTable, tau, top_k: Optional[int] = None
) -> BlindnessDecomposition:
    """Unweighted plug-in decomposition: which observed states carry the blind
    mass at threshold tau, each contributing count/n."""
    tau = _check_tau(tau)
    if top_k is not None:
        top_k = operator.index(top_k)
        if top_k < 1:
            raise InputError(f"top_k must be >= 1, got {top_k}")
    n = table.n
    entries = []
    blind_observations = 0
    for key, c in table.counts.items():
        if c < tau:
            p = c / n
            entries.append(DecompositionEntry(state=key, count=c, prob=p, weight=1.0, contribution=p))
            blind_observations += c
    # same integer numerator and division as the plugin curve: totals match exactly
    total = blind_observations / n
    entries = _sort_entries(entries)
    if top_k is not None:
        entries = entries[:top_k]
    return BlindnessDecomposition(entries=entries, tau=tau, total=total)


def accuracy_ceiling(blind_mass, assumed_blind_accuracy=0.0) -> float:
    """Best achievable accuracy when supported states are answered perfectly:
    (1 - b) * 1 + b * assumed_blind_accuracy."""
    b = _check_unit(blind_mass, "blind_mass")
    a = _check_unit(assumed_blind_accuracy, "assumed_blind_accuracy")
    return (1.0 - b) + b * a


@dataclass(frozen=True)
class CeilingCurve:
    """(tau, blind_mass, ceiling) triples under one blind-accuracy assumption."""

    points: tuple[tuple[int, float, float], ...]
    assumed_blind_accuracy: float

    def __post_init__(self):
        a = _check_unit(self.assumed_blind_accuracy, "assumed_blind_accuracy")
        for tau, mass, ceil in self.points:
            if ceil != accuracy_ceiling(mass, a):
                raise InputError(f"ceiling at tau={tau} does not match (1-b) + b*a")


def ceiling_curve(curve: BlindSpotCurve, assumed_blind_accuracy=0.0) -> CeilingCurve:
    a = _check_unit(assumed_blind_accuracy, "assumed_blind_accuracy")
    points = tuple((tau, mass, accuracy_ceiling(mass, a)) for tau, mass in curve.points)
    return CeilingCurve(points=points, assumed_blind_accuracy=a)


def chance_accuracy(num_classes) -> float:
    """Blind-accuracy preset for uniform guessing over the label set."""
    num_classes = operator.index(num_classes)
    if num_classes < 1:
        raise InputError(f"number of classes must be >= 1, got {num_classes}")
    return 1.0 / num_classes


@dataclass(frozen=True)
class MixtureDecomposition:
    """Accuracy split over supported vs blind states.

    The exact identity acc = (1-b)*acc_sup + b*acc_blind holds whenever both
    conditional accuracies are defined; an empty branch leaves its accuracy
    None and the identity degenerates to the other branch.
    """

    acc: float
    acc_sup: Optional[float]
    acc_blind: Optional[float]
    blind_mass_empirical: float


def mixture_decomposition(
    outcomes: Sequence[tuple[StateKey, bool]], table: CountTable, tau
) -> MixtureDecomposition:
    """Split labeled outcomes (state, correct?) by support at threshold tau."""
    tau = _check_tau(tau)
    outcomes = list(outcomes)
    if not outcomes:
        raise InputError("mixture decomposition needs at least one outcome")
    sup_n = sup_correct = blind_n = blind_correct = 0
    for i, item in enumerate(outcomes):
        try:
            key, correct = item
        except (TypeError, ValueError):
            raise InputError(f"outcome {i} must be a (StateKey, bool) pair") from None
        if not isinstance(key, StateKey):
            raise InputError(f"outcome {i}: state must be a StateKey")
        if key.names != table.schema:
            raise InputError(
                f"outcome {i}: state factors {list(key.names)} do not match table schema {list(table.schema)}"
            )
        correct = bool(correct)
        if table.count(key) < tau:
            blind_n += 1
            blind_correct += int(correct)
        else:
            sup_n += 1
            sup_correct += int(correct)
    total = sup_n + blind_n
    return MixtureDecomposition(
        acc=(sup_correct + blind_correct) / total,
        acc_sup=(sup_correct / sup_n) if sup_n else None,
        acc_blind=(blind_correct / blind_n) if blind_n else None,
        blind_mass_empirical=blind_n / total,
    )


def wilson_interval(successes, trials, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    The critical value z comes from the inverse normal CDF at
    (1 + confidence) / 2, so any confidence level in (0, 1) is exact to
    floating-point precision rather than relying on a tabulated constant.
    The interval always contains the point estimate and is clipped to [0, 1].
    """
    try:
        s = operator.index(successes)
        t = operator.index(trials)
    except TypeError:
        raise InputError("successes and trials must be integers") from None
    if t < 1:
        raise InputError(f"trials must be >= 1, got {t}")
    if not (0 <= s <= t):
        raise InputError(f"successes must lie in [0, trials]; got {s} of {t}")
    confidence = float(confidence)
    if not (0.0 < confidence < 1.0):
        raise InputError(f"confidence must lie strictly between 0 and 1, got {confidence}")
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    p = s / t
    z2 = z * z
    denom = 1.0 + z2 / t
    center = (p + z2 / (2.0 * t)) / denom
    half = z * math.sqrt(p * (1.0 - p) / t + z2 / (4.0 * t * t)) / denom
    lower = max(0.0, min(center - half, p))
    upper = min(1.0, max(center + half, p))
    return lower, upper
