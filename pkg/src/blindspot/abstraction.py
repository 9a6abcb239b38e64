"""Sensor-window featurization and operational state assignment.

Tri-axial IMU windows map to small categorical factor tuples: the activity
label, an orientation (tilt) bin derived from the window-mean accelerometer
direction, and intensity bins from quantile-discretized gyroscope statistics.
A separate helper assigns admission records to diagnosis-prefix states.
"""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .counts import StateKey
from .errors import InputError, MissingPrimaryDiagnosis

__all__ = [
    "FACTOR_ACTIVITY",
    "FACTOR_TILT",
    "FACTOR_ENERGY",
    "FACTOR_RATE",
    "FACTOR_ORDER",
    "SensorWindow",
    "LabeledStream",
    "AbstractionConfig",
    "AdmissionRecord",
    "PRESETS",
    "preset",
    "make_windows",
    "tilt_bin",
    "gyro_energy",
    "mean_angular_rate",
    "fit_energy_edges",
    "energy_bin",
    "fit_edges",
    "abstract_window",
    "icd_prefix_state",
]

FACTOR_ACTIVITY = "activity"
FACTOR_TILT = "tilt"
FACTOR_ENERGY = "energy"
FACTOR_RATE = "rate"
FACTOR_ORDER = (FACTOR_ACTIVITY, FACTOR_TILT, FACTOR_ENERGY, FACTOR_RATE)

# absorbs float noise when an angle lands exactly on a bin boundary, so the
# bin index matches exact-arithmetic evaluation (e.g. 45 degrees at P=6 -> 3)
_EDGE_GUARD = 1e-9


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SensorWindow:
    """A fixed-length run of accelerometer and gyroscope samples sharing one
    label.  Arrays are (L, 3); no NaN values are allowed."""

    acc: np.ndarray
    gyro: np.ndarray
    label: object
    sample_rate_hz: float

    def __post_init__(self):
        acc = _as_readonly(self.acc)
        gyro = _as_readonly(self.gyro)
        if acc.ndim != 2 or acc.shape[1] != 3:
            raise InputError(f"acc must have shape (L, 3), got {acc.shape}")
        if gyro.shape != acc.shape:
            raise InputError(f"gyro shape {gyro.shape} does not match acc shape {acc.shape}")
        if acc.shape[0] < 1:
            raise InputError("a window needs at least one sample")
        if np.isnan(acc).any() or np.isnan(gyro).any():
            raise InputError("window contains NaN samples; impute or drop before windowing")
        if not float(self.sample_rate_hz) > 0:
            raise InputError(f"sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "acc", acc)
        object.__setattr__(self, "gyro", gyro)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    @property
    def length(self) -> int:
        return self.acc.shape[0]


@dataclass(frozen=True)
class LabeledStream:
    """Time-ordered labeled samples at a constant nominal rate."""

    acc: np.ndarray
    gyro: np.ndarray
    labels: np.ndarray
    sample_rate_hz: float
    timestamps: Optional[np.ndarray] = None

    def __post_init__(self):
        acc = _as_readonly(self.acc).reshape(-1, 3) if np.size(self.acc) else np.empty((0, 3))
        gyro = _as_readonly(self.gyro).reshape(-1, 3) if np.size(self.gyro) else np.empty((0, 3))
        labels = np.asarray(self.labels)
        if acc.shape != gyro.shape:
            raise InputError(f"acc shape {acc.shape} does not match gyro shape {gyro.shape}")
        if labels.shape != (acc.shape[0],):
            raise InputError(f"labels shape {labels.shape} does not match {acc.shape[0]} samples")
        if acc.size and (np.isnan(acc).any() or np.isnan(gyro).any()):
            raise InputError("stream contains NaN sensor values; impute or drop rows first")
        if not float(self.sample_rate_hz) > 0:
            raise InputError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if self.timestamps is not None:
            ts = np.asarray(self.timestamps, dtype=float)
            if ts.shape != (acc.shape[0],):
                raise InputError("timestamps length does not match samples")
            object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "acc", acc)
        object.__setattr__(self, "gyro", gyro)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.acc.shape[0]


def make_windows(stream: LabeledStream, window_s: float, stride_s: float) -> list[SensorWindow]:
    """Slice a stream into fixed-length windows.

    Window length and hop are round(window_s * rate) and round(stride_s * rate)
    samples; starts advance by the hop from sample 0.  A window is emitted only
    when every sample carries the same label; trailing partial windows are
    dropped.  A stream shorter than one window yields no windows.
    """
    window_s = float(window_s)
    stride_s = float(stride_s)
    if not window_s > 0:
        raise InputError(f"window_s must be positive, got {window_s}")
    if not 0 < stride_s <= window_s:
        raise InputError(f"stride_s must satisfy 0 < stride_s <= window_s, got {stride_s}")
    rate = stream.sample_rate_hz
    length = round(window_s * rate)
    hop = round(stride_s * rate)
    if length < 1 or hop < 1:
        raise InputError(
            f"window ({window_s}s) and stride ({stride_s}s) must cover at least one sample at {rate} Hz"
        )
    labels = stream.labels
    windows = []
    for start in range(0, len(stream) - length + 1, hop):
        stop = start + length
        first = labels[start]
        if not bool(np.all(labels[start:stop] == first)):
            continue
        label = first.item() if isinstance(first, np.generic) else first
        windows.append(
            SensorWindow(
                acc=stream.acc[start:stop],
                gyro=stream.gyro[start:stop],
                label=label,
                sample_rate_hz=rate,
            )
        )
    return windows


def tilt_bin(window: SensorWindow, bins: int) -> int:
    """Discretize the angle between the window-mean accelerometer direction
    and the vertical axis into ``bins`` equal bins over [0, pi/2].

    The angle is arccos(|z| component of the normalized mean vector), so the
    result is invariant to overall scale and to the sign of the vertical axis.
    A zero mean vector leaves the direction undefined and is rejected.
    """
    bins = operator.index(bins)
    if bins < 1:
        raise InputError(f"tilt bins must be >= 1, got {bins}")
    mu = window.acc.mean(axis=0)
    norm = float(np.linalg.norm(mu))
    if norm == 0.0:
        raise InputError(
            f"window (label={window.label!r}) has a zero-norm mean acceleration; tilt is undefined"
        )
    z = abs(float(mu[2])) / norm
    phi = math.acos(min(1.0, z))
    x = bins * phi / (math.pi / 2.0)
    return min(bins - 1, int(math.floor(x + _EDGE_GUARD)))


def gyro_energy(window: SensorWindow) -> float:
    """Mean squared angular-rate norm over the window: (1/L) * sum ||w_t||^2."""
    g = window.gyro
    return float(np.mean(np.sum(g * g, axis=1)))


def mean_angular_rate(window: SensorWindow) -> float:
    """Mean angular-rate norm over the window: (1/L) * sum ||w_t||."""
    return float(np.mean(np.linalg.norm(window.gyro, axis=1)))


def fit_energy_edges(values: Iterable[float], bins: int) -> tuple[float, ...]:
    """Quantile bin edges at levels j/bins for j = 0..bins.

    Linear interpolation between order statistics, with the rank position
    computed as (m-1)*j/bins so exact-rational levels stay exact.  Edges are
    nondecreasing; duplicated edges simply produce empty bins.
    """
    bins = operator.index(bins)
    if bins < 1:
        raise InputError(f"bins must be >= 1, got {bins}")
    xs = np.sort(np.asarray(list(values), dtype=float))
    if xs.size == 0:
        raise InputError("cannot fit quantile edges on an empty sample")
    if np.isnan(xs).any():
        raise InputError("cannot fit quantile edges: sample contains NaN")
    m = xs.size
    edges = []
    for j in range(bins + 1):
        pos = (m - 1) * j / bins
        lo = int(math.floor(pos))
        frac = pos - lo
        if lo >= m - 1:
            v = float(xs[m - 1])
        elif frac == 0.0:
            v = float(xs[lo])
        else:
            v = float(xs[lo] + frac * (xs[lo + 1] - xs[lo]))
        edges.append(v)
    for i in range(1, len(edges)):
        if edges[i] < edges[i - 1]:
            edges[i] = edges[i - 1]
    return tuple(edges)


def energy_bin(value: float, edges: Sequence[float]) -> int:
    """Bin index for ``value`` against fitted edges.

    Bin 0 covers everything up to edges[1]; bin j covers (edges[j],
    edges[j+1]]; values beyond the last edge clamp into the top bin and values
    below the first edge clamp into bin 0.  With all edges equal every value
    lands in bin 0.
    """
    edges = tuple(float(e) for e in edges)
    if len(edges) < 2:
        raise InputError("edges must contain at least two values")
    for a, b in zip(edges, edges[1:]):
        if b < a:
            raise InputError("edges must be nondecreasing")
    value = float(value)
    q = len(edges) - 1
    if edges[0] == edges[-1]:
        # degenerate fit (constant sample): no ordering information, so every
        # value shares bin 0 rather than splitting on which side it falls
        return 0
    for j in range(q):
        if value <= edges[j + 1]:
            return j
    return q - 1


@dataclass(frozen=True)
class AbstractionConfig:
    """Which factors build the state key and how each one is discretized.

    ``factors`` is normalized to the canonical order (activity, tilt, energy,
    rate).  Quantile edges must be fitted (see ``fit_edges``) before a config
    with energy or rate factors can abstract windows.
    """

    factors: tuple[str, ...] = (FACTOR_ACTIVITY,)
    tilt_bins: int = 6
    energy_bins: int = 3
    rate_bins: int = 8
    energy_edges: Optional[tuple[float, ...]] = None
    rate_edges: Optional[tuple[float, ...]] = None
    refinement_tag: str = "a"

    def __post_init__(self):
        factors = tuple(self.factors)
        unknown = [f for f in factors if f not in FACTOR_ORDER]
        if unknown:
            raise InputError(f"unknown factors {unknown}; choose from {list(FACTOR_ORDER)}")
        if not factors:
            raise InputError("at least one factor must be enabled")
        if len(set(factors)) != len(factors):
            raise InputError(f"duplicate factors: {list(factors)}")
        object.__setattr__(
            self, "factors", tuple(f for f in FACTOR_ORDER if f in factors)
        )
        for name in ("tilt_bins", "energy_bins", "rate_bins"):
            b = operator.index(getattr(self, name))
            if b < 1:
                raise InputError(f"{name} must be >= 1, got {b}")
            object.__setattr__(self, name, b)
        for name, bins in (("energy_edges", self.energy_bins), ("rate_edges", self.rate_bins)):
            edges = getattr(self, name)
            if edges is None:
                continue
            edges = tuple(float(e) for e in edges)
            if len(edges) != bins + 1:
                raise InputError(f"{name} must have {bins + 1} values, got {len(edges)}")
            for a, b in zip(edges, edges[1:]):
                if b < a:
                    raise InputError(f"{name} must be nondecreasing")
            object.__setattr__(self, name, edges)

    def to_mapping(self) -> dict:
        """Plain ordered mapping used by config files and report metadata."""
        out: dict = {
            "factors": list(self.factors),
            "tilt_bins": self.tilt_bins,
            "energy_bins": self.energy_bins,
            "rate_bins": self.rate_bins,
            "refinement_tag": self.refinement_tag,
        }
        out["energy_edges"] = list(self.energy_edges) if self.energy_edges else None
        out["rate_edges"] = list(self.rate_edges) if self.rate_edges else None
        return out


PRESETS = {
    "activity": AbstractionConfig(factors=(FACTOR_ACTIVITY,), refinement_tag="a"),
    "activity-tilt": AbstractionConfig(
        factors=(FACTOR_ACTIVITY, FACTOR_TILT), tilt_bins=6, refinement_tag="a,p"
    ),
    "activity-tilt-energy": AbstractionConfig(
        factors=(FACTOR_ACTIVITY, FACTOR_TILT, FACTOR_ENERGY),
        tilt_bins=6,
        energy_bins=3,
        refinement_tag="a,p,e",
    ),
    # finer tilt/intensity quantization plus a mean angular-rate factor, for
    # deployment-style coverage screens
    "deployment-refined": AbstractionConfig(
        factors=(FACTOR_ACTIVITY, FACTOR_TILT, FACTOR_ENERGY, FACTOR_RATE),
        tilt_bins=12,
        energy_bins=8,
        rate_bins=8,
        refinement_tag="deployment-refined",
    ),
}


def preset(name: str) -> AbstractionConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise InputError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def fit_edges(
    config: AbstractionConfig, windows: Sequence[SensorWindow], fit_fraction: float = 1.0
) -> AbstractionConfig:
    """Fit the quantile edges that the enabled factors need.

    Edges are fitted on the first ceil(fit_fraction * len(windows)) windows,
    so train-only fitting just needs the training prefix first.
    """
    fit_fraction = float(fit_fraction)
    if not 0.0 < fit_fraction <= 1.0:
        raise InputError(f"fit_fraction must lie in (0, 1], got {fit_fraction}")
    needs_fit = FACTOR_ENERGY in config.factors or FACTOR_RATE in config.factors
    if not needs_fit:
        return config
    if not windows:
        raise InputError("cannot fit quantile edges without windows")
    subset = windows[: max(1, math.ceil(fit_fraction * len(windows)))]
    out = config
    if FACTOR_ENERGY in config.factors:
        out = replace(out, energy_edges=fit_energy_edges([gyro_energy(w) for w in subset], config.energy_bins))
    if FACTOR_RATE in config.factors:
        out = replace(out, rate_edges=fit_energy_edges([mean_angular_rate(w) for w in subset], config.rate_bins))
    return out


def abstract_window(window: SensorWindow, config: AbstractionConfig) -> StateKey:
    """Map a window to its operational state under ``config``."""
    pairs = []
    for factor in config.factors:
        if factor == FACTOR_ACTIVITY:
            pairs.append((FACTOR_ACTIVITY, window.label))
        elif factor == FACTOR_TILT:
            pairs.append((FACTOR_TILT, tilt_bin(window, config.tilt_bins)))
        elif factor == FACTOR_ENERGY:
            if config.energy_edges is None:
                raise InputError("energy factor enabled but energy_edges not fitted")
            pairs.append((FACTOR_ENERGY, energy_bin(gyro_energy(window), config.energy_edges)))
        else:
            if config.rate_edges is None:
                raise InputError("rate factor enabled but rate_edges not fitted")
            pairs.append((FACTOR_RATE, energy_bin(mean_angular_rate(window), config.rate_edges)))
    return StateKey(tuple(pairs))


@dataclass(frozen=True)
class AdmissionRecord:
    """An admission's diagnosis codes as (sequence number, code) in file order."""

    admission_id: str
    diagnoses: tuple[tuple[int, str], ...]


def icd_prefix_state(admission: AdmissionRecord, prefix_len: int = 4) -> StateKey:
    """State from the first sequence-1 diagnosis code, truncated to
    ``prefix_len`` characters (whole code when shorter).  Raises
    MissingPrimaryDiagnosis when no usable sequence-1 code exists."""
    prefix_len = operator.index(prefix_len)
    if prefix_len < 1:
        raise InputError(f"prefix_len must be >= 1, got {prefix_len}")
    for seq, code in admission.diagnoses:
        if seq == 1:
            code = code.strip()
            if not code:
                raise MissingPrimaryDiagnosis(
                    f"admission {admission.admission_id!r}: sequence-1 diagnosis code is empty"
                )
            return StateKey((("icd4", code[:prefix_len]),))
    raise MissingPrimaryDiagnosis(
        f"admission {admission.admission_id!r} has no sequence-1 diagnosis"
    )
