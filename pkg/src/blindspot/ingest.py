"""Dataset adapters and the package's text file formats.

Formats owned here:

* canonical samples CSV: header of ``factor:<name>`` columns, one row per
  observation, UTF-8 with LF newlines
* counts CSV: factor columns (bare names or ``factor:`` prefixed) plus a
  trailing ``count`` column
* risk-weights text: ``<state><TAB><weight>`` lines where the state is either
  the canonical ``name=value|name=value`` form or bare ``value|value`` matched
  to the schema positionally; a ``*`` line sets the default weight
* key=value config text (abstraction configs, sweep specs); ``#`` lines are
  comments
* raw 54-column IMU recordings (whitespace separated, ``NaN`` literals)

Paths ending in ``.gz`` are decompressed transparently on read.
"""

from __future__ import annotations

import csv
import gzip
import logging
import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .abstraction import AbstractionConfig, AdmissionRecord, LabeledStream, icd_prefix_state
from .counts import CountTable, StateKey, build_count_table
from .errors import InputError, InvariantViolation, MissingPrimaryDiagnosis
from .estimators import RiskWeights
from .simulator import SweepCell

__all__ = [
    "IngestionSummary",
    "DROP_MISSING_LABEL",
    "DROP_TRANSIENT",
    "DROP_NAN",
    "DROP_NO_PRIMARY",
    "NOTE_DUPLICATE_PRIMARY",
    "read_samples_file",
    "write_samples_file",
    "read_counts_file",
    "read_risk_weights",
    "read_kv_file",
    "read_abstraction_config",
    "write_abstraction_config",
    "read_sweep_spec",
    "ingest_samples_csv",
    "ingest_diagnoses",
    "ingest_pamap2",
    "PLACEMENTS",
]

logger = logging.getLogger("blindspot")

DROP_MISSING_LABEL = "missing-label"
DROP_TRANSIENT = "transient-activity"
DROP_NAN = "NaN-after-impute"
DROP_NO_PRIMARY = "no-seq1-diagnosis"
NOTE_DUPLICATE_PRIMARY = "duplicate-seq1-diagnosis"

_FACTOR_PREFIX = "factor:"


@dataclass
class IngestionSummary:
    """Row bookkeeping for one ingestion run.

    ``rows_read == rows_kept + sum(dropped)`` always holds in the unit the
    adapter counts in (``unit``); informational tallies that do not take part
    in that identity live in ``notes``.
    """

    rows_read: int = 0
    rows_kept: int = 0
    dropped: dict = field(default_factory=dict)
    emitted: int = 0
    unit: str = "rows"
    sources: tuple = ()
    notes: dict = field(default_factory=dict)

    def drop(self, reason: str, count: int = 1):
        if count:
            self.dropped[reason] = self.dropped.get(reason, 0) + count

    def note(self, key: str, count: int = 1):
        if count:
            self.notes[key] = self.notes.get(key, 0) + count

    def validate(self):
        if self.rows_read != self.rows_kept + sum(self.dropped.values()):
            raise InvariantViolation(
                f"summary does not balance: read {self.rows_read}, kept {self.rows_kept}, "
                f"dropped {sum(self.dropped.values())}"
            )

    def lines(self) -> list[str]:
        out = [f"sources: {', '.join(self.sources) if self.sources else '-'}"]
        out.append(f"{self.unit} read: {self.rows_read}")
        for reason in sorted(self.dropped):
            out.append(f"{self.unit} dropped ({reason}): {self.dropped[reason]}")
        out.append(f"{self.unit} kept: {self.rows_kept}")
        out.append(f"emitted: {self.emitted}")
        for key in sorted(self.notes):
            out.append(f"note {key}: {self.notes[key]}")
        return out


def _open_text(path, mode="rt"):
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, mode, encoding="utf-8", newline="")
    return open(path, mode, encoding="utf-8", newline="")


# ---------------------------------------------------------------------------
# canonical samples file


def write_samples_file(path, samples: Iterable[StateKey], schema: Sequence[str]) -> None:
    schema = tuple(schema)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        _write_samples(fh, samples, schema)


def _write_samples(fh, samples: Iterable[StateKey], schema: Sequence[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow([_FACTOR_PREFIX + name for name in schema])
    for key in samples:
        if key.names != tuple(schema):
            raise InputError(
                f"sample {key.serialize()!r} does not match schema {list(schema)}"
            )
        writer.writerow(list(key.values))


def read_samples_file(path) -> tuple[list[StateKey], tuple[str, ...]]:
    with _open_text(path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty samples file (missing header)") from None
        schema = []
        for col in header:
            if not col.startswith(_FACTOR_PREFIX):
                raise InputError(
                    f"{path}: samples header column {col!r} must start with {_FACTOR_PREFIX!r}"
                )
            schema.append(col[len(_FACTOR_PREFIX):])
        schema = tuple(schema)
        samples = []
        for lineno, row in enumerate(reader, 2):
            if len(row) != len(schema):
                raise InputError(
                    f"{path}: line {lineno}: expected {len(schema)} fields, found {len(row)}"
                )
            try:
                samples.append(StateKey.from_values(schema, row))
            except InputError as exc:
                raise InputError(f"{path}: line {lineno}: {exc}") from None
    return samples, schema


# ---------------------------------------------------------------------------
# counts file


def read_counts_file(path) -> CountTable:
    """CSV of per-state counts: factor columns then a final ``count`` column.
    Duplicate state rows are summed (multiset semantics)."""
    with _open_text(path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty counts file (missing header)") from None
        if len(header) < 2 or header[-1].strip().lower() != "count":
            raise InputError(
                f"{path}: counts header must be factor columns followed by a 'count' column"
            )
        schema = tuple(
            col[len(_FACTOR_PREFIX):] if col.startswith(_FACTOR_PREFIX) else col.strip()
            for col in header[:-1]
        )
        counts: dict[StateKey, int] = {}
        total = 0
        for lineno, row in enumerate(reader, 2):
            if len(row) != len(header):
                raise InputError(
                    f"{path}: line {lineno}: expected {len(header)} fields, found {len(row)}"
                )
            try:
                key = StateKey.from_values(schema, [v.strip() for v in row[:-1]])
            except InputError as exc:
                raise InputError(f"{path}: line {lineno}: {exc}") from None
            raw = row[-1].strip()
            try:
                c = int(raw)
            except ValueError:
                raise InputError(f"{path}: line {lineno}: count {raw!r} is not an integer") from None
            if c < 1:
                raise InputError(f"{path}: line {lineno}: count must be >= 1, got {c}")
            counts[key] = counts.get(key, 0) + c
            total += c
        if not counts:
            raise InputError(f"{path}: counts file has no data rows")
    return CountTable(counts=counts, n=total, schema=schema)


# ---------------------------------------------------------------------------
# risk weights


def read_risk_weights(path, schema: Sequence[str]) -> RiskWeights:
    """Tab-separated ``state<TAB>weight`` lines; ``*`` sets the default weight
    (1.0 when no ``*`` line is present)."""
    schema = tuple(schema)
    weights: dict[StateKey, float] = {}
    default = None
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            key_text, sep, weight_text = line.partition("\t")
            if not sep:
                raise InputError(
                    f"{path}: line {lineno}: expected <state><TAB><weight>, got {line!r}"
                )
            try:
                w = float(weight_text.strip())
            except ValueError:
                raise InputError(
                    f"{path}: line {lineno}: weight {weight_text.strip()!r} is not a number"
                ) from None
            if not (w >= 0.0 and math.isfinite(w)):
                raise InputError(f"{path}: line {lineno}: weight must be finite and >= 0, got {w}")
            key_text = key_text.strip()
            if key_text == "*":
                if default is not None:
                    raise InputError(f"{path}: line {lineno}: duplicate '*' default line")
                default = w
                continue
            try:
                if "=" in key_text:
                    key = StateKey.parse(key_text)
                    if key.names != schema:
                        raise InputError(
                            f"state factors {list(key.names)} do not match schema {list(schema)}"
                        )
                else:
                    key = StateKey.from_values(schema, key_text.split("|"))
            except InputError as exc:
                raise InputError(f"{path}: line {lineno}: {exc}") from None
            if key in weights:
                raise InputError(f"{path}: line {lineno}: duplicate weight for {key.serialize()!r}")
            weights[key] = w
    return RiskWeights(weights=weights, default_weight=1.0 if default is None else default)


# ---------------------------------------------------------------------------
# key=value config files


def read_kv_file(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            key, sep, value = stripped.partition("=")
            key = key.strip()
            if not sep or not key:
                raise InputError(f"{path}: line {lineno}: expected 'key = value', got {stripped!r}")
            if key in out:
                raise InputError(f"{path}: line {lineno}: duplicate key {key!r}")
            out[key] = value.strip()
    return out


def _split_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


_CONFIG_KEYS = (
    "factors",
    "tilt_bins",
    "energy_bins",
    "rate_bins",
    "energy_edges",
    "rate_edges",
    "refinement_tag",
)


def read_abstraction_config(path) -> AbstractionConfig:
    kv = read_kv_file(path)
    unknown = sorted(set(kv) - set(_CONFIG_KEYS))
    if unknown:
        raise InputError(f"{path}: unknown config keys {unknown}; expected {list(_CONFIG_KEYS)}")
    kwargs: dict = {}
    try:
        if "factors" in kv:
            kwargs["factors"] = tuple(_split_list(kv["factors"]))
        for name in ("tilt_bins", "energy_bins", "rate_bins"):
            if name in kv:
                kwargs[name] = int(kv[name])
        for name in ("energy_edges", "rate_edges"):
            if name in kv and kv[name]:
                kwargs[name] = tuple(float(v) for v in _split_list(kv[name]))
        if "refinement_tag" in kv:
            kwargs["refinement_tag"] = kv["refinement_tag"]
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    return AbstractionConfig(**kwargs)


def write_abstraction_config(path, config: AbstractionConfig) -> None:
    lines = [
        f"factors = {', '.join(config.factors)}",
        f"tilt_bins = {config.tilt_bins}",
        f"energy_bins = {config.energy_bins}",
        f"rate_bins = {config.rate_bins}",
        f"refinement_tag = {config.refinement_tag}",
    ]
    if config.energy_edges is not None:
        lines.append("energy_edges = " + ", ".join(format(e, ".17g") for e in config.energy_edges))
    if config.rate_edges is not None:
        lines.append("rate_edges = " + ", ".join(format(e, ".17g") for e in config.rate_edges))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# sweep specs


def read_sweep_spec(path) -> tuple[list[SweepCell], int | None, int | None]:
    """Grid spec: cross product of family/params x K x n x tau.

    Returns (cells, trials, seed); trials and seed are None when the file does
    not set them.
    """
    kv = read_kv_file(path)
    known = {"family", "zipf_s", "geom_ratio", "K", "n", "tau", "trials", "seed"}
    unknown = sorted(set(kv) - known)
    if unknown:
        raise InputError(f"{path}: unknown sweep keys {unknown}; expected {sorted(known)}")
    for required in ("family", "K", "n", "tau"):
        if required not in kv:
            raise InputError(f"{path}: sweep spec is missing required key {required!r}")

    def ints(key: str) -> list[int]:
        try:
            vals = [int(v) for v in _split_list(kv[key])]
        except ValueError:
            raise InputError(f"{path}: {key} must be a comma-separated list of integers") from None
        if not vals:
            raise InputError(f"{path}: {key} must name at least one value")
        return vals

    def floats(key: str) -> list[float]:
        try:
            vals = [float(v) for v in _split_list(kv[key])]
        except ValueError:
            raise InputError(f"{path}: {key} must be a comma-separated list of numbers") from None
        if not vals:
            raise InputError(f"{path}: {key} must name at least one value")
        return vals

    param_combos: list[tuple[str, tuple[tuple[str, float], ...]]] = []
    for family in _split_list(kv["family"]):
        if family == "zipf":
            if "zipf_s" not in kv:
                raise InputError(f"{path}: family zipf needs zipf_s")
            param_combos.extend(("zipf", (("s", s),)) for s in floats("zipf_s"))
        elif family == "geometric":
            if "geom_ratio" not in kv:
                raise InputError(f"{path}: family geometric needs geom_ratio")
            param_combos.extend(("geometric", (("ratio", r),)) for r in floats("geom_ratio"))
        elif family == "uniform":
            param_combos.append(("uniform", ()))
        else:
            raise InputError(f"{path}: unknown family {family!r}")

    cells = [
        SweepCell(family=family, params=params, size=size, n=n, tau=tau)
        for family, params in param_combos
        for size in ints("K")
        for n in ints("n")
        for tau in ints("tau")
    ]
    trials = seed = None
    try:
        if "trials" in kv:
            trials = int(kv["trials"])
        if "seed" in kv:
            seed = int(kv["seed"])
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    return cells, trials, seed


# ---------------------------------------------------------------------------
# generic labeled CSV


def ingest_samples_csv(path, key_columns: Sequence[str]) -> tuple[list[StateKey], IngestionSummary]:
    """One state per row from named columns of an arbitrary CSV.  Rows with an
    empty key cell are dropped and tallied."""
    key_columns = tuple(key_columns)
    if not key_columns:
        raise InputError("key_columns must name at least one column")
    summary = IngestionSummary(unit="rows", sources=(str(path),))
    samples: list[StateKey] = []
    with _open_text(path) as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise InputError(f"{path}: empty file (missing header)")
        missing = [c for c in key_columns if c not in reader.fieldnames]
        if missing:
            raise InputError(f"{path}: missing key column(s) {missing}; header has {reader.fieldnames}")
        for lineno, row in enumerate(reader, 2):
            summary.rows_read += 1
            values = [(row[c] or "").strip() for c in key_columns]
            if any(v == "" for v in values):
                summary.drop(DROP_MISSING_LABEL)
                continue
            try:
                samples.append(StateKey.from_values(key_columns, values))
            except InputError as exc:
                raise InputError(f"{path}: line {lineno}: {exc}") from None
            summary.rows_kept += 1
    summary.emitted = len(samples)
    summary.validate()
    return samples, summary


# ---------------------------------------------------------------------------
# admission diagnoses


def _resolve_column(fieldnames: Sequence[str], candidates: tuple[str, ...], path) -> str:
    lowered = {name.lower(): name for name in fieldnames}
    for cand in candidates:
        if cand in lowered:
            return lowered[cand]
    raise InputError(f"{path}: missing required column (one of {list(candidates)}); header has {list(fieldnames)}")


def ingest_diagnoses(path) -> tuple[list[StateKey], IngestionSummary]:
    """One state per admission from a (admission id, seq_num, icd_code) CSV.

    The first sequence-1 row in file order wins; extra sequence-1 rows are
    tallied as duplicates.  Admissions without a usable sequence-1 code are
    skipped with a logged warning.  The summary counts admissions; the raw
    diagnosis-row count is carried under notes.
    """
    summary = IngestionSummary(unit="admissions", sources=(str(path),))
    admissions: dict[str, list[tuple[int, str]]] = {}
    row_count = 0
    with _open_text(path) as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise InputError(f"{path}: empty file (missing header)")
        adm_col = _resolve_column(reader.fieldnames, ("hadm_id", "admission_id"), path)
        seq_col = _resolve_column(reader.fieldnames, ("seq_num",), path)
        code_col = _resolve_column(reader.fieldnames, ("icd_code",), path)
        for lineno, row in enumerate(reader, 2):
            row_count += 1
            adm = (row[adm_col] or "").strip()
            if not adm:
                raise InputError(f"{path}: line {lineno}: empty admission id")
            raw_seq = (row[seq_col] or "").strip()
            try:
                seq = int(raw_seq)
            except ValueError:
                raise InputError(
                    f"{path}: line {lineno}: sequence number {raw_seq!r} is not an integer"
                ) from None
            code = (row[code_col] or "").strip()
            admissions.setdefault(adm, []).append((seq, code))
    summary.note("diagnosis-rows", row_count)
    samples: list[StateKey] = []
    for adm, diags in admissions.items():
        summary.rows_read += 1
        extra_primaries = sum(1 for seq, _ in diags if seq == 1) - 1
        if extra_primaries > 0:
            summary.note(NOTE_DUPLICATE_PRIMARY, extra_primaries)
        record = AdmissionRecord(admission_id=adm, diagnoses=tuple(diags))
        try:
            samples.append(icd_prefix_state(record))
        except MissingPrimaryDiagnosis as exc:
            logger.warning("skipping admission: %s", exc)
            summary.drop(DROP_NO_PRIMARY)
            continue
        summary.rows_kept += 1
    summary.emitted = len(samples)
    summary.validate()
    return samples, summary


# ---------------------------------------------------------------------------
# raw IMU recordings

PLACEMENTS = ("hand", "chest", "ankle")

_RAW_COLUMNS = 54
_IMU_BASE = {"hand": 3, "chest": 20, "ankle": 37}
# per-IMU layout after the base column: temperature, acc (16g) xyz,
# acc (6g) xyz, gyro xyz, magnetometer xyz, orientation quaternion
_ACC_OFFSET = 1
_GYRO_OFFSET = 7
_SAMPLE_RATE_HZ = 100.0


def _scan_raw_file(path) -> None:
    # slow diagnostic pass, run only after the fast parser failed
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != _RAW_COLUMNS:
                raise InputError(
                    f"{path}: line {lineno}: expected {_RAW_COLUMNS} columns, found {len(tokens)}"
                )
            for tok in tokens:
                try:
                    float(tok)
                except ValueError:
                    raise InputError(
                        f"{path}: line {lineno}: non-numeric value {tok!r}"
                    ) from None


def _forward_fill(block: np.ndarray) -> None:
    # in place, per column; leading NaNs stay NaN
    m = block.shape[0]
    idx = np.arange(m)
    for col in range(block.shape[1]):
        v = block[:, col]
        mask = np.isnan(v)
        if not mask.any():
            continue
        pos = np.where(~mask, idx, -1)
        np.maximum.accumulate(pos, out=pos)
        take = mask & (pos >= 0)
        v[take] = v[pos[take]]


def _parse_raw_file(path, base: int, summary: IngestionSummary):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # empty files warn; they parse to no rows
            data = np.loadtxt(path, dtype=float, ndmin=2)
    except ValueError as exc:
        _scan_raw_file(path)
        raise InputError(f"{path}: unreadable numeric data: {exc}") from None
    if data.size == 0:
        return None
    if data.shape[1] != _RAW_COLUMNS:
        raise InputError(
            f"{path}: line 1: expected {_RAW_COLUMNS} columns, found {data.shape[1]}"
        )
    rows = data.shape[0]
    summary.rows_read += rows
    ts = data[:, 0]
    act = data[:, 1]
    sensors = np.concatenate(
        [data[:, base + _ACC_OFFSET : base + _ACC_OFFSET + 3],
         data[:, base + _GYRO_OFFSET : base + _GYRO_OFFSET + 3]],
        axis=1,
    ).copy()

    labeled = ~np.isnan(act)
    summary.drop(DROP_MISSING_LABEL, int(rows - labeled.sum()))
    ts, act, sensors = ts[labeled], act[labeled], sensors[labeled]
    labels = act.astype(np.int64)

    # fill within contiguous same-label runs of the raw recording, before any
    # rows are removed, so a transient gap is never spliced over
    if labels.size:
        boundaries = np.flatnonzero(labels[1:] != labels[:-1]) + 1
        for lo, hi in zip(np.concatenate([[0], boundaries]), np.concatenate([boundaries, [labels.size]])):
            _forward_fill(sensors[lo:hi])

    active = labels != 0
    summary.drop(DROP_TRANSIENT, int(labels.size - active.sum()))
    ts, labels, sensors = ts[active], labels[active], sensors[active]

    clean = ~np.isnan(sensors).any(axis=1)
    summary.drop(DROP_NAN, int(labels.size - clean.sum()))
    ts, labels, sensors = ts[clean], labels[clean], sensors[clean]
    if labels.size == 0:
        return None
    return ts, labels, sensors[:, :3], sensors[:, 3:]


def ingest_pamap2(
    paths: Sequence, subjects: Sequence[int], placement: str = "chest"
) -> tuple[LabeledStream, IngestionSummary]:
    """Parse raw 54-column IMU recordings into a 100 Hz labeled stream.

    ``subjects`` selects recordings by the subject number embedded in each
    file name, concatenated in the order given.  The 16g accelerometer and the
    gyroscope of the chosen placement are consumed.  Activity id 0 marks
    transient breaks and is dropped; NaN samples are forward-filled within
    contiguous same-activity runs and rows still NaN afterwards are dropped.
    """
    if placement not in _IMU_BASE:
        raise InputError(f"unknown placement {placement!r}; choose from {list(PLACEMENTS)}")
    subjects = [int(s) for s in subjects]
    if not subjects:
        raise InputError("subjects must name at least one subject id")
    by_subject: dict[int, Path] = {}
    for p in paths:
        p = Path(p)
        m = re.search(r"(\d+)", p.stem)
        if not m:
            continue
        sid = int(m.group(1))
        if sid in by_subject and by_subject[sid] != p:
            raise InputError(f"two files match subject {sid}: {by_subject[sid]} and {p}")
        by_subject[sid] = p
    missing = [s for s in subjects if s not in by_subject]
    if missing:
        raise InputError(f"unknown subject id(s) {missing}: no matching file among the given paths")

    base = _IMU_BASE[placement]
    summary = IngestionSummary(unit="rows", sources=tuple(str(by_subject[s]) for s in subjects))
    parts = []
    for s in subjects:
        parsed = _parse_raw_file(by_subject[s], base, summary)
        if parsed is not None:
            parts.append(parsed)
    if parts:
        ts = np.concatenate([p[0] for p in parts])
        labels = np.concatenate([p[1] for p in parts])
        acc = np.concatenate([p[2] for p in parts])
        gyro = np.concatenate([p[3] for p in parts])
    else:
        ts = np.empty(0)
        labels = np.empty(0, dtype=np.int64)
        acc = np.empty((0, 3))
        gyro = np.empty((0, 3))
    stream = LabeledStream(
        acc=acc, gyro=gyro, labels=labels, sample_rate_hz=_SAMPLE_RATE_HZ, timestamps=ts
    )
    summary.rows_kept = len(stream)
    summary.emitted = len(stream)
    summary.validate()
    return stream, summary
