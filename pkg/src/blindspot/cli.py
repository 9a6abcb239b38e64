"""Command line front end.

Exit codes: 0 success, 1 usage problems, 2 unreadable or malformed input
data, 3 internal errors.  Results go to stdout or to ``--out`` files;
everything diagnostic (ingestion summaries, warnings, error messages) goes
to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from contextlib import contextmanager
from dataclasses import replace

from .abstraction import (
    FACTOR_ORDER,
    abstract_window,
    fit_edges,
    make_windows,
    preset,
    PRESETS,
)
from .counts import CountTable, build_count_table, plug_in_distribution
from .errors import InputError, InvariantViolation
from .estimators import (
    ESTIMATOR_MODES,
    MODE_PLUGIN,
    blind_spot_curve,
    blindness_decomposition,
    ceiling_curve,
    chance_accuracy,
    risk_weighted_blindness,
    wilson_interval,
)
from .ingest import (
    PLACEMENTS,
    _write_samples,
    ingest_diagnoses,
    ingest_pamap2,
    ingest_samples_csv,
    read_abstraction_config,
    read_counts_file,
    read_risk_weights,
    read_samples_file,
    read_sweep_spec,
    write_abstraction_config,
)
from .report import (
    TOOL_VERSION,
    build_report,
    bundle_to_json,
    format_float,
    render_json,
    support_histogram,
    write_csv_rows,
)
from .simulator import run_sweep

__all__ = ["main", "run", "UsageError"]


class UsageError(Exception):
    """Flag combination problems detected after parsing."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; this tool reserves 2 for
    # bad input data, so usage problems are remapped to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not v > 0.0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return v


def _unit_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {v}")
    return v


def _fraction(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {v}")
    return v


def _open_interval_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {v}")
    return v


@contextmanager
def _out_stream(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _dedupe_modes(modes) -> tuple[str, ...]:
    seen = []
    for m in modes:
        if m in seen:
            raise UsageError(f"estimator mode {m!r} given more than once")
        seen.append(m)
    return tuple(seen)


def _add_table_source(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--samples", metavar="PATH", help="canonical samples CSV (factor:NAME header)")
    g.add_argument("--counts", metavar="PATH", help="per-state counts CSV with trailing count column")


def _load_table(args) -> CountTable:
    if args.samples is not None:
        samples, schema = read_samples_file(args.samples)
        if not samples:
            raise InputError(f"{args.samples}: samples file has no data rows")
        return build_count_table(samples, schema)
    return read_counts_file(args.counts)


# ---------------------------------------------------------------------------
# ingest

_TAG_LETTER = {"activity": "a", "tilt": "p", "energy": "e", "rate": "r"}


def _resolve_config(args):
    if args.config is not None and args.preset is not None:
        raise UsageError("--preset and --config cannot be combined")
    if args.config is not None:
        base = read_abstraction_config(args.config)
    elif args.preset is not None:
        base = preset(args.preset)
    else:
        base = preset("activity")
    overrides: dict = {}
    if args.factors:
        overrides["factors"] = tuple(args.factors)
        overrides["refinement_tag"] = ",".join(
            _TAG_LETTER[f] for f in FACTOR_ORDER if f in args.factors
        )
    if args.tilt_bins is not None:
        overrides["tilt_bins"] = args.tilt_bins
    if args.energy_bins is not None:
        overrides["energy_bins"] = args.energy_bins
        overrides["energy_edges"] = None
    if args.rate_bins is not None:
        overrides["rate_bins"] = args.rate_bins
        overrides["rate_edges"] = None
    return replace(base, **overrides) if overrides else base


def _cmd_ingest(args) -> int:
    if args.samples_csv is not None:
        if not args.key_columns:
            raise UsageError("--samples-csv needs --key-columns")
        samples, summary = ingest_samples_csv(args.samples_csv, args.key_columns)
        schema = tuple(args.key_columns)
    elif args.diagnoses is not None:
        samples, summary = ingest_diagnoses(args.diagnoses)
        schema = ("icd4",)
    else:
        if not args.subjects:
            raise UsageError("--pamap2 needs --subjects")
        stream, summary = ingest_pamap2(args.pamap2, args.subjects, args.placement)
        config = _resolve_config(args)
        windows = make_windows(stream, args.window_s, args.stride_s)
        if not windows:
            raise InputError("no label-pure windows could be formed from the stream")
        config = fit_edges(config, windows, args.fit_fraction)
        samples = [abstract_window(w, config) for w in windows]
        schema = config.factors
        summary.emitted = len(samples)
        if args.save_config is not None:
            write_abstraction_config(args.save_config, config)
    with _out_stream(args.out) as fh:
        _write_samples(fh, samples, schema)
    for line in summary.lines():
        print(line, file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# analysis commands


def _cmd_curve(args) -> int:
    modes = _dedupe_modes(args.mode or [MODE_PLUGIN])
    table = _load_table(args)
    bundle = build_report(
        table,
        args.tau_max,
        modes=modes,
        blind_accuracy=args.blind_accuracy,
        dataset_id=args.dataset_id,
    )
    rows = []
    for curve in bundle.curves:
        for tau, mass in curve.points:
            rows.append((tau, curve.estimator_mode, format_float(mass)))
    with _out_stream(args.out) as fh:
        write_csv_rows(fh, ("tau", "mode", "mass"), rows)
    if args.json is not None:
        with open(args.json, "w", encoding="utf-8", newline="") as fh:
            fh.write(bundle_to_json(bundle))
    return 0


def _cmd_decompose(args) -> int:
    table = _load_table(args)
    if args.weights is not None:
        weights = read_risk_weights(args.weights, table.schema)
        total, decomp = risk_weighted_blindness(
            table, plug_in_distribution(table), weights, args.tau
        )
        entries = decomp.entries
        if args.top_k is not None:
            entries = entries[: args.top_k]
    else:
        decomp = blindness_decomposition(table, args.tau, top_k=args.top_k)
        total = decomp.total
        entries = decomp.entries
    rows = [
        (
            e.state.serialize(),
            e.count,
            format_float(e.prob),
            format_float(e.weight),
            format_float(e.contribution),
        )
        for e in entries
    ]
    with _out_stream(args.out) as fh:
        write_csv_rows(fh, ("state", "count", "prob", "weight", "contribution"), rows)
    if args.json is not None:
        doc = {
            "tau": decomp.tau,
            "total": total,
            "entries": [
                {
                    "state": e.state.serialize(),
                    "count": e.count,
                    "prob": e.prob,
                    "weight": e.weight,
                    "contribution": e.contribution,
                }
                for e in entries
            ],
        }
        with open(args.json, "w", encoding="utf-8", newline="") as fh:
            fh.write(render_json(doc) + "\n")
    return 0


def _cmd_ceiling(args) -> int:
    table = _load_table(args)
    if args.blind_accuracy == "chance":
        if args.classes is None:
            raise UsageError("--blind-accuracy chance needs --classes")
        a = chance_accuracy(args.classes)
    else:
        try:
            a = float(args.blind_accuracy)
        except ValueError:
            raise UsageError(
                f"--blind-accuracy must be a number in [0, 1] or 'chance', got {args.blind_accuracy!r}"
            ) from None
        if not 0.0 <= a <= 1.0:
            raise UsageError(f"--blind-accuracy must lie in [0, 1], got {a}")
    curve = blind_spot_curve(table, args.tau_max, mode=args.mode)
    ceil = ceiling_curve(curve, a)
    rows = [(tau, format_float(b), format_float(c)) for tau, b, c in ceil.points]
    with _out_stream(args.out) as fh:
        write_csv_rows(fh, ("tau", "blind_mass", "ceiling"), rows)
    return 0


def _cmd_histogram(args) -> int:
    table = _load_table(args)
    rows = [(key.serialize(), count) for key, count in support_histogram(table)]
    with _out_stream(args.out) as fh:
        write_csv_rows(fh, ("state", "count"), rows)
    return 0


def _cmd_wilson(args) -> int:
    import csv as _csv

    rows_out = []
    with open(args.input, encoding="utf-8", newline="") as fh:
        reader = _csv.DictReader(fh)
        if reader.fieldnames is None:
            raise InputError(f"{args.input}: empty file (missing header)")
        lowered = {name.lower().strip(): name for name in reader.fieldnames}
        missing = [c for c in ("class", "successes", "trials") if c not in lowered]
        if missing:
            raise InputError(
                f"{args.input}: missing column(s) {missing}; header has {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, 2):
            label = (row[lowered["class"]] or "").strip()
            try:
                s = int((row[lowered["successes"]] or "").strip())
                t = int((row[lowered["trials"]] or "").strip())
            except ValueError:
                raise InputError(
                    f"{args.input}: line {lineno}: successes and trials must be integers"
                ) from None
            try:
                lower, upper = wilson_interval(s, t, args.confidence)
            except InputError as exc:
                raise InputError(f"{args.input}: line {lineno}: {exc}") from None
            rows_out.append(
                (
                    label,
                    s,
                    t,
                    format_float(s / t),
                    format_float(lower),
                    format_float(upper),
                )
            )
    with _out_stream(args.out) as fh:
        write_csv_rows(
            fh, ("class", "successes", "trials", "p_hat", "lower", "upper"), rows_out
        )
    return 0


def _cmd_simulate(args) -> int:
    cells, spec_trials, spec_seed = read_sweep_spec(args.spec)
    if not cells:
        raise InputError(f"{args.spec}: sweep spec produced no cells")
    trials = args.trials if args.trials is not None else (spec_trials if spec_trials is not None else 100)
    seed = args.seed if args.seed is not None else (spec_seed if spec_seed is not None else 0)
    result = run_sweep(cells, trials, seed)

    header = ["family", "params", "K", "n", "tau", "trials", "true_mean", "true_std"]
    for mode in ESTIMATOR_MODES:
        header.extend([f"{mode}_mean", f"{mode}_std", f"{mode}_mae"])
    rows = []
    for cs in result.cells:
        cell = cs.cell
        row = [
            cell.family,
            ";".join(f"{k}={format(v, 'g')}" for k, v in cell.params),
            cell.size,
            cell.n,
            cell.tau,
            cs.trials,
            format_float(cs.true_mean),
            format_float(cs.true_std),
        ]
        by_mode = {m.mode: m for m in cs.estimates}
        for mode in ESTIMATOR_MODES:
            m = by_mode[mode]
            row.extend([format_float(m.mean), format_float(m.std), format_float(m.mean_abs_error)])
        rows.append(row)
    with _out_stream(args.out) as fh:
        write_csv_rows(fh, header, rows)

    if args.json is not None:
        doc = {
            "tool_version": TOOL_VERSION,
            "generator": result.generator,
            "master_seed": result.master_seed,
            "trials": result.trials,
            "cells": [
                {
                    "family": cs.cell.family,
                    "params": dict(cs.cell.params),
                    "K": cs.cell.size,
                    "n": cs.cell.n,
                    "tau": cs.cell.tau,
                    "true_mean": cs.true_mean,
                    "true_std": cs.true_std,
                    "estimates": [
                        {
                            "mode": m.mode,
                            "mean": m.mean,
                            "std": m.std,
                            "mean_abs_error": m.mean_abs_error,
                        }
                        for m in cs.estimates
                    ],
                }
                for cs in result.cells
            ],
        }
        with open(args.json, "w", encoding="utf-8", newline="") as fh:
            fh.write(render_json(doc) + "\n")
    return 0


def _cmd_report(args) -> int:
    modes = _dedupe_modes(args.mode or [MODE_PLUGIN])
    table = _load_table(args)
    bundle = build_report(
        table,
        args.tau_max,
        modes=modes,
        decomposition_taus=tuple(args.decompose_tau or ()),
        top_k=args.top_k,
        blind_accuracy=args.blind_accuracy,
        dataset_id=args.dataset_id,
    )
    text = bundle_to_json(bundle)
    with _out_stream(args.out) as fh:
        fh.write(text)
    return 0


# ---------------------------------------------------------------------------
# parser wiring


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="blindspot",
        description="Coverage-risk estimation over operational state frequencies.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {TOOL_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("ingest", help="turn raw recordings or labeled tables into a samples file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--pamap2", nargs="+", metavar="PATH", help="raw 54-column IMU recording file(s)")
    src.add_argument("--samples-csv", metavar="PATH", help="labeled CSV; states from --key-columns")
    src.add_argument("--diagnoses", metavar="PATH", help="admission diagnoses CSV (hadm_id/seq_num/icd_code)")
    p.add_argument("--subjects", nargs="+", type=int, metavar="ID", help="subject numbers to ingest, in order")
    p.add_argument("--placement", choices=PLACEMENTS, default="chest", help="IMU placement (default chest)")
    p.add_argument("--window-s", type=_positive_float, default=5.0, help="window length in seconds (default 5.0)")
    p.add_argument("--stride-s", type=_positive_float, default=2.5, help="window stride in seconds (default 2.5)")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named abstraction preset")
    p.add_argument("--config", metavar="PATH", help="abstraction config file")
    p.add_argument("--factors", nargs="+", choices=FACTOR_ORDER, help="factors for a custom abstraction")
    p.add_argument("--tilt-bins", type=_positive_int, help="override tilt bin count")
    p.add_argument("--energy-bins", type=_positive_int, help="override energy bin count")
    p.add_argument("--rate-bins", type=_positive_int, help="override angular-rate bin count")
    p.add_argument("--fit-fraction", type=_fraction, default=1.0,
                   help="fit quantile edges on the first fraction of windows (default 1.0)")
    p.add_argument("--key-columns", nargs="+", metavar="COL", help="state columns for --samples-csv")
    p.add_argument("--out", metavar="PATH", help="samples file destination (default stdout)")
    p.add_argument("--save-config", metavar="PATH", help="write the fitted abstraction config here")
    p.set_defaults(handler=_cmd_ingest)

    p = sub.add_parser("curve", help="blind-spot mass as a function of the support threshold")
    _add_table_source(p)
    p.add_argument("--tau-max", type=_positive_int, required=True, help="largest threshold to evaluate")
    p.add_argument("--mode", action="append", choices=ESTIMATOR_MODES,
                   help="estimator mode (repeatable; default plugin)")
    p.add_argument("--blind-accuracy", type=_unit_float, default=0.0,
                   help="assumed accuracy on blind states for the bundled ceiling (default 0)")
    p.add_argument("--dataset-id", default="", help="free-form dataset label for report metadata")
    p.add_argument("--out", metavar="PATH", help="CSV destination (default stdout)")
    p.add_argument("--json", metavar="PATH", help="also write the full report bundle as JSON")
    p.set_defaults(handler=_cmd_curve)

    p = sub.add_parser("decompose", help="which states carry the blind mass at one threshold")
    _add_table_source(p)
    p.add_argument("--tau", type=_positive_int, required=True, help="support threshold")
    p.add_argument("--top-k", type=_positive_int, help="keep only the k largest contributions")
    p.add_argument("--weights", metavar="PATH", help="risk-weights file (state<TAB>weight)")
    p.add_argument("--out", metavar="PATH", help="CSV destination (default stdout)")
    p.add_argument("--json", metavar="PATH", help="also write the decomposition as JSON")
    p.set_defaults(handler=_cmd_decompose)

    p = sub.add_parser("ceiling", help="accuracy ceiling implied by the blind-spot curve")
    _add_table_source(p)
    p.add_argument("--tau-max", type=_positive_int, required=True, help="largest threshold to evaluate")
    p.add_argument("--blind-accuracy", default="0",
                   help="assumed accuracy on blind states: a number in [0, 1] or 'chance'")
    p.add_argument("--classes", type=_positive_int, help="class count backing 'chance'")
    p.add_argument("--mode", choices=ESTIMATOR_MODES, default=MODE_PLUGIN,
                   help="estimator mode for the underlying curve (default plugin)")
    p.add_argument("--out", metavar="PATH", help="CSV destination (default stdout)")
    p.set_defaults(handler=_cmd_ceiling)

    p = sub.add_parser("histogram", help="per-state observation counts, most frequent first")
    _add_table_source(p)
    p.add_argument("--out", metavar="PATH", help="CSV destination (default stdout)")
    p.set_defaults(handler=_cmd_histogram)

    p = sub.add_parser("wilson", help="Wilson score intervals for per-class accuracies")
    p.add_argument("--input", required=True, metavar="PATH",
                   help="CSV with class, successes, trials columns")
    p.add_argument("--confidence", type=_open_interval_float, default=0.95,
                   help="confidence level (default 0.95)")
    p.add_argument("--out", metavar="PATH", help="CSV destination (default stdout)")
    p.set_defaults(handler=_cmd_wilson)

    p = sub.add_parser("simulate", help="Monte-Carlo estimator check against known distributions")
    p.add_argument("--spec", required=True, metavar="PATH", help="sweep grid spec (key = value lines)")
    p.add_argument("--trials", type=_positive_int, help="trials per cell (overrides the sweep file)")
    p.add_argument("--seed", type=int, help="master seed (overrides the sweep file)")
    p.add_argument("--out", metavar="PATH", help="CSV destination (default stdout)")
    p.add_argument("--json", metavar="PATH", help="also write full results as JSON")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("report", help="full JSON bundle: curves, decompositions, ceiling, histogram")
    _add_table_source(p)
    p.add_argument("--tau-max", type=_positive_int, required=True, help="largest threshold to evaluate")
    p.add_argument("--decompose-tau", type=_positive_int, action="append", metavar="TAU",
                   help="also decompose at this threshold (repeatable)")
    p.add_argument("--top-k", type=_positive_int, help="cap decomposition entries")
    p.add_argument("--mode", action="append", choices=ESTIMATOR_MODES,
                   help="estimator mode (repeatable; default plugin)")
    p.add_argument("--blind-accuracy", type=_unit_float, default=0.0,
                   help="assumed accuracy on blind states (default 0)")
    p.add_argument("--dataset-id", default="", help="free-form dataset label for report metadata")
    p.add_argument("--out", metavar="PATH", help="JSON destination (default stdout)")
    p.set_defaults(handler=_cmd_report)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 1
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"blindspot: error: {exc}", file=sys.stderr)
        return 1
    except (InputError, OSError) as exc:
        print(f"blindspot: error: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"blindspot: internal error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:
        print(f"blindspot: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


def run() -> None:
    sys.exit(main())
