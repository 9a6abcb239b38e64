"""File formats and dataset adapters."""

import gzip
import logging
import math

import numpy as np
import pytest

from blindspot import (
    AbstractionConfig,
    InputError,
    SweepCell,
    ingest_diagnoses,
    ingest_pamap2,
    ingest_samples_csv,
    read_abstraction_config,
    read_counts_file,
    read_kv_file,
    read_risk_weights,
    read_samples_file,
    read_sweep_spec,
    write_abstraction_config,
    write_samples_file,
)
from conftest import DATA_DIR, key


class TestSamplesFile:
    def test_round_trip(self, tmp_path):
        samples = [key(a="1", b="x"), key(a="2", b="y"), key(a="1", b="x")]
        path = tmp_path / "samples.csv"
        write_samples_file(path, samples, ("a", "b"))
        back, schema = read_samples_file(path)
        assert back == samples
        assert schema == ("a", "b")

    def test_header_written_with_factor_prefix(self, tmp_path):
        path = tmp_path / "samples.csv"
        write_samples_file(path, [key(a="1")], ("a",))
        assert path.read_text().splitlines()[0] == "factor:a"

    def test_gzip_read(self, tmp_path):
        path = tmp_path / "samples.csv.gz"
        with gzip.open(path, "wt", encoding="utf-8", newline="") as fh:
            fh.write("factor:a\n1\n2\n")
        back, schema = read_samples_file(path)
        assert back == [key(a="1"), key(a="2")]
        assert schema == ("a",)

    def test_write_rejects_schema_mismatch(self, tmp_path):
        with pytest.raises(InputError):
            write_samples_file(tmp_path / "s.csv", [key(other="1")], ("a",))

    def test_read_rejects_unprefixed_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(InputError, match="factor:"):
            read_samples_file(path)

    def test_read_rejects_field_count_mismatch_with_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("factor:a,factor:b\n1,2\n3\n")
        with pytest.raises(InputError, match="line 3"):
            read_samples_file(path)

    def test_read_rejects_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(InputError):
            read_samples_file(path)

    def test_read_rejects_bad_value_with_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text('factor:a\n"x|y"\n')
        with pytest.raises(InputError, match="line 2"):
            read_samples_file(path)


class TestCountsFile:
    def test_reference_fixture(self):
        table = read_counts_file(DATA_DIR / "activity_counts.csv")
        assert table.n == 1674
        assert table.k_observed == 12
        assert table.schema == ("activity",)
        assert table.count(key(activity="Walking")) == 307

    def test_duplicate_states_summed(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("activity,count\nwalk,3\nrun,1\nwalk,2\n")
        table = read_counts_file(path)
        assert table.count(key(activity="walk")) == 5
        assert table.n == 6

    def test_factor_prefixed_header_accepted(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("factor:a,factor:b,count\n1,2,7\n")
        table = read_counts_file(path)
        assert table.schema == ("a", "b")
        assert table.count(key(a="1", b="2")) == 7

    @pytest.mark.parametrize(
        "body,pattern",
        [
            ("activity\nwalk\n", "count"),
            ("activity,count\nwalk,0\n", "line 2"),
            ("activity,count\nwalk,two\n", "line 2"),
            ("activity,count\nwalk\n", "line 2"),
            ("activity,count\n", "no data rows"),
            ("", "missing header"),
        ],
    )
    def test_malformed_rejected(self, tmp_path, body, pattern):
        path = tmp_path / "c.csv"
        path.write_text(body)
        with pytest.raises(InputError, match=pattern):
            read_counts_file(path)


class TestRiskWeights:
    def test_reference_fixture(self):
        w = read_risk_weights(DATA_DIR / "activity_weights.tsv", ("activity",))
        assert w.weight(key(activity="Front fall")) == 1.0
        assert w.weight(key(activity="Stairs up")) == 0.6
        assert w.weight(key(activity="Walking")) == 0.2
        assert w.weight(key(activity="Sitting")) == 0.0  # '*' default

    def test_bare_and_canonical_forms(self, tmp_path):
        path = tmp_path / "w.tsv"
        path.write_text("a=1|b=2\t0.5\n3|4\t2.0\n# comment\n\n")
        w = read_risk_weights(path, ("a", "b"))
        assert w.weight(key(a="1", b="2")) == 0.5
        assert w.weight(key(a="3", b="4")) == 2.0
        assert w.weight(key(a="9", b="9")) == 1.0  # no '*': default stays 1

    @pytest.mark.parametrize(
        "body,pattern",
        [
            ("x=1\t0.5\n", "do not match"),
            ("walk 0.5\n", "TAB"),
            ("walk\tmany\n", "not a number"),
            ("walk\t-1\n", ">= 0"),
            ("walk\t0.5\nwalk\t0.7\n", "duplicate"),
            ("*\t0\n*\t1\n", "duplicate"),
        ],
    )
    def test_malformed_rejected(self, tmp_path, body, pattern):
        path = tmp_path / "w.tsv"
        path.write_text(body)
        with pytest.raises(InputError, match=pattern):
            read_risk_weights(path, ("activity",))


class TestKvFile:
    def test_parsing(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("# header comment\n\na = 1\nb=two words \n")
        assert read_kv_file(path) == {"a": "1", "b": "two words"}

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("a = 1\na = 2\n")
        with pytest.raises(InputError, match="duplicate"):
            read_kv_file(path)

    def test_missing_equals_rejected(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("just some text\n")
        with pytest.raises(InputError, match="line 1"):
            read_kv_file(path)


class TestAbstractionConfigFile:
    def test_round_trip_with_edges(self, tmp_path):
        cfg = AbstractionConfig(
            factors=("activity", "tilt", "energy"),
            tilt_bins=6,
            energy_bins=3,
            energy_edges=(0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0),
            refinement_tag="a,p,e",
        )
        path = tmp_path / "cfg.txt"
        write_abstraction_config(path, cfg)
        assert read_abstraction_config(path) == cfg  # .17g keeps floats exact

    def test_defaults_fill_missing_keys(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("factors = activity\n")
        cfg = read_abstraction_config(path)
        assert cfg.factors == ("activity",)
        assert cfg.tilt_bins == 6

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("factors = activity\nwibble = 3\n")
        with pytest.raises(InputError, match="wibble"):
            read_abstraction_config(path)

    def test_bad_number_rejected(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("tilt_bins = six\n")
        with pytest.raises(InputError):
            read_abstraction_config(path)


class TestSweepSpec:
    def test_cross_product_order(self, tmp_path):
        path = tmp_path / "spec.txt"
        path.write_text(
            "family = zipf, uniform\n"
            "zipf_s = 0.5, 1.0\n"
            "K = 10, 20\n"
            "n = 100\n"
            "tau = 1, 2\n"
            "trials = 7\n"
            "seed = 3\n"
        )
        cells, trials, seed = read_sweep_spec(path)
        assert trials == 7 and seed == 3
        expected = []
        for params in ((("s", 0.5),), (("s", 1.0),)):
            for size in (10, 20):
                for tau in (1, 2):
                    expected.append(SweepCell(family="zipf", params=params, size=size, n=100, tau=tau))
        for size in (10, 20):
            for tau in (1, 2):
                expected.append(SweepCell(family="uniform", params=(), size=size, n=100, tau=tau))
        assert cells == expected

    def test_trials_and_seed_optional(self, tmp_path):
        path = tmp_path / "spec.txt"
        path.write_text("family = uniform\nK = 5\nn = 10\ntau = 1\n")
        cells, trials, seed = read_sweep_spec(path)
        assert len(cells) == 1 and trials is None and seed is None

    @pytest.mark.parametrize(
        "body,pattern",
        [
            ("family = zipf\nK = 5\nn = 10\ntau = 1\n", "zipf_s"),
            ("family = pareto\nzipf_s = 1\nK = 5\nn = 10\ntau = 1\n", "pareto"),
            ("family = uniform\nn = 10\ntau = 1\n", "'K'"),
            ("family = uniform\nK = 5\nn = ten\ntau = 1\n", "integers"),
            ("family = uniform\nK = 5\nn = 10\ntau = 1\nbogus = 2\n", "bogus"),
        ],
    )
    def test_malformed_rejected(self, tmp_path, body, pattern):
        path = tmp_path / "spec.txt"
        path.write_text(body)
        with pytest.raises(InputError, match=pattern):
            read_sweep_spec(path)


class TestSamplesCsvAdapter:
    def test_states_from_key_columns(self, tmp_path):
        path = tmp_path / "rows.csv"
        path.write_text(
            "when,activity,surface,note\n"
            "1,walk,grass,ok\n"
            "2,run,road,\n"
            "3,walk,grass,fine\n"
        )
        samples, summary = ingest_samples_csv(path, ("activity", "surface"))
        assert samples == [
            key(activity="walk", surface="grass"),
            key(activity="run", surface="road"),
            key(activity="walk", surface="grass"),
        ]
        assert summary.rows_read == 3 and summary.rows_kept == 3
        assert summary.emitted == 3 and summary.dropped == {}

    def test_blank_cells_drop_the_row(self, tmp_path):
        path = tmp_path / "rows.csv"
        # the fully empty line is not a row at all; the whitespace one is
        path.write_text("activity\nwalk\n\n  \nrun\n")
        samples, summary = ingest_samples_csv(path, ("activity",))
        assert [s.value_of("activity") for s in samples] == ["walk", "run"]
        assert summary.dropped == {"missing-label": 1}
        assert summary.rows_read == summary.rows_kept + 1

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "rows.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(InputError, match="missing key column"):
            ingest_samples_csv(path, ("a", "zzz"))

    def test_values_are_stripped(self, tmp_path):
        path = tmp_path / "rows.csv"
        path.write_text("activity\n  walk  \n")
        samples, _ = ingest_samples_csv(path, ("activity",))
        assert samples == [key(activity="walk")]


DIAG_BODY = (
    "HADM_ID,SEQ_NUM,ICD_CODE\n"
    "200,2,E8889\n"
    "200,1,41071\n"
    "201,1,0389\n"
    "201,1,99999\n"
    "202,2,V3000\n"
)


class TestDiagnosesAdapter:
    def test_admission_unit_accounting(self, tmp_path, caplog):
        path = tmp_path / "diag.csv"
        path.write_text(DIAG_BODY)
        with caplog.at_level(logging.WARNING, logger="blindspot"):
            samples, summary = ingest_diagnoses(path)
        assert samples == [key(icd4="4107"), key(icd4="0389")]
        assert summary.unit == "admissions"
        assert summary.rows_read == 3
        assert summary.rows_kept == 2
        assert summary.dropped == {"no-seq1-diagnosis": 1}
        assert summary.notes == {"diagnosis-rows": 5, "duplicate-seq1-diagnosis": 1}
        assert any("202" in rec.message for rec in caplog.records)

    def test_case_insensitive_alias_headers(self, tmp_path):
        path = tmp_path / "diag.csv"
        path.write_text("admission_id,Seq_Num,icd_code\n9,1,G4730\n")
        samples, _ = ingest_diagnoses(path)
        assert samples == [key(icd4="G473")]

    def test_gzip_read(self, tmp_path):
        path = tmp_path / "diag.csv.gz"
        with gzip.open(path, "wt", encoding="utf-8", newline="") as fh:
            fh.write(DIAG_BODY)
        samples, _ = ingest_diagnoses(path)
        assert len(samples) == 2

    @pytest.mark.parametrize(
        "body,pattern",
        [
            ("who,seq_num,icd_code\n1,1,A\n", "hadm_id"),
            ("hadm_id,seq_num,icd_code\n,1,A\n", "empty admission id"),
            ("hadm_id,seq_num,icd_code\n1,one,A\n", "not an integer"),
        ],
    )
    def test_malformed_rejected(self, tmp_path, body, pattern):
        path = tmp_path / "diag.csv"
        path.write_text(body)
        with pytest.raises(InputError, match=pattern):
            ingest_diagnoses(path)


# --------------------------------------------------------------------------
# raw IMU fixtures

CHEST_BASE = 20
HAND_BASE = 3


def raw_row(ts, act, acc=(0.0, 0.0, 9.8), gyro=(0.1, 0.2, 0.3), base=CHEST_BASE):
    row = [0.0] * 54
    row[0] = ts
    row[1] = act
    row[2] = 90.0
    row[base] = 30.0  # temperature
    row[base + 1 : base + 4] = list(acc)  # 16g accelerometer
    row[base + 4 : base + 7] = [v / 2 for v in acc]  # 6g accelerometer (unused)
    row[base + 7 : base + 10] = list(gyro)
    row[base + 10 : base + 13] = [10.0, 20.0, 30.0]  # magnetometer (unused)
    return row


def write_dat(path, rows):
    def tok(v):
        if isinstance(v, float) and math.isnan(v):
            return "NaN"
        return format(v, "g")

    path.write_text("".join(" ".join(tok(v) for v in row) + "\n" for row in rows))


class TestRawRecordingAdapter:
    def test_extracts_the_right_columns(self, tmp_path):
        path = tmp_path / "subject101.dat"
        write_dat(path, [raw_row(0.01 * i, 4, acc=(1.0, 2.0, 3.0), gyro=(4.0, 5.0, 6.0)) for i in range(10)])
        stream, summary = ingest_pamap2([path], [101], "chest")
        assert len(stream) == 10
        assert stream.sample_rate_hz == 100.0
        assert list(stream.labels) == [4] * 10
        assert stream.acc[0].tolist() == [1.0, 2.0, 3.0]
        assert stream.gyro[0].tolist() == [4.0, 5.0, 6.0]
        assert summary.rows_read == 10 and summary.rows_kept == 10

    def test_placement_selects_imu_block(self, tmp_path):
        path = tmp_path / "subject101.dat"
        rows = []
        for i in range(5):
            row = raw_row(0.01 * i, 2, acc=(7.0, 8.0, 9.0), gyro=(1.0, 1.0, 1.0), base=HAND_BASE)
            # plant different chest values so a mixup is visible
            row[CHEST_BASE + 1 : CHEST_BASE + 4] = [0.5, 0.5, 0.5]
            rows.append(row)
        write_dat(path, rows)
        stream, _ = ingest_pamap2([path], [101], "hand")
        assert stream.acc[0].tolist() == [7.0, 8.0, 9.0]

    def test_drop_accounting(self, tmp_path):
        nan = float("nan")
        rows = [
            raw_row(0.00, nan),             # unlabeled
            raw_row(0.01, 4, gyro=(1.0, 2.0, 3.0)),
            raw_row(0.02, 4, gyro=(nan, nan, nan)),  # filled from the row above
            raw_row(0.03, 0),               # transient marker
            raw_row(0.04, 5, gyro=(nan, nan, nan)),  # run starts NaN: no donor
            raw_row(0.05, 5, gyro=(7.0, 8.0, 9.0)),
        ]
        path = tmp_path / "subject101.dat"
        write_dat(path, rows)
        stream, summary = ingest_pamap2([path], [101], "chest")
        assert summary.rows_read == 6
        assert summary.dropped == {
            "missing-label": 1,
            "transient-activity": 1,
            "NaN-after-impute": 1,
        }
        assert summary.rows_kept == 3
        assert list(stream.labels) == [4, 4, 5]
        assert stream.gyro[1].tolist() == [1.0, 2.0, 3.0]  # imputed copy
        assert stream.gyro[2].tolist() == [7.0, 8.0, 9.0]

    def test_fill_does_not_cross_label_changes(self, tmp_path):
        nan = float("nan")
        rows = [
            raw_row(0.00, 4, gyro=(1.0, 1.0, 1.0)),
            raw_row(0.01, 7, gyro=(nan, nan, nan)),  # new label, no fill from label 4
            raw_row(0.02, 7, gyro=(2.0, 2.0, 2.0)),
        ]
        path = tmp_path / "subject101.dat"
        write_dat(path, rows)
        stream, summary = ingest_pamap2([path], [101], "chest")
        assert summary.dropped == {"NaN-after-impute": 1}
        assert list(stream.labels) == [4, 7]

    def test_transient_gap_blocks_fill(self, tmp_path):
        nan = float("nan")
        rows = [
            raw_row(0.00, 4, gyro=(1.0, 1.0, 1.0)),
            raw_row(0.01, 0),
            raw_row(0.02, 4, gyro=(nan, nan, nan)),  # separate run after the break
        ]
        path = tmp_path / "subject101.dat"
        write_dat(path, rows)
        stream, summary = ingest_pamap2([path], [101], "chest")
        assert len(stream) == 1
        assert summary.dropped == {"transient-activity": 1, "NaN-after-impute": 1}

    def test_nan_acc_also_filled(self, tmp_path):
        nan = float("nan")
        rows = [
            raw_row(0.00, 4, acc=(1.0, 2.0, 3.0)),
            raw_row(0.01, 4, acc=(nan, 5.0, nan)),
        ]
        path = tmp_path / "subject101.dat"
        write_dat(path, rows)
        stream, _ = ingest_pamap2([path], [101], "chest")
        assert stream.acc[1].tolist() == [1.0, 5.0, 3.0]  # per-column fill

    def test_subject_order_controls_concatenation(self, tmp_path):
        p1 = tmp_path / "subject101.dat"
        p2 = tmp_path / "subject105.dat"
        write_dat(p1, [raw_row(0.0, 1)])
        write_dat(p2, [raw_row(0.0, 2)])
        stream, summary = ingest_pamap2([p1, p2], [105, 101], "chest")
        assert list(stream.labels) == [2, 1]
        assert summary.sources == (str(p2), str(p1))

    def test_unknown_subject_rejected(self, tmp_path):
        path = tmp_path / "subject101.dat"
        write_dat(path, [raw_row(0.0, 1)])
        with pytest.raises(InputError, match="unknown subject"):
            ingest_pamap2([path], [109], "chest")

    def test_conflicting_files_for_one_subject_rejected(self, tmp_path):
        (tmp_path / "a").mkdir()
        (tmp_path / "b").mkdir()
        p1 = tmp_path / "a" / "subject101.dat"
        p2 = tmp_path / "b" / "subject101.dat"
        write_dat(p1, [raw_row(0.0, 1)])
        write_dat(p2, [raw_row(0.0, 1)])
        with pytest.raises(InputError, match="two files"):
            ingest_pamap2([p1, p2], [101], "chest")

    def test_bad_placement_rejected(self, tmp_path):
        path = tmp_path / "subject101.dat"
        write_dat(path, [raw_row(0.0, 1)])
        with pytest.raises(InputError, match="placement"):
            ingest_pamap2([path], [101], "wrist")

    def test_short_row_reported_with_file_and_line(self, tmp_path):
        path = tmp_path / "subject101.dat"
        good = " ".join(["0"] * 54)
        path.write_text(f"{good}\n{good}\n0 1 2\n")
        with pytest.raises(InputError, match=r"line 3.*expected 54 columns, found 3"):
            ingest_pamap2([path], [101], "chest")

    def test_non_numeric_token_reported_with_file_and_line(self, tmp_path):
        path = tmp_path / "subject101.dat"
        row = ["0"] * 54
        row[5] = "abc"
        good = " ".join(["0"] * 54)
        path.write_text(f"{good}\n{' '.join(row)}\n")
        with pytest.raises(InputError, match=r"line 2.*'abc'"):
            ingest_pamap2([path], [101], "chest")

    def test_uniformly_wrong_width_reported(self, tmp_path):
        path = tmp_path / "subject101.dat"
        write_dat(path, [[0.0] * 53, [0.0] * 53])
        with pytest.raises(InputError, match="expected 54 columns, found 53"):
            ingest_pamap2([path], [101], "chest")

    def test_empty_recording_gives_empty_stream(self, tmp_path):
        path = tmp_path / "subject101.dat"
        path.write_text("")
        stream, summary = ingest_pamap2([path], [101], "chest")
        assert len(stream) == 0
        assert summary.rows_read == 0 and summary.rows_kept == 0

    def test_summary_lines_mention_drops(self, tmp_path):
        path = tmp_path / "subject101.dat"
        write_dat(path, [raw_row(0.0, 0), raw_row(0.01, 3)])
        _, summary = ingest_pamap2([path], [101], "chest")
        text = "\n".join(summary.lines())
        assert "transient-activity" in text
        assert "rows read: 2" in text
