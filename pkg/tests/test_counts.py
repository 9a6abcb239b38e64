"""State keys, count tables, and their exact-arithmetic invariants."""

import math
import random
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from blindspot import (
    CountTable,
    EmpiricalDistribution,
    FreqOfFreqs,
    InputError,
    StateKey,
    build_count_table,
    coarsen,
    freq_of_freqs,
    plug_in_distribution,
)
from conftest import ACTIVITY_COUNTS, key, random_multi_table, table_of


class TestStateKey:
    def test_integer_values_coerce_to_str(self):
        k = StateKey((("activity", "walk"), ("tilt", 3)))
        assert k.values == ("walk", "3")
        assert k.value_of("tilt") == "3"
        assert k == StateKey((("activity", "walk"), ("tilt", "3")))

    def test_bool_value_rejected(self):
        with pytest.raises(InputError):
            StateKey((("flag", True),))

    def test_float_value_rejected(self):
        with pytest.raises(InputError):
            StateKey((("x", 1.5),))

    @pytest.mark.parametrize("ch", ["=", "|", "\t", "\n", "\r"])
    def test_forbidden_characters_rejected(self, ch):
        with pytest.raises(InputError):
            StateKey((("a", f"x{ch}y"),))
        with pytest.raises(InputError):
            StateKey(((f"a{ch}b", "x"),))

    def test_empty_or_padded_tokens_rejected(self):
        for bad in ["", " x", "x ", "  "]:
            with pytest.raises(InputError):
                StateKey((("a", bad),))
            with pytest.raises(InputError):
                StateKey(((bad, "v"),))

    def test_duplicate_factor_names_rejected(self):
        with pytest.raises(InputError):
            StateKey((("a", "1"), ("a", "2")))

    def test_at_least_one_factor_required(self):
        with pytest.raises(InputError):
            StateKey(())

    def test_serialize_parse_round_trip(self):
        k = key(activity="walk", tilt="3")
        assert k.serialize() == "activity=walk|tilt=3"
        assert str(k) == k.serialize()
        assert StateKey.parse(k.serialize()) == k

    def test_parse_rejects_field_without_equals(self):
        with pytest.raises(InputError):
            StateKey.parse("activity=walk|tilt")

    def test_from_values_matches_constructor(self):
        assert StateKey.from_values(("a", "b"), ("1", "2")) == key(a="1", b="2")
        with pytest.raises(InputError):
            StateKey.from_values(("a", "b"), ("1",))

    def test_sort_key_orders_by_values(self):
        ks = [key(s="b"), key(s="a"), key(s="c")]
        assert sorted(ks, key=lambda x: x.sort_key) == [key(s="a"), key(s="b"), key(s="c")]

    def test_project_preserves_requested_order(self):
        k = key(a="1", b="2", c="3")
        assert k.project(("c", "a")).factors == (("c", "3"), ("a", "1"))
        with pytest.raises(InputError):
            k.project(("missing",))


class TestCountTable:
    def test_build_matches_counter_oracle(self):
        rng = random.Random(101)
        alphabet = [key(s=f"v{i}") for i in range(25)]
        samples = [rng.choice(alphabet) for _ in range(400)]
        table = build_count_table(samples, ("s",))
        oracle = Counter(samples)
        assert dict(table.counts) == dict(oracle)
        assert table.n == 400
        assert table.k_observed == len(oracle)

    def test_sample_order_is_irrelevant(self):
        rng = random.Random(102)
        samples = [key(s=f"v{rng.randrange(8)}") for _ in range(100)]
        shuffled = samples[:]
        rng.shuffle(shuffled)
        assert build_count_table(samples, ("s",)) == build_count_table(shuffled, ("s",))

    def test_replayed_activity_table(self):
        table = table_of(ACTIVITY_COUNTS)
        assert table.n == 1674
        assert table.k_observed == 12
        assert table.count(key(activity="Walking")) == 307
        dist = plug_in_distribution(table)
        assert round(dist.prob(key(activity="Walking")), 3) == 0.183
        assert round(dist.prob(key(activity="Stairs up")), 3) == 0.080

    def test_schema_mismatch_names_sample_and_factor(self):
        samples = [key(s="a"), key(t="b")]
        with pytest.raises(InputError, match=r"sample 1.*'t'"):
            build_count_table(samples, ("s",))

    def test_arity_mismatch_reported(self):
        samples = [key(s="a", t="b")]
        with pytest.raises(InputError, match="sample 0"):
            build_count_table(samples, ("s",))

    def test_empty_samples_rejected(self):
        with pytest.raises(InputError):
            build_count_table([], ("s",))

    def test_schema_as_bare_string_rejected(self):
        with pytest.raises(InputError):
            build_count_table([key(s="a")], "s")

    def test_duplicate_schema_names_rejected(self):
        with pytest.raises(InputError):
            CountTable(counts={key(a="1", b="2"): 1}, n=1, schema=("a", "a"))

    def test_zero_count_rejected(self):
        with pytest.raises(InputError):
            CountTable(counts={key(s="a"): 0}, n=0, schema=("s",))

    def test_sum_mismatch_rejected(self):
        with pytest.raises(InputError):
            CountTable(counts={key(s="a"): 2}, n=3, schema=("s",))

    def test_counts_are_read_only(self):
        table = table_of({"a": 1, "b": 2})
        with pytest.raises(TypeError):
            table.counts[key(activity="a")] = 5

    def test_unobserved_state_counts_zero(self):
        table = table_of({"a": 1})
        assert table.count(key(activity="zzz")) == 0

    def test_sorted_items_by_value(self):
        table = table_of({"b": 2, "a": 1, "c": 3})
        assert [k.value_of("activity") for k, _ in table.sorted_items()] == ["a", "b", "c"]


class TestFreqOfFreqs:
    def test_hand_case(self):
        table = table_of({"a": 1, "b": 1, "c": 3})
        fof = freq_of_freqs(table)
        assert dict(fof.f) == {1: 2, 3: 1}
        assert fof.singletons == 2
        assert fof.n == 5
        assert fof.k_observed == 3

    @given(st.lists(st.integers(min_value=1, max_value=30), min_size=1, max_size=40))
    def test_identities_hold(self, counts):
        table = table_of({f"v{i}": c for i, c in enumerate(counts)})
        fof = freq_of_freqs(table)
        assert sum(r * fr for r, fr in fof.f.items()) == table.n
        assert sum(fof.f.values()) == table.k_observed

    def test_inconsistent_totals_rejected(self):
        with pytest.raises(InputError):
            FreqOfFreqs(f={1: 2}, n=3, k_observed=2)
        with pytest.raises(InputError):
            FreqOfFreqs(f={1: 2}, n=2, k_observed=3)
        with pytest.raises(InputError):
            FreqOfFreqs(f={0: 1}, n=0, k_observed=1)


class TestEmpiricalDistribution:
    def test_plug_in_probs(self):
        table = table_of({"a": 1, "b": 3})
        dist = plug_in_distribution(table)
        assert dist.prob(key(activity="a")) == 0.25
        assert dist.prob(key(activity="b")) == 0.75
        assert dist.prob(key(activity="zz")) == 0.0
        assert math.isclose(math.fsum(dist.probs.values()), 1.0, abs_tol=1e-9)

    def test_source_validated(self):
        with pytest.raises(InputError):
            EmpiricalDistribution(probs={key(s="a"): 1.0}, source="guess")

    def test_probability_bounds(self):
        with pytest.raises(InputError):
            EmpiricalDistribution(probs={key(s="a"): 1.2}, source="plug-in")
        with pytest.raises(InputError):
            EmpiricalDistribution(probs={key(s="a"): -0.1, key(s="b"): 1.1}, source="plug-in")

    def test_sum_must_be_one(self):
        with pytest.raises(InputError):
            EmpiricalDistribution(
                probs={key(s="a"): 0.5, key(s="b"): 0.4}, source="plug-in"
            )


class TestCoarsen:
    def test_matches_preimage_sum_oracle(self):
        rng = random.Random(202)
        for _ in range(30):
            table = random_multi_table(rng)
            projections = [("a",), ("b",), ("c",), ("a", "b"), ("a", "c"), ("b", "c")]
            proj = projections[rng.randrange(len(projections))]
            merged = coarsen(table, proj)
            oracle: dict = {}
            for state, c in table.counts.items():
                coarse = state.project(proj)
                oracle[coarse] = oracle.get(coarse, 0) + c
            assert dict(merged.counts) == oracle
            assert merged.n == table.n
            assert merged.schema == proj

    def test_projection_order_normalized_to_schema_order(self):
        table = random_multi_table(random.Random(203))
        assert coarsen(table, ("c", "a")).schema == ("a", "c")
        assert coarsen(table, ("c", "a")) == coarsen(table, ("a", "c"))

    def test_full_projection_is_identity(self):
        table = random_multi_table(random.Random(204))
        again = coarsen(table, ("a", "b", "c"))
        assert dict(again.counts) == dict(table.counts)

    def test_bad_projections_rejected(self):
        table = random_multi_table(random.Random(205))
        with pytest.raises(InputError):
            coarsen(table, ())
        with pytest.raises(InputError):
            coarsen(table, ("a", "a"))
        with pytest.raises(InputError):
            coarsen(table, ("nope",))
        with pytest.raises(InputError):
            coarsen(table, "a")
