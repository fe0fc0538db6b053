"""Log-likelihood-ratio frequencies, filtering, and their invariants."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boxtrace.errors import EmptyClass, SingleClass, UnknownClass
from boxtrace.llr import (
    ClassFrequencyTable,
    FilterConfig,
    class_frequency,
    filter_vocabulary,
    llr,
    max_pairwise_llr,
    report_tsv,
)
from boxtrace.symbols import Symbol, SymbolMultiset
from boxtrace.vectorize import build_vocabulary


def ms_of(paths, source="s"):
    ms = SymbolMultiset(source_id=source)
    for path in paths:
        ms.add(Symbol(path, "field"))
    return ms


def corpus_with_presence(n_u: int, k_u: int, n_v: int, k_v: int, path="s"):
    """Class U: n_u containers, k_u containing `path`; likewise class V."""
    samples = []
    for i in range(n_u):
        samples.append((ms_of([path] if i < k_u else ["base"]), "U"))
    for i in range(n_v):
        samples.append((ms_of([path] if i < k_v else ["base"]), "V"))
    return samples


class TestClassFrequency:
    def test_smoothed_presence_fraction(self):
        table = class_frequency(corpus_with_presence(4, 3, 2, 0))
        assert table.frequency("s", "U") == pytest.approx(4 / 5)
        assert table.frequency("s", "V") == pytest.approx(1 / 3)

    def test_full_presence_is_one(self):
        table = class_frequency(corpus_with_presence(5, 5, 2, 1))
        assert table.frequency("s", "U") == pytest.approx(1.0)

    def test_single_class_rejected(self):
        with pytest.raises(SingleClass):
            class_frequency([(ms_of(["s"]), "U"), (ms_of(["s"]), "U")])

    def test_explicit_empty_class_rejected(self):
        with pytest.raises(EmptyClass):
            class_frequency([(ms_of(["s"]), "U"), (ms_of(["s"]), "V")],
                            classes=["U", "V", "W"])

    def test_unknown_class_in_lookup(self):
        table = class_frequency(corpus_with_presence(2, 1, 2, 1))
        with pytest.raises(UnknownClass):
            table.frequency("s", "nope")


class TestLLR:
    def test_worked_value_ln_2_4(self):
        table = class_frequency(corpus_with_presence(4, 3, 2, 0))
        value = llr("s", "U", "V", table)
        assert value == pytest.approx(math.log(2.4), abs=1e-12)
        assert value == pytest.approx(0.875469, abs=1e-6)

    def test_identical_frequencies_give_zero(self):
        table = class_frequency(corpus_with_presence(3, 2, 3, 2))
        assert llr("s", "U", "V", table) == 0.0

    def test_antisymmetry_exact(self):
        table = class_frequency(corpus_with_presence(5, 4, 3, 1))
        assert llr("s", "U", "V", table) == -llr("s", "V", "U", table)

    @given(st.integers(1, 9), st.integers(0, 9), st.integers(1, 9),
           st.integers(0, 9))
    @settings(max_examples=80)
    def test_antisymmetry_property(self, n_u, k_u, n_v, k_v):
        k_u, k_v = min(k_u, n_u), min(k_v, n_v)
        table = class_frequency(corpus_with_presence(n_u, k_u, n_v, k_v))
        forward = llr("s", "U", "V", table)
        assert abs(forward + llr("s", "V", "U", table)) <= 1e-12
        assert math.isfinite(forward)

    def test_finite_for_class_exclusive_symbols(self):
        table = class_frequency(corpus_with_presence(6, 6, 6, 0))
        assert math.isfinite(llr("s", "U", "V", table))
        assert math.isfinite(llr("s", "V", "U", table))


def exiftool_like_corpus(n_per_class=4):
    """One class carries an extra metadata symbol; both share the rest."""
    shared = ["ftyp/@majorBrand", "free/@stuff"]
    native = [(ms_of(shared, f"n{i}"), "Native-iOS") for i in range(n_per_class)]
    tampered = [(ms_of(shared + ["moov/udta/XMP_/@stuff"], f"t{i}"),
                 "Exiftool-iOS") for i in range(n_per_class)]
    return native + tampered


class TestFilterVocabulary:
    def test_exclusive_symbol_kept_with_large_llr(self):
        corpus = exiftool_like_corpus()
        vocab = build_vocabulary([ms for ms, _ in corpus])
        kept, report = filter_vocabulary(vocab, corpus, FilterConfig(0.5))
        assert "moov/udta/XMP_/@stuff" in kept.index
        record = next(r for r in report.records
                      if r.symbol == "moov/udta/XMP_/@stuff")
        assert record.max_llr == pytest.approx(math.log(5), abs=1e-12)
        assert record.kept

    def test_uniform_symbol_removed(self):
        corpus = exiftool_like_corpus()
        vocab = build_vocabulary([ms for ms, _ in corpus])
        kept, report = filter_vocabulary(vocab, corpus, FilterConfig(0.5))
        assert "free/@stuff" not in kept.index
        record = next(r for r in report.records if r.symbol == "free/@stuff")
        assert record.max_llr == pytest.approx(0.0, abs=1e-12)

    def test_report_covers_every_symbol(self):
        corpus = exiftool_like_corpus()
        vocab = build_vocabulary([ms for ms, _ in corpus])
        _, report = filter_vocabulary(vocab, corpus, FilterConfig(0.5))
        assert {r.symbol for r in report.records} == set(vocab.symbols)

    @pytest.mark.parametrize("tau_pair", [(0.1, 0.5), (0.5, 1.0), (1.0, 2.0)])
    def test_threshold_monotonicity(self, tau_pair):
        low, high = tau_pair
        corpus = exiftool_like_corpus()
        vocab = build_vocabulary([ms for ms, _ in corpus])
        kept_low, _ = filter_vocabulary(vocab, corpus, FilterConfig(low))
        kept_high, _ = filter_vocabulary(vocab, corpus, FilterConfig(high))
        assert set(kept_high.symbols) <= set(kept_low.symbols)

    def test_relabeling_leaves_kept_set_unchanged(self):
        corpus = exiftool_like_corpus()
        swapped = [(ms, {"Native-iOS": "B", "Exiftool-iOS": "A"}[label])
                   for ms, label in corpus]
        vocab = build_vocabulary([ms for ms, _ in corpus])
        kept_a, _ = filter_vocabulary(vocab, corpus, FilterConfig(0.5))
        kept_b, _ = filter_vocabulary(vocab, swapped, FilterConfig(0.5))
        assert kept_a.symbols == kept_b.symbols

    def test_field_and_value_judged_independently(self):
        # Field present everywhere, value differs per class: the value
        # symbols stay discriminative while the field symbol is noise.
        samples = []
        for i in range(4):
            ms = SymbolMultiset(source_id=f"a{i}")
            ms.add(Symbol("ftyp/@majorBrand", "field"))
            ms.add(Symbol("ftyp/@majorBrand", "value", "isom"))
            samples.append((ms, "A"))
        for i in range(4):
            ms = SymbolMultiset(source_id=f"b{i}")
            ms.add(Symbol("ftyp/@majorBrand", "field"))
            ms.add(Symbol("ftyp/@majorBrand", "value", "qt  "))
            samples.append((ms, "B"))
        vocab = build_vocabulary([ms for ms, _ in samples])
        kept, _ = filter_vocabulary(vocab, samples, FilterConfig(0.5))
        assert "ftyp/@majorBrand" not in kept.index
        assert "ftyp/@majorBrand/isom" in kept.index
        assert "ftyp/@majorBrand/qt  " in kept.index

    def test_uniform_corpus_keeps_nothing(self):
        shared = ["ftyp/@majorBrand", "moov/mvhd/@timescale"]
        corpus = [(ms_of(shared, f"u{i}"), "U") for i in range(3)] + \
                 [(ms_of(shared, f"v{i}"), "V") for i in range(3)]
        vocab = build_vocabulary([ms for ms, _ in corpus])
        kept, report = filter_vocabulary(vocab, corpus, FilterConfig(0.5))
        assert len(kept) == 0
        assert all(r.max_llr == pytest.approx(0.0, abs=1e-12)
                   and not r.kept for r in report.records)

    def test_invalid_tau_rejected(self):
        with pytest.raises(ValueError):
            FilterConfig(0.0)
        with pytest.raises(ValueError):
            FilterConfig(-1.0)


class TestReportTsv:
    def test_sorted_by_descending_llr_with_tau_column(self):
        corpus = exiftool_like_corpus()
        vocab = build_vocabulary([ms for ms, _ in corpus])
        _, report = filter_vocabulary(vocab, corpus, FilterConfig(0.25))
        lines = report_tsv(report).splitlines()
        assert lines[0] == "symbol\tbest_pair\tllr\ttau\tkept"
        assert lines[1].startswith("moov/udta/XMP_/@stuff\t")
        assert "\t0.25\t" in lines[1]
        values = [abs(float(line.split("\t")[2])) for line in lines[1:]]
        assert values == sorted(values, reverse=True)


class TestPairScan:
    def test_max_is_over_ordered_pairs(self):
        # Symbol much rarer in U than V: the max must come from (V, U).
        table = class_frequency(corpus_with_presence(9, 0, 9, 9))
        best, pair = max_pairwise_llr("s", table)
        assert best == pytest.approx(math.log(10), abs=1e-12)
        assert pair == ("V", "U")

    def test_examines_all_pairs_three_classes(self):
        samples = (corpus_with_presence(3, 3, 3, 0)
                   + [(ms_of(["base"]), "W") for _ in range(3)])
        table = class_frequency(samples)
        best, pair = max_pairwise_llr("s", table)
        assert best == pytest.approx(math.log(4), abs=1e-12)
        assert pair[0] == "U"
