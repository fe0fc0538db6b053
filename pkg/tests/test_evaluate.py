"""Manifest handling, scenarios, folds, and the evaluation harness."""

from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boxtrace.errors import (
    EmptyMatrix,
    EmptyScenario,
    MalformedRow,
    SingleDevice,
    UnknownEnum,
)
from boxtrace.evaluate import (
    ConfusionMatrix,
    DatasetManifest,
    ManifestRow,
    balanced_accuracy,
    derive_labels,
    digest_rows,
    format_report_text,
    get_scenario,
    load_manifest,
    lodo_folds,
    report_to_obj,
    run_scenario,
)
from boxtrace.fixtures import FixtureSpec, generate_corpus
from boxtrace.llr import FilterConfig
from boxtrace.modelfile import dumps_model, train_model
from boxtrace.symbols import default_blacklist, extract_symbols
from boxtrace.bmff import parse_file


def row(device="D01", os="iOS", software="none", platform="none",
        file="v.mp4") -> ManifestRow:
    return ManifestRow(file=file, device=device, os=os, software=software,
                       platform=platform, path=Path(f"/nonexistent/{file}"))


def manifest_of(rows) -> DatasetManifest:
    return DatasetManifest(path=Path("manifest.csv"), rows=list(rows))


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    spec = FixtureSpec(seed=11, classes=("native", "exiftool"),
                       videos_per_cell=2)
    return generate_corpus(spec, out)


class TestLoadManifest:
    def write(self, tmp_path, lines):
        path = tmp_path / "manifest.csv"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def test_valid_rows(self, tmp_path):
        (tmp_path / "v1.mp4").write_bytes(b"x")
        (tmp_path / "v2.mp4").write_bytes(b"x")
        path = self.write(tmp_path, [
            "file,device,os,software,platform",
            "v1.mp4,D05,iOS,none,none",
            "v2.mp4,D20,Android,ffmpeg,youtube",
        ])
        manifest = load_manifest(path)
        assert len(manifest.rows) == 2
        assert manifest.rows[0].software == "none"
        assert manifest.rows[1].platform == "youtube"

    def test_unknown_os_rejected(self, tmp_path):
        (tmp_path / "v.mp4").write_bytes(b"x")
        path = self.write(tmp_path, [
            "file,device,os,software,platform",
            "v.mp4,D17,Windows,none,none",
        ])
        with pytest.raises(UnknownEnum, match="row 2"):
            load_manifest(path)

    def test_wrong_column_count_rejected(self, tmp_path):
        path = self.write(tmp_path, [
            "file,device,os,software,platform",
            "v.mp4,D01,iOS,none",
        ])
        with pytest.raises(MalformedRow, match="row 2"):
            load_manifest(path)

    def test_bad_header_rejected(self, tmp_path):
        path = self.write(tmp_path, ["path,dev,os,sw,pl"])
        with pytest.raises(MalformedRow):
            load_manifest(path)

    def test_missing_file_warns_and_skips(self, tmp_path):
        (tmp_path / "here.mp4").write_bytes(b"x")
        path = self.write(tmp_path, [
            "file,device,os,software,platform",
            "here.mp4,D01,iOS,none,none",
            "gone.mp4,D02,iOS,none,none",
        ])
        manifest = load_manifest(path)
        assert len(manifest.rows) == 1
        assert manifest.skipped_missing == 1
        assert any("gone.mp4" in w for w in manifest.warnings)


class TestScenarios:
    def test_software_os_label(self):
        scenario = get_scenario("software_os")
        assert scenario.label(row(software="exiftool", os="iOS")) == \
            "iOS-exiftool"
        assert scenario.label(row(software="none", os="Android")) == \
            "Android-native"

    def test_blind_platform_absorbs_history(self):
        scenario = get_scenario("blind")
        assert scenario.label(row(software="ffmpeg", platform="youtube")) == \
            "YouTube"
        assert scenario.label(row(software="ffmpeg", platform="none")) == \
            "iOS-ffmpeg"

    def test_integrity_labels(self):
        scenario = get_scenario("integrity")
        assert scenario.label(row(software="none")) == "Pristine"
        assert scenario.label(row(software="premiere")) == "Tampered"
        assert not scenario.matches(row(platform="tiktok"))

    def test_software_excludes_platform_rows(self):
        scenario = get_scenario("software")
        assert scenario.matches(row(platform="none"))
        assert not scenario.matches(row(platform="weibo"))
        assert scenario.label(row(software="kdenlive")) == "Kdenlive"

    def test_social_integrity_filters_platform(self):
        scenario = get_scenario("social_integrity:facebook")
        assert scenario.matches(row(platform="facebook"))
        assert not scenario.matches(row(platform="none"))
        assert scenario.label(row(platform="facebook", software="ffmpeg")) == \
            "Tampered"

    def test_unknown_scenario_rejected(self):
        with pytest.raises(UnknownEnum):
            get_scenario("nope")
        with pytest.raises(UnknownEnum):
            get_scenario("social_integrity:myspace")

    def test_empty_scenario_raises(self):
        manifest = manifest_of([row(platform="none")])
        with pytest.raises(EmptyScenario):
            derive_labels(manifest, get_scenario("social_integrity:facebook"))


class TestFolds:
    def test_one_fold_per_device(self):
        rows = [row(device=f"D{i:02d}", file=f"f{i}_{j}.mp4")
                for i in range(5) for j in range(3)]
        folds = lodo_folds(manifest_of(rows))
        assert len(folds) == 5
        for fold in folds:
            train_devices = {r.device for r in fold.train_rows}
            test_devices = {r.device for r in fold.test_rows}
            assert test_devices == {fold.device}
            assert fold.device not in train_devices
            assert len(fold.train_rows) + len(fold.test_rows) == len(rows)

    def test_two_devices_three_rows_each(self):
        rows = [row(device=d, file=f"{d}_{j}.mp4")
                for d in ("DA", "DB") for j in range(3)]
        folds = lodo_folds(manifest_of(rows))
        assert [(len(f.test_rows), len(f.train_rows)) for f in folds] == \
            [(3, 3), (3, 3)]

    def test_single_device_rejected(self):
        with pytest.raises(SingleDevice):
            lodo_folds(manifest_of([row(), row(file="w.mp4")]))

    @given(st.lists(st.tuples(st.integers(0, 6), st.integers(1, 3)),
                    min_size=2, max_size=8))
    @settings(max_examples=40)
    def test_fold_count_equals_device_count(self, shape):
        rows = [row(device=f"D{dev:02d}", file=f"f{i}_{j}")
                for i, (dev, k) in enumerate(shape) for j in range(k)]
        manifest = manifest_of(rows)
        if len(manifest.devices()) < 2:
            with pytest.raises(SingleDevice):
                lodo_folds(manifest)
        else:
            assert len(lodo_folds(manifest)) == len(manifest.devices())


class TestBalancedAccuracy:
    def cm(self, counts, classes=("A", "B")):
        matrix = ConfusionMatrix.empty(classes)
        matrix.counts = np.array(counts, dtype=np.int64)
        return matrix

    def test_mean_of_recalls(self):
        assert balanced_accuracy(self.cm([[10, 0], [5, 5]])) == \
            pytest.approx(0.75)

    def test_perfect_diagonal(self):
        assert balanced_accuracy(self.cm([[7, 0], [0, 3]])) == 1.0

    def test_always_one_side(self):
        assert balanced_accuracy(self.cm([[10, 0], [10, 0]])) == \
            pytest.approx(0.5)

    def test_absent_class_excluded(self):
        cm = self.cm([[4, 0, 0], [0, 0, 0], [1, 0, 3]], classes=("A", "B", "C"))
        assert balanced_accuracy(cm) == pytest.approx((1.0 + 0.75) / 2)

    def test_empty_matrix_rejected(self):
        with pytest.raises(EmptyMatrix):
            balanced_accuracy(self.cm([[0, 0], [0, 0]]))

    @given(st.integers(2, 5), st.integers(1, 4))
    @settings(max_examples=30)
    def test_duplication_invariance(self, size, k):
        rng = np.random.default_rng(size * 10 + k)
        counts = rng.integers(0, 9, size=(size, size))
        counts[0, 0] += 1  # ensure at least one populated row
        base = ConfusionMatrix.empty([f"C{i}" for i in range(size)])
        base.counts = counts.copy()
        duplicated = ConfusionMatrix.empty([f"C{i}" for i in range(size)])
        duplicated.counts = counts.copy()
        duplicated.counts[0] *= k
        assert balanced_accuracy(duplicated) == \
            pytest.approx(balanced_accuracy(base), abs=1e-12)


class TestRunScenario:
    def test_separable_corpus_perfect_accuracy(self, small_corpus):
        report = run_scenario(small_corpus, get_scenario("integrity"))
        assert report.global_balanced_accuracy == 1.0
        assert len(report.folds) == len(small_corpus.devices())
        assert all(f.balanced_accuracy == 1.0 for f in report.folds)

    def test_two_class_rate_identity(self, small_corpus):
        report = run_scenario(small_corpus, get_scenario("integrity"))
        assert report.positive_class == "Tampered"
        assert report.global_balanced_accuracy == \
            pytest.approx((report.tpr + report.tnr) / 2, abs=1e-12)

    def test_confusion_rows_sum_to_one(self, small_corpus):
        report = run_scenario(small_corpus, get_scenario("integrity"))
        sums = report.mean_confusion.sum(axis=1)
        assert np.allclose(sums, 1.0)

    def test_leakage_freedom(self, small_corpus, tmp_path):
        """Deleting the held-out device from the manifest up front must
        reproduce each fold's model byte for byte."""
        scenario = get_scenario("integrity")
        report = run_scenario(small_corpus, scenario)
        labeled = derive_labels(small_corpus, scenario)
        manifest_text = small_corpus.path.read_text(encoding="utf-8")
        for fold in report.folds[:2]:
            kept_lines = [line for line in manifest_text.splitlines()
                          if not line.split(",")[1] == fold.device]
            reduced_path = small_corpus.path.parent / f"no_{fold.device}.csv"
            reduced_path.write_text("\n".join(kept_lines) + "\n",
                                    encoding="utf-8")
            reduced = load_manifest(reduced_path)
            pairs = derive_labels(reduced, scenario)
            multisets = [extract_symbols(parse_file(str(r.path)),
                                         default_blacklist())
                         for r, _ in pairs]
            retrained = train_model(
                multisets, [label for _, label in pairs],
                scenario=scenario.name,
                manifest_digest=digest_rows([r for r, _ in pairs]),
                trained_at="")
            assert dumps_model(retrained) == dumps_model(fold.model)
        assert labeled  # the scenario covered rows in the first place

    def test_report_serializes(self, small_corpus):
        report = run_scenario(small_corpus, get_scenario("software_os"),
                              filter_cfg=FilterConfig(0.5))
        obj = report_to_obj(report)
        assert obj["scenario"] == "software_os"
        assert len(obj["folds"]) == len(small_corpus.devices())
        text = format_report_text(report)
        assert "Global balanced accuracy" in text
        for device in small_corpus.devices():
            assert device in text

    def test_fold_timings_recorded(self, small_corpus):
        report = run_scenario(small_corpus, get_scenario("integrity"))
        assert all(f.train_seconds >= 0 and f.test_seconds >= 0
                   for f in report.folds)
