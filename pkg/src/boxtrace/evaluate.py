"""Dataset manifests, classification scenarios, and the
leave-one-device-out evaluation harness.

Every fold trains exclusively on the remaining devices: vocabulary,
symbol filter, class weights and tree never see the held-out device, so
reported accuracies reflect unseen hardware.
"""

from __future__ import annotations

import csv
import hashlib
import time
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .bmff import parse_file
from .errors import (
    EmptyMatrix,
    EmptyScenario,
    MalformedRow,
    SingleDevice,
    UnknownEnum,
)
from .llr import FilterConfig
from .modelfile import ModelFile, train_model
from .symbols import SymbolMultiset, default_blacklist, extract_symbols
from .tree import TreeParams, decision_path, predict, replay_path
from .vectorize import vectorize

OS_VALUES = ("Android", "iOS")
SOFTWARE_VALUES = ("none", "avidemux", "exiftool", "ffmpeg", "kdenlive", "premiere")
PLATFORM_VALUES = ("none", "facebook", "tiktok", "weibo", "youtube")

_MANIFEST_HEADER = ["file", "device", "os", "software", "platform"]

_SOFTWARE_CLASS = {
    "none": "Native", "avidemux": "Avidemux", "exiftool": "Exiftool",
    "ffmpeg": "ffmpeg", "kdenlive": "Kdenlive", "premiere": "Premiere",
}
_PLATFORM_CLASS = {
    "facebook": "Facebook", "tiktok": "TikTok",
    "weibo": "Weibo", "youtube": "YouTube",
}


@dataclass(frozen=True)
class ManifestRow:
    file: str
    device: str
    os: str
    software: str
    platform: str
    path: Path


@dataclass
class DatasetManifest:
    path: Path
    rows: list[ManifestRow]
    warnings: list[str] = field(default_factory=list)
    skipped_missing: int = 0

    def devices(self) -> list[str]:
        return sorted({row.device for row in self.rows})


def load_manifest(path: str | Path) -> DatasetManifest:
    """Read and validate a `file,device,os,software,platform` CSV."""
    path = Path(path)
    base = path.parent
    rows: list[ManifestRow] = []
    warnings: list[str] = []
    skipped = 0
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRow("manifest is empty, expected a header row")
        if [h.strip() for h in header] != _MANIFEST_HEADER:
            raise MalformedRow(
                f"bad header {header!r}, expected {','.join(_MANIFEST_HEADER)}")
        for line_no, raw in enumerate(reader, start=2):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            if len(raw) != 5:
                raise MalformedRow(
                    f"row {line_no}: expected 5 columns, got {len(raw)}")
            file_name, device, os_name, software, platform = (
                cell.strip() for cell in raw)
            if not file_name or not device:
                raise MalformedRow(f"row {line_no}: empty file or device")
            if os_name not in OS_VALUES:
                raise UnknownEnum(f"row {line_no}: unknown os {os_name!r}")
            if software not in SOFTWARE_VALUES:
                raise UnknownEnum(f"row {line_no}: unknown software {software!r}")
            if platform not in PLATFORM_VALUES:
                raise UnknownEnum(f"row {line_no}: unknown platform {platform!r}")
            resolved = Path(file_name)
            if not resolved.is_absolute():
                resolved = base / resolved
            if not resolved.exists():
                warnings.append(f"row {line_no}: missing file {file_name}, skipped")
                skipped += 1
                continue
            rows.append(ManifestRow(file_name, device, os_name, software,
                                    platform, resolved))
    return DatasetManifest(path=path, rows=rows, warnings=warnings,
                           skipped_missing=skipped)


def digest_rows(rows: Sequence[ManifestRow]) -> str:
    """Digest of the rows a model was trained on, independent of file layout."""
    lines = sorted(
        f"{r.file},{r.device},{r.os},{r.software},{r.platform}" for r in rows)
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Scenario:
    """A row filter plus a label function defining one classification task."""

    name: str
    matches: Callable[[ManifestRow], bool]
    label: Callable[[ManifestRow], str]


def _software_os_label(row: ManifestRow) -> str:
    software = "native" if row.software == "none" else row.software
    return f"{row.os}-{software}"


def _integrity_label(row: ManifestRow) -> str:
    return "Pristine" if row.software == "none" else "Tampered"


def scenario_names() -> list[str]:
    names = ["integrity", "software", "software_os", "blind"]
    names += [f"social_integrity:{p}" for p in _PLATFORM_CLASS]
    return names


def get_scenario(name: str) -> Scenario:
    if name == "integrity":
        return Scenario("integrity",
                        matches=lambda r: r.platform == "none",
                        label=_integrity_label)
    if name == "software":
        return Scenario("software",
                        matches=lambda r: r.platform == "none",
                        label=lambda r: _SOFTWARE_CLASS[r.software])
    if name == "software_os":
        return Scenario("software_os",
                        matches=lambda r: r.platform == "none",
                        label=_software_os_label)
    if name == "blind":
        return Scenario("blind",
                        matches=lambda r: True,
                        label=lambda r: (_software_os_label(r)
                                         if r.platform == "none"
                                         else _PLATFORM_CLASS[r.platform]))
    if name.startswith("social_integrity:"):
        platform = name.split(":", 1)[1]
        if platform not in _PLATFORM_CLASS:
            raise UnknownEnum(f"unknown platform {platform!r} in scenario name")
        return Scenario(name,
                        matches=lambda r: r.platform == platform,
                        label=_integrity_label)
    raise UnknownEnum(
        f"unknown scenario {name!r}; valid: {', '.join(scenario_names())}")


def derive_labels(
    manifest: DatasetManifest, scenario: Scenario
) -> list[tuple[ManifestRow, str]]:
    """Apply the scenario's filter and label function to the manifest."""
    labeled = [(row, scenario.label(row)) for row in manifest.rows
               if scenario.matches(row)]
    if not labeled:
        raise EmptyScenario(
            f"scenario {scenario.name!r} matches no manifest rows")
    return labeled


@dataclass(frozen=True)
class Fold:
    device: str
    train_rows: tuple[ManifestRow, ...]
    test_rows: tuple[ManifestRow, ...]


def lodo_folds(manifest: DatasetManifest) -> list[Fold]:
    """One fold per device: its rows test, everything else trains."""
    devices = manifest.devices()
    if len(devices) < 2:
        raise SingleDevice(
            f"leave-one-device-out needs at least 2 devices, got {len(devices)}")
    folds = []
    for device in devices:
        test = tuple(r for r in manifest.rows if r.device == device)
        train = tuple(r for r in manifest.rows if r.device != device)
        folds.append(Fold(device=device, train_rows=train, test_rows=test))
    return folds


@dataclass
class ConfusionMatrix:
    """Raw prediction counts; rows are true classes, columns predicted."""

    classes: list[str]
    counts: np.ndarray

    @classmethod
    def empty(cls, classes: Sequence[str]) -> "ConfusionMatrix":
        n = len(classes)
        return cls(list(classes), np.zeros((n, n), dtype=np.int64))

    def add(self, true_label: str, predicted: str) -> None:
        i = self.classes.index(true_label)
        j = self.classes.index(predicted)
        self.counts[i, j] += 1

    def row_normalized(self) -> np.ndarray:
        totals = self.counts.sum(axis=1, keepdims=True)
        safe = np.where(totals == 0, 1, totals)
        return self.counts / safe

    def recalls(self) -> dict[str, float]:
        out = {}
        for i, cls in enumerate(self.classes):
            row_total = self.counts[i].sum()
            if row_total > 0:
                out[cls] = float(self.counts[i, i] / row_total)
        return out


def balanced_accuracy(cm: ConfusionMatrix) -> float:
    """Mean per-class recall over classes with at least one sample."""
    recalls = cm.recalls()
    if not recalls:
        raise EmptyMatrix("no class has any sample")
    return float(np.mean(list(recalls.values())))


@dataclass
class FoldResult:
    device: str
    n_train: int
    n_test: int
    balanced_accuracy: float | None
    confusion: ConfusionMatrix
    train_seconds: float
    test_seconds: float
    model: ModelFile


@dataclass
class EvaluationReport:
    scenario: str
    classes: list[str]
    folds: list[FoldResult]
    global_balanced_accuracy: float
    mean_confusion: np.ndarray
    positive_class: str | None = None
    tpr: float | None = None
    tnr: float | None = None


def _build_multisets(rows, cache):
    out = []
    for row in rows:
        if row.path not in cache:
            cache[row.path] = extract_symbols(parse_file(str(row.path)),
                                              default_blacklist())
        out.append(cache[row.path])
    return out


def run_scenario(
    manifest: DatasetManifest,
    scenario: Scenario,
    filter_cfg: FilterConfig | None = None,
    tree_params: TreeParams | None = None,
) -> EvaluationReport:
    """Leave-one-device-out evaluation of one scenario.

    Each fold's vocabulary, filter, weights and tree are fit on the
    training devices only; every prediction's decision path is replayed
    as a self-check before it is counted.
    """
    cfg = filter_cfg if filter_cfg is not None else FilterConfig()
    params = tree_params if tree_params is not None else TreeParams()
    labeled = derive_labels(manifest, scenario)
    classes = sorted({label for _, label in labeled})
    by_device: dict[str, list[tuple[ManifestRow, str]]] = defaultdict(list)
    for row, label in labeled:
        by_device[row.device].append((row, label))
    folds = lodo_folds(manifest)
    # Parse every scenario file up front so fold timings measure
    # training and classification, not first-touch file parsing.
    cache: dict[Path, SymbolMultiset] = {}
    _build_multisets([row for row, _ in labeled], cache)
    results: list[FoldResult] = []
    for fold in folds:
        train_pairs = [pair for device in sorted(by_device)
                       if device != fold.device for pair in by_device[device]]
        test_pairs = by_device.get(fold.device, [])
        train_rows = [row for row, _ in train_pairs]
        train_ms = _build_multisets(train_rows, cache)
        train_labels = [label for _, label in train_pairs]
        started = time.perf_counter()
        mf = train_model(train_ms, train_labels, tau=cfg.tau, params=params,
                         scenario=scenario.name,
                         manifest_digest=digest_rows(train_rows),
                         trained_at="")
        train_seconds = time.perf_counter() - started
        cm = ConfusionMatrix.empty(classes)
        started = time.perf_counter()
        for row, true_label in test_pairs:
            ms = _build_multisets([row], cache)[0]
            vector = vectorize(ms, mf.model.vocabulary)
            verdict = predict(mf.model, vector)
            # Every verdict must be reproducible from its own explanation.
            steps = decision_path(mf.model, vector)
            replayed = replay_path(mf.model, steps)
            if replayed != verdict:
                raise AssertionError(
                    f"decision path replay gave {replayed!r}, "
                    f"predict gave {verdict!r} for {row.file}")
            cm.add(true_label, verdict)
        test_seconds = time.perf_counter() - started
        bacc = balanced_accuracy(cm) if test_pairs else None
        results.append(FoldResult(
            device=fold.device, n_train=len(train_pairs),
            n_test=len(test_pairs), balanced_accuracy=bacc, confusion=cm,
            train_seconds=train_seconds, test_seconds=test_seconds, model=mf))
    fold_baccs = [r.balanced_accuracy for r in results
                  if r.balanced_accuracy is not None]
    global_bacc = float(np.mean(fold_baccs)) if fold_baccs else float("nan")
    n = len(classes)
    rate_sums = np.zeros((n, n))
    row_folds = np.zeros(n)
    for result in results:
        normalized = result.confusion.row_normalized()
        present = result.confusion.counts.sum(axis=1) > 0
        rate_sums[present] += normalized[present]
        row_folds[present] += 1
    mean_confusion = np.zeros((n, n))
    nonzero = row_folds > 0
    mean_confusion[nonzero] = rate_sums[nonzero] / row_folds[nonzero, None]
    report = EvaluationReport(scenario=scenario.name, classes=classes,
                              folds=results,
                              global_balanced_accuracy=global_bacc,
                              mean_confusion=mean_confusion)
    if len(classes) == 2:
        positive = "Tampered" if "Tampered" in classes else classes[1]
        negative = next(c for c in classes if c != positive)
        tprs, tnrs = [], []
        for result in results:
            recalls = result.confusion.recalls()
            if positive in recalls:
                tprs.append(recalls[positive])
            if negative in recalls:
                tnrs.append(recalls[negative])
        report.positive_class = positive
        report.tpr = float(np.mean(tprs)) if tprs else None
        report.tnr = float(np.mean(tnrs)) if tnrs else None
    return report


def report_to_obj(report: EvaluationReport) -> dict:
    """JSON-ready dictionary form of an evaluation report."""
    obj: dict = {
        "scenario": report.scenario,
        "classes": report.classes,
        "global_balanced_accuracy": report.global_balanced_accuracy,
        "mean_confusion": [[float(x) for x in row]
                           for row in report.mean_confusion],
        "folds": [
            {
                "device": r.device,
                "n_train": r.n_train,
                "n_test": r.n_test,
                "balanced_accuracy": r.balanced_accuracy,
                "confusion_counts": r.confusion.counts.tolist(),
                "train_seconds": r.train_seconds,
                "test_seconds": r.test_seconds,
            }
            for r in report.folds
        ],
    }
    if report.positive_class is not None:
        obj["positive_class"] = report.positive_class
        obj["tpr"] = report.tpr
        obj["tnr"] = report.tnr
    return obj


def _format_rate(x: float) -> str:
    return "   -" if x == 0 else f"{x:4.2f}"


def format_report_text(report: EvaluationReport) -> str:
    """Aligned-text tables: per-device accuracy, confusion, two-class rates."""
    lines = [f"Scenario: {report.scenario} ({len(report.classes)} classes)",
             f"Folds: {len(report.folds)} (leave-one-device-out)", "",
             "Device    Bal.Acc   n_test   Train(s)  Test(s)"]
    for r in report.folds:
        bacc = "  n/a" if r.balanced_accuracy is None \
            else f"{r.balanced_accuracy:5.2f}"
        lines.append(f"{r.device:<10}{bacc}   {r.n_test:>6}   "
                     f"{r.train_seconds:8.3f}  {r.test_seconds:7.3f}")
    lines.append("")
    lines.append(f"Global balanced accuracy: "
                 f"{report.global_balanced_accuracy:.4f}")
    if report.positive_class is not None:
        tpr = "n/a" if report.tpr is None else f"{report.tpr:.4f}"
        tnr = "n/a" if report.tnr is None else f"{report.tnr:.4f}"
        lines.append(f"Two-class rates (positive={report.positive_class}): "
                     f"TPR={tpr} TNR={tnr}")
    lines.append("")
    width = max([len(c) for c in report.classes] + [8])
    header = " " * (width + 2) + "  ".join(f"{c:>{width}}"
                                           for c in report.classes)
    lines.append("Mean confusion matrix (rows = true class, fold-averaged):")
    lines.append(header)
    for i, cls in enumerate(report.classes):
        cells = "  ".join(f"{_format_rate(report.mean_confusion[i, j]):>{width}}"
                          for j in range(len(report.classes)))
        lines.append(f"{cls:<{width}}  {cells}")
    return "\n".join(lines) + "\n"
