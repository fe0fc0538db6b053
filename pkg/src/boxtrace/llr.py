"""Pairwise log-likelihood-ratio filtering of the symbol vocabulary.

A symbol survives only if some ordered class pair gives it a
log-likelihood ratio above the threshold; everything else is treated as
intra-class noise and removed. Frequencies are per-container presence
rates with add-one smoothing on numerator and denominator, so every
ratio is finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import EmptyClass, SingleClass, UnknownClass
from .symbols import SymbolMultiset
from .vectorize import Vocabulary

DEFAULT_TAU = 0.5


@dataclass(frozen=True)
class FilterConfig:
    """Threshold for the symbol filter; the log base is fixed to e."""

    tau: float = DEFAULT_TAU

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")


@dataclass
class ClassFrequencyTable:
    """Per-class container counts and per-symbol presence counts."""

    classes: list[str]
    sizes: dict[str, int]
    present: dict[str, dict[str, int]]  # class -> canonical symbol -> count

    def frequency(self, canonical: str, cls: str) -> float:
        if cls not in self.sizes:
            raise UnknownClass(f"class {cls!r} not in frequency table")
        k = self.present[cls].get(canonical, 0)
        return (k + 1) / (self.sizes[cls] + 1)


@dataclass(frozen=True)
class LLRRecord:
    symbol: str
    best_pair: tuple[str, str]
    max_llr: float
    kept: bool


@dataclass
class LLRReport:
    tau: float
    records: list[LLRRecord] = field(default_factory=list)

    def kept_symbols(self) -> list[str]:
        return [r.symbol for r in self.records if r.kept]


def class_frequency(
    corpus: Sequence[tuple[SymbolMultiset, str]],
    classes: Sequence[str] | None = None,
) -> ClassFrequencyTable:
    """Presence counts of every symbol per class, with class sizes."""
    seen_labels = {label for _, label in corpus}
    if classes is None:
        ordered = sorted(seen_labels)
    else:
        ordered = sorted(set(classes))
        missing = [c for c in ordered if c not in seen_labels]
        if missing:
            raise EmptyClass(f"classes without samples: {', '.join(missing)}")
    if len(ordered) < 2:
        raise SingleClass(f"need at least 2 classes, got {len(ordered)}")
    sizes = {c: 0 for c in ordered}
    present: dict[str, dict[str, int]] = {c: {} for c in ordered}
    for ms, label in corpus:
        if label not in sizes:
            raise UnknownClass(f"sample labeled {label!r} outside class set")
        sizes[label] += 1
        bucket = present[label]
        for sym, _ in ms:
            canonical = sym.canonical
            bucket[canonical] = bucket.get(canonical, 0) + 1
    return ClassFrequencyTable(classes=ordered, sizes=sizes, present=present)


def llr(canonical: str, cu: str, cv: str, table: ClassFrequencyTable) -> float:
    """ln of the smoothed presence-frequency ratio between two classes."""
    return math.log(table.frequency(canonical, cu)) - math.log(
        table.frequency(canonical, cv))


def max_pairwise_llr(
    canonical: str, table: ClassFrequencyTable
) -> tuple[float, tuple[str, str]]:
    """Maximum LLR over ordered class pairs and the pair achieving it."""
    best = -math.inf
    best_pair = (table.classes[0], table.classes[1])
    for i, cu in enumerate(table.classes):
        for cv in table.classes[i + 1:]:
            value = llr(canonical, cu, cv, table)
            # Antisymmetry: checking unordered pairs both ways suffices.
            for v, pair in ((value, (cu, cv)), (-value, (cv, cu))):
                if v > best:
                    best, best_pair = v, pair
    return best, best_pair


def filter_vocabulary(
    vocab: Vocabulary,
    corpus: Sequence[tuple[SymbolMultiset, str]],
    cfg: FilterConfig | None = None,
) -> tuple[Vocabulary, LLRReport]:
    """Keep the symbols whose best pairwise LLR exceeds the threshold."""
    if cfg is None:
        cfg = FilterConfig()
    table = class_frequency(corpus)
    report = LLRReport(tau=cfg.tau)
    kept: list[str] = []
    for canonical in vocab.symbols:
        best, pair = max_pairwise_llr(canonical, table)
        is_kept = best > cfg.tau
        report.records.append(LLRRecord(canonical, pair, best, is_kept))
        if is_kept:
            kept.append(canonical)
    return Vocabulary.from_strings(kept), report


def report_tsv(report: LLRReport) -> str:
    """TSV rows: symbol, best pair, LLR, tau, kept; sorted by descending LLR."""
    lines = ["symbol\tbest_pair\tllr\ttau\tkept\n"]
    ordered = sorted(report.records, key=lambda r: (-abs(r.max_llr), r.symbol))
    for rec in ordered:
        lines.append(
            f"{rec.symbol}\t{rec.best_pair[0]} vs {rec.best_pair[1]}\t"
            f"{rec.max_llr:.6f}\t{report.tau:g}\t{'yes' if rec.kept else 'no'}\n")
    return "".join(lines)
