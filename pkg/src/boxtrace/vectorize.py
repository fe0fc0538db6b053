"""Fixed-length count vectors over a global symbol vocabulary."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyCorpus
from .symbols import SymbolMultiset


@dataclass(frozen=True)
class Vocabulary:
    """Lexicographically ordered set of canonical symbol strings."""

    symbols: tuple[str, ...]
    index: dict[str, int] = field(compare=False, hash=False, default_factory=dict)

    @classmethod
    def from_strings(cls, strings: Iterable[str]) -> "Vocabulary":
        ordered = tuple(sorted(set(strings)))
        return cls(ordered, {s: i for i, s in enumerate(ordered)})

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, canonical: str) -> bool:
        return canonical in self.index


@dataclass
class FeatureVector:
    """Sparse count vector with dense semantics of length `size`."""

    size: int
    counts: dict[int, int] = field(default_factory=dict)
    source_id: str = ""

    def get(self, i: int) -> int:
        return self.counts.get(i, 0)

    def l1(self) -> int:
        return sum(self.counts.values())

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.size, dtype=np.int64)
        for i, c in self.counts.items():
            dense[i] = c
        return dense


def build_vocabulary(corpus: Sequence[SymbolMultiset]) -> Vocabulary:
    """Union of all symbols across the corpus, lexicographically ordered."""
    if not corpus:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")
    strings: set[str] = set()
    for ms in corpus:
        strings.update(sym.canonical for sym, _ in ms)
    return Vocabulary.from_strings(strings)


def vectorize(ms: SymbolMultiset, vocab: Vocabulary) -> FeatureVector:
    """Count vector of `ms` over `vocab`; out-of-vocabulary symbols drop."""
    counts: dict[int, int] = {}
    for sym, count in ms:
        i = vocab.index.get(sym.canonical)
        if i is not None:
            counts[i] = counts.get(i, 0) + count
    return FeatureVector(size=len(vocab), counts=counts, source_id=ms.source_id)
