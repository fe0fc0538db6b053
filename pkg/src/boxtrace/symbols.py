"""Conversion of a container tree into a multiset of path symbols.

A field-symbol is the path from below the root to a field name; a
value-symbol extends it with the field's value. Two sibling boxes with
the same name produce identical paths, so multiplicity lives in the
counts, never in the path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .bmff import AtomNode, ContainerTree

# Value-symbols for these fields carry only intra-class variability
# (durations, dates, byte counts, ...) and are suppressed; their
# field-symbols are always kept.
_DEFAULT_BLACKLIST = (
    "author", "count", "creationTime", "depth", "duration", "entryCount",
    "flags", "gpscoords", "matrix", "modelName", "modificationTime",
    "name", "sampleCount", "segmentDuration", "size", "stuff",
    "timescale", "version", "width", "height", "language",
)


def escape_value(value: str) -> str:
    """Escape a value for use as the final path segment."""
    return value.replace("\\", "\\\\").replace("/", "\\/")


@dataclass(frozen=True)
class Symbol:
    """A field-symbol (`kind == "field"`) or value-symbol (`kind == "value"`)."""

    path: str
    kind: str
    value: str | None = None

    @property
    def canonical(self) -> str:
        if self.kind == "value":
            return f"{self.path}/{escape_value(self.value or '')}"
        return self.path


@dataclass(frozen=True)
class FieldBlacklist:
    """Set of ``@``-prefixed field names whose value-symbols are dropped."""

    field_names: frozenset[str]

    def __contains__(self, name: str) -> bool:
        return name in self.field_names

    def __len__(self) -> int:
        return len(self.field_names)


def default_blacklist() -> FieldBlacklist:
    """The stock suppression list for noisy per-file field values."""
    return FieldBlacklist(frozenset(f"@{name}" for name in _DEFAULT_BLACKLIST))


@dataclass
class SymbolMultiset:
    """Occurrence counts of every symbol found in one container."""

    entries: dict[Symbol, int] = field(default_factory=dict)
    source_id: str = ""

    def add(self, symbol: Symbol, count: int = 1) -> None:
        self.entries[symbol] = self.entries.get(symbol, 0) + count

    def count(self, symbol: Symbol) -> int:
        return self.entries.get(symbol, 0)

    def total(self) -> int:
        return sum(self.entries.values())

    def __iter__(self) -> Iterator[tuple[Symbol, int]]:
        return iter(self.entries.items())

    def __len__(self) -> int:
        return len(self.entries)


def extract_symbols(
    tree: ContainerTree, blacklist: FieldBlacklist | None = None
) -> SymbolMultiset:
    """Emit field- and value-symbols for every field of every node.

    Atom nodes themselves produce no standalone symbol; opaque nodes are
    reached through their `stuff`/`count` fields. Counts aggregate across
    sibling duplicates.
    """
    if blacklist is None:
        blacklist = default_blacklist()
    ms = SymbolMultiset(source_id=tree.source_id)

    def walk(node: AtomNode, path: str) -> None:
        for fname, fvalue in node.fields:
            field_path = f"{path}/@{fname}"
            ms.add(Symbol(field_path, "field"))
            if f"@{fname}" not in blacklist:
                ms.add(Symbol(field_path, "value", fvalue))
        for child in node.children:
            walk(child, f"{path}/{child.name}")

    for child in tree.root.children:
        walk(child, child.name)
    return ms


def dump_symbols(ms: SymbolMultiset) -> str:
    """One symbol per line: ``<count>\\t<kind>\\t<path>``, sorted by path."""
    rows = sorted(
        (sym.canonical, sym.kind, count) for sym, count in ms.entries.items()
    )
    return "".join(f"{count}\t{kind}\t{path}\n" for path, kind, count in rows)
