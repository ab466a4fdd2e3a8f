"""Legal concept-to-concept transformations and the operators that realise them."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .concepts import CoreConcept


class TableError(ValueError):
    pass


@dataclass(frozen=True)
class TransformEntry:
    source: CoreConcept
    target: CoreConcept
    allowed_operators: tuple[str, ...]


class TransformTable:
    def __init__(self, entries: list[TransformEntry] | tuple = ()):
        self._entries: dict[tuple[CoreConcept, CoreConcept], TransformEntry] = {}
        for entry in entries:
            key = (entry.source, entry.target)
            if key in self._entries:
                merged = self._entries[key].allowed_operators + tuple(
                    op for op in entry.allowed_operators if op not in self._entries[key].allowed_operators
                )
                entry = TransformEntry(entry.source, entry.target, merged)
            self._entries[key] = entry

    def __contains__(self, pair: tuple[CoreConcept, CoreConcept]) -> bool:
        return pair in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def allows(self, source: CoreConcept, target: CoreConcept) -> bool:
        return (source, target) in self._entries

    def operators(self, source: CoreConcept, target: CoreConcept) -> tuple[str, ...]:
        entry = self._entries.get((source, target))
        return entry.allowed_operators if entry else ()

    def unique_operator(self, source: CoreConcept, target: CoreConcept) -> str | None:
        ops = self.operators(source, target)
        return ops[0] if len(ops) == 1 else None

    def entries(self) -> list[TransformEntry]:
        order = list(CoreConcept)
        return sorted(self._entries.values(), key=lambda e: (order.index(e.source), order.index(e.target)))

    def to_list(self) -> list[dict]:
        return [
            {"from_concept": e.source.value, "to_concept": e.target.value, "allowed_operators": list(e.allowed_operators)}
            for e in self.entries()
        ]

    @classmethod
    def from_list(cls, rows: list[dict]) -> "TransformTable":
        entries = []
        for row in rows:
            try:
                entries.append(
                    TransformEntry(
                        CoreConcept.parse(row["from_concept"]),
                        CoreConcept.parse(row["to_concept"]),
                        tuple(row.get("allowed_operators", ())),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise TableError(f"bad transform table row {row!r}: {exc}") from None
        return cls(entries)


def load_transform_table(path: str | Path) -> TransformTable:
    try:
        rows = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise TableError(f"cannot load transform table {path}: {exc}") from None
    if not isinstance(rows, list):
        raise TableError("transform table must be an array")
    return TransformTable.from_list(rows)
