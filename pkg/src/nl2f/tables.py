"""Typed table model and corpus file I/O.

Cell values form a small tagged union (number / text / boolean / blank /
error).  Tables are immutable after construction and validate their own
invariants, so every downstream module can assume rectangular data with
unique headers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Union

from .errors import CorpusFormatError

ERROR_CODES = frozenset({"#DIV/0!", "#VALUE!", "#NAME?", "#N/A"})


@dataclass(frozen=True)
class Number:
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("Number cells must be finite")


@dataclass(frozen=True)
class Text:
    value: str


@dataclass(frozen=True)
class Boolean:
    value: bool


@dataclass(frozen=True)
class Blank:
    pass


@dataclass(frozen=True)
class ErrorValue:
    code: str


CellValue = Union[Number, Text, Boolean, Blank, ErrorValue]

BLANK = Blank()


def parse_cell(text: str) -> CellValue:
    """Type a raw cell string.  Total and deterministic.

    Numeric literals become Number, TRUE/FALSE (any case) become Boolean,
    the empty string becomes Blank, known error codes become ErrorValue,
    everything else is Text.
    """
    if text == "":
        return BLANK
    upper = text.upper()
    if upper == "TRUE":
        return Boolean(True)
    if upper == "FALSE":
        return Boolean(False)
    if text.startswith("#") and text in ERROR_CODES:
        return ErrorValue(text)
    try:
        num = float(text)
    except ValueError:
        return Text(text)
    if math.isfinite(num):
        return Number(num)
    return Text(text)


def format_number(value: float) -> str:
    """Shortest round-trip decimal; integral floats drop the trailing .0"""
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def cell_to_text(cell: CellValue) -> str:
    """Display form of a cell; inverse of parse_cell for parse_cell outputs."""
    if isinstance(cell, Number):
        return format_number(cell.value)
    if isinstance(cell, Text):
        return cell.value
    if isinstance(cell, Boolean):
        return "TRUE" if cell.value else "FALSE"
    if isinstance(cell, Blank):
        return ""
    return cell.code


@dataclass(frozen=True)
class Column:
    header: str
    cells: tuple

    def __post_init__(self):
        if not self.header:
            raise ValueError("column header must be non-empty")
        object.__setattr__(self, "cells", tuple(self.cells))

    def __len__(self):
        return len(self.cells)


@dataclass(frozen=True)
class Table:
    columns: tuple

    def __post_init__(self):
        cols = tuple(self.columns)
        object.__setattr__(self, "columns", cols)
        if not cols:
            raise ValueError("table must have at least one column")
        headers = [c.header for c in cols]
        if len(set(headers)) != len(headers):
            raise ValueError("table headers must be pairwise distinct")
        lengths = {len(c) for c in cols}
        if len(lengths) != 1:
            raise ValueError("row count mismatch across columns")
        if lengths.pop() < 1:
            raise ValueError("table must have at least one row")

    @property
    def row_count(self) -> int:
        return len(self.columns[0])

    @property
    def headers(self) -> list:
        return [c.header for c in self.columns]

    def column(self, header: str) -> Column:
        for c in self.columns:
            if c.header == header:
                return c
        raise KeyError(header)

    def has_column(self, header: str) -> bool:
        return any(c.header == header for c in self.columns)

    def row(self, index: int) -> list:
        return [c.cells[index] for c in self.columns]


def table_from_strings(headers: Iterable[str], rows: Iterable[Iterable[str]]) -> Table:
    """Build a Table from raw header/row strings, typing cells via parse_cell."""
    headers = list(headers)
    rows = [list(r) for r in rows]
    for r in rows:
        if len(r) != len(headers):
            raise ValueError("row count mismatch: ragged row")
    columns = tuple(
        Column(h, tuple(parse_cell(row[i]) for row in rows))
        for i, h in enumerate(headers)
    )
    return Table(columns)


def table_to_strings(table: Table) -> tuple:
    headers = table.headers
    rows = [
        [cell_to_text(cell) for cell in table.row(r)] for r in range(table.row_count)
    ]
    return headers, rows


@dataclass(frozen=True)
class VerdictRecord:
    """Persisted accept/reject decision of one validator."""

    accepted: bool
    evidence: str = ""


@dataclass(frozen=True)
class Example:
    """One corpus record: table, formula text, optional utterance, verdicts."""

    id: str
    table: Table
    formula_text: str
    utterance: str | None = None
    verdicts: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def with_utterance(self, utterance: str) -> "Example":
        return replace(self, utterance=utterance)

    def with_verdict(self, validator_id: str, verdict: VerdictRecord) -> "Example":
        merged = dict(self.verdicts)
        merged[validator_id] = verdict
        return replace(self, verdicts=merged)

    def with_provenance(self, **entries) -> "Example":
        merged = dict(self.provenance)
        merged.update(entries)
        return replace(self, provenance=merged)


def _example_from_record(record: dict, line_no: int) -> Example:
    def fail(message):
        raise CorpusFormatError(f"line {line_no}: {message}")

    if not isinstance(record, dict):
        fail("record is not an object")
    if "id" not in record or not isinstance(record["id"], str):
        fail("missing or non-string field 'id'")
    tbl = record.get("table")
    if not isinstance(tbl, dict) or "headers" not in tbl or "rows" not in tbl:
        fail("field 'table' must be an object with 'headers' and 'rows'")
    try:
        table = table_from_strings(tbl["headers"], tbl["rows"])
    except (ValueError, TypeError) as exc:
        fail(f"field 'table': {exc}")
    formula = record.get("formula")
    if not isinstance(formula, str):
        fail("missing or non-string field 'formula'")
    utterance = record.get("utterance")
    if utterance is not None and not isinstance(utterance, str):
        fail("field 'utterance' must be a string")
    verdicts = {}
    for vid, v in (record.get("verdicts") or {}).items():
        if not isinstance(v, dict) or "accepted" not in v:
            fail(f"field 'verdicts.{vid}' must carry 'accepted'")
        verdicts[vid] = VerdictRecord(bool(v["accepted"]), str(v.get("evidence", "")))
    provenance = record.get("provenance") or {}
    if not isinstance(provenance, dict):
        fail("field 'provenance' must be an object")
    return Example(
        id=record["id"],
        table=table,
        formula_text=formula,
        utterance=utterance,
        verdicts=verdicts,
        provenance=provenance,
    )


def _example_to_record(example: Example) -> dict:
    headers, rows = table_to_strings(example.table)
    record = {
        "id": example.id,
        "table": {"headers": headers, "rows": rows},
        "formula": example.formula_text,
    }
    if example.utterance is not None:
        record["utterance"] = example.utterance
    if example.verdicts:
        record["verdicts"] = {
            vid: {"accepted": v.accepted, "evidence": v.evidence}
            for vid, v in sorted(example.verdicts.items())
        }
    if example.provenance:
        record["provenance"] = example.provenance
    return record


def load_corpus(path) -> list:
    """Load a newline-delimited corpus file; enforces table invariants."""
    examples = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"line {line_no}: invalid record: {exc}")
            example = _example_from_record(record, line_no)
            if example.id in seen:
                raise CorpusFormatError(f"line {line_no}: duplicate id {example.id!r}")
            seen.add(example.id)
            examples.append(example)
    return examples


def save_corpus(examples: Iterable[Example], path) -> None:
    """Write a corpus file; output is deterministic given identical input."""
    with open(path, "w", encoding="utf-8") as fh:
        for example in examples:
            fh.write(json.dumps(_example_to_record(example), ensure_ascii=False))
            fh.write("\n")
