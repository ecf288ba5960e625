"""Relaxed output-equivalence used by validators and execution-match scoring.

Numbers match within an absolute tolerance (default 0.05, inclusive).
Strings match when the longest common contiguous substring divided by
the longer length exceeds a coefficient (default 0.8, strict).  A column
matches only if every row matches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from difflib import SequenceMatcher

from .tables import (
    Blank,
    Boolean,
    CellValue,
    Column,
    ErrorValue,
    Number,
    Text,
)

DEFAULT_NUM_TOL = 0.05
DEFAULT_STR_COEF = 0.8


@dataclass(frozen=True)
class MatchConfig:
    num_tol: float = DEFAULT_NUM_TOL
    str_coef: float = DEFAULT_STR_COEF
    strict_strings: bool = False  # disable case folding / trimming
    contiguous: bool = True  # longest common substring vs subsequence


DEFAULT_CONFIG = MatchConfig()


def substring_coefficient(a: str, b: str, contiguous: bool = True) -> float:
    """Longest common (contiguous) substring length over the longer length."""
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    if contiguous:
        match = SequenceMatcher(None, a, b, autojunk=False).find_longest_match(
            0, len(a), 0, len(b)
        )
        longest = match.size
    else:
        longest = _lcs_length(a, b)
    return longest / max(len(a), len(b))


def _lcs_length(a: str, b: str) -> int:
    prev = [0] * (len(b) + 1)
    for ca in a:
        cur = [0]
        for j, cb in enumerate(b):
            cur.append(prev[j] + 1 if ca == cb else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def _within_tol(a: float, b: float, tol: float) -> bool:
    diff = abs(a - b)
    # Tiny relative slack so a difference that is exactly the tolerance in
    # decimal (e.g. 1.05 - 1.00) still matches despite float rounding.
    return diff <= tol or math.isclose(diff, tol, rel_tol=1e-9)


def _coerce_number(cell: CellValue) -> float | None:
    if isinstance(cell, Number):
        return cell.value
    if isinstance(cell, Text):
        try:
            value = float(cell.value.strip())
        except ValueError:
            return None
        return value if math.isfinite(value) else None
    return None


def cells_match(
    expected: CellValue, actual: CellValue, config: MatchConfig = DEFAULT_CONFIG
) -> tuple:
    """Symmetric relaxed comparison; returns (matched, reason)."""
    if isinstance(expected, Number) or isinstance(actual, Number):
        a, b = _coerce_number(expected), _coerce_number(actual)
        if a is not None and b is not None:
            if _within_tol(a, b, config.num_tol):
                return True, f"numeric within {config.num_tol}"
            return False, f"numeric difference {abs(a - b):g} exceeds {config.num_tol}"
        return False, "kind mismatch"
    if isinstance(expected, Text) and isinstance(actual, Text):
        a, b = expected.value, actual.value
        if not config.strict_strings:
            a, b = a.strip().casefold(), b.strip().casefold()
        coef = substring_coefficient(a, b, contiguous=config.contiguous)
        if coef > config.str_coef:
            return True, f"substring coefficient {coef:.4f}"
        return False, f"substring coefficient {coef:.4f} not above {config.str_coef}"
    if isinstance(expected, Boolean) and isinstance(actual, Boolean):
        if expected.value == actual.value:
            return True, "boolean equal"
        return False, "boolean differ"
    if isinstance(expected, Blank) and isinstance(actual, Blank):
        return True, "both blank"
    if isinstance(expected, ErrorValue) and isinstance(actual, ErrorValue):
        return True, "both errors"
    # Blank on one side matches empty/whitespace-only text on the other.
    for one, other in ((expected, actual), (actual, expected)):
        if isinstance(one, Blank) and isinstance(other, Text) and not other.value.strip():
            return True, "blank vs empty text"
    return False, "kind mismatch"


@dataclass(frozen=True)
class ComparisonReport:
    matched: bool
    row_results: tuple
    rows_compared: int
    reason: str = ""

    def summary(self) -> str:
        if self.matched:
            return f"matched all {self.rows_compared} rows"
        if self.reason:
            return self.reason
        bad = [str(i) for i, ok, _ in self.row_results if not ok]
        return f"mismatch at row(s) {', '.join(bad)}"


def columns_match(
    expected: Column, actual: Column, config: MatchConfig = DEFAULT_CONFIG
) -> ComparisonReport:
    """Element-wise comparison; matched only if every row matches."""
    if len(expected) != len(actual):
        return ComparisonReport(False, (), 0, "length mismatch")
    row_results = []
    for i, (e, a) in enumerate(zip(expected.cells, actual.cells)):
        ok, reason = cells_match(e, a, config)
        row_results.append((i, ok, reason))
    matched = all(ok for _, ok, _ in row_results)
    return ComparisonReport(matched, tuple(row_results), len(expected))
