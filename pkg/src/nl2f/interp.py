"""Row-wise formula evaluator.

Column references resolve to the current row's cell; evaluation is
per-row and never aborts the whole column.  Failures surface as error
cells (``#DIV/0!``, ``#VALUE!``, ``#NAME?``, ``#N/A``), never as
exceptions, except for references to columns absent from the table,
which are rejected before any row is evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import UnknownColumnError
from .formulas import (
    Binary,
    Call,
    ColRef,
    Const,
    FormulaAst,
    column_refs,
)
from .tables import (
    Blank,
    Boolean,
    CellValue,
    Column,
    ErrorValue,
    Number,
    Table,
    Text,
    cell_to_text,
)

DIV0 = ErrorValue("#DIV/0!")
VALUE_ERR = ErrorValue("#VALUE!")
NAME_ERR = ErrorValue("#NAME?")
NA_ERR = ErrorValue("#N/A")


class _EvalError(Exception):
    """Internal signal carrying an error cell up to the row boundary."""

    def __init__(self, cell: ErrorValue):
        self.cell = cell


def _as_number(cell: CellValue) -> float:
    """Numeric coercion: Blank is 0, booleans are 0/1, text is #VALUE!."""
    if isinstance(cell, Number):
        return cell.value
    if isinstance(cell, Blank):
        return 0.0
    if isinstance(cell, Boolean):
        return 1.0 if cell.value else 0.0
    if isinstance(cell, ErrorValue):
        raise _EvalError(cell)
    raise _EvalError(VALUE_ERR)


def _as_bool(cell: CellValue) -> bool:
    if isinstance(cell, Boolean):
        return cell.value
    if isinstance(cell, Number):
        return cell.value != 0
    if isinstance(cell, Blank):
        return False
    if isinstance(cell, ErrorValue):
        raise _EvalError(cell)
    raise _EvalError(VALUE_ERR)


def _as_text(cell: CellValue) -> str:
    if isinstance(cell, ErrorValue):
        raise _EvalError(cell)
    return cell_to_text(cell)


def _number(value: float) -> CellValue:
    if not math.isfinite(value):
        raise _EvalError(VALUE_ERR)
    return Number(value)


def _numeric_args(args, skip_blank=True):
    values = []
    for cell in args:
        if skip_blank and isinstance(cell, Blank):
            continue
        values.append(_as_number(cell))
    return values


def _fn_if(ev, args):
    if len(args) not in (2, 3):
        raise _EvalError(VALUE_ERR)
    cond = _as_bool(ev(args[0]))
    if cond:
        return ev(args[1])
    if len(args) == 3:
        return ev(args[2])
    return Boolean(False)


def _fn_iferror(ev, args):
    if len(args) != 2:
        raise _EvalError(VALUE_ERR)
    try:
        value = ev(args[0])
    except _EvalError:
        return ev(args[1])
    if isinstance(value, ErrorValue):
        return ev(args[1])
    return value


def _fn_sum(args):
    return _number(sum(_numeric_args(args)))


def _fn_average(args):
    values = _numeric_args(args)
    if not values:
        raise _EvalError(DIV0)
    return _number(sum(values) / len(values))


def _fn_min(args):
    values = _numeric_args(args)
    return _number(min(values)) if values else Number(0.0)


def _fn_max(args):
    values = _numeric_args(args)
    return _number(max(values)) if values else Number(0.0)


def _fn_abs(args):
    if len(args) != 1:
        raise _EvalError(VALUE_ERR)
    return _number(abs(_as_number(args[0])))


def _fn_round(args):
    if len(args) not in (1, 2):
        raise _EvalError(VALUE_ERR)
    value = _as_number(args[0])
    digits = int(_as_number(args[1])) if len(args) == 2 else 0
    scale = 10.0 ** digits
    # Half away from zero, spreadsheet-style (not banker's rounding).
    rounded = math.floor(abs(value) * scale + 0.5) / scale
    return _number(math.copysign(rounded, value))


def _fn_and(args):
    if not args:
        raise _EvalError(VALUE_ERR)
    return Boolean(all(_as_bool(a) for a in args))


def _fn_or(args):
    if not args:
        raise _EvalError(VALUE_ERR)
    return Boolean(any(_as_bool(a) for a in args))


def _fn_not(args):
    if len(args) != 1:
        raise _EvalError(VALUE_ERR)
    return Boolean(not _as_bool(args[0]))


def _fn_concatenate(args):
    return Text("".join(_as_text(a) for a in args))


def _fn_len(args):
    if len(args) != 1:
        raise _EvalError(VALUE_ERR)
    return Number(float(len(_as_text(args[0]))))


def _clamp_count(value: float) -> int:
    count = int(value)
    if count < 0:
        raise _EvalError(VALUE_ERR)
    return count


def _fn_left(args):
    if len(args) not in (1, 2):
        raise _EvalError(VALUE_ERR)
    text = _as_text(args[0])
    count = _clamp_count(_as_number(args[1])) if len(args) == 2 else 1
    return Text(text[:count])


def _fn_right(args):
    if len(args) not in (1, 2):
        raise _EvalError(VALUE_ERR)
    text = _as_text(args[0])
    count = _clamp_count(_as_number(args[1])) if len(args) == 2 else 1
    return Text(text[len(text) - min(count, len(text)):])


def _fn_mid(args):
    if len(args) != 3:
        raise _EvalError(VALUE_ERR)
    text = _as_text(args[0])
    start = int(_as_number(args[1]))
    count = _clamp_count(_as_number(args[2]))
    if start < 1:
        raise _EvalError(VALUE_ERR)
    return Text(text[start - 1 : start - 1 + count])


def _fn_upper(args):
    if len(args) != 1:
        raise _EvalError(VALUE_ERR)
    return Text(_as_text(args[0]).upper())


def _fn_lower(args):
    if len(args) != 1:
        raise _EvalError(VALUE_ERR)
    return Text(_as_text(args[0]).lower())


def _fn_trim(args):
    if len(args) != 1:
        raise _EvalError(VALUE_ERR)
    # Excel TRIM: strip leading/trailing spaces, collapse internal runs.
    return Text(" ".join(p for p in _as_text(args[0]).split(" ") if p))


# Lazy functions receive the row evaluator and unevaluated argument ASTs;
# strict ones receive already-evaluated cells.
_LAZY_FUNCTIONS = {
    "IF": _fn_if,
    "IFERROR": _fn_iferror,
}

_STRICT_FUNCTIONS = {
    "SUM": _fn_sum,
    "AVERAGE": _fn_average,
    "MIN": _fn_min,
    "MAX": _fn_max,
    "ABS": _fn_abs,
    "ROUND": _fn_round,
    "AND": _fn_and,
    "OR": _fn_or,
    "NOT": _fn_not,
    "CONCATENATE": _fn_concatenate,
    "LEN": _fn_len,
    "LEFT": _fn_left,
    "RIGHT": _fn_right,
    "MID": _fn_mid,
    "UPPER": _fn_upper,
    "LOWER": _fn_lower,
    "TRIM": _fn_trim,
}


def supported_functions() -> frozenset:
    """Names the interpreter can evaluate."""
    return frozenset(_LAZY_FUNCTIONS) | frozenset(_STRICT_FUNCTIONS)


def _equal(lhs: CellValue, rhs: CellValue) -> bool:
    if isinstance(lhs, ErrorValue) or isinstance(rhs, ErrorValue):
        raise _EvalError(lhs if isinstance(lhs, ErrorValue) else rhs)
    if isinstance(lhs, Number) and isinstance(rhs, Number):
        return lhs.value == rhs.value
    if isinstance(lhs, Text) and isinstance(rhs, Text):
        return lhs.value.casefold() == rhs.value.casefold()
    if isinstance(lhs, Boolean) and isinstance(rhs, Boolean):
        return lhs.value == rhs.value
    if isinstance(lhs, Blank) and isinstance(rhs, Blank):
        return True
    return False  # mismatched kinds are simply unequal


def _relational(op: str, lhs: CellValue, rhs: CellValue) -> bool:
    if isinstance(lhs, ErrorValue) or isinstance(rhs, ErrorValue):
        raise _EvalError(lhs if isinstance(lhs, ErrorValue) else rhs)
    if isinstance(lhs, Number) and isinstance(rhs, Number):
        a, b = lhs.value, rhs.value
    elif isinstance(lhs, Text) and isinstance(rhs, Text):
        a, b = lhs.value.casefold(), rhs.value.casefold()
    elif isinstance(lhs, Boolean) and isinstance(rhs, Boolean):
        a, b = lhs.value, rhs.value
    else:
        raise _EvalError(VALUE_ERR)
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def _binary(op: str, lhs: CellValue, rhs: CellValue) -> CellValue:
    if op == "&":
        return Text(_as_text(lhs) + _as_text(rhs))
    if op == "=":
        return Boolean(_equal(lhs, rhs))
    if op == "<>":
        return Boolean(not _equal(lhs, rhs))
    if op in ("<", "<=", ">", ">="):
        return Boolean(_relational(op, lhs, rhs))
    a, b = _as_number(lhs), _as_number(rhs)
    if op == "+":
        return _number(a + b)
    if op == "-":
        return _number(a - b)
    if op == "*":
        return _number(a * b)
    if b == 0:
        raise _EvalError(DIV0)
    return _number(a / b)


def evaluate_row(ast: FormulaAst, table: Table, row: int) -> CellValue:
    """Evaluate one row; returns a cell (possibly an error cell)."""
    if not 0 <= row < table.row_count:
        raise IndexError(f"row {row} out of range")

    def ev(node: FormulaAst) -> CellValue:
        if isinstance(node, Const):
            return node.value
        if isinstance(node, ColRef):
            return table.column(node.header).cells[row]
        if isinstance(node, Call):
            lazy = _LAZY_FUNCTIONS.get(node.name)
            if lazy is not None:
                return lazy(ev, node.args)
            strict = _STRICT_FUNCTIONS.get(node.name)
            if strict is None:
                raise _EvalError(NAME_ERR)
            return strict([ev(a) for a in node.args])
        if isinstance(node, Binary):
            return _binary(node.op, ev(node.lhs), ev(node.rhs))
        return _number(-_as_number(ev(node.operand)))

    try:
        return ev(ast)
    except _EvalError as exc:
        return exc.cell
    except RecursionError:
        return VALUE_ERR


@dataclass(frozen=True)
class EvalOutcome:
    column: Column
    per_row_errors: tuple

    @property
    def all_errors_or_blank(self) -> bool:
        return all(
            isinstance(c, (ErrorValue, Blank)) for c in self.column.cells
        )


def evaluate_formula(ast: FormulaAst, table: Table) -> EvalOutcome:
    """Evaluate a formula over every row of the table.

    Raises UnknownColumnError before evaluating anything if the formula
    references a column the table does not have.
    """
    missing = sorted(h for h in column_refs(ast) if not table.has_column(h))
    if missing:
        raise UnknownColumnError(f"unknown column(s): {', '.join(missing)}")
    cells = []
    errors = []
    for row in range(table.row_count):
        cell = evaluate_row(ast, table, row)
        if isinstance(cell, ErrorValue):
            errors.append((row, cell.code))
        cells.append(cell)
    return EvalOutcome(Column("derived", tuple(cells)), tuple(errors))
